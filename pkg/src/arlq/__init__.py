"""Classical and robust (maximum Lq-likelihood) estimation of linear
regression with autoregressive errors."""

__version__ = "0.1.0"

from .cml import CmlFit, SolverControl, cml_fit
from .cmlq import CmlqFit, ira_fit
from .estimators import CMLqRegression, CMLRegression
from .inference import asymptotic_report, estimate_JK, surrogate_parameter
from .model import Dataset, ParameterVector
from .qselect import QSearchResult, raic, select_q

__all__ = [
    "CMLRegression",
    "CMLqRegression",
    "CmlFit",
    "CmlqFit",
    "Dataset",
    "ParameterVector",
    "QSearchResult",
    "SolverControl",
    "asymptotic_report",
    "cml_fit",
    "estimate_JK",
    "ira_fit",
    "raic",
    "select_q",
    "surrogate_parameter",
]
