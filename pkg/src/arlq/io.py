"""Reading datasets and configs, writing machine-readable reports."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .exceptions import ConfigError, ParseError
from .model import Dataset

BELGIUM_CSV = "belgium_phones.csv"
#: sha256 of the bundled file, checked by the test suite
BELGIUM_SHA256 = "19540bf35ea493d5b5ae30b39d2486c6b61d516deff55372de3425874ae4313d"


@dataclass(frozen=True)
class CsvSchema:
    response: str
    covariates: tuple[str, ...]
    intercept: bool = True
    delimiter: str = ","


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_csv(path: str | Path, schema: CsvSchema) -> Dataset:
    """Read a delimited file with a header row; rows in file order are t = 1..N.

    With ``schema.intercept`` a constant column named ``const`` is prepended.
    Rows are numbered from 1 for the first data row in error messages.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"input file {str(path)!r} does not exist")
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("input file is empty") from None
        wanted = [schema.response, *schema.covariates]
        for col in wanted:
            if col not in header:
                raise ParseError("missing column", column=col)
        index = {col: header.index(col) for col in wanted}
        rows: list[list[float]] = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"ragged row: expected {len(header)} fields, got {len(row)}",
                    row=row_no)
            values = []
            for col in wanted:
                cell = row[index[col]].strip()
                if not cell:
                    raise ParseError("missing value", row=row_no, column=col)
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric value {cell!r}", row=row_no,
                                     column=col) from None
                if not math.isfinite(value):
                    raise ParseError(f"non-finite value {cell!r}", row=row_no,
                                     column=col)
                values.append(value)
            rows.append(values)
    if not rows:
        raise ParseError("input file has no data rows")
    arr = np.array(rows)
    X = arr[:, 1:]
    names = list(schema.covariates)
    if schema.intercept:
        X = np.column_stack([np.ones(len(rows)), X])
        names = ["const", *names]
    return Dataset(arr[:, 0], X, tuple(names))


def belgium_path() -> Path:
    """Path of the bundled Belgian international phone-call data (1950-1973)."""
    return Path(str(resources.files("arlq") / "data" / BELGIUM_CSV))


def load_belgium() -> Dataset:
    """Calls (tens of millions) on year (50..73) with an intercept column."""
    return load_csv(belgium_path(), CsvSchema("calls", ("year",), intercept=True))


def bundled_config(name: str) -> Path:
    """Path of a bundled scenario file such as ``case2_p5``."""
    path = Path(str(resources.files("arlq") / "data" / f"{name}.yaml"))
    if not path.is_file():
        raise ConfigError("config", f"no bundled scenario named {name!r}")
    return path


def load_config(path: str | Path) -> dict[str, Any]:
    """Parse a YAML or JSON scenario file into a plain mapping."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file {str(path)!r} does not exist")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError("config", f"cannot parse {path.name}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")
    return raw


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON; floats use repr, so they re-read bit-exactly; NaN becomes null."""
    return json.dumps(_clean(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())


def _cell(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ""
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_table(path: str | Path, header: Sequence[str],
                rows: Sequence[Sequence[Any]], delimiter: str = ",") -> None:
    """Delimited text table; floats written with repr precision."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def monte_carlo_to_dict(report: Any) -> dict[str, Any]:
    return {
        "config": report.config.to_dict(),
        "methods": [asdict(m) for m in report.methods],
    }
