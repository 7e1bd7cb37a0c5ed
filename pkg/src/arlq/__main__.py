import sys

from arlq.cli import main

sys.exit(main())
