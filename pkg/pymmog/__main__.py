"""Run the pymmog command line: python -m pymmog."""

import sys

from .cli import main

sys.exit(main())
