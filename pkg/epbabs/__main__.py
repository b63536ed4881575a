#!/usr/bin/env python3
"""
Run the epbabs command line as ``python -m epbabs``.

Same subcommands and exit codes as the ``epbabs`` console script:
simulate, compare, paper-suite and sweep.
"""

import sys
from epbabs.cli import main

if __name__ == "__main__":
    sys.exit(main())
