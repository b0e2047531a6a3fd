#!/usr/bin/env python3
"""Thin wrapper around the package CLI.

Usage: python scripts/run_experiment.py --config configs/lambda0.json [--fast]
"""

import sys

from sinhgordon.runner import main

if __name__ == "__main__":
    sys.exit(main())
