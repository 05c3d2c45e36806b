#!/usr/bin/env python3
"""
Standalone runner for the dominance-constrained portfolio solver.

This script can be run from any directory and will find the project root automatically.

Usage:
    python3 run_solver.py solve exp-3comp-mean
    python3 run_solver.py --help
"""
import sys
from pathlib import Path

project_root = Path(__file__).resolve().parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from fsd_reshaping.cli import main

if __name__ == "__main__":
    sys.exit(main())
