#!/usr/bin/env python3
"""
TwoWell CLI - energy scaling of two-well elastic inclusions
Usage: python twowell.py <construct|relax|sweep|rigidity|cover> [options]
"""

import sys

from twowell.cli import main

if __name__ == "__main__":
    sys.exit(main())
