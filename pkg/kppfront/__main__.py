#!/usr/bin/env python3
"""Main entry point for the kppfront command-line tool."""

import sys

from kppfront.cli import main

if __name__ == "__main__":
    sys.exit(main())
