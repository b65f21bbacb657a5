#!/usr/bin/env python3

"""Entry point for the exploration benchmark lab."""

import sys

from ui.cli import main

if __name__ == "__main__":
    sys.exit(main())
