#!/usr/bin/env python3
"""
BankSpill - spatial spillover and synthetic difference-in-differences
estimation for bank panels
"""

import sys

from src.main import run


def main():
    """Command-line entry point"""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
