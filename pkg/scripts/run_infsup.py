#!/usr/bin/env python3
"""Stability sweep of the quadratic-trace / piecewise-constant pairing."""
import sys

from igacontact.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "infsup",
                "--levels", "3",
                "--base-spans", "4",
                "--out", "out/infsup",
            ]
        )
    )
