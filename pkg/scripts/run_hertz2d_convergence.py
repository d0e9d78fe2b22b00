#!/usr/bin/env python3
"""Pressed-cylinder convergence study (small deformation).

Solves the nested refinement ladder at the reference load 0.003 and at
the high load 0.01 (where the closed-form profile stops being the right
limit), writing CSV tables and fitted rates under out/hertz2d*.
"""
import sys

from igacontact.cli import main

if __name__ == "__main__":
    rc = main(
        [
            "hertz2d",
            "--pressure", "0.003",
            "--levels", "4",
            "--base-spans", "3,6",
            "--grading", "0.8,0.1",
            "--out", "out/hertz2d_p003",
        ]
    )
    rc |= main(
        [
            "hertz2d",
            "--pressure", "0.01",
            "--levels", "6",
            "--base-spans", "3,6",
            "--grading", "0.8,0.2",
            "--out", "out/hertz2d_p01",
        ]
    )
    sys.exit(rc)
