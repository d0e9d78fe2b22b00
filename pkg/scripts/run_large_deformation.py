#!/usr/bin/env python3
"""Finite-deformation runs: dead pressure 0.1 and prescribed push 0.4.

Both use the Neo-Hookean law with incremental loading; the mesh band is
widened because the contact zone spans a large part of the arc.
"""
import sys

from igacontact.cli import main

if __name__ == "__main__":
    rc = main(
        [
            "hertz2d-large",
            "--pressure", "0.1",
            "--levels", "4",
            "--base-spans", "3,6",
            "--grading", "0.7,0.45",
            "--out", "out/large_pressure",
        ]
    )
    rc |= main(
        [
            "hertz2d-large-dirichlet",
            "--displacement", "0.4",
            "--levels", "4",
            "--base-spans", "3,6",
            "--grading", "0.65,0.6",
            "--out", "out/large_dirichlet",
        ]
    )
    sys.exit(rc)
