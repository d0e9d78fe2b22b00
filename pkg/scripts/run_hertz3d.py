#!/usr/bin/env python3
"""Pressed-hemisphere (ball octant) contact run.

Desk-scale refinement of the graded octant; the contact-zone pressure
lands on the closed-form peak while the far mesh stays coarse.
"""
import sys

from igacontact.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "hertz3d",
                "--pressure", "1e-4",
                "--levels", "2",
                "--base-spans", "4,6,4",
                "--grading", "0.75,0.1",
                "--out", "out/hertz3d_p1e-4",
            ]
        )
    )
