#!/usr/bin/env python3
"""Reproduce every shipped experiment into ./runs/.

Runs the drop-generator demo, both closed-loop presets, the structure
certification, the three-controller comparison, and the stability check,
then re-plots the generated drops. Pass --out to change the target root.
"""

import argparse
import sys
from pathlib import Path

from cloudreg.cli import main as cloudreg


def run(root: Path) -> int:
    jobs = [
        ["gen-cloud", "--config", "gen-cloud-demo", "--out", str(root / "gen-cloud-demo")],
        ["simulate", "--config", "paper-pendulum", "--out", str(root / "paper-pendulum")],
        ["simulate", "--config", "paper-lti", "--out", str(root / "paper-lti")],
        ["decompose", "--config", "paper-decompose", "--out", str(root / "paper-decompose")],
        ["compare", "--config", "paper-compare", "--out", str(root / "paper-compare")],
        ["stability", "--out", str(root / "stability")],
    ]
    for argv in jobs:
        print(f"$ cloudreg {' '.join(argv)}")
        code = cloudreg(argv)
        if code != 0:
            return code
    drops = root / "gen-cloud-demo" / "drops.csv"
    print(f"$ cloudreg plot {drops}")
    return cloudreg(["plot", str(drops), "--out", str(root / "gen-cloud-demo")])


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs", help="output root directory")
    sys.exit(run(Path(parser.parse_args().out)))
