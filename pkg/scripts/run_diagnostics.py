#!/usr/bin/env python3
"""Run the diagnostic experiment suite on the bundled configs.

Produces, under --out (default out/):
  gradcheck/       -- finite-difference and identity self-checks
  consistency/     -- clean-target spread, stochastic vs deterministic
  quality/         -- single-step vs multi-step estimate quality per timestep
  eta_sweep/       -- multi-step bias magnitude and cost across intervals
"""

import argparse
import sys
from pathlib import Path

from ismlab.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent

JOBS = [
    ("gradcheck", "gradcheck.json"),
    ("consistency", "consistency.json"),
    ("quality", "quality.json"),
    ("eta-sweep", "eta_sweep.json"),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output root directory")
    args = parser.parse_args()
    worst = 0
    for kind, cfg in JOBS:
        out = Path(args.out) / kind.replace("-", "_")
        print(f"== {kind} -> {out}")
        code = cli_main([kind, "--config", str(ROOT / "configs" / cfg),
                         "--out", str(out)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
