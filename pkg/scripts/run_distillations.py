#!/usr/bin/env python3
"""Run the distillation experiments: a matched-seed race on the bimodal
prior, the (interval, stride) sweep, and the splat-scene demo whose frames
land under the output directory as binary pixmaps."""

import argparse
import sys
from pathlib import Path

from ismlab.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent

JOBS = [
    ("race", "race.json"),
    ("interval-sweep", "interval_sweep.json"),
    ("distill", "distill_splats.json"),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output root directory")
    args = parser.parse_args()
    worst = 0
    for kind, cfg in JOBS:
        out = Path(args.out) / cfg.removesuffix(".json")
        print(f"== {kind} ({cfg}) -> {out}")
        code = cli_main([kind, "--config", str(ROOT / "configs" / cfg),
                         "--out", str(out)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
