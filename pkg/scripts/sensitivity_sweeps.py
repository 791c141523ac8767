"""Boundary and value sweeps over alpha, sigma, lifetime and lead time."""

import argparse
from pathlib import Path

from multistop.cli import cmd_sweep
from multistop.config import ScenarioConfig

SWEEPS = {
    "alpha": [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09],
    "sigma": [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40],
    "T": [1, 2, 3, 5, 7.5, 10, 15, 20, 25, 30],
    "nu": [0.25, 0.5, 1, 1.5, 2, 2.5, 3],
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/sweeps"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = ScenarioConfig()
    for axis, values in SWEEPS.items():
        cmd_sweep(cfg, axis, values, args.out, args.jobs, probes=[0.25, 0.5, 1.0])


if __name__ == "__main__":
    main()
