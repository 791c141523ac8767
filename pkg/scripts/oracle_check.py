"""Monte Carlo value of the solver policy at x0 = 0.5 for k = 1, 2, 3."""

import argparse

from multistop.cli import cmd_oracle
from multistop.config import ScenarioConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()
    worst = 0
    for k in (1, 2, 3):
        worst = max(worst, cmd_oracle(ScenarioConfig(), k, 0.5, args.paths, args.seed, args.jobs))
        print()
    raise SystemExit(worst)


if __name__ == "__main__":
    main()
