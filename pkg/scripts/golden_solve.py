"""Baseline scenario: boundaries x_k* for 50 rights and the convergence of epsilon."""

import argparse
from pathlib import Path

from multistop import MarketModel, ProjectSpec, RewardFunction, solve_multiple
from multistop.cli import write_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/golden"))
    ap.add_argument("--k", type=int, default=50)
    args = ap.parse_args()

    rf = RewardFunction(MarketModel(0.05, 0.20, 0.10), ProjectSpec(1.0, 0.1, 5.0, 1.0))
    res = solve_multiple(rf, k_max=args.k, eps_target=1e-300)
    write_csv(args.out / "convergence.csv", ["k", "boundary", "epsilon"],
              [(r.k, r.boundary, r.epsilon) for r in res.records])
    print(f"x0={res.break_even:.4f} x1*={res.boundaries[0]:.4f} "
          f"x{args.k}*={res.boundaries[-1]:.4f} eps={res.final.epsilon:.2e}")


if __name__ == "__main__":
    main()
