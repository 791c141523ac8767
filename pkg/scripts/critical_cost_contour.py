"""Critical investment cost of small scenarios against the large benchmark."""

import argparse
from pathlib import Path

from multistop.cli import cmd_contour
from multistop.config import ContourOptions, ScenarioConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/contour"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--tol", type=float, default=1e-2)
    args = ap.parse_args()
    cfg = ScenarioConfig(contour=ContourOptions(tol=args.tol))
    cmd_contour(cfg, args.out, args.jobs)


if __name__ == "__main__":
    main()
