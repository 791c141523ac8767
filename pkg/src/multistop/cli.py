"""Command-line driver: ``solve``, ``sweep``, ``contour`` and ``oracle``.

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 oracle
z-score above 4.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import ConfigError, ScenarioConfig, load_config
from .critical_cost import contour, npv_critical_cost
from .numerics import BracketError
from .oracle import SimulationConfig, ThresholdPolicy, simulate_policy_value
from .reward import ApplicabilityError, RewardFunction
from .solver import SolveResult, SolverInvariantError, solve_multiple, value_at

log = logging.getLogger("multistop")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ORACLE = 0, 1, 2, 3
ORACLE_Z_LIMIT = 4.0
SOLVER_ERRORS = (SolverInvariantError, ApplicabilityError, BracketError)
SWEEP_AXES = {
    "alpha": ("market", "alpha"),
    "sigma": ("market", "sigma"),
    "r": ("market", "r"),
    "T": ("project", "lifetime"),
    "nu": ("project", "lead_time"),
    "I": ("project", "invest_cost"),
    "c": ("project", "op_cost"),
}
VALUE_KS = (1, 2, 3, 5, 10, 20, 50)


def fmt(x) -> str:
    """Round-trip exact float text."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _reward(cfg: ScenarioConfig) -> RewardFunction:
    return RewardFunction(cfg.market, cfg.project, cfg.solver.quad_nodes)


def _solve(cfg: ScenarioConfig) -> tuple[RewardFunction, SolveResult]:
    rf = _reward(cfg)
    res = solve_multiple(
        rf, cfg.solver.k_max, cfg.solver.eps_target, grid_count=cfg.solver.grid_count
    )
    return rf, res


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if getattr(args, "eps", None) is not None:
        changes["eps_target"] = args.eps
    if getattr(args, "k_max", None) is not None:
        changes["k_max"] = args.k_max
    if changes:
        try:
            cfg = replace(cfg, solver=replace(cfg.solver, **changes))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


def cmd_solve(cfg: ScenarioConfig, out: Path) -> int:
    rf, res = _solve(cfg)
    write_csv(
        out / "boundaries.csv",
        ["k", "boundary", "epsilon", "psi_star"],
        [(rec.k, rec.boundary, rec.epsilon, rec.psi_star) for rec in res.records],
    )
    ks = [k for k in VALUE_KS if k < res.k_final] + [res.k_final]
    header = ["x"] + [f"v_{k}" for k in ks[:-1]] + ["v_final"]
    cols = [res.record(k).v.values for k in ks]
    rows = ((float(x), *(float(c[i]) for c in cols)) for i, x in enumerate(res.grid.points))
    write_csv(out / "value.csv", header, rows)
    summary = {
        "gamma": res.gamma,
        "break_even": res.break_even,
        "convexity_threshold": res.convexity_threshold,
        "x_max": res.grid.x_max,
        "x1_star": res.boundaries[0],
        "x_final_star": res.boundaries[-1],
        "k_final": res.k_final,
        "epsilon_final": res.final.epsilon,
        "converged": res.converged,
    }
    for key, val in summary.items():
        print(f"{key} = {fmt(val)}")
    return EXIT_OK


def _sweep_row(args) -> list:
    cfg, axis, value, probes = args
    section, key = SWEEP_AXES[axis]
    try:
        cfg = replace(cfg, **{section: replace(getattr(cfg, section), **{key: value})})
        _, res = _solve(cfg)
        bs = res.boundaries
        pick = lambda k: bs[k - 1] if k <= len(bs) else math.nan
        vals = [float(v) for v in res.value(probes)]
        return [value, pick(1), pick(2), pick(3), bs[-1], res.k_final, res.converged, *vals, ""]
    except (ValueError, RuntimeError) as exc:
        return [value] + [math.nan] * (6 + len(probes)) + [f"{type(exc).__name__}: {exc}"]


def cmd_sweep(cfg: ScenarioConfig, axis: str, values: Sequence[float], out: Path, jobs: int = 1, probes=None) -> int:
    if probes is None:
        from .solver import single_boundary

        x1 = single_boundary(_reward(cfg))
        probes = sorted({0.25 * x1, 0.5 * x1, x1, 0.5})
    tasks = [(cfg, axis, float(v), list(probes)) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    header = [axis, "x1_star", "x2_star", "x3_star", "x_final_star", "k_final", "converged"]
    header += [f"v_final@{fmt(float(p))}" for p in probes] + ["error"]
    write_csv(out / f"sweep_{axis}.csv", header, rows)
    failed = sum(1 for r in rows if r[-1])
    print(f"sweep {axis}: {len(rows)} rows, {failed} failed -> {out / f'sweep_{axis}.csv'}")
    return EXIT_OK


def cmd_contour(cfg: ScenarioConfig, out: Path, jobs: int = 1) -> int:
    opts = cfg.contour
    rows = contour(
        cfg.market,
        cfg.benchmark,
        opts.lifetimes,
        opts.lead_times,
        tol=opts.tol,
        jobs=jobs,
        grid_count=cfg.solver.grid_count,
        quad_nodes=cfg.solver.quad_nodes,
        eps_target=cfg.solver.eps_target,
        k_max=max(cfg.solver.k_max, 500),
    )
    bench = cfg.benchmark
    out_rows = []
    for T, nu, i_crit, hi, err in rows:
        npv = npv_critical_cost(cfg.market.r, T, bench.lifetime, bench.invest_cost)
        out_rows.append([T, nu, i_crit, hi, npv, err])
    write_csv(
        out / "contour.csv",
        ["T_small", "nu_small", "I_crit", "I_crit_upper", "npv_I_crit", "error"],
        out_rows,
    )
    print(f"contour: {len(out_rows)} cells -> {out / 'contour.csv'}")
    return EXIT_OK


def cmd_oracle(cfg: ScenarioConfig, k: int, x0: float, paths: int, seed: int, jobs: int = 1) -> int:
    rf, res = _solve(cfg)
    if k > res.k_final:
        # stopped by the tolerance before reaching k rights: run exactly k iterations
        res = solve_multiple(rf, k, eps_target=1e-300, grid=res.grid)
    policy = ThresholdPolicy.from_boundaries(res.boundaries, k, cfg.project.lifetime)
    est, se = simulate_policy_value(cfg.market, rf, policy, SimulationConfig(paths, seed, jobs=jobs), x0)
    solver_value = value_at(res, rf, x0, k)
    diff = est - solver_value
    if se > 0.0:
        z = diff / se
    else:
        z = 0.0 if abs(diff) <= 1e-9 * max(1.0, abs(solver_value)) else math.copysign(math.inf, diff)
    print(f"k = {k}")
    print(f"x0 = {fmt(x0)}")
    print(f"thresholds = {', '.join(fmt(b) for b in policy.thresholds)}")
    print(f"solver_value = {fmt(solver_value)}")
    print(f"oracle_estimate = {fmt(est)}")
    print(f"oracle_std_error = {fmt(se)}")
    print(f"z_score = {fmt(z)}")
    return EXIT_OK if abs(z) <= ORACLE_Z_LIMIT else EXIT_ORACLE


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file (INI sections market/project/solver)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory for CSV files")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--eps", type=float, help="override solver eps_target")
    common.add_argument("--k-max", dest="k_max", type=int, help="override solver k_max")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="multistop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="boundaries and value functions for one scenario")
    sw = sub.add_parser("sweep", parents=[common], help="one solve per value of a parameter")
    sw.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sw.add_argument("--values", required=True, type=_float_list)
    sw.add_argument("--probes", type=_float_list, help="prices at which v_final is reported")
    ct = sub.add_parser("contour", parents=[common], help="critical investment cost over (T, nu)")
    ct.add_argument("--lifetimes", type=_float_list)
    ct.add_argument("--lead-times", dest="lead_times", type=_float_list)
    ct.add_argument("--tol", type=float)
    orc = sub.add_parser("oracle", parents=[common], help="Monte Carlo check of v_k(x0)")
    orc.add_argument("--k", type=int, default=1)
    orc.add_argument("--x0", type=float, default=0.5)
    orc.add_argument("--paths", type=int, default=1_000_000)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.axis, args.values, args.out, args.jobs, args.probes)
        if args.command == "contour":
            changes = {k: tuple(getattr(args, k)) for k in ("lifetimes", "lead_times") if getattr(args, k)}
            if args.tol is not None:
                changes["tol"] = args.tol
            if changes:
                try:
                    cfg = replace(cfg, contour=replace(cfg.contour, **changes))
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
            return cmd_contour(cfg, args.out, args.jobs)
        if args.command == "oracle":
            if args.k < 1 or args.x0 <= 0.0 or args.paths < 2:
                raise ConfigError("oracle needs k >= 1, x0 > 0 and paths >= 2")
            return cmd_oracle(cfg, args.k, args.x0, args.paths, args.seed, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
