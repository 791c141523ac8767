"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary)."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from multistop import MarketModel, ProjectSpec, RewardFunction, positive_part_equivalence_check, solve_multiple, value_at
from multistop.critical_cost import ScenarioPair, asymptotic_slope, critical_cost, fitted_tail_slope, npv_critical_cost
from multistop.oracle import SimulationConfig, ThresholdPolicy, simulate_policy_value
from multistop.solver import piecewise_value

MODEL = MarketModel(alpha=0.05, sigma=0.20, r=0.10)
SPEC = ProjectSpec(invest_cost=1.0, op_cost=0.1, lifetime=5.0, lead_time=1.0)
BENCH = ProjectSpec(invest_cost=1.0, op_cost=0.1, lifetime=25.0, lead_time=5.0)


@pytest.fixture
def report(record_property):
    def _report(tag, ok, detail):
        line = f"[{tag}] {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        record_property("criterion", line)
        assert ok, line

    return _report


@pytest.fixture(scope="module")
def golden():
    t0 = time.perf_counter()
    res = solve_multiple(RewardFunction(MODEL, SPEC), k_max=50, eps_target=1e-300)
    return res, time.perf_counter() - t0


def test_c1_golden_solve(golden, report):
    res, secs = golden
    x0, x1, xf, eps = res.break_even, res.boundaries[0], res.boundaries[-1], res.record(50).epsilon
    ok = abs(x0 - 0.33) <= 0.01 and abs(x1 - 0.85) <= 0.01 and abs(xf - 0.44) <= 0.01 and eps < 1e-5 and secs < 10
    report("01", ok, f"x0={x0:.4f} x1*={x1:.4f} x50*={xf:.4f} eps50={eps:.2e} time={secs:.2f}s")


def test_c2_critical_cost(report):
    t0 = time.perf_counter()
    res = critical_cost(ScenarioPair(MODEL, BENCH, 2.5, 0.3), tol=1e-3)
    secs = time.perf_counter() - t0
    npv = npv_critical_cost(MODEL.r, 2.5, BENCH.lifetime, BENCH.invest_cost)
    ratio = res.i_crit / npv
    ok = abs(res.i_crit - 0.5) <= 0.05 and abs(npv - 0.24) <= 0.005 and abs(ratio - 2.0) <= 0.25 and secs < 120
    report("02", ok, f"I_crit={res.i_crit:.4f} I'_crit={npv:.4f} ratio={ratio:.3f} solves={len(res.evaluations)} time={secs:.1f}s")


def _random_valid_sets(n, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        m = MarketModel(alpha=rng.uniform(0.0, 0.07), sigma=rng.uniform(0.15, 0.35), r=0.10)
        s = ProjectSpec(rng.uniform(0.5, 2.0), 0.1, rng.uniform(2.0, 15.0), rng.uniform(0.0, 3.0))
        rf = RewardFunction(m, s)
        try:
            rf.check_applicable()
        except ValueError:
            continue
        out.append(rf)
    return out


def _monotone(res):
    b = np.array(res.boundaries)
    vs = [rec.v.values[1:] for rec in res.records]
    return (
        bool(np.all(np.diff(b) < 0))
        and all(bool(np.all(w > v)) for v, w in zip(vs, vs[1:]))
        and bool(np.all(b > res.break_even))
    )


def test_c3_monotonicity(golden, report):
    results = [golden[0]] + [solve_multiple(rf, k_max=200) for rf in _random_valid_sets(5)]
    flags = [_monotone(r) for r in results]
    report("03", all(flags), f"{sum(flags)}/{len(flags)} solves monotone (golden + 5 random)")


def test_c4_dual_formula(golden, report):
    res = golden[0]
    worst = 0.0
    for rec in res.records:
        pw = piecewise_value(rec.psi_star, rec.boundary, rec.reward_k.values, res.grid.points, res.gamma)
        worst = max(worst, float(np.max(np.abs(rec.v.values[1:] - pw[1:]) / np.abs(pw[1:]))))
    report("04", worst < 1e-4, f"max relative mismatch {worst:.2e} over {len(res.records)} iterations")


def test_c5_oracle(golden, report):
    res = golden[0]
    rf = RewardFunction(MODEL, SPEC)
    cfg = SimulationConfig(path_count=1_000_000, seed=20240, jobs=4)
    parts, ok = [], True
    for k in (1, 2, 3):
        t0 = time.perf_counter()
        policy = ThresholdPolicy.from_boundaries(res.boundaries, k, SPEC.lifetime)
        est, se = simulate_policy_value(MODEL, rf, policy, cfg, 0.5)
        secs = time.perf_counter() - t0
        z = (est - value_at(res, rf, 0.5, k)) / se
        ok &= abs(z) <= 3 and secs < 60
        parts.append(f"k={k} z={z:+.2f} ({secs:.1f}s)")
    report("05", ok, " ".join(parts))


def test_c6_single_closed_form(report):
    rf = RewardFunction(MODEL, replace(SPEC, flexible=False))
    a, b = rf.affine_coefficients()
    g = rf.gamma
    exact = g * b / ((g - 1) * a)
    got = solve_multiple(rf, k_max=1).boundaries[0]
    rel = abs(got - exact) / exact
    report("06", rel <= 1e-8, f"x1*={got:.12f} closed form={exact:.12f} rel={rel:.1e}")


def _sweep(field, values, target="market"):
    out = []
    for val in values:
        m = replace(MODEL, **{field: val}) if target == "market" else MODEL
        s = replace(SPEC, **{field: val}) if target == "project" else SPEC
        rf = RewardFunction(m, s)
        out.append((rf, solve_multiple(rf, k_max=500)))
    return out


def test_c7a_sigma_sweep(report):
    xs = [r.boundaries[-1] for _, r in _sweep("sigma", [0.10, 0.15, 0.20, 0.30, 0.40])]
    report("07a", bool(np.all(np.diff(xs) > 0)), "sigma 0.1..0.4 x_inf*=" + ", ".join(f"{x:.4f}" for x in xs))


def test_c7b_alpha_sweep(report):
    alphas = [0.01, 0.03, 0.05, 0.07, 0.09]
    runs = [r for _, r in _sweep("alpha", alphas)]
    ok = True
    for k in (1, 2, 3):
        xk = np.array([r.boundaries[k - 1] for r in runs])
        ok &= bool(np.all(np.diff(xk) > 0) and np.all(np.diff(xk, 2) > 0))
    wedge = [r.boundaries[0] - r.boundaries[-1] for r in runs]
    ok &= bool(np.all(np.diff(wedge) > 0))
    report("07b", ok, "alpha 0.01..0.09 x1*=" + ", ".join(f"{r.boundaries[0]:.3f}" for r in runs))


def test_c7c_lifetime_sweep(report):
    lifetimes = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
    gaps = [r.boundaries[0] - r.boundaries[-1] for _, r in _sweep("lifetime", lifetimes, "project")]
    shrinking = bool(np.all(np.diff(gaps) < 0))
    small = all(g < 0.02 for T, g in zip(lifetimes, gaps) if T >= 20)
    detail = "T=" + ", ".join(f"{T:g}:{g:.4f}" for T, g in zip(lifetimes, gaps))
    report("07c", shrinking and small, f"gap x1*-x_inf* {detail} (shrinking={shrinking}, <0.02 for T>=20: {small})")


def test_c7d_lead_time_sweep(report):
    runs = _sweep("lead_time", [0.25, 0.5, 1.0, 1.5, 2.0, 3.0], "project")
    xs = np.array([r.boundaries[-1] for _, r in runs])
    vals = np.array([value_at(r, rf, 0.5) for rf, r in runs])
    spread = (xs.max() - xs.min()) / xs.min()
    ok = spread <= 0.05 and bool(np.all(np.diff(vals) < 0))
    report("07d", ok, f"x_inf* spread {spread:.2%}; v_inf(0.5)=" + ", ".join(f"{v:.3f}" for v in vals))


def test_c8_asymptotic_slope(report):
    slopes, targets = [], []
    for T in (5.0, 15.0, 25.0):
        rf = RewardFunction(MODEL, replace(SPEC, lifetime=T))
        slopes.append(fitted_tail_slope(solve_multiple(rf, k_max=500), "u"))
    target = math.exp(-(MODEL.r - MODEL.alpha) * SPEC.lead_time) / (MODEL.r - MODEL.alpha)
    rel = [abs(s - target) / target for s in slopes]
    invariant = (max(slopes) - min(slopes)) / min(slopes) <= 0.02
    corrected = [abs(s - asymptotic_slope(rf, "u")) / asymptotic_slope(rf, "u") for s in slopes]
    detail = (
        f"u slope T=5,15,25: {', '.join(f'{s:.4f}' for s in slopes)}; target {target:.4f}; "
        f"max rel err {max(rel):.1%}; T-invariant={invariant}; vs (gamma-1)*target max rel {max(corrected):.2%}"
    )
    report("08", max(rel) <= 0.02 and invariant, detail)


def test_c9_positive_part(report):
    rf = RewardFunction(MODEL, SPEC)
    ok = positive_part_equivalence_check(rf, k_max=50, eps_target=1e-300)
    report("09", ok, "clamped and plain rewards give identical boundaries and values for 50 iterations")
