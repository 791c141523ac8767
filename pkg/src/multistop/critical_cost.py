"""Critical investment cost of a short-lived, short-lead-time capital scenario.

The small scenario is competitive when its value with unlimited investment
rights dominates the large-scale benchmark at every price. Since the value
falls as the unit cost rises, the largest such cost is found by bisection.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .gbm_model import MarketModel
from .numerics import PriceGrid, build_grid
from .reward import ProjectSpec, RewardFunction
from .solver import SolveResult, single_boundary, solve_multiple

__all__ = [
    "NoParityError",
    "ScenarioPair",
    "CriticalCostResult",
    "dominates",
    "critical_cost",
    "npv_critical_cost",
    "contour",
    "fitted_tail_slope",
    "asymptotic_slope",
    "asymptotic_slope_check",
]

DOMINANCE_RTOL = 1e-6
# node cap for resolution-driven grids (the expectation matrix is count^2)
MAX_GRID_COUNT = 4000


class NoParityError(RuntimeError):
    """The small scenario fails to dominate even at vanishing investment cost."""


@dataclass(frozen=True)
class ScenarioPair:
    """Benchmark ``large`` against small capital with lifetime/lead time fixed and cost free.

    Both scenarios share the market model and the operating cost. ``grid`` is
    the common price grid; when omitted it spans the larger of the two
    scenarios' grids, the small one taken at the benchmark's unit cost.
    """

    model: MarketModel
    large: ProjectSpec
    small_lifetime: float
    small_lead_time: float
    grid: PriceGrid | None = None
    grid_count: int = 500
    quad_nodes: int = 64
    eps_target: float = 1e-3
    k_max: int = 500

    def __post_init__(self) -> None:
        # validates lifetime / lead time through ProjectSpec
        self.small_spec(self.large.invest_cost)
        if self.grid is None:
            object.__setattr__(self, "grid", shared_grid(self, [self]))

    def small_spec(self, invest_cost: float) -> ProjectSpec:
        return replace(
            self.large,
            invest_cost=invest_cost,
            lifetime=self.small_lifetime,
            lead_time=self.small_lead_time,
        )

    def reward(self, spec: ProjectSpec) -> RewardFunction:
        return RewardFunction(self.model, spec, self.quad_nodes)

    def solve(self, spec: ProjectSpec) -> SolveResult:
        return solve_multiple(
            self.reward(spec), self.k_max, self.eps_target, grid=self.grid
        )


def _x_max(pair: ScenarioPair, spec: ProjectSpec) -> float:
    x1 = single_boundary(pair.reward(spec))
    return build_grid(pair.model, spec, x1, pair.grid_count).x_max


def _resolution(pair: ScenarioPair, spec: ProjectSpec) -> float:
    """Largest spacing that resolves X_T started at the lowest admissible boundary.

    Boundaries lie above the convexity threshold x', which does not depend on
    the unit cost, so one standard deviation of X_T from x' is a safe step.
    """
    x_conv = pair.reward(spec).convexity_threshold()
    if x_conv <= 0.0:
        return math.inf
    return x_conv * pair.model.sigma * math.sqrt(spec.lifetime)


def shared_grid(base: ScenarioPair, pairs) -> PriceGrid:
    """One grid wide enough for the benchmark and every small scenario listed.

    The node count is raised above ``base.grid_count`` when a short lifetime
    needs a finer step, up to ``MAX_GRID_COUNT``.
    """
    x_max = _x_max(base, base.large)
    step = _resolution(base, base.large)
    for p in pairs:
        spec = p.small_spec(p.large.invest_cost)
        x_max = max(x_max, _x_max(p, spec))
        step = min(step, _resolution(p, spec))
    count = base.grid_count
    if math.isfinite(step):
        count = max(count, min(MAX_GRID_COUNT, math.ceil(x_max / step) + 1))
    return PriceGrid(x_max, count)


@dataclass(frozen=True)
class CriticalCostResult:
    i_crit: float
    bracket: tuple[float, float]
    evaluations: list[tuple[float, bool]]
    large_result: SolveResult = field(repr=False)
    small_result: SolveResult | None = field(repr=False)
    hit_ceiling: bool = False

    @property
    def margin(self) -> np.ndarray:
        """v_small - v_large on the grid at the certified cost."""
        if self.small_result is None:
            raise ValueError("no certified small-scenario solve")
        return self.small_result.final.v.values - self.large_result.final.v.values


def _same_grid(a: PriceGrid, b: PriceGrid) -> bool:
    return a is b or (a.count == b.count and a.x_max == b.x_max)


def dominates(
    small_result: SolveResult, large_result: SolveResult, rtol: float = DOMINANCE_RTOL
) -> bool:
    """v_small >= v_large at every positive node, up to ``rtol`` times the largest value.

    Below both boundaries each value is a multiple of x^gamma, so the
    multipliers are compared as well; that settles prices under the first node.
    """
    if not _same_grid(small_result.grid, large_result.grid):
        raise ValueError("results were solved on different grids")
    vs = small_result.final.v.values
    vl = large_result.final.v.values
    slack = rtol * max(float(np.max(np.abs(vs))), float(np.max(np.abs(vl))))
    if np.any(vs[1:] < vl[1:] - slack):
        return False
    s, l = small_result.final, large_result.final
    coef_small = s.psi_star / s.boundary**small_result.gamma
    coef_large = l.psi_star / l.boundary**large_result.gamma
    return bool(coef_small >= coef_large * (1.0 - rtol))


def critical_cost(
    pair: ScenarioPair,
    tol: float = 1e-3,
    large_result: SolveResult | None = None,
) -> CriticalCostResult:
    """Largest small-scenario unit cost whose value still dominates the benchmark."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if large_result is None:
        large_result = pair.solve(pair.large)
    evaluations: list[tuple[float, bool]] = []
    certified: dict[float, SolveResult] = {}

    def holds(cost: float) -> bool:
        res = pair.solve(pair.small_spec(cost))
        ok = dominates(res, large_result)
        evaluations.append((cost, ok))
        if ok:
            certified[cost] = res
        return ok

    i_large = pair.large.invest_cost
    ceiling = 10.0 * i_large
    hit_ceiling = False
    if holds(i_large):
        lo, hi = i_large, 2.0 * i_large
        while holds(hi):
            lo = hi
            if hi >= ceiling:
                hit_ceiling = True
                break
            hi = min(2.0 * hi, ceiling)
    else:
        lo, hi = 0.0, i_large
    while not hit_ceiling and hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise NoParityError(
            f"small scenario (T={pair.small_lifetime}, nu={pair.small_lead_time}) "
            f"never dominates the benchmark for costs above {hi:.3g}"
        )
    return CriticalCostResult(
        i_crit=lo,
        bracket=(lo, hi),
        evaluations=evaluations,
        large_result=large_result,
        small_result=certified.get(lo),
        hit_ceiling=hit_ceiling,
    )


def npv_critical_cost(r: float, T_small: float, T_large: float, I_large: float) -> float:
    """Cost parity of perpetual back-to-back replacement, ignoring all optionality."""
    for name, val in (("r", r), ("T_small", T_small), ("T_large", T_large), ("I_large", I_large)):
        if not val > 0.0:
            raise ValueError(f"{name} must be positive")
    return I_large * math.expm1(-r * T_small) / math.expm1(-r * T_large)


def _cell(args):
    pair, tol, large_result = args
    try:
        res = critical_cost(pair, tol, large_result)
        return (pair.small_lifetime, pair.small_lead_time, res.i_crit, res.bracket[1], "")
    except Exception as exc:  # recorded as an error row, the contour continues
        return (pair.small_lifetime, pair.small_lead_time, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def contour(
    model: MarketModel,
    large: ProjectSpec,
    lifetimes,
    lead_times,
    tol: float = 1e-2,
    jobs: int = 1,
    **pair_options,
) -> list[tuple[float, float, float, float, str]]:
    """Rows (T_small, nu_small, I_crit, bracket_hi, error) over the product of the inputs.

    Every cell uses one grid covering the benchmark and all small scenarios.
    """
    cells = [(T, nu) for T in lifetimes for nu in lead_times]
    base = ScenarioPair(model, large, cells[0][0], cells[0][1], **pair_options)
    drafts = [replace(base, small_lifetime=T, small_lead_time=nu) for T, nu in cells]
    grid = shared_grid(base, drafts)
    pairs = [replace(p, grid=grid) for p in drafts]
    large_result = pairs[0].solve(large)
    args = [(p, tol, large_result) for p in pairs]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_cell, args))
    return [_cell(a) for a in args]


def fitted_tail_slope(result: SolveResult, which: str = "u", fraction: float = 0.1) -> float:
    """Least-squares slope of the final u (or v) over the last ``fraction`` of the grid."""
    rec = result.final
    values = {"u": rec.u.values, "v": rec.v.values}[which]
    pts = result.grid.points
    start = int(math.floor((1.0 - fraction) * pts.size))
    return float(np.polyfit(pts[start:], values[start:], 1)[0])


def asymptotic_slope(rf: RewardFunction, which: str = "u") -> float:
    """Large-price slope with unlimited rights.

    v grows like e^{-(r-alpha) nu} x / (r - alpha), independent of the
    lifetime; u = Lambda v grows (gamma - 1) times as fast.
    """
    m = rf.model
    eff = m.r - m.alpha
    slope_v = math.exp(-eff * rf.spec.lead_time) / eff
    if which == "v":
        return slope_v
    if which == "u":
        return (rf.gamma - 1.0) * slope_v
    raise ValueError(f"which must be 'u' or 'v', got {which!r}")


def asymptotic_slope_check(result: SolveResult, rf: RewardFunction, rtol: float = 0.02) -> bool:
    """Fitted tail slopes of u and v match their closed forms within ``rtol``."""
    for which in ("u", "v"):
        target = asymptotic_slope(rf, which)
        if abs(fitted_tail_slope(result, which) - target) > rtol * target:
            return False
    return True
