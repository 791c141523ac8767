"""Iterative boundary/value scheme for refracted multiple stopping.

With k rights left, the firm invests at the first time the price reaches x_k*.
The iteration works on u_k = Lambda v_k, which vanishes below x_k* and obeys

    u_k(x) = (Lambda psi(x) + e^{-rT} E[u_{k-1}(X_T^x)]) 1{x >= x_k*},  u_0 = 0,

where x_k* is the root of the bracketed term. Values are rebuilt from u_k by
integrating d/dx (v / x^gamma) = -u / x^(gamma+1) from the boundary.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    BracketError,
    ExpectationOperator,
    GridFunction,
    PriceGrid,
    bisect,
    build_grid,
    evaluate,
)
from .reward import RewardFunction

__all__ = [
    "SolverInvariantError",
    "IterationRecord",
    "SolveResult",
    "single_boundary",
    "solve_single",
    "iterate",
    "solve_multiple",
    "piecewise_value",
    "value_at",
    "value_bound_check",
    "positive_part_equivalence_check",
]

log = logging.getLogger(__name__)

# boundary bisection stops at this fraction of x_max
BOUNDARY_RTOL = 1e-12


class SolverInvariantError(RuntimeError):
    """A structural property of the solution broke down at iteration ``k``."""

    def __init__(self, k: int, message: str) -> None:
        super().__init__(f"iteration k={k}: {message}")
        self.k = k


@dataclass(frozen=True)
class IterationRecord:
    """State after computing the k-rights solution."""

    k: int
    boundary: float
    u: GridFunction
    v: GridFunction
    epsilon: float
    psi_star: float
    reward_k: GridFunction = field(repr=False)

    def value(self, x, gamma: float):
        """v_k at arbitrary prices: exact power law below the boundary."""
        x = np.asarray(x, dtype=float)
        below = self.psi_star * np.power(np.maximum(x, 0.0) / self.boundary, gamma)
        above = evaluate(self.v, np.maximum(x, self.boundary))
        out = np.where(x < self.boundary, below, above)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class SolveResult:
    records: list[IterationRecord]
    converged: bool
    grid: PriceGrid
    gamma: float
    break_even: float
    convexity_threshold: float

    @property
    def k_final(self) -> int:
        return self.records[-1].k

    @property
    def boundaries(self) -> list[float]:
        return [rec.boundary for rec in self.records]

    @property
    def psi_star_values(self) -> list[float]:
        return [rec.psi_star for rec in self.records]

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def record(self, k: int) -> IterationRecord:
        if not 1 <= k <= len(self.records):
            raise IndexError(f"k={k} outside 1..{len(self.records)}")
        return self.records[k - 1]

    def value(self, x, k: int | None = None):
        rec = self.final if k is None else self.record(k)
        return rec.value(x, self.gamma)


def _provisional_bracket(rf: RewardFunction, x0: float) -> tuple[float, float]:
    m, T = rf.model, rf.spec.lifetime
    hi = x0 * math.exp(5.0 * m.sigma * math.sqrt(T) + max(m.alpha, 0.0) * T)
    for _ in range(200):
        if rf.lambda_psi(hi) > 0.0:
            return x0, hi
        hi *= 2.0
    raise BracketError(
        "Lambda psi never turns positive; the reward violates the linear-bound assumption"
    )


def single_boundary(rf: RewardFunction, x0: float | None = None) -> float:
    """x_1*: the root of Lambda psi above the break-even point (needs no grid)."""
    if x0 is None:
        x0, _ = rf.check_applicable()
    lo, hi = _provisional_bracket(rf, x0)
    return bisect(rf.lambda_psi, lo, hi, tol=4.0 * np.finfo(float).eps * hi)


def piecewise_value(psi_at_boundary: float, boundary: float, reward_k, x, gamma: float):
    """v_k(x) = psi_k(x v x*) min(1, (x/x*)^gamma) with psi_k sampled at ``x``."""
    x = np.asarray(x, dtype=float)
    below = psi_at_boundary * np.power(x / boundary, gamma)
    return np.where(x < boundary, below, np.asarray(reward_k, dtype=float))


class _Stepper:
    """Per-grid data shared by every iteration of one solve."""

    def __init__(self, rf: RewardFunction, grid: PriceGrid, *, positive_part: bool = False):
        self.rf = rf
        self.grid = grid
        self.gamma = rf.gamma
        self.x0, self.x_conv = rf.check_applicable()
        self.positive_part = positive_part
        self.discount = math.exp(-rf.model.r * rf.spec.lifetime)
        self.op = ExpectationOperator(rf.model, grid, rf.spec.lifetime)
        pts = grid.points
        self.psi_nodes = self._psi(pts)
        self.lam_nodes = self._lam(pts)
        self.tol = BOUNDARY_RTOL * grid.x_max

    def _psi(self, x):
        vals = np.asarray(self.rf.psi(x), dtype=float)
        return np.maximum(vals, 0.0) if self.positive_part else vals

    def _lam(self, x):
        vals = np.asarray(self.rf.lambda_psi(x), dtype=float)
        if self.positive_part:
            # psi+ is flat at zero left of the break-even point
            vals = np.where(np.asarray(x) < self.x0, 0.0, vals)
        return vals

    def zero_record(self) -> IterationRecord:
        zero = GridFunction.from_values(self.grid, np.zeros(self.grid.count))
        return IterationRecord(0, math.inf, zero, zero, 1.0, 0.0, zero)

    def step(self, prev: IterationRecord) -> IterationRecord:
        k = prev.k + 1
        grid, gamma, pts = self.grid, self.gamma, self.grid.points

        if prev.k == 0:
            h = lambda x: float(self._lam(x))
            lo, hi = _provisional_bracket(self.rf, self.x0)
            boundary = bisect(h, lo, hi, tol=4.0 * np.finfo(float).eps * hi)
            h_nodes = self.lam_nodes.copy()
            reward_nodes = self.psi_nodes.copy()
            psi_star = float(self._psi(boundary))
        else:
            def h(x: float) -> float:
                return float(self._lam(x)) + self.discount * self.op.at(prev.u, x)

            lo, hi = self.x0, prev.boundary
            if h(hi) < 0.0:
                if h(hi) < -1e-9 * max(1.0, float(np.max(np.abs(prev.u.values)))):
                    raise SolverInvariantError(
                        k, f"boundary would exceed x_{k-1}*={hi:.10g} (h={h(hi):.3e}); "
                        "quadrature noise broke the monotone bracket"
                    )
                boundary = hi
            elif h(lo) >= 0.0:
                raise SolverInvariantError(
                    k, f"h(x0)={h(lo):.3e} >= 0: boundary would not exceed break-even {lo:.6g}"
                )
            else:
                boundary = bisect(h, lo, hi, tol=self.tol)
            h_nodes = self.lam_nodes + self.discount * self.op.at_nodes(prev.u)
            reward_nodes = self.psi_nodes + self.discount * self.op.at_nodes(prev.v)
            psi_star = float(self._psi(boundary)) + self.discount * self.op.at(prev.v, boundary)

        if not boundary > self.x0:
            raise SolverInvariantError(k, f"boundary {boundary:.6g} not above break-even {self.x0:.6g}")
        active = pts >= boundary
        if np.any(h_nodes[active] <= 0.0):
            raise SolverInvariantError(
                k, "h is not positive above the boundary: root has nonpositive slope"
            )
        u_vals = np.where(active, h_nodes, 0.0)
        v_vals = self._reconstruct(boundary, psi_star, u_vals)
        u, v = self._with_tails(u_vals, v_vals)
        epsilon = _relative_change(u_vals, prev.u.values)
        reward_k = GridFunction.from_values(grid, reward_nodes)
        return IterationRecord(k, boundary, u, v, epsilon, psi_star, reward_k)

    def _with_tails(self, u_vals: np.ndarray, v_vals: np.ndarray):
        """Grid functions for u and v whose linear tails satisfy u = Lambda v.

        The slope of v at x_max follows from u = gamma v - x v'; the u tail is
        Lambda applied to the v tail, so both extrapolations agree exactly and
        stay continuous at x_max.
        """
        g, x_n = self.gamma, self.grid.x_max
        v_slope = (g * v_vals[-1] - u_vals[-1]) / x_n
        v_icpt = v_vals[-1] - v_slope * x_n
        v = GridFunction(self.grid, v_vals, v_slope, v_icpt)
        u = GridFunction(self.grid, u_vals, (g - 1.0) * v_slope, g * v_icpt)
        return u, v

    def _reconstruct(self, boundary: float, psi_star: float, u_vals: np.ndarray) -> np.ndarray:
        """v_k(x) = x^g (psi_k(x*)/x*^g - int_{x*}^x y^(-g-1) u(y) dy).

        The integral is exact for the piecewise-linear interpolant of u through
        (x*, 0) and the nodes above x*.
        """
        g, pts = self.gamma, self.grid.points
        active = pts >= boundary
        ys = np.concatenate(([boundary], pts[active]))
        us = np.concatenate(([0.0], u_vals[active]))
        p, q = ys[:-1], ys[1:]
        slope = np.diff(us) / (q - p)
        icpt = us[:-1] - slope * p
        # int (A + B y) y^(-g-1) dy = -A y^(-g)/g + B y^(1-g)/(1-g)
        seg = (
            icpt * (p ** (-g) - q ** (-g)) / g
            + slope * (q ** (1.0 - g) - p ** (1.0 - g)) / (1.0 - g)
        )
        integral = np.concatenate(([0.0], np.cumsum(seg)))[1:]
        v = psi_star * np.power(pts / boundary, g)
        v[active] = np.power(pts[active], g) * (psi_star / boundary**g - integral)
        return v


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    mask = new > np.finfo(float).eps
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(new[mask] - old[mask])) / np.max(np.abs(new[mask])))


def solve_single(rf: RewardFunction, grid: PriceGrid | None = None, grid_count: int = 500):
    """x_1* and v_1 sampled on ``grid`` (built from x_1* when omitted)."""
    x0, _ = rf.check_applicable()
    x1 = single_boundary(rf, x0)
    if grid is None:
        grid = build_grid(rf.model, rf.spec, x1, grid_count)
    g = rf.gamma
    pts = grid.points
    vals = np.where(pts < x1, rf.psi(x1) * np.power(pts / x1, g), rf.psi(np.maximum(pts, x1)))
    return x1, GridFunction.from_values(grid, vals)


def iterate(
    rf: RewardFunction,
    grid: PriceGrid,
    prev: IterationRecord | None = None,
    *,
    positive_part: bool = False,
) -> IterationRecord:
    """One step of the recursion; ``prev=None`` starts from u_0 = v_0 = 0."""
    stepper = _Stepper(rf, grid, positive_part=positive_part)
    return stepper.step(prev if prev is not None else stepper.zero_record())


def solve_multiple(
    rf: RewardFunction,
    k_max: int = 200,
    eps_target: float = 1e-3,
    *,
    grid: PriceGrid | None = None,
    grid_count: int = 500,
    positive_part: bool = False,
) -> SolveResult:
    """Iterate until the relative change in u drops to ``eps_target`` or k reaches ``k_max``."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if eps_target <= 0.0:
        raise ValueError("eps_target must be positive")
    if grid is None:
        x1 = single_boundary(rf)
        grid = build_grid(rf.model, rf.spec, x1, grid_count)
    stepper = _Stepper(rf, grid, positive_part=positive_part)
    prev = stepper.zero_record()
    records: list[IterationRecord] = []
    converged = False
    for _ in range(k_max):
        rec = stepper.step(prev)
        if prev.k > 0:
            _check_monotone(prev, rec, stepper.tol)
        records.append(rec)
        log.debug("k=%d boundary=%.8f eps=%.3e", rec.k, rec.boundary, rec.epsilon)
        prev = rec
        if rec.k > 1 and rec.epsilon <= eps_target:
            converged = True
            break
    if records[0].boundary > 0.9 * grid.x_max:
        warnings.warn(
            f"x_1*={records[0].boundary:.4g} is close to the grid edge x_max={grid.x_max:.4g}; "
            "the linear tail extrapolation may dominate the expectation",
            RuntimeWarning,
            stacklevel=2,
        )
    return SolveResult(records, converged, grid, stepper.gamma, stepper.x0, stepper.x_conv)


def _check_monotone(prev: IterationRecord, rec: IterationRecord, tol: float) -> None:
    if rec.boundary > prev.boundary + tol:
        raise SolverInvariantError(
            rec.k, f"boundary increased from {prev.boundary:.10g} to {rec.boundary:.10g}"
        )
    scale = float(np.max(np.abs(rec.v.values)))
    drop = prev.v.values[1:] - rec.v.values[1:]
    if np.any(drop > 1e-9 * scale):
        i = int(np.argmax(drop)) + 1
        raise SolverInvariantError(
            rec.k, f"value decreased at x={rec.v.grid.points[i]:.6g} by {drop[i - 1]:.3e}"
        )


def value_at(result: SolveResult, rf: RewardFunction, x, k: int | None = None):
    """v_k at arbitrary positive prices without grid interpolation.

    Above the boundary this is psi_k(x) = psi(x) + e^{-rT} E[v_{k-1}(X_T^x)],
    evaluated directly at ``x``; below it the power law anchored at x_k*.
    """
    rec = result.final if k is None else result.record(k)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.asarray(rec.value(xs, result.gamma), dtype=float)
    above = xs >= rec.boundary
    if np.any(above):
        reward = np.asarray(rf.psi(xs[above]), dtype=float)
        if rec.k > 1:
            prev = result.record(rec.k - 1)
            op = ExpectationOperator(rf.model, result.grid, rf.spec.lifetime)
            reward = reward + math.exp(-rf.model.r * rf.spec.lifetime) * op.at(prev.v, xs[above])
        out[above] = reward
    return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])


def value_bound_check(result: SolveResult, rf: RewardFunction) -> bool:
    """Every v_k stays below a x / (1 - e^{-(r-alpha)T}) on the grid."""
    a, _ = rf.affine_coefficients()
    m = rf.model
    bound = a * result.grid.points / -math.expm1(-(m.r - m.alpha) * rf.spec.lifetime)
    slack = 1e-12 * max(1.0, float(bound[-1]))
    return all(bool(np.all(rec.v.values <= bound + slack)) for rec in result.records)


def positive_part_equivalence_check(
    rf: RewardFunction,
    k_max: int = 200,
    eps_target: float = 1e-3,
    *,
    grid_count: int = 500,
    value_rtol: float = 1e-10,
) -> bool:
    """Solving with psi and with max(psi, 0) must give the same boundaries and values."""
    if rf.spec.invest_cost == 0.0 and rf.spec.flexible:
        # psi > 0 everywhere, so psi+ and psi are the same function
        return True
    plain = solve_multiple(rf, k_max, eps_target, grid_count=grid_count)
    clamped = solve_multiple(
        rf, k_max, eps_target, grid=plain.grid, positive_part=True
    )
    if plain.k_final != clamped.k_final:
        return False
    tol = 2.0 * BOUNDARY_RTOL * plain.grid.x_max
    for a, b in zip(plain.records, clamped.records):
        if abs(a.boundary - b.boundary) > tol:
            return False
        scale = np.maximum(np.abs(a.v.values), np.finfo(float).tiny)
        if np.any(np.abs(a.v.values - b.v.values) > value_rtol * scale):
            return False
    return True
