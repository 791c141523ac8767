"""Price grid, grid-sampled functions and the lognormal expectation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .gbm_model import MarketModel, lognormal_density

__all__ = [
    "BracketError",
    "PriceGrid",
    "GridFunction",
    "ExpectationOperator",
    "build_grid",
    "evaluate",
    "tail_limit",
    "lognormal_expectation",
    "bisect",
    "X_MAX_QUANTILE",
    "TAIL_QUANTILE",
]

# two-sided 99.9% normal quantile used for the grid edge
X_MAX_QUANTILE = 3.29
# one-sided normal quantile bounding the neglected mass beyond x_hat (3.4e-6)
TAIL_QUANTILE = 4.5


class BracketError(ValueError):
    """Raised when a root-finding bracket holds no sign change."""


@dataclass(frozen=True)
class PriceGrid:
    """Uniform grid on [0, x_max] with ``count`` nodes."""

    x_max: float
    count: int = 500
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.x_max > 0.0 and math.isfinite(self.x_max)):
            raise ValueError(f"x_max must be positive and finite, got {self.x_max}")
        if self.count < 3:
            raise ValueError(f"grid needs at least 3 points, got {self.count}")
        pts = np.linspace(0.0, self.x_max, self.count)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def spacing(self) -> float:
        return self.x_max / (self.count - 1)


def build_grid(model: MarketModel, spec, x1_star: float, count: int = 500) -> PriceGrid:
    """Grid reaching the upper 99.9% two-sided quantile of X_T started at ``x1_star``."""
    if x1_star <= 0.0:
        raise ValueError("x1_star must be positive")
    T = spec.lifetime
    x_max = math.exp(
        math.log(x1_star) + model.log_drift * T + X_MAX_QUANTILE * model.sigma * math.sqrt(T)
    )
    return PriceGrid(x_max=x_max, count=count)


@dataclass(frozen=True)
class GridFunction:
    """Values on a ``PriceGrid`` extended linearly (slope k, intercept m) beyond x_max."""

    grid: PriceGrid
    values: np.ndarray
    tail_slope: float
    tail_intercept: float

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.count,):
            raise ValueError(
                f"expected {self.grid.count} values, got shape {vals.shape}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, grid: PriceGrid, values) -> "GridFunction":
        """Fit the tail line through the last two nodes."""
        vals = np.asarray(values, dtype=float)
        slope = (vals[-1] - vals[-2]) / grid.spacing
        intercept = vals[-1] - slope * grid.x_max
        return cls(grid, vals, float(slope), float(intercept))

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(f: GridFunction, x):
    """Piecewise-linear interpolation on the grid, linear extrapolation past x_max."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("x must be nonnegative")
    inside = np.interp(x, f.grid.points, f.values)
    out = np.where(x > f.grid.x_max, f.tail_slope * x + f.tail_intercept, inside)
    return out if out.ndim else float(out)


def tail_limit(model: MarketModel, x_max: float, t: float, quantile: float = TAIL_QUANTILE) -> float:
    """Upper integration limit x_hat; mass of X_t beyond it is < 1e-5 for any start <= x_max."""
    return math.exp(
        math.log(x_max) + model.log_drift * t + quantile * model.sigma * math.sqrt(t)
    )


def _partial_moments(model: MarketModel, x, t: float, lo: float, hi: float):
    """Return (int_lo^hi g dz, int_lo^hi z g dz) for the law of X_t given X_0 = x."""
    x = np.asarray(x, dtype=float)
    s = model.sigma * math.sqrt(t)
    mu = np.log(x) + model.log_drift * t
    a = (math.log(lo) - mu) / s
    b = (math.log(hi) - mu) / s
    m0 = ndtr(b) - ndtr(a)
    m1 = np.exp(mu + 0.5 * s * s) * (ndtr(b - s) - ndtr(a - s))
    return m0, m1


class ExpectationOperator:
    """Trapezoidal approximation of x -> E[f(X_t) | X_0 = x] for grid functions.

    The weights on the grid nodes and the tail moments only depend on the
    starting point, so they are tabulated once for every grid node and reused
    across iterations.
    """

    def __init__(
        self,
        model: MarketModel,
        grid: PriceGrid,
        t: float,
        tail_quantile: float = TAIL_QUANTILE,
    ) -> None:
        if t <= 0.0:
            raise ValueError("t must be positive")
        self.model = model
        self.grid = grid
        self.t = float(t)
        self.x_hat = tail_limit(model, grid.x_max, t, tail_quantile)
        trap = np.full(grid.count, grid.spacing)
        trap[0] = trap[-1] = 0.5 * grid.spacing
        self._trap = trap
        starts = grid.points[1:]
        self._node_weights, self._node_m0, self._node_m1 = self._tabulate(starts)

    def _tabulate(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dens = lognormal_density(self.model, x[:, None], self.t, self.grid.points[None, :])
        weights = dens * self._trap[None, :]
        m0, m1 = _partial_moments(self.model, x, self.t, self.grid.x_max, self.x_hat)
        return weights, m0, m1

    def at_nodes(self, f: GridFunction) -> np.ndarray:
        """Expectation started from every grid node (node 0 is absorbing at 0)."""
        self._check(f)
        out = np.empty(self.grid.count)
        out[0] = f.values[0]
        out[1:] = (
            self._node_weights @ f.values
            + f.tail_slope * self._node_m1
            + f.tail_intercept * self._node_m0
        )
        return out

    def at(self, f: GridFunction, x):
        """Expectation started from arbitrary positive points."""
        self._check(f)
        xs = np.asarray(x, dtype=float)
        if np.any(xs <= 0.0):
            raise ValueError("x must be positive")
        weights, m0, m1 = self._tabulate(xs)
        out = weights @ f.values + f.tail_slope * m1 + f.tail_intercept * m0
        return out.reshape(xs.shape) if xs.ndim else float(out[0])

    def _check(self, f: GridFunction) -> None:
        if f.grid is not self.grid and f.grid != self.grid:
            raise ValueError("grid function lives on a different grid")


def lognormal_expectation(
    f: GridFunction,
    model: MarketModel,
    x,
    t: float,
    tail_quantile: float = TAIL_QUANTILE,
):
    """E[f(X_t) | X_0 = x]: trapezoid on [0, x_max] plus the linear tail up to x_hat."""
    return ExpectationOperator(model, f.grid, t, tail_quantile).at(f, x)


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = 400,
) -> float:
    """Root of ``f`` in [lo, hi] by bisection; the bracket must hold a sign change."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    f_lo = f(lo)
    if f_lo == 0.0:
        return lo
    f_hi = f(hi)
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise BracketError(
            f"no sign change on [{lo:.6g}, {hi:.6g}]: f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}"
        )
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket at floating-point resolution
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
