"""Single-investment reward psi and its analytic companions.

psi(x) = -I + int_nu^{nu+T} E[(X_t - c)^+] e^{-rt} dt   (flexible operation)
psi0(x) = a x - b                                       (no suspension)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .gbm_model import MarketModel, call_expectation
from .numerics import BracketError, bisect

__all__ = ["ApplicabilityError", "ProjectSpec", "RewardFunction"]

_PANEL_ORDER = 16
# psi is evaluated in blocks of this many prices to bound memory
_CHUNK = 65536


class ApplicabilityError(ValueError):
    """The reward does not satisfy the convexity conditions the solver relies on."""


@dataclass(frozen=True)
class ProjectSpec:
    """One unit of capacity: cost ``invest_cost``, running cost ``op_cost`` per year,
    operating for ``lifetime`` years after a delay of ``lead_time`` years."""

    invest_cost: float
    op_cost: float
    lifetime: float
    lead_time: float
    flexible: bool = True

    def __post_init__(self) -> None:
        for name in ("invest_cost", "op_cost", "lifetime", "lead_time"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.lifetime <= 0.0:
            raise ValueError(f"lifetime must be positive, got {self.lifetime}")
        if self.lead_time < 0.0:
            raise ValueError(f"lead_time must be nonnegative, got {self.lead_time}")
        if self.invest_cost < 0.0:
            raise ValueError(f"invest_cost must be nonnegative, got {self.invest_cost}")
        if self.op_cost < 0.0:
            raise ValueError(f"op_cost must be nonnegative, got {self.op_cost}")


def _gauss_legendre(lo: float, hi: float, n_nodes: int):
    """Composite Gauss-Legendre nodes and weights on [lo, hi]."""
    order = min(_PANEL_ORDER, n_nodes)
    panels = max(1, math.ceil(n_nodes / order))
    ref_x, ref_w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    weights = (half[:, None] * ref_w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class RewardFunction:
    model: MarketModel
    spec: ProjectSpec
    quad_nodes: int = 64
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.quad_nodes < 1:
            raise ValueError("quad_nodes must be positive")
        nu, T = self.spec.lead_time, self.spec.lifetime
        t, w = _gauss_legendre(nu, nu + T, self.quad_nodes)
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_w", w)

    @property
    def gamma(self) -> float:
        return self.model.gamma

    def affine_coefficients(self) -> tuple[float, float]:
        """(a, b) with psi(x) ~ a x - b for x >> c (exact when inflexible)."""
        m, s = self.model, self.spec
        eff = m.r - m.alpha
        a = math.exp(-eff * s.lead_time) * -math.expm1(-eff * s.lifetime) / eff
        b = s.invest_cost + math.exp(-m.r * s.lead_time) * -math.expm1(-m.r * s.lifetime) * s.op_cost / m.r
        return a, b

    def _blocks(self, x, fn):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if np.any(flat < 0.0):
            raise ValueError("x must be nonnegative")
        out = np.empty_like(flat)
        for start in range(0, flat.size, _CHUNK):
            out[start:start + _CHUNK] = fn(flat[start:start + _CHUNK])
        out = out.reshape(x.shape)
        return out if out.ndim else float(out)

    def psi(self, x):
        """Net present value of investing now at price ``x``."""
        if not self.spec.flexible:
            a, b = self.affine_coefficients()
            return self._blocks(x, lambda xs: a * xs - b)
        m, s = self.model, self.spec
        disc = self._w * np.exp(-m.r * self._t)

        def block(xs):
            calls = call_expectation(m, xs[:, None], s.op_cost, self._t[None, :])
            return -s.invest_cost + calls @ disc

        return self._blocks(x, block)

    def psi_prime(self, x):
        """d psi / dx: the time-integrated call delta."""
        a, _ = self.affine_coefficients()
        if not self.spec.flexible or self.spec.op_cost == 0.0:
            return self._blocks(x, lambda xs: np.full_like(xs, a))
        m, s = self.model, self.spec
        disc = self._w * np.exp(-(m.r - m.alpha) * self._t)
        vol = m.sigma * np.sqrt(self._t)
        drift = (m.alpha + 0.5 * m.sigma**2) * self._t

        def block(xs):
            with np.errstate(divide="ignore"):
                lm = np.log(xs)[:, None] - math.log(s.op_cost)
            return ndtr((lm + drift[None, :]) / vol[None, :]) @ disc

        return self._blocks(x, block)

    def psi_plus(self, x):
        return np.maximum(self.psi(x), 0.0)

    def lambda_psi(self, x):
        """gamma psi(x) - x psi'(x)."""
        x_arr = np.asarray(x, dtype=float)
        out = self.gamma * np.asarray(self.psi(x_arr)) - x_arr * np.asarray(self.psi_prime(x_arr))
        return out if out.ndim else float(out)

    def convexity_threshold(self) -> float:
        """Price x' above which Lambda psi is convex (0 for the affine reward)."""
        if not self.spec.flexible:
            return 0.0
        m = self.model
        rate = m.alpha + self.gamma * m.sigma**2 - 0.5 * m.sigma**2
        return self.spec.op_cost * math.exp(-rate * self.spec.lead_time)

    def break_even(self) -> float:
        """Unique x0 > 0 with psi(x0) = 0."""
        a, b = self.affine_coefficients()
        if not self.spec.flexible:
            if b <= 0.0:
                raise BracketError("no positive root: affine reward has b <= 0")
            return b / a
        s, m = self.spec, self.model
        scale = max(s.op_cost, s.invest_cost * (m.r - m.alpha))
        if scale == 0.0:
            raise BracketError("no positive root: reward vanishes identically (I = c = 0)")
        lo = 1e-6 * scale
        if self.psi(lo) >= 0.0:
            raise BracketError(
                f"no positive root: psi({lo:.3g}) >= 0, the reward is positive at every price"
            )
        hi = max(scale, b / a)
        for _ in range(200):
            if self.psi(hi) > 0.0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise BracketError("psi never turns positive")
        # x-resolution at the float limit keeps |psi(x0)| far below 1e-10 I
        return bisect(self.psi, lo, hi, tol=4.0 * np.finfo(float).eps * hi)

    def check_applicable(self) -> tuple[float, float]:
        """Return (x0, x') or raise when x0 < x' (Lambda psi not convex past break-even)."""
        try:
            x0 = self.break_even()
        except BracketError as exc:
            raise ApplicabilityError(f"reward has no break-even point: {exc}") from exc
        x_conv = self.convexity_threshold()
        if x0 < x_conv:
            raise ApplicabilityError(
                f"break-even x0={x0:.6g} lies below the convexity threshold x'={x_conv:.6g}; "
                "raise invest_cost or lower op_cost"
            )
        return x0, x_conv
