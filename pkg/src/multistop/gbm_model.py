"""Geometric Brownian motion primitives.

dX_t = alpha X_t dt + sigma X_t dB_t, discounted at a constant rate r > alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "MarketModel",
    "gamma",
    "call_expectation",
    "lognormal_density",
    "first_passage_factor",
    "norm_cdf",
]


def norm_cdf(x):
    """Standard normal CDF, accurate to ~1e-16 absolute (erfc based)."""
    return ndtr(x)


@dataclass(frozen=True)
class MarketModel:
    """Drift ``alpha``, volatility ``sigma`` (per sqrt-year) and discount rate ``r``."""

    alpha: float
    sigma: float
    r: float

    def __post_init__(self) -> None:
        for name in ("alpha", "sigma", "r"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.r <= 0.0:
            raise ValueError(f"r must be positive, got {self.r}")
        if self.r <= self.alpha:
            raise ValueError(
                f"r must exceed alpha (got r={self.r}, alpha={self.alpha}); "
                "the value and every exercise boundary are infinite otherwise"
            )

    @property
    def gamma(self) -> float:
        return gamma(self)

    @property
    def log_drift(self) -> float:
        """Drift of ln X_t."""
        return self.alpha - 0.5 * self.sigma**2


def gamma(model: MarketModel) -> float:
    """Positive root > 1 of 0.5 sigma^2 g (g - 1) + alpha g - r = 0."""
    if model.r <= model.alpha:
        raise ValueError("gamma requires r > alpha")
    s2 = model.sigma**2
    half = 0.5 - model.alpha / s2
    return half + math.sqrt(half * half + 2.0 * model.r / s2)


def _d_plus_minus(model: MarketModel, x, c: float, t):
    vol = model.sigma * np.sqrt(t)
    with np.errstate(divide="ignore"):
        log_moneyness = np.log(x) - math.log(c)
    d_plus = (log_moneyness + (model.alpha + 0.5 * model.sigma**2) * t) / vol
    return d_plus, d_plus - vol


def call_expectation(model: MarketModel, x, c: float, t):
    """E[(X_t - c)^+ | X_0 = x]; broadcasts over ``x`` and ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("t must be positive")
    if c < 0.0:
        raise ValueError("c must be nonnegative")
    x = np.asarray(x, dtype=float)
    forward = x * np.exp(model.alpha * t)
    if c == 0.0:
        return forward
    d_plus, d_minus = _d_plus_minus(model, x, c, t)
    out = forward * ndtr(d_plus) - c * ndtr(d_minus)
    # cancellation can leave tiny negatives deep out of the money
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def lognormal_density(model: MarketModel, x, t, z):
    """Density of X_t at ``z`` given X_0 = x."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    s = model.sigma * np.sqrt(t)
    mu = np.log(x) + model.log_drift * t
    with np.errstate(divide="ignore", invalid="ignore"):
        lz = np.log(z)
        dens = np.exp(-0.5 * ((lz - mu) / s) ** 2) / (z * s * math.sqrt(2.0 * math.pi))
    dens = np.where(z > 0.0, dens, 0.0)
    return dens if dens.ndim else float(dens)


def first_passage_factor(model: MarketModel, x: float, barrier: float) -> float:
    """E[exp(-r tau)] for the first passage of X from ``x`` up to ``barrier``."""
    if barrier <= 0.0:
        raise ValueError("barrier must be positive")
    if x > barrier:
        raise ValueError(f"x={x} lies above the barrier {barrier}; the factor is 1")
    if x <= 0.0:
        return 0.0
    return math.exp(model.gamma * math.log(x / barrier))
