"""Monte Carlo valuation of threshold exercise policies.

Paths are never time-stepped. While waiting below a threshold the log-price is
a Brownian motion with drift, so the time to reach the threshold is drawn
exactly from its inverse Gaussian law, and the price at exercise equals the
threshold. Between exercises the refraction period is bridged by one exact
lognormal step.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gbm_model import MarketModel
from .reward import RewardFunction

__all__ = [
    "ThresholdPolicy",
    "SimulationConfig",
    "first_passage_times",
    "simulate_policy_value",
    "policy_suboptimality_check",
]

CHUNK_PATHS = 1 << 16


@dataclass(frozen=True)
class ThresholdPolicy:
    """Exercise the i-th investment once the price is at or above ``thresholds[i]``,
    no sooner than ``refraction`` years after the previous one."""

    thresholds: tuple[float, ...]
    refraction: float

    def __post_init__(self) -> None:
        ths = tuple(float(b) for b in self.thresholds)
        object.__setattr__(self, "thresholds", ths)
        if not ths:
            raise ValueError("policy needs at least one threshold")
        if any(not b > 0.0 for b in ths):
            raise ValueError("thresholds must be positive")
        if not self.refraction > 0.0:
            raise ValueError("refraction must be positive")

    @classmethod
    def from_boundaries(cls, boundaries: Sequence[float], k: int, refraction: float) -> "ThresholdPolicy":
        """Optimal policy for k rights: x_k* first, x_1* for the last right."""
        if not 1 <= k <= len(boundaries):
            raise ValueError(f"k={k} outside 1..{len(boundaries)}")
        return cls(tuple(boundaries[k - 1::-1]), refraction)


@dataclass(frozen=True)
class SimulationConfig:
    path_count: int = 1_000_000
    seed: int = 0
    horizon: float = math.inf
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.path_count < 2:
            raise ValueError("path_count must be at least 2")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


def first_passage_times(
    model: MarketModel, x: np.ndarray, barrier: float, rng: np.random.Generator
) -> np.ndarray:
    """Exact first time X reaches ``barrier`` from ``x`` (inf when it never does)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    below = x < barrier
    if not np.any(below) or math.isinf(barrier):
        out[below] = math.inf
        return out
    level = np.log(barrier / x[below])
    mu, sig = model.log_drift, model.sigma
    shape = (level / sig) ** 2
    if mu > 0.0:
        tau = rng.wald(level / mu, shape)
    elif mu < 0.0:
        tau = rng.wald(level / -mu, shape)
        # the level is reached with probability exp(2 mu level / sigma^2)
        missed = rng.random(level.size) >= np.exp(2.0 * mu * level / sig**2)
        tau[missed] = math.inf
    else:
        tau = shape / rng.standard_normal(level.size) ** 2
    out[below] = tau
    return out


def _simulate_chunk(
    rf: RewardFunction,
    policy: ThresholdPolicy,
    horizon: float,
    x0: float,
    n: int,
    seed: np.random.SeedSequence,
) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    m = rf.model
    T = policy.refraction
    x = np.full(n, float(x0))
    t = np.zeros(n)
    total = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    step_mean, step_vol = m.log_drift * T, m.sigma * math.sqrt(T)
    for barrier in policy.thresholds:
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        wait = first_passage_times(m, x[idx], barrier, rng)
        t_ex = t[idx] + wait
        ok = np.isfinite(t_ex) & (t_ex <= horizon)
        alive[idx[~ok]] = False
        idx, t_ex = idx[ok], t_ex[ok]
        price = np.maximum(x[idx], barrier)
        at_barrier = wait[ok] > 0.0
        reward = np.empty(idx.size)
        reward[at_barrier] = rf.psi(barrier)
        if np.any(~at_barrier):
            reward[~at_barrier] = rf.psi(price[~at_barrier])
        total[idx] += np.exp(-m.r * t_ex) * reward
        t[idx] = t_ex + T
        x[idx] = price * np.exp(step_mean + step_vol * rng.standard_normal(idx.size))
    return float(total.sum()), float(np.dot(total, total))


def simulate_policy_value(
    model: MarketModel,
    rf: RewardFunction,
    policy: ThresholdPolicy,
    config: SimulationConfig,
    x0: float,
) -> tuple[float, float]:
    """Mean discounted reward of ``policy`` from price ``x0`` and its standard error.

    Paths are split into fixed-size chunks seeded from ``config.seed``, so the
    estimate does not depend on ``config.jobs``.
    """
    if not x0 > 0.0:
        raise ValueError("x0 must be positive")
    if rf.model != model:
        raise ValueError("reward was built for a different market model")
    n = config.path_count
    sizes = [min(CHUNK_PATHS, n - start) for start in range(0, n, CHUNK_PATHS)]
    seeds = np.random.SeedSequence(config.seed).spawn(len(sizes))
    args = [(rf, policy, config.horizon, x0, size, sd) for size, sd in zip(sizes, seeds)]
    if config.jobs > 1:
        with ThreadPoolExecutor(config.jobs) as pool:
            parts = list(pool.map(lambda a: _simulate_chunk(*a), args))
    else:
        parts = [_simulate_chunk(*a) for a in args]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def policy_suboptimality_check(
    model: MarketModel,
    rf: RewardFunction,
    solver_result,
    config: SimulationConfig,
    x0: float,
    k: int = 2,
    bump: float = 0.10,
    z_max: float = 3.0,
) -> bool:
    """No +/-10% perturbation of a single solver threshold beats the solver policy
    by more than ``z_max`` combined standard errors (common random numbers)."""
    T = rf.spec.lifetime
    base = ThresholdPolicy.from_boundaries(solver_result.boundaries, k, T)
    est, se = simulate_policy_value(model, rf, base, config, x0)
    for i in range(len(base.thresholds)):
        for factor in (1.0 - bump, 1.0 + bump):
            ths = list(base.thresholds)
            ths[i] *= factor
            alt, alt_se = simulate_policy_value(model, rf, ThresholdPolicy(tuple(ths), T), config, x0)
            if alt - est > z_max * math.hypot(se, alt_se):
                return False
    return True
