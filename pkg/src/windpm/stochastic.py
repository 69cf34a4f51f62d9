"""Weibull lifetimes, age-conditioned sampling and renewal paths.

All randomness in the package flows through :class:`SeedPolicy`, which maps a
master seed plus an integer key (turbine, component, start step, ...) to an
independent numpy ``Generator``.  Identical keys give identical streams, so
estimates do not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """Raised for invalid lifetime-distribution parameters."""


@dataclass(frozen=True)
class WeibullParams:
    scale: float  # months
    shape: float

    def __post_init__(self):
        for name in ("scale", "shape"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterError(f"Weibull {name} must be finite and > 0, got {v!r}")

    @property
    def mean(self) -> float:
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)


@dataclass(frozen=True)
class FailurePath:
    """Failure epochs of one turbine position after step ``start``.

    ``times`` holds every failure up to the horizon plus the first one beyond
    it; ``horizon`` records which one that was.
    """

    start: int
    age: float
    horizon: float
    times: tuple[float, ...]

    @property
    def in_window(self) -> tuple[float, ...]:
        return tuple(u for u in self.times if u <= self.horizon)


@dataclass(frozen=True)
class SeedPolicy:
    """Deterministic sub-streams derived from one 64-bit master seed."""

    master: int = 20240101

    def rng(self, *key: int) -> np.random.Generator:
        key = tuple(int(k) for k in key)
        if any(k < 0 for k in key):
            raise ValueError(f"seed keys must be non-negative, got {key}")
        seq = np.random.SeedSequence(entropy=int(self.master) & (2**64 - 1), spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))


def conditional_survival(params: WeibullParams, age: float, v):
    """P(L >= v | L >= age) for a Weibull life L.

    Vectorised over ``v``.
    """
    if age < 0:
        raise ParameterError("age must be >= 0")
    v = np.asarray(v, dtype=float)
    a, b = params.scale, params.shape
    out = np.exp((age / a) ** b - (np.maximum(v, age) / a) ** b)
    out = np.where(v <= age, 1.0, out)
    return float(out) if out.ndim == 0 else out


def residual_total_life(params: WeibullParams, age, e):
    """Inverse-CDF map from standard exponential draws ``e`` to total life.

    The result V satisfies P(V >= v) = conditional_survival(params, age, v).
    """
    a, b = params.scale, params.shape
    return a * ((np.asarray(age, dtype=float) / a) ** b + e) ** (1.0 / b)


def sample_residual_total_life(params: WeibullParams, age: float, rng: np.random.Generator,
                               size=None):
    if age < 0:
        raise ParameterError("age must be >= 0")
    e = rng.standard_exponential(size)
    out = residual_total_life(params, age, e)
    return float(out) if size is None else out


def sample_failure_path(params: WeibullParams, u: int, age: float, t_max: float,
                        rng: np.random.Generator) -> FailurePath:
    """Renewal path starting from a component of ``age`` in service at step ``u``."""
    if age < 0 or age > u + 1e-12:
        raise ParameterError(f"age {age} must lie in [0, u={u}]")
    if t_max <= u:
        raise ParameterError("t_max must exceed u")
    origin = u - age
    times = [origin + sample_residual_total_life(params, age, rng)]
    while times[-1] <= t_max:
        times.append(times[-1] + sample_residual_total_life(params, 0.0, rng))
    return FailurePath(start=u, age=age, horizon=t_max, times=tuple(times))


def sample_failure_matrix(params: WeibullParams, u: float, age: float, horizon: float,
                          n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised renewal paths.

    Returns an ``(n_paths, K)`` array of failure times; row ``l`` lists the
    failures of path ``l`` that occur at or before ``horizon`` and is padded
    with ``inf``.  ``K`` is the largest in-window count over the rows (at
    least 1).
    """
    origin = u - age
    first = origin + residual_total_life(params, age, rng.standard_exponential(n_paths))
    cols = [first]
    cur = first
    alive = cur <= horizon
    while alive.any():
        nxt = np.full(n_paths, np.inf)
        e = rng.standard_exponential(int(alive.sum()))
        nxt[alive] = cur[alive] + residual_total_life(params, 0.0, e)
        cols.append(nxt)
        cur = nxt
        alive = cur <= horizon
    out = np.column_stack(cols)
    out[out > horizon] = np.inf
    keep = max(1, int(np.isfinite(out).sum(axis=1).max(initial=0)))
    return out[:, :keep]
