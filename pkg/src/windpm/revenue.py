"""Cumulative future revenue of one turbine and revenue-loss queries."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a scenario or model configuration is inconsistent."""


class DomainError(ValueError):
    """Raised for arguments outside a function's domain."""


def default_monthly_revenue(low: float = 15.0, high: float = 30.0, low_month: int = 2,
                            high_month: int = 9) -> np.ndarray:
    """Twelve monthly revenues (k$), January first.

    Half-cosine rise from ``low`` in ``low_month`` to ``high`` in
    ``high_month`` and half-cosine fall back over the remaining months, so both
    extremes are hit exactly.
    """
    rise = (high_month - low_month) % 12
    fall = 12 - rise
    mid, amp = (low + high) / 2.0, (high - low) / 2.0
    out = np.empty(12)
    for month in range(1, 13):
        k = (month - low_month) % 12
        if k <= rise:
            out[month - 1] = mid - amp * math.cos(math.pi * k / rise)
        else:
            out[month - 1] = mid + amp * math.cos(math.pi * (k - rise) / fall)
    return out


def tile_revenue(values, life: int) -> np.ndarray:
    """Repeat a 12-month profile over ``life`` months, or validate a full series."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ConfigurationError("revenue curve is empty")
    if values.size == life:
        return values.copy()
    if values.size == 12:
        return np.resize(values, life)
    raise ConfigurationError(f"revenue curve needs 12 or {life} values, got {values.size}")


@dataclass(frozen=True, eq=False)
class RevenueFunction:
    """Piecewise-affine R on [0, T + gamma_bar].

    ``cum[v]`` is R at the integer point ``v``; between integers R is affine
    with slope ``-monthly[v]`` on [v, v+1].
    """

    monthly: np.ndarray  # r_1..r_T, k$/month
    gamma_bar: float
    cum: np.ndarray

    @property
    def life(self) -> int:
        return self.monthly.size

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        T = self.life
        if np.any(v < -1e-12) or np.any(v > T + self.gamma_bar + 1e-9):
            raise DomainError(f"R evaluated outside [0, {T + self.gamma_bar}]")
        vc = np.clip(v, 0.0, T)
        base = np.minimum(np.floor(vc).astype(np.int64), T - 1)
        lam = vc - base
        out = (1.0 - lam) * self.monthly[base] + self.cum[base + 1]
        return float(out) if out.ndim == 0 else out

    def loss(self, u, w):
        """Revenue lost by stopping production over [u, u + w]."""
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        if np.any(w < 0) or np.any(u > self.life + 1e-12):
            raise DomainError("revenue_loss needs w >= 0 and u <= T")
        return self(u) - self(u + w)


def build_revenue_function(monthly, gamma_bar: float) -> RevenueFunction:
    monthly = np.asarray(monthly, dtype=float)
    if monthly.ndim != 1 or monthly.size == 0:
        raise ConfigurationError("revenue curve must be a non-empty 1-D series")
    if np.any(monthly < 0) or not np.all(np.isfinite(monthly)):
        raise ConfigurationError("monthly revenues must be finite and >= 0")
    if gamma_bar < 0:
        raise ConfigurationError("gamma_bar must be >= 0")
    # cum[v] = sum_{t=v+1}^{T} r_t, cum[T] = 0
    cum = np.concatenate([np.cumsum(monthly[::-1])[::-1], [0.0]])
    monthly = monthly.copy()
    monthly.setflags(write=False)
    cum.setflags(write=False)
    return RevenueFunction(monthly=monthly, gamma_bar=float(gamma_bar), cum=cum)


def revenue_loss(R: RevenueFunction, u, w):
    return R.loss(u, w)
