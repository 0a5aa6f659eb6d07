"""Odd polynomial nonlinearity family f(t) = t^3 - lam*t^5.

Any object exposing ``f``, ``F``, ``fprime`` and an ``odd`` flag can be
used by the solvers; the quintic family below is the one that ships.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class Nonlinearity(Protocol):
    odd: bool

    def f(self, t): ...

    def F(self, t): ...

    def fprime(self, t): ...


@dataclass(frozen=True)
class QuinticParams:
    """Family parameter lam >= 0 of f(t) = t^3 - lam*t^5."""

    lam: float
    odd: bool = True

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0.0:
            raise ValueError(f"lam must be finite and nonnegative, got {self.lam}")

    # Horner-style grouping keeps the small-|t| tail accurate.
    def f(self, t):
        t = np.asarray(t, dtype=float)
        return t * t * t * (1.0 - self.lam * t * t)

    def F(self, t):
        t = np.asarray(t, dtype=float)
        t2 = t * t
        return t2 * t2 * (0.25 - self.lam * t2 / 6.0)

    def fprime(self, t):
        t = np.asarray(t, dtype=float)
        t2 = t * t
        return t2 * (3.0 - 5.0 * self.lam * t2)


def eval_f(params, t):
    """f(t); scalar in -> float out, array in -> array out."""
    out = params.f(t)
    return float(out) if np.ndim(out) == 0 else out


def eval_F(params, t):
    """Primitive F(t) = integral of f from 0 to t."""
    out = params.F(t)
    return float(out) if np.ndim(out) == 0 else out


def eval_fprime(params, t):
    """f'(t), used by stability spectra and pointwise residuals."""
    out = params.fprime(t)
    return float(out) if np.ndim(out) == 0 else out
