"""Checks for the qualitative claims: slice Hamiltonian invariance,
monotonicity, bounds, limit profiles, and stability of the limit states."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .cross_section import CrossSectionProfile
from .cylinder import CylinderField
from .nonlinearity import eval_fprime


@dataclass
class HamiltonianTrace:
    heights: np.ndarray
    values: np.ndarray
    drift: float


@dataclass
class StabilityReport:
    state: str  # "zero" or "phi"
    smallest_eig: float
    eigvector_norm_check: float


class MonotoneCheck(NamedTuple):
    min_interior_dz: float
    ok: bool
    location: Optional[tuple]


class BoundsCheck(NamedTuple):
    max_violation: float
    strict_interior: bool
    min_margin: float


def hamiltonian_trace(field: CylinderField, params) -> HamiltonianTrace:
    """Slice Hamiltonian on every interior slice.

    Stencils match the energy quadrature (forward x-differences per
    interval, midpoint F) with central z-differences, so a z-independent
    stack reproduces the profile action exactly and the drift measures
    genuine scheme error.
    """
    if field.nz < 4:
        raise ValueError("need nz >= 4 for interior slices")
    u = field.values
    hx, hz = field.hx, field.hz
    ui = u[:, 1:-1]
    dx = np.diff(ui, axis=0) / hx
    fmid = params.F(0.5 * (ui[:-1, :] + ui[1:, :]))
    dzc = (u[:, 2:] - u[:, :-2]) / (2.0 * hz)
    vals = hx * (
        np.sum(0.5 * dx * dx - fmid, axis=0)
        - 0.5 * np.sum(dzc[1:-1, :] ** 2, axis=0)
    )
    heights = field.z_nodes()[1:-1]
    return HamiltonianTrace(
        heights=heights, values=vals, drift=float(vals.max() - vals.min())
    )


def check_monotone(field: CylinderField) -> MonotoneCheck:
    """Minimum interior forward z-difference over hz; pass iff positive."""
    dz = np.diff(field.values, axis=1) / field.hz
    interior = dz[1:-1, :]
    k = int(np.argmin(interior))
    i, j = np.unravel_index(k, interior.shape)
    val = float(interior[i, j])
    return MonotoneCheck(val, val > 0.0, (int(i + 1), int(j)))


def check_bounds(field: CylinderField, phi: CrossSectionProfile) -> BoundsCheck:
    """Box violation max(-u, u - phi) over all nodes; strictness reported."""
    if phi.nx != field.nx:
        raise ValueError("profile resolution does not match the field")
    u = field.values
    gap = phi.values[:, None] - u
    max_violation = float(max(np.max(-u), np.max(-gap)))
    inner_u = u[1:-1, 1:-1]
    inner_gap = gap[1:-1, 1:-1]
    min_margin = float(min(inner_u.min(), inner_gap.min()))
    strict = bool(min_margin > 1e-14)
    return BoundsCheck(max_violation, strict, min_margin)


def limit_profile_errors(field: CylinderField, phi: CrossSectionProfile, margin):
    """Max-norm distance to the limit states at distance ``margin`` from
    the ends: (|u| near the bottom, |u - phi| near the top)."""
    if margin >= field.half_length:
        raise ValueError("margin must be smaller than the half-length")
    jb = int(round(margin / field.hz))
    bottom = float(np.max(np.abs(field.values[:, jb])))
    top = float(np.max(np.abs(field.values[:, field.nz - jb] - phi.values)))
    return bottom, top


def _thomas_factor(lower, diag, upper):
    n = diag.size
    beta = np.empty(n)
    gamma = np.empty(n - 1)
    beta[0] = diag[0]
    for i in range(1, n):
        gamma[i - 1] = upper[i - 1] / beta[i - 1]
        beta[i] = diag[i] - lower[i - 1] * gamma[i - 1]
    return beta, gamma


def _thomas_solve(lower, beta, gamma, rhs):
    n = rhs.size
    y = np.empty(n)
    y[0] = rhs[0] / beta[0]
    for i in range(1, n):
        y[i] = (rhs[i] - lower[i - 1] * y[i - 1]) / beta[i]
    x = np.empty(n)
    x[-1] = y[-1]
    for i in range(n - 2, -1, -1):
        x[i] = y[i] - gamma[i] * x[i + 1]
    return x


def stability_spectrum(
    state_profile: CrossSectionProfile,
    params,
    shift=-10.0,
    tol=1e-12,
    max_iter=20_000,
) -> StabilityReport:
    """Smallest eigenvalue of -d^2/dx^2 - f'(state) with Dirichlet ends.

    Shifted inverse power iteration with a tridiagonal LU solve; the
    shift sits safely below the spectrum of the states of interest.
    """
    nx = state_profile.nx
    h = 1.0 / nx
    pot = -eval_fprime(params, state_profile.values[1:-1])
    diag = 2.0 / (h * h) + pot - shift
    off = np.full(nx - 2, -1.0 / (h * h))
    beta, gamma = _thomas_factor(off, diag, off)

    x = np.sin(np.pi * state_profile.x_nodes()[1:-1])
    x /= np.linalg.norm(x)
    lam_old = np.inf
    for it in range(max_iter):
        w = _thomas_solve(off, beta, gamma, x)
        w /= np.linalg.norm(w)
        aw = (diag + shift) * w
        aw[:-1] += off * w[1:]
        aw[1:] += off * w[:-1]
        lam = float(w @ aw)
        if abs(lam - lam_old) <= tol * max(1.0, abs(lam)):
            x = w
            break
        lam_old = lam
        x = w
    else:
        raise RuntimeError("inverse power iteration did not converge")

    resid = float(np.max(np.abs(aw - lam * x)))
    state = "zero" if state_profile.max_norm() < 1e-12 else "phi"
    return StabilityReport(state=state, smallest_eig=lam, eigvector_norm_check=resid)
