"""Monotone Barzilai-Borwein descent with optional box projection.

Shared by the 1D cross-section solver and the 2D cylinder solver.  The
step is the BB1 quotient s.s/s.y with a halving backtracer that never
accepts an energy increase, so sublevel sets are preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DescentResult:
    x: np.ndarray
    energy: float
    iterations: int
    grad_norm: float
    converged: bool


class ConvergenceError(RuntimeError):
    """Raised when the iteration cap is hit; carries the best iterate."""

    def __init__(self, message, result: DescentResult):
        super().__init__(message)
        self.result = result


def _proj_grad_norm(x, g, project):
    if project is None:
        return float(np.max(np.abs(g)))
    return float(np.max(np.abs(x - project(x - g))))


def minimize_bb(
    x0,
    energy,
    gradient,
    project=None,
    grad_tol=1e-9,
    max_iter=200_000,
    alpha0=1e-2,
    alpha_min=1e-12,
    alpha_max=1e6,
    max_backtracks=60,
    stall_limit=500,
):
    """Minimize ``energy`` from ``x0``; returns a DescentResult.

    Raises ConvergenceError when ``max_iter`` is exhausted with the
    projected-gradient max-norm still above ``grad_tol``.
    """
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    f = float(energy(x))
    g = gradient(x)
    alpha = float(alpha0)
    accepted = float(alpha0)
    stall = 0

    for it in range(1, max_iter + 1):
        pg = _proj_grad_norm(x, g, project)
        if pg <= grad_tol:
            return DescentResult(x, f, it - 1, pg, True)

        # The BB quotient swings across the full curvature range; capping
        # its growth over the last accepted step keeps the monotone
        # backtracer to ~one energy evaluation per iteration.
        a = min(alpha, 8.0 * accepted)
        xt = ft = None
        for _ in range(max_backtracks):
            cand = x - a * g
            if project is not None:
                cand = project(cand)
            fc = float(energy(cand))
            if fc <= f:
                xt, ft = cand, fc
                break
            a *= 0.5
        if xt is None:
            # No descent at any step length: flat to rounding.
            return DescentResult(x, f, it, pg, pg <= 10.0 * grad_tol)
        accepted = a

        stall = stall + 1 if ft == f else 0
        if stall >= stall_limit:
            return DescentResult(xt, ft, it, pg, pg <= 10.0 * grad_tol)

        gt = gradient(xt)
        s = xt - x
        y = gt - g
        sy = float(np.sum(s * y))
        if sy > 0.0:
            alpha = float(np.sum(s * s)) / sy
        else:
            alpha = min(a * 4.0, alpha_max)
        alpha = min(max(alpha, alpha_min), alpha_max)
        x, f, g = xt, ft, gt

    pg = _proj_grad_norm(x, g, project)
    result = DescentResult(x, f, max_iter, pg, False)
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations "
        f"(projected gradient max-norm {pg:.3e} > {grad_tol:.3e})",
        result,
    )
