"""Box-constrained minimization of the layer energy on (0,1) x (-n, n).

The discrete energy tensorizes the cross-section quadrature (forward
differences per interval, midpoint F, trapezoid in the transverse
direction), so a z-independent stack of a profile has energy exactly
2L times the profile action and the discrete gradient is the 5-point
Laplacian with interval-averaged f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cross_section import CrossSectionProfile, make_profile
from .descent import ConvergenceError, minimize_bb


class DegenerateProfileError(RuntimeError):
    """The half-maximum crossing does not exist in the field."""


@dataclass
class CylinderField:
    nx: int
    nz: int
    half_length: float
    values: np.ndarray  # (nx+1, nz+1), index [i, j] = (x_i, z_j)
    hx: float
    hz: float
    shift: float = 0.0
    lam: float = 0.0

    def x_nodes(self):
        return np.linspace(0.0, 1.0, self.nx + 1)

    def z_nodes(self):
        return -self.half_length + self.hz * np.arange(self.nz + 1)

    def top_profile(self, params=None) -> CrossSectionProfile:
        """The top boundary row as a cross-section profile."""
        from .nonlinearity import QuinticParams

        p = params if params is not None else QuinticParams(self.lam)
        return make_profile(self.values[:, -1].copy(), p)

    def copy(self):
        return replace(self, values=self.values.copy())


@dataclass
class TruncatedSolveReport:
    c_n: float
    H_n: float
    z_n: float
    iterations: int
    grad_norm: float


@dataclass
class ContinuationStep:
    n: float
    c_n: float
    H_n: float
    z_n: float
    iterations: int
    grad_norm: float
    bottom_err: float
    top_err: float
    h_absmax: float
    h_drift: float


@dataclass
class HeteroclinicReport:
    steps: list = field(default_factory=list)
    met: bool = False
    snapshots: dict = field(default_factory=dict)  # n -> raw minimizer field


def new_field(nx, half_length, nz_per_unit, lam=0.0) -> CylinderField:
    nz = int(round(2.0 * half_length * nz_per_unit))
    return CylinderField(
        nx=nx,
        nz=nz,
        half_length=float(half_length),
        values=np.zeros((nx + 1, nz + 1)),
        hx=1.0 / nx,
        hz=1.0 / nz_per_unit,
        lam=lam,
    )


def _check_phi(field: CylinderField, phi: CrossSectionProfile):
    if phi.nx != field.nx:
        raise ValueError("profile resolution does not match the field")


def energy_J(field: CylinderField, params) -> float:
    u = field.values
    hx, hz = field.hx, field.hz
    dx = np.diff(u, axis=0) / hx
    dz = np.diff(u, axis=1) / hz
    fmid = params.F(0.5 * (u[:-1, :] + u[1:, :]))
    cells = (
        0.25 * (dx[:, :-1] ** 2 + dx[:, 1:] ** 2)
        + 0.25 * (dz[:-1, :] ** 2 + dz[1:, :] ** 2)
        - 0.5 * (fmid[:, :-1] + fmid[:, 1:])
    )
    return float(hx * hz * np.sum(cells))


def grad_J(field: CylinderField, params) -> np.ndarray:
    """Exact gradient of energy_J; zero on all Dirichlet rows/columns."""
    u = field.values
    hx, hz = field.hx, field.hz
    g = np.zeros_like(u)
    lap = (u[2:, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / (hx * hx) + (
        u[1:-1, 2:] - 2.0 * u[1:-1, 1:-1] + u[1:-1, :-2]
    ) / (hz * hz)
    fmid = params.f(0.5 * (u[:-1, :] + u[1:, :]))
    g[1:-1, 1:-1] = hx * hz * (-lap - 0.5 * (fmid[:-1, 1:-1] + fmid[1:, 1:-1]))
    return g


def project_box(field: CylinderField, phi: CrossSectionProfile) -> CylinderField:
    """Clip every value into [0, phi(x_i)]; boundary rows are unchanged."""
    _check_phi(field, phi)
    out = field.copy()
    np.clip(out.values, 0.0, phi.values[:, None], out=out.values)
    return out


def _ramp_init(field: CylinderField, phi: CrossSectionProfile, width=1.0):
    z = field.z_nodes()
    xi = 0.5 * (1.0 + np.tanh(z / width))
    xi = (xi - xi[0]) / (xi[-1] - xi[0])  # hit 0 and 1 exactly at the ends
    field.values[:] = phi.values[:, None] * xi[None, :]
    return field


def _geometric_ratio(a, b):
    """Decay ratio a/b clipped into a sane strictly-contracting range."""
    r = a / b if b > 0.0 else 0.5
    return min(max(r, 1e-6), 0.9999)


TAIL_TRUST = 1e-6  # relative scale below which tail values are solver debris


def _rebuild_tails(u, phi_values, hx, hz):
    """Rebuild the sub-resolution tails of each column geometrically.

    A gap of size eps at the box faces contributes ~eps to the gradient,
    so below roughly grad_tol the solver leaves clipped debris (including
    nodes parked exactly at 0 or phi).  Each column's deep tail and cap
    are replaced by the geometric decay measured at the last trusted
    rows; this restores the strictly increasing structure wherever it is
    float-representable and changes nothing above the trust scale.
    """
    nzp = u.shape[1]
    for i in range(1, u.shape[0] - 1):
        col = u[i]
        phii = phi_values[i]
        if phii <= 0.0:
            continue
        trust = TAIL_TRUST * phii
        above = np.nonzero(col >= trust)[0]
        if above.size:
            j_bot = int(above[0])
            if j_bot >= 2 and col[j_bot + 1] > col[j_bot] > 0.0:
                r = _geometric_ratio(col[j_bot], col[j_bot + 1])
                ks = np.arange(1, j_bot)
                col[1:j_bot] = col[j_bot] * r ** (j_bot - ks)
        gap = phii - col
        wide = np.nonzero(gap >= trust)[0]
        if wide.size:
            j_top = int(wide[-1])
            if j_top <= nzp - 3 and gap[j_top - 1] > gap[j_top] > 0.0:
                r = _geometric_ratio(gap[j_top], gap[j_top - 1])
                ks = np.arange(j_top + 1, nzp - 1)
                col[j_top + 1 : nzp - 1] = phii - gap[j_top] * r ** (ks - j_top)


def solve_truncated(n, params, phi, config, init=None):
    """Minimize the truncated energy with data 0 (bottom/sides), phi (top).

    Returns the converged field and a report with the minimum energy, the
    Hamiltonian at the bottom slice, and the half-maximum crossing height.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    field = new_field(config.nx, n, config.nz_per_unit, lam=params.lam)
    _check_phi(field, phi)
    if init is None:
        _ramp_init(field, phi, width=config.ramp_width)
    else:
        if init.values.shape != field.values.shape:
            raise ValueError("warm start resolution mismatch")
        field.values[:] = init.values
        field.shift = init.shift
    field.values[:, -1] = phi.values  # top Dirichlet data

    hx, hz = field.hx, field.hz
    upper = phi.values[:, None]
    shape = field.values.shape

    def project(v):
        w = np.clip(v, 0.0, upper)
        w[:, 0] = 0.0
        w[:, -1] = phi.values
        w[0, :] = 0.0
        w[-1, :] = 0.0
        return w

    def fun(v):
        field.values = v.reshape(shape)
        return energy_J(field, params)

    def grad(v):
        field.values = v.reshape(shape)
        return grad_J(field, params)

    alpha0 = 1.0 / (4.0 * (hz / hx + hx / hz) + 1.0)
    try:
        res = minimize_bb(
            field.values,
            fun,
            grad,
            project=project,
            grad_tol=config.grad_tol,
            max_iter=config.max_iter,
            alpha0=alpha0,
        )
    except ConvergenceError as err:
        field.values = err.result.x
        raise ConvergenceError(
            f"truncated solve at n={n}: {err}", err.result
        ) from None

    field.values = res.x
    _rebuild_tails(field.values, phi.values, hx, hz)

    from .diagnostics import hamiltonian_trace  # local: keeps imports acyclic

    trace = hamiltonian_trace(field, params)
    zn = find_zn(field, phi)
    report = TruncatedSolveReport(
        c_n=res.energy,
        H_n=float(trace.values[0]),
        z_n=zn,
        iterations=res.iterations,
        grad_norm=res.grad_norm,
    )
    return field, report


def find_zn(field: CylinderField, phi: CrossSectionProfile) -> float:
    """Height where the peak column crosses half the profile maximum.

    Linear interpolation between the bracketing slices; the midpoint of a
    flat run is used if the crossing level is hit exactly.
    """
    _check_phi(field, phi)
    i_star = int(np.argmax(phi.values))
    col = field.values[i_star, :]
    target = 0.5 * phi.values[i_star]
    z = field.z_nodes()

    if col[0] > target or col[-1] < target:
        raise DegenerateProfileError("degenerate profile: no half-maximum crossing")

    exact = np.where(col == target)[0]
    if exact.size:
        return float(0.5 * (z[exact[0]] + z[exact[-1]]))
    j = int(np.searchsorted(col > target, True)) - 1
    # col is nondecreasing along the peak column for converged fields
    frac = (target - col[j]) / (col[j + 1] - col[j])
    return float(z[j] + field.hz * frac)


def recenter(field: CylinderField, z_n, phi: CrossSectionProfile) -> CylinderField:
    """Integer-slice translation moving the crossing toward z = 0.

    Vacated bottom slices are filled with 0 and vacated top slices with
    phi, matching the constant extension of the boundary data; the
    sub-grid remainder of z_n is not interpolated.
    """
    _check_phi(field, phi)
    if abs(z_n) >= field.half_length:
        raise ValueError("crossing outside the field")
    s = int(round(z_n / field.hz))
    out = field.copy()
    if s == 0:
        return out
    u = field.values
    if s > 0:
        out.values[:, : -s or None] = u[:, s:]
        out.values[:, -s:] = phi.values[:, None]
    else:
        out.values[:, -s:] = u[:, :s]
        out.values[:, : -s] = 0.0
    out.shift = field.shift + s * field.hz
    return out


def _embed(field: CylinderField, n_new, phi: CrossSectionProfile, config) -> CylinderField:
    """Extend to a taller cylinder with 0 below and phi above."""
    out = new_field(config.nx, n_new, config.nz_per_unit, lam=field.lam)
    pad = (out.nz - field.nz) // 2
    out.values[:, pad : pad + field.nz + 1] = field.values
    out.values[:, pad + field.nz + 1 :] = phi.values[:, None]
    out.shift = field.shift
    return out


def prolong_field(field: CylinderField, phi_fine: CrossSectionProfile, config) -> CylinderField:
    """Bilinear prolongation onto a grid refined by an integer factor.

    Used to warm-start a fine-grid solve from a coarse converged field;
    the result is projected into the fine box.
    """
    out = new_field(config.nx, field.half_length, config.nz_per_unit, lam=field.lam)
    if config.nx % field.nx or out.nz % field.nz:
        raise ValueError("fine grid must refine the coarse grid by integer factors")
    xc = field.x_nodes()
    zc = field.z_nodes()
    xf = out.x_nodes()
    zf = out.z_nodes()
    tmp = np.empty((out.nx + 1, field.nz + 1))
    for j in range(field.nz + 1):
        tmp[:, j] = np.interp(xf, xc, field.values[:, j])
    for i in range(out.nx + 1):
        out.values[i, :] = np.interp(zf, zc, tmp[i, :])
    np.clip(out.values, 0.0, phi_fine.values[:, None], out=out.values)
    out.values[:, 0] = 0.0
    out.values[:, -1] = phi_fine.values
    out.values[0, :] = 0.0
    out.values[-1, :] = 0.0
    out.shift = field.shift
    return out


def _tail_errors(field: CylinderField, phi: CrossSectionProfile, margin=1.0):
    jb = int(round(margin / field.hz))
    bot = float(np.max(np.abs(field.values[:, jb])))
    top = float(np.max(np.abs(field.values[:, field.nz - jb] - phi.values)))
    return bot, top


def solve_heteroclinic(params, phi, config):
    """Continuation over the full n-schedule with recentering in between.

    Each cylinder is solved warm-started from the recentered previous
    minimizer extended by 0 below and phi above.  The tail and
    Hamiltonian criteria are recorded at every step and ``met`` reflects
    the final field; the schedule is not cut short even when the
    criteria hold early (the decay rate of this family satisfies them at
    the very first cylinder already, while callers want the full
    half-length).  A final polish solve removes the padded slices the
    last recentering may have introduced.
    """
    from .diagnostics import hamiltonian_trace  # local: keeps imports acyclic

    def step_record(n, solve_rep, rec):
        bot, top = _tail_errors(rec, phi)
        trace = hamiltonian_trace(rec, params)
        habs = float(np.max(np.abs(trace.values)))
        report.steps.append(
            ContinuationStep(
                n=n,
                c_n=solve_rep.c_n,
                H_n=solve_rep.H_n,
                z_n=solve_rep.z_n,
                iterations=solve_rep.iterations,
                grad_norm=solve_rep.grad_norm,
                bottom_err=bot,
                top_err=top,
                h_absmax=habs,
                h_drift=trace.drift,
            )
        )
        return bot, top, habs

    report = HeteroclinicReport()
    prev = None
    rec = None
    field = None
    for n in config.n_schedule:
        init = _embed(prev, n, phi, config) if prev is not None else None
        field, solve_rep = solve_truncated(n, params, phi, config, init=init)
        report.snapshots[n] = field.copy()
        rec = recenter(field, solve_rep.z_n, phi)
        step_record(n, solve_rep, rec)
        prev = rec
    if rec is None:
        raise ValueError("empty n_schedule")

    # polish: while the last recentering padded slices, re-solve from the
    # centered field so the returned minimizer is a plain converged solve
    n = config.n_schedule[-1]
    for _ in range(3):
        if rec.shift == field.shift:
            break
        field, solve_rep = solve_truncated(n, params, phi, config, init=rec)
        report.snapshots[n] = field.copy()
        rec = recenter(field, solve_rep.z_n, phi)

    bot, top = _tail_errors(rec, phi)
    habs = float(np.max(np.abs(hamiltonian_trace(rec, params).values)))
    report.met = (
        bot <= config.eps_tail and top <= config.eps_tail and habs <= config.eps_H
    )
    return rec, report
