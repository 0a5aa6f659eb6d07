"""The one-dimensional Dirichlet problem -phi'' = f(phi) on (0,1).

Grid side: a forward-difference / midpoint discretization of the action
integral, its exact gradient, multistart descent for the infimum m(lam),
and a bisection that locates the largest lam with m(lam) < 0.

Grid-free side: two independent oracles for the same problem, a shooting
integrator and a first-integral time map, used to cross-check the grid
calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .descent import ConvergenceError, minimize_bb
from .nonlinearity import QuinticParams, eval_F, eval_f

# Multistart sine amplitudes.  Amplitudes above pi are required: descent
# from c*sin(pi x) collapses to zero whenever c < pi for this family, and
# the nonzero branch sits near max-norm 6 at the critical parameter.
DEFAULT_AMPLITUDES = (0.5, 1.0, 2.0, 3.0, 4.0, 6.0)

COLLAPSE_TOL = 1e-3  # below this max-norm a minimizer counts as the zero state
EPS_NEG = 1e-6  # m below -EPS_NEG counts as strictly negative


class BlowUpError(RuntimeError):
    """Shooting trajectory left |phi| <= 10."""


class NoSolutionError(RuntimeError):
    """No positive boundary-value solution was detected."""


class DegenerateFamilyError(RuntimeError):
    """The sign change of m(lam) could not be bracketed."""


@dataclass
class CrossSectionProfile:
    """Grid function on (0,1) with zero endpoints."""

    nx: int
    values: np.ndarray
    action: float
    lam: float

    def x_nodes(self):
        return np.linspace(0.0, 1.0, self.nx + 1)

    def max_norm(self):
        return float(np.max(np.abs(self.values)))


@dataclass
class LambdaStarResult:
    lambda_star: float
    bracket: tuple
    phi: CrossSectionProfile
    m_trace: list = field(default_factory=list)


def _check_profile(values, nx):
    if nx < 2:
        raise ValueError(f"need nx >= 2, got {nx}")
    if values.shape != (nx + 1,):
        raise ValueError("values must have nx+1 entries")


def _energy(values, hx, params):
    d = np.diff(values) / hx
    mid = 0.5 * (values[:-1] + values[1:])
    return float(hx * np.sum(0.5 * d * d - params.F(mid)))


def _gradient(values, hx, params):
    g = np.zeros_like(values)
    fm = params.f(0.5 * (values[:-1] + values[1:]))
    lap = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / (hx * hx)
    g[1:-1] = hx * (-lap - 0.5 * (fm[:-1] + fm[1:]))
    return g


def make_profile(values, params, action=None) -> CrossSectionProfile:
    values = np.asarray(values, dtype=float)
    nx = values.shape[0] - 1
    _check_profile(values, nx)
    if action is None:
        action = _energy(values, 1.0 / nx, params)
    return CrossSectionProfile(nx=nx, values=values, action=action, lam=params.lam)


def energy_I(profile: CrossSectionProfile, params) -> float:
    """Discrete action: forward differences per interval, midpoint F."""
    _check_profile(profile.values, profile.nx)
    return _energy(profile.values, 1.0 / profile.nx, params)


def grad_I(profile: CrossSectionProfile, params) -> np.ndarray:
    """Exact gradient of energy_I; endpoint entries are zero."""
    _check_profile(profile.values, profile.nx)
    return _gradient(profile.values, 1.0 / profile.nx, params)


def default_starts(nx, params, amplitudes=DEFAULT_AMPLITUDES):
    x = np.linspace(0.0, 1.0, nx + 1)
    starts = [make_profile(np.zeros(nx + 1), params, action=0.0)]
    s = np.sin(np.pi * x)
    s[0] = s[-1] = 0.0
    for a in amplitudes:
        starts.append(make_profile(a * s, params))
    return starts


def minimize_I(params, nx, starts=None, grad_tol=None, max_iter=60_000):
    """Multistart descent; returns (best profile, m = its action).

    The zero profile is always among the starts, so m <= 0 up to the
    solver floor.
    """
    if starts is None:
        starts = default_starts(nx, params)
    hx = 1.0 / nx
    if grad_tol is None:
        grad_tol = 1e-9 * nx

    best = None
    best_converged = True
    for p in starts:
        if p.values.shape != (nx + 1,):
            raise ValueError("start resolution mismatch")
        try:
            res = minimize_bb(
                p.values,
                lambda v: _energy(v, hx, params),
                lambda v: _gradient(v, hx, params),
                grad_tol=grad_tol,
                max_iter=max_iter,
                alpha0=hx / 8.0,
            )
            converged = True
        except ConvergenceError as err:
            res = err.result
            converged = False
        if best is None or res.energy < best.energy:
            best = res
            best_converged = converged

    prof = make_profile(best.x, params, action=best.energy)
    if not best_converged:
        raise ConvergenceError(
            "lowest-energy start did not converge", best
        )
    return prof, best.energy


def _m_value(params, nx, warm=None, grad_tol=None, lean=False):
    if lean and warm is not None:
        # refinement phase: the zero state, the warm nonzero branch, and
        # one high-amplitude probe are enough once a bracket exists
        starts = default_starts(nx, params, amplitudes=(DEFAULT_AMPLITUDES[-1],))
    else:
        starts = default_starts(nx, params)
    if warm is not None and warm.values.shape == (nx + 1,):
        starts.append(make_profile(warm.values.copy(), params))
    return minimize_I(params, nx, starts=starts, grad_tol=grad_tol)


def lambda_star_bisection(nx, tol=1e-9, lam_seed=1.0, lam_range=(1e-4, 1e4)) -> LambdaStarResult:
    """Bisect lam on the predicate m(lam) < -EPS_NEG.

    The initial bracket is grown by doubling/halving from ``lam_seed``.
    Minimizers found on the negative side warm-start later evaluations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    trace = []
    warm = None
    m_low = -EPS_NEG

    def m_at(lam, lean=False):
        nonlocal warm, m_low
        prof, m = _m_value(QuinticParams(lam), nx, warm=warm, lean=lean)
        trace.append((lam, m))
        if m < -EPS_NEG and prof.max_norm() > COLLAPSE_TOL:
            warm = prof
            m_low = m
        return m

    lo_lam, hi_lam = None, None
    lam = lam_seed
    if m_at(lam) < -EPS_NEG:
        lo_lam = lam
        while lam < lam_range[1]:
            lam *= 2.0
            if m_at(lam) >= -EPS_NEG:
                hi_lam = lam
                break
            lo_lam = lam
    else:
        hi_lam = lam
        while lam > lam_range[0]:
            lam *= 0.5
            if m_at(lam) < -EPS_NEG:
                lo_lam = lam
                break
            hi_lam = lam
    if lo_lam is None or hi_lam is None:
        raise DegenerateFamilyError("family degenerate at this resolution")

    while hi_lam - lo_lam > tol:
        mid = 0.5 * (lo_lam + hi_lam)
        if mid <= lo_lam or mid >= hi_lam:
            break
        if m_at(mid, lean=True) < -EPS_NEG:
            lo_lam = mid
        else:
            hi_lam = mid

    lam_star = 0.5 * (lo_lam + hi_lam)
    # at the midpoint of a wide bracket the level of the nonzero branch
    # moves with the bracket, so the zero-action window must follow it
    zero_tol = max(1e-4, 2.0 * abs(m_low))
    phi = minimal_minimizer(QuinticParams(lam_star), nx, zero_action_tol=zero_tol)
    return LambdaStarResult(
        lambda_star=lam_star, bracket=(lo_lam, hi_lam), phi=phi, m_trace=trace
    )


# ---------------------------------------------------------------------------
# shooting oracle
# ---------------------------------------------------------------------------

BLOWUP_LIMIT = 10.0


def shoot(params, slope, steps):
    """RK4 for phi'' = -f(phi), phi(0) = 0, phi'(0) = slope, on [0,1].

    Returns (phi(1), trajectory profile on the uniform ``steps`` grid).
    """
    if steps < 16:
        raise ValueError("need steps >= 16")
    h = 1.0 / steps
    u = 0.0
    v = float(slope)
    traj = np.empty(steps + 1)
    traj[0] = u
    for k in range(steps):
        k1u, k1v = v, -eval_f(params, u)
        k2u, k2v = v + 0.5 * h * k1v, -eval_f(params, u + 0.5 * h * k1u)
        k3u, k3v = v + 0.5 * h * k2v, -eval_f(params, u + 0.5 * h * k2u)
        k4u, k4v = v + h * k3v, -eval_f(params, u + h * k3u)
        u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if abs(u) > BLOWUP_LIMIT:
            raise BlowUpError(f"trajectory blow-up at x={(k + 1) * h:.4f}")
        traj[k + 1] = u
    return u, make_profile(traj, params)


def _scan_endpoint(params, slope, steps):
    try:
        end, _ = shoot(params, slope, steps)
        return end
    except BlowUpError:
        return math.nan


def separatrix_slope(params):
    """Initial slope of the orbit reaching the potential maximum."""
    lam = params.lam
    if lam <= 0.0:
        return 9.7  # cubic-only: stay under the blow-up guard
    fmax = 1.0 / (12.0 * lam * lam)
    return math.sqrt(2.0 * fmax)


def bvp_by_shooting(params, steps, nscan=240):
    """Positive solution of the boundary-value problem by slope bisection.

    The slope scan runs up to just below the separatrix slope of the
    family and keeps the largest sign-change bracket, which is the branch
    the energy minimizer lives on.
    """
    smax = 0.999 * separatrix_slope(params)
    slopes = np.geomspace(1e-4, smax, nscan)
    ends = np.array([_scan_endpoint(params, s, steps) for s in slopes])

    brackets = []
    for a, b, ea, eb in zip(slopes[:-1], slopes[1:], ends[:-1], ends[1:]):
        if math.isnan(ea) or math.isnan(eb):
            continue
        if ea > 0.0 >= eb or ea <= 0.0 < eb:
            brackets.append((a, b))
    if not brackets:
        raise NoSolutionError("no positive solution detected")

    for lo, hi in reversed(brackets):
        elo = _scan_endpoint(params, lo, steps)
        mid = 0.5 * (lo + hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            em = _scan_endpoint(params, mid, steps)
            if math.isnan(em):
                break
            if abs(em) <= 1e-10:
                break
            if (em > 0.0) == (elo > 0.0):
                lo, elo = mid, em
            else:
                hi = mid
        end, prof = shoot(params, mid, steps)
        if abs(end) <= 1e-10 and np.min(prof.values[1:-1]) > 0.0:
            v = prof.values.copy()
            v[-1] = 0.0  # pin the endpoint; the residual is below 1e-10
            return make_profile(v, params)
    raise NoSolutionError("no positive solution detected")


# ---------------------------------------------------------------------------
# first-integral time map oracle
# ---------------------------------------------------------------------------

_GL_CACHE = {}


def _gl(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.25 * np.pi * (x + 1.0), 0.25 * np.pi * w)
    return _GL_CACHE[n]


def _halfwidth_action(params, m_top, nquad=192):
    """(time 0 -> m_top, action of the arc) for the first integral.

    phi = m_top sin(psi) removes the turning-point singularity: the gap
    E - F(phi) vanishes like cos^2(psi), so both integrands are smooth.
    """
    psi, w = _gl(nquad)
    s = np.sin(psi)
    c = np.cos(psi)
    e_top = eval_F(params, m_top)
    gap = e_top - params.F(m_top * s)
    gap = np.maximum(gap, 1e-300)
    root = np.sqrt(2.0 * gap)
    t_half = float(np.sum(w * m_top * c / root))
    action = float(2.0 * np.sum(w * root * m_top * c) - e_top)
    return t_half, action


def _upper_branch(params, nscan=400):
    """Turning value M on the slow branch with half-width exactly 1/2.

    Returns None when even the fastest orbit is slower than 1/2 (no
    nonzero solution for this lam).
    """
    tstar = 1.0 / math.sqrt(params.lam)
    ms = np.linspace(0.02, 0.99999, nscan) * tstar
    times = np.array([_halfwidth_action(params, m)[0] for m in ms])
    k = int(np.argmin(times))
    if times[k] > 0.5:
        return None
    hi_idx = k
    while hi_idx < nscan - 1 and times[hi_idx] <= 0.5:
        hi_idx += 1
    lo, hi = ms[k], ms[hi_idx]
    if times[hi_idx] <= 0.5:
        hi = 0.9999999 * tstar
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _halfwidth_action(params, mid)[0] <= 0.5:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * tstar:
            break
    return 0.5 * (lo + hi)


def timemap_residuals(lam):
    """(half-width residual, action) at the slow branch for this lam.

    Returns (None, None) when the branch does not exist.
    """
    params = QuinticParams(lam)
    m = _upper_branch(params)
    if m is None:
        return None, None
    t_half, action = _halfwidth_action(params, m)
    return t_half - 0.5, action


def lambda_star_timemap(tol=1e-6, lam_seed=1.0, lam_range=(1e-4, 1e4), max_iter=200):
    """Grid-free critical parameter from the two first-integral conditions.

    Bisects lam on the sign of the arc action evaluated on the branch
    where the half-width condition holds; infeasible lam (no branch)
    counts as the positive side.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def act(lam):
        _, a = timemap_residuals(lam)
        return math.inf if a is None else a

    lam = lam_seed
    lo_lam = hi_lam = None
    if act(lam) < 0.0:
        lo_lam = lam
        while lam < lam_range[1]:
            lam *= 2.0
            if act(lam) >= 0.0:
                hi_lam = lam
                break
            lo_lam = lam
    else:
        hi_lam = lam
        while lam > lam_range[0]:
            lam *= 0.5
            if act(lam) < 0.0:
                lo_lam = lam
                break
            hi_lam = lam
    if lo_lam is None or hi_lam is None:
        raise NoSolutionError("no action sign change in the family range")

    mid = 0.5 * (lo_lam + hi_lam)
    for _ in range(max_iter):
        mid = 0.5 * (lo_lam + hi_lam)
        a = act(mid)
        if math.isfinite(a) and abs(a) <= 0.5 * tol:
            break
        if a < 0.0:
            lo_lam = mid
        else:
            hi_lam = mid
        if hi_lam - lo_lam < 1e-15 * mid:
            break

    t_res, a_res = timemap_residuals(mid)
    if t_res is None or abs(t_res) > tol or abs(a_res) > tol:
        raise NoSolutionError(
            f"time-map residuals not below tol at bracket ({lo_lam}, {hi_lam})"
        )
    return mid


# ---------------------------------------------------------------------------
# minimal positive zero-action profile
# ---------------------------------------------------------------------------


def minimal_minimizer(params, nx, zero_action_tol=1e-4, return_candidates=False):
    """Smallest-max-norm positive profile with action within tolerance of 0.

    Candidates come from the multistart descent and from the shooting
    oracle.  The pointwise-ordering of candidates against the returned
    one is checked and flagged rather than assumed.
    """
    candidates = []
    prof, _ = _m_value(params, nx)
    if prof.max_norm() > COLLAPSE_TOL and abs(prof.action) <= zero_action_tol:
        if np.min(prof.values[1:-1]) > 0.0:
            candidates.append(prof)
    try:
        sprof = bvp_by_shooting(params, nx)
        if abs(sprof.action) <= zero_action_tol:
            candidates.append(sprof)
    except (NoSolutionError, BlowUpError):
        pass
    if not candidates:
        raise NoSolutionError(
            f"no positive zero-action minimizer at lam={params.lam!r}"
        )

    candidates.sort(key=lambda p: p.max_norm())
    minimal = candidates[0]
    ordered = all(
        bool(np.all(c.values >= minimal.values - 1e-6)) for c in candidates
    )
    if return_candidates:
        return minimal, candidates, ordered
    return minimal
