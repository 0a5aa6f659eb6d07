"""Variational construction of monotone transition layers on the strip
(0,1) x R for cubic-quintic nonlinearities, with diagnostics and the
induced steady planar flows."""

from .nonlinearity import QuinticParams, eval_f, eval_F, eval_fprime
from .cross_section import (
    CrossSectionProfile,
    LambdaStarResult,
    bvp_by_shooting,
    energy_I,
    grad_I,
    lambda_star_bisection,
    lambda_star_timemap,
    minimal_minimizer,
    minimize_I,
    shoot,
)
from .cylinder import (
    CylinderField,
    TruncatedSolveReport,
    energy_J,
    find_zn,
    grad_J,
    project_box,
    recenter,
    solve_heteroclinic,
    solve_truncated,
)
from .diagnostics import (
    HamiltonianTrace,
    StabilityReport,
    check_bounds,
    check_monotone,
    hamiltonian_trace,
    limit_profile_errors,
    stability_spectrum,
)
from .euler import (
    EulerFlow,
    ExtendedSolution,
    ThetaField,
    eval_extended,
    euler_fields,
    euler_residual,
    non_shear_certificate,
    pde_residual_extended,
    theta_analysis,
)
from .config import RunConfig

__version__ = "0.1.0"
