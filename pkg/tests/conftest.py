import time

import numpy as np
import pytest

from heterocyl.config import RunConfig
from heterocyl.cross_section import (
    bvp_by_shooting,
    lambda_star_bisection,
    lambda_star_timemap,
    minimal_minimizer,
    minimize_I,
)
from heterocyl.cylinder import prolong_field, recenter, solve_heteroclinic, solve_truncated
from heterocyl.nonlinearity import QuinticParams


@pytest.fixture(scope="session")
def lam_star_timemap():
    return lambda_star_timemap()


def _calibration(nx):
    bis = lambda_star_bisection(nx, tol=1e-9)
    params = QuinticParams(bis.bracket[0])
    phi, m = minimize_I(params, nx)
    return {"bis": bis, "params": params, "phi": phi, "m": m, "nx": nx}


@pytest.fixture(scope="session")
def calib32():
    return _calibration(32)


@pytest.fixture(scope="session")
def calib64():
    return _calibration(64)


@pytest.fixture(scope="session")
def calib512():
    t0 = time.perf_counter()
    bis = lambda_star_bisection(512, tol=1e-9)
    tm = lambda_star_timemap()
    params = QuinticParams(bis.bracket[0])
    phi, m = minimize_I(params, 512)
    shoot = bvp_by_shooting(params, 512)
    elapsed = time.perf_counter() - t0
    return {
        "bis": bis,
        "timemap": tm,
        "params": params,
        "phi": phi,
        "m": m,
        "shoot": shoot,
        "elapsed": elapsed,
    }


@pytest.fixture(scope="session")
def trunc32(calib32):
    """Warm truncated solves n = 4 and 6 on the coarse grid."""
    cfg = RunConfig(nx=32, nz_per_unit=32)
    out = {}
    for n in (4.0, 6.0):
        field, rep = solve_truncated(n, calib32["params"], calib32["phi"], cfg)
        out[n] = (field, rep)
    return {"cfg": cfg, "solves": out, **calib32}


@pytest.fixture(scope="session")
def hetero64(calib64):
    cfg = RunConfig(nx=64, nz_per_unit=64)
    t0 = time.perf_counter()
    field, report = solve_heteroclinic(calib64["params"], calib64["phi"], cfg)
    elapsed = time.perf_counter() - t0
    return {
        "cfg": cfg,
        "field": field,
        "report": report,
        "elapsed": elapsed,
        **calib64,
    }


@pytest.fixture(scope="session")
def hetero128(hetero64):
    """Converged heteroclinic on the halved grid, warm-started by
    prolongation of the nx=64 field; its own parameter calibration."""
    t0 = time.perf_counter()
    calib = _calibration(128)
    cfg = RunConfig(nx=128, nz_per_unit=128)
    init = prolong_field(hetero64["field"], calib["phi"], cfg)
    n_final = hetero64["cfg"].n_schedule[-1]
    field, rep = solve_truncated(n_final, calib["params"], calib["phi"], cfg, init=init)
    rec = recenter(field, rep.z_n, calib["phi"])
    if rec.shift != field.shift:
        field, rep = solve_truncated(n_final, calib["params"], calib["phi"], cfg, init=rec)
        rec = recenter(field, rep.z_n, calib["phi"])
    elapsed = time.perf_counter() - t0
    return {"cfg": cfg, "field": rec, "elapsed": elapsed, **calib}
