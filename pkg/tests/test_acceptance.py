"""Acceptance suite: every criterion at its stated tolerance, one
printed PASS/FAIL line per criterion (run with -s or -rA to see them).

Three sub-checks are expected to fail on this nonlinearity family and
are asserted as stated anyway; the printed lines carry the measured
values.  In short: the slice-Hamiltonian scheme error is O(h^2) with a
large constant (amplitude ~7 fields), so its 1e-3 budget needs roughly
nx >= 256 rather than the stated nx = 64; and the limit profile is
approached at rate exp(-5.13 z), so beyond ~7 units from the front the
gap to it falls under one ulp and strict interiority/monotonicity are
not representable in float64.
"""

import math
import time

import numpy as np
import pytest

from heterocyl.cli import main
from heterocyl.config import RunConfig, save_config
from heterocyl.cross_section import energy_I, grad_I, make_profile
from heterocyl.cylinder import energy_J, grad_J, new_field
from heterocyl.diagnostics import hamiltonian_trace, stability_spectrum
from heterocyl.euler import (
    EulerFlow,
    euler_fields,
    euler_residual,
    non_shear_certificate,
    theta_analysis,
    theta_growth_probe,
)
from heterocyl.nonlinearity import QuinticParams

from oracles import fd_gradient, rel_err


def line(num, ok, detail):
    print(f"\ncriterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")


def crop_flow(flow, field, zhalf):
    j0 = int(round((field.half_length - zhalf) / field.hz))
    j1 = field.nz - j0
    return EulerFlow(
        u1=flow.u1[:, j0 : j1 + 1],
        u2=flow.u2[:, j0 : j1 + 1],
        pressure=flow.pressure[:, j0 : j1 + 1],
        window=(0.0, 1.0, -zhalf, zhalf),
        hx=flow.hx,
        hz=flow.hz,
        lam=flow.lam,
    )


def test_criterion_1_gradient_exactness():
    t0 = time.perf_counter()
    p = QuinticParams(0.8)
    rng = np.random.default_rng(2024)
    worst_1d = 0.0
    for _ in range(100):
        v = rng.uniform(-2.0, 2.0, 34)
        v[0] = v[-1] = 0.0
        prof = make_profile(v, p, action=0.0)
        g = grad_I(prof, p)

        def e1(w):
            return energy_I(make_profile(w, p, action=0.0), p)

        fd = fd_gradient(e1, v.copy())
        fd[0] = fd[-1] = 0.0
        worst_1d = max(worst_1d, rel_err(g, fd))

    worst_2d = 0.0
    f = new_field(16, 1.0, 16, lam=p.lam)
    for _ in range(100):
        f.values[:] = 0.0
        f.values[1:-1, 1:-1] = rng.uniform(-2.0, 2.0, (15, 31))
        g = grad_J(f, p)

        def e2(w):
            f.values = w
            return energy_J(f, p)

        fd = fd_gradient(e2, f.values.copy())
        fd[0, :] = fd[-1, :] = 0.0
        fd[:, 0] = fd[:, -1] = 0.0
        worst_2d = max(worst_2d, rel_err(g, fd))

    elapsed = time.perf_counter() - t0
    ok = worst_1d <= 1e-6 and worst_2d <= 1e-6 and elapsed < 10.0
    line(
        1,
        ok,
        f"1d rel err {worst_1d:.2e}, 2d rel err {worst_2d:.2e}, {elapsed:.1f}s",
    )
    assert worst_1d <= 1e-6
    assert worst_2d <= 1e-6
    assert elapsed < 10.0


def test_criterion_2_lambda_star_cross_oracle(calib512):
    bis = calib512["bis"]
    tm = calib512["timemap"]
    rel = abs(bis.lambda_star - tm) / tm
    shoot = calib512["shoot"]
    action = abs(shoot.action)
    match = float(np.max(np.abs(shoot.values - calib512["phi"].values)))
    elapsed = calib512["elapsed"]
    ok = rel <= 1e-3 and action <= 1e-4 and match <= 1e-4 and elapsed < 120.0
    line(
        2,
        ok,
        f"oracle rel diff {rel:.2e}, shoot action {action:.2e}, "
        f"profile match {match:.2e}, {elapsed:.0f}s",
    )
    assert rel <= 1e-3
    assert action <= 1e-4
    assert match <= 1e-4
    assert elapsed < 120.0


def test_criterion_3_hamiltonian_invariance(hetero64, hetero128):
    d64 = hamiltonian_trace(hetero64["field"], hetero64["params"]).drift
    d128 = hamiltonian_trace(hetero128["field"], hetero128["params"]).drift
    ratio = d64 / d128
    elapsed = hetero64["elapsed"] + hetero128["elapsed"]
    ok = d64 <= 1e-3 and ratio >= 3.0 and elapsed < 600.0
    line(
        3,
        ok,
        f"drift(nx=64) {d64:.3e} vs 1e-3 [O(h^2) floor of this family], "
        f"halving ratio {ratio:.2f} >= 3, {elapsed:.0f}s",
    )
    assert ratio >= 3.0
    assert elapsed < 600.0
    assert d64 <= 1e-3  # unattainable at nx=64: scheme error is ~1.3e-2


def test_criterion_4_truncated_minimizer_suite(hetero64):
    steps = hetero64["report"].steps
    snaps = hetero64["report"].snapshots
    phi = hetero64["phi"]
    ns = [4.0, 6.0, 8.0, 12.0]
    assert [s.n for s in steps] == ns

    c_pos = all(s.c_n > 0.0 for s in steps)
    c_mono = all(b.c_n <= a.c_n + 1e-10 for a, b in zip(steps, steps[1:]))
    h_neg = all(s.H_n < 0.0 for s in steps)
    box_exact = True
    margins = {}
    min_dzs = {}
    for n in ns:
        u = snaps[n].values
        gap = phi.values[:, None] - u
        box_exact &= bool(np.all(u >= 0.0) and np.all(gap >= 0.0))
        margins[n] = float(min(u[1:-1, 1:-1].min(), gap[1:-1, 1:-1].min()))
        min_dzs[n] = float(np.min(np.diff(u[1:-1, :], axis=1)))
    strict12 = all(m >= 1e-12 for m in margins.values())
    strict_dz = all(d > 0.0 for d in min_dzs.values())
    ok = c_pos and c_mono and h_neg and box_exact and strict12 and strict_dz
    line(
        4,
        ok,
        f"c_n>0 {c_pos}, c monotone {c_mono}, H_n<0 {h_neg}, box exact {box_exact}, "
        f"margins {[f'{margins[n]:.1e}' for n in ns]} (>=1e-12 fails beyond n=4: "
        f"gap underflows one ulp of phi), min dz {[f'{min_dzs[n]:.1e}' for n in ns]}",
    )
    assert c_pos and c_mono and h_neg and box_exact
    assert margins[4.0] >= 1e-12
    assert min_dzs[4.0] > 0.0 and min_dzs[6.0] > 0.0
    assert strict12  # float64: representable only through n=4 for this family
    assert strict_dz  # float64: representable only through n~6


def test_criterion_5_heteroclinic_limits(hetero64):
    steps = hetero64["report"].steps
    field = hetero64["field"]
    phi = hetero64["phi"]
    jb = int(round(1.0 / field.hz))
    bot = float(np.max(np.abs(field.values[:, jb])))
    top = float(np.max(np.abs(field.values[:, field.nz - jb] - phi.values)))
    bots = [s.bottom_err for s in steps]
    tops = [s.top_err for s in steps]
    dec = all(b <= a + 1e-12 for a, b in zip(bots, bots[1:])) and all(
        b <= a + 1e-12 for a, b in zip(tops, tops[1:])
    )
    habs = float(
        np.max(np.abs(hamiltonian_trace(field, hetero64["params"]).values))
    )
    ok = bot <= 1e-2 and top <= 1e-2 and dec and habs <= 1e-3
    line(
        5,
        ok,
        f"bottom {bot:.2e}, top {top:.2e}, decreasing {dec}, |H| {habs:.3e} "
        f"vs 1e-3 [same O(h^2) floor as criterion 3]",
    )
    assert bot <= 1e-2
    assert top <= 1e-2
    assert dec
    assert habs <= 1e-3  # unattainable at nx=64, see criterion 3


def test_criterion_6_stability(hetero64):
    params = hetero64["params"]
    zero = make_profile(np.zeros(257), params, action=0.0)
    st0 = stability_spectrum(zero, params)
    pi2 = math.pi**2
    dev = abs(st0.smallest_eig - pi2) / pi2
    stp = stability_spectrum(hetero64["phi"], params)
    ok = dev <= 0.01 and stp.smallest_eig >= -1e-6
    line(
        6,
        ok,
        f"zero-state eig {st0.smallest_eig:.6f} (pi^2 dev {dev:.2e}), "
        f"profile eig {stp.smallest_eig:.4f}",
    )
    assert dev <= 0.01
    assert stp.smallest_eig >= -1e-6


def test_criterion_7_euler_flow(hetero64, hetero128):
    f64 = hetero64["field"]
    flow64 = euler_fields(f64, hetero64["params"])
    flow128 = euler_fields(hetero128["field"], hetero128["params"])
    mom, div, order = euler_residual([flow64, flow128])

    cert = non_shear_certificate(crop_flow(flow64, f64, 2.0))

    phi = hetero64["phi"]
    shear = new_field(phi.nx, 2.0, 64, lam=f64.lam)
    shear.values[:] = phi.values[:, None]
    shear_cert = non_shear_certificate(euler_fields(shear, hetero64["params"]))

    ok = div <= 1e-12 and order >= 1.8 and cert > 1e-2 and shear_cert <= 1e-3
    line(
        7,
        ok,
        f"div {div:.2e}, momentum order {order:.3f}, certificate {cert:.3f}, "
        f"shear control {shear_cert:.2e}",
    )
    assert div <= 1e-12
    assert order >= 1.8
    assert cert > 1e-2
    assert shear_cert <= 1e-3


def test_criterion_8_no_critical_points(hetero64):
    field = hetero64["field"]
    _, s8 = theta_analysis(field, (0.0, 1.0, -8.0, 8.0))
    mins = []
    for half in (2.0, 4.0, 8.0):
        _, s = theta_analysis(field, (0.0, 1.0, -half, half))
        mins.append(s.min_rho)
    dec = mins[0] >= mins[1] >= mins[2]
    two_h = 2.0 * field.hx
    traces_ok = s8.trace_left_max <= two_h and s8.trace_right_dev <= two_h
    range_ok = s8.theta_interior_min > 0.0 and s8.theta_interior_max < math.pi
    _, s6 = theta_analysis(field, (0.0, 1.0, -6.0, 6.0))
    range6_ok = s6.theta_interior_min > 0.0 and s6.theta_interior_max < math.pi
    probe = theta_growth_probe(field, (4.0, 8.0, 16.0))
    vals = [v for _, v in probe]
    probe_ok = all(b >= a - 1e-9 for a, b in zip(vals, vals[1:])) and all(
        abs(v - math.pi) <= 0.1 for v in vals
    )
    ok = s8.min_rho > 0.0 and dec and traces_ok and range_ok and probe_ok
    line(
        8,
        ok,
        f"min rho {s8.min_rho:.2e}, window mins decreasing {dec}, traces ok "
        f"{traces_ok}, range open on +-8 {range_ok} (on +-6 {range6_ok}: beyond "
        f"z~7 d_z u quantizes to 0), probe {[f'{v:.4f}' for v in vals]}",
    )
    assert s8.min_rho > 0.0
    assert dec
    assert traces_ok
    assert probe_ok
    assert range6_ok
    assert range_ok  # exact 0/pi angles appear where the gap is sub-ulp


def test_criterion_9_determinism(tmp_path, calib32):
    lam = calib32["params"].lam
    outs = []
    for name in ("run1", "run2"):
        sub = tmp_path / name
        sub.mkdir()
        cfg = RunConfig(
            nx=32,
            nz_per_unit=32,
            n_schedule=(4.0, 6.0),
            lambda_override=lam,
            eps_H=1.0,
            output_dir=str(sub / "out"),
        )
        path = sub / "run.cfg"
        save_config(cfg, path)
        assert main(["solve", "--config", str(path)]) == 0
        outs.append(sub / "out")
    same = all(
        (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        for f in ("field.ckpt", "hamiltonian.csv", "solve_report.txt")
    )
    line(9, same, "checkpoints and reports byte-identical across reruns")
    assert same
