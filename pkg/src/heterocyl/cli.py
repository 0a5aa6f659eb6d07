"""Command-line front end: lambda-star, solve, verify, euler-export, report.

Exit codes: 0 success, 1 usage or I/O error, 2 oracle disagreement,
3 non-convergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import cross_section, diagnostics, euler, storage
from .config import RunConfig, fmt, load_config
from .cylinder import solve_heteroclinic
from .descent import ConvergenceError
from .nonlinearity import QuinticParams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ORACLE = 2
EXIT_NONCONV = 3
EXIT_VERIFY = 4

DIV_TOL = 1e-12
NON_SHEAR_MIN = 1e-2
STABILITY_FLOOR = -1e-6
MOMENTUM_ORDER_MIN = 1.8


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    env_out = os.environ.get("HETEROCYL_OUTPUT_DIR")
    if env_out:
        cfg = cfg.replace(output_dir=env_out)
    overrides = {}
    for name, attr in (
        ("nx", "nx"),
        ("nz_per_unit", "nz_per_unit"),
        ("grad_tol", "grad_tol"),
        ("eps_tail", "eps_tail"),
        ("eps_H", "eps_h"),
        ("lambda_tol", "lambda_tol"),
        ("lambda_override", "lambda_override"),
        ("output_dir", "output_dir"),
        ("seed", "seed"),
        ("max_iter", "max_iter"),
        ("ramp_width", "ramp_width"),
    ):
        v = getattr(args, attr, None)
        if v is not None:
            overrides[name] = v
    if getattr(args, "n_schedule", None):
        overrides["n_schedule"] = tuple(
            float(s) for s in args.n_schedule.split(",") if s.strip()
        )
    return cfg.replace(**overrides) if overrides else cfg


def _out_dir(cfg) -> Path:
    if not cfg.output_dir:
        raise SystemExit2("output_dir is required (flag, config, or env)")
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


class SystemExit2(Exception):
    """Usage-level failure; mapped to exit code 1."""


def _calibrate(cfg, nx):
    """(params, phi, bisection result) at resolution nx.

    The solve uses the low end of the final bracket and the descent
    minimizer there: its action is slightly negative by construction,
    which keeps the truncated energies decreasing in n instead of being
    tilted upward by the extension rows.
    """
    if cfg.lambda_override is not None:
        params = QuinticParams(cfg.lambda_override)
        phi, _ = cross_section.minimize_I(params, nx)
        if phi.max_norm() < 1e-3:
            phi = cross_section.minimal_minimizer(params, nx)
        return params, phi, None
    bis = cross_section.lambda_star_bisection(nx, tol=min(1e-9, cfg.lambda_tol))
    params = QuinticParams(bis.bracket[0])
    phi, _ = cross_section.minimize_I(params, nx)
    return params, phi, bis


def cmd_lambda_star(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg)
    bis = cross_section.lambda_star_bisection(cfg.nx, tol=min(1e-9, cfg.lambda_tol))
    tm = cross_section.lambda_star_timemap()
    rel = abs(bis.lambda_star - tm) / tm
    agree = rel <= cfg.lambda_tol

    rows = [
        ("lambda_star", bis.lambda_star),
        ("bracket_lo", bis.bracket[0]),
        ("bracket_hi", bis.bracket[1]),
        ("lambda_star_timemap", tm),
        ("relative_disagreement", rel, cfg.lambda_tol, agree),
        ("phi_action", bis.phi.action),
        ("phi_max", bis.phi.max_norm()),
    ]
    rows += [(f"m_trace_{i}", f"{fmt(l)} {fmt(m)}") for i, (l, m) in enumerate(bis.m_trace)]
    storage.write_report(out / "lambda_star.txt", "lambda-star calibration", rows)
    storage.save_profile_csv(bis.phi, out / "phi.csv")
    print(f"lambda_star = {fmt(bis.lambda_star)} (time map {fmt(tm)}, rel {rel:.3e})")
    return EXIT_OK if agree else EXIT_ORACLE


def cmd_solve(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg)
    params, phi, bis = _calibrate(cfg, cfg.nx)

    code = EXIT_OK
    try:
        field, report = solve_heteroclinic(params, phi, cfg)
        met = report.met
    except ConvergenceError as err:
        field = None
        met = False
        code = EXIT_NONCONV
        print(f"solve did not converge: {err}", file=sys.stderr)

    rows = [
        ("lambda", params.lam),
        ("lambda_star_bracket", "none" if bis is None else fmt(bis.lambda_star)),
        ("phi_action", phi.action),
        ("met", met),
    ]
    if field is not None:
        trace = diagnostics.hamiltonian_trace(field, params)
        storage.save_field(field, out / "field.ckpt")
        storage.save_trace_csv(trace, out / "hamiltonian.csv")
        rows += [
            ("half_length", field.half_length),
            ("h_absmax", float(np.max(np.abs(trace.values)))),
            ("h_drift", trace.drift),
        ]
        header = "n c_n H_n z_n iterations grad_norm bottom_err top_err h_absmax h_drift"
        rows.append(("steps", header))
        for s in report.steps:
            rows.append(
                (
                    f"step_n_{fmt(s.n)}",
                    " ".join(
                        fmt(v)
                        for v in (
                            s.c_n,
                            s.H_n,
                            s.z_n,
                            s.iterations,
                            s.grad_norm,
                            s.bottom_err,
                            s.top_err,
                            s.h_absmax,
                            s.h_drift,
                        )
                    ),
                )
            )
    storage.write_report(out / "solve_report.txt", "heteroclinic solve", rows)
    if code == EXIT_OK and not met:
        code = EXIT_NONCONV
    print(f"solve finished, met={met}")
    return code


def build_verification(field, cfg):
    """All checks on a loaded checkpoint; returns (rows, all_passed)."""
    params = QuinticParams(field.lam)
    rows = [("lambda", field.lam), ("nx", field.nx), ("half_length", field.half_length)]
    checks = []

    try:
        phi = cross_section.minimal_minimizer(params, field.nx)
        phi_ok = True
    except (cross_section.NoSolutionError, ConvergenceError):
        phi = field.top_profile(params)
        phi_ok = False
    checks.append(("phi_available", phi_ok, True, phi_ok))
    rows.append(("phi_action", phi.action))
    rows.append(
        ("top_data_vs_phi", float(np.max(np.abs(field.values[:, -1] - phi.values))))
    )

    bounds = diagnostics.check_bounds(field, phi)
    checks.append(("box_violation", bounds.max_violation, 0.0, bounds.max_violation <= 0.0))
    checks.append(("interior_margin", bounds.min_margin, 0.0, bounds.min_margin > 0.0))

    mono = diagnostics.check_monotone(field)
    checks.append(("monotone_min_dz", mono.min_interior_dz, 0.0, mono.ok))

    margin = 1.0
    bottom, top = diagnostics.limit_profile_errors(field, phi, margin)
    checks.append(("bottom_tail", bottom, cfg.eps_tail, bottom <= cfg.eps_tail))
    checks.append(("top_tail", top, cfg.eps_tail, top <= cfg.eps_tail))

    trace = diagnostics.hamiltonian_trace(field, params)
    habs = float(np.max(np.abs(trace.values)))
    checks.append(("h_absmax", habs, cfg.eps_H, habs <= cfg.eps_H))
    checks.append(("h_drift", trace.drift, cfg.eps_H, trace.drift <= cfg.eps_H))

    zero256 = cross_section.make_profile(np.zeros(257), params, action=0.0)
    st0 = diagnostics.stability_spectrum(zero256, params)
    pi2 = math.pi * math.pi
    dev0 = abs(st0.smallest_eig - pi2) / pi2
    checks.append(("stability_zero_pi2_reldev", dev0, 0.01, dev0 <= 0.01))
    stp = diagnostics.stability_spectrum(phi, params)
    checks.append(
        ("stability_phi_min_eig", stp.smallest_eig, STABILITY_FLOOR,
         stp.smallest_eig >= STABILITY_FLOOR)
    )

    flow = euler.euler_fields(field, params)
    mom, div, order = euler.euler_residual(flow, h_refinements=2)
    rows.append(("momentum_residual", mom))
    # single-grid subsampled order is a rough indicator only; the real
    # order study needs flows at two resolutions (see euler_residual)
    rows.append(("momentum_order_single_grid", order))
    checks.append(("div_residual", div, DIV_TOL, div <= DIV_TOL))

    zwin = min(2.0, field.half_length - 1.0)
    ns = euler.non_shear_certificate(_crop_flow(flow, field, zwin))
    checks.append(("non_shear_certificate", ns, NON_SHEAR_MIN, ns > NON_SHEAR_MIN))

    twin = min(8.0, field.half_length - 1.0)
    _, summary = euler.theta_analysis(field, (0.0, 1.0, -twin, twin))
    checks.append(("stagnation_min_rho", summary.min_rho, 0.0, summary.min_rho > 0.0))
    two_h = 2.0 * field.hx
    checks.append(
        ("theta_trace_left", summary.trace_left_max, two_h,
         summary.trace_left_max <= two_h)
    )
    checks.append(
        ("theta_trace_right", summary.trace_right_dev, two_h,
         summary.trace_right_dev <= two_h)
    )
    range_ok = summary.theta_interior_min > 0.0 and summary.theta_interior_max < math.pi
    checks.append(("theta_range_open", range_ok, True, range_ok))
    rows.append(("bcn_residual", summary.bcn_residual))

    all_passed = all(c[3] for c in checks)
    return rows + checks, all_passed


def _crop_flow(flow, field, zhalf):
    j0 = int(round((field.half_length - zhalf) / field.hz))
    j1 = field.nz - j0
    return euler.EulerFlow(
        u1=flow.u1[:, j0 : j1 + 1],
        u2=flow.u2[:, j0 : j1 + 1],
        pressure=flow.pressure[:, j0 : j1 + 1],
        window=(0.0, 1.0, -zhalf, zhalf),
        hx=flow.hx,
        hz=flow.hz,
    )


def cmd_verify(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg)
    try:
        field = storage.load_field(args.checkpoint)
    except storage.CorruptCheckpointError as err:
        print(f"corrupt checkpoint: {err}", file=sys.stderr)
        return EXIT_USAGE
    rows, ok = build_verification(field, cfg)
    storage.write_report(out / "verification.txt", "verification report", rows)
    print(f"verification {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_euler_export(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg)
    try:
        field = storage.load_field(args.checkpoint)
    except storage.CorruptCheckpointError as err:
        print(f"corrupt checkpoint: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        window = tuple(float(v) for v in args.window.split(","))
        if len(window) != 4:
            raise ValueError
    except ValueError:
        print("window must be x0,x1,z0,z1", file=sys.stderr)
        return EXIT_USAGE

    sol = euler.ExtendedSolution(field, args.kind)
    if args.kind == "strip" and (window[0] < 0.0 or window[1] > 1.0):
        print("strip window must satisfy 0 <= x <= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.kind == "half_plane" and window[0] < 0.0:
        print("half-plane window must satisfy x >= 0", file=sys.stderr)
        return EXIT_USAGE
    if window[1] <= window[0] or window[3] <= window[2]:
        print("window must have positive extent", file=sys.stderr)
        return EXIT_USAGE

    params = QuinticParams(field.lam)
    flow = euler.extended_flow(sol, window, params)
    storage.save_flow_csv(flow, out / "euler_flow.csv")
    tf = euler.theta_from_flow(flow)
    storage.save_theta_csv(tf, out / "theta_field.csv")
    print(f"exported flow and angle field on {window}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.output_dir:
        print("output_dir is required", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.output_dir)
    names = ("lambda_star.txt", "solve_report.txt", "verification.txt")
    found = False
    for name in names:
        p = out / name
        if p.exists():
            found = True
            sys.stdout.write(p.read_text(encoding="utf-8"))
    if not found:
        print("no reports found", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def _add_common(sub):
    sub.add_argument("--config", default=None)
    sub.add_argument("--output-dir", dest="output_dir", default=None)
    sub.add_argument("--nx", type=int, default=None)
    sub.add_argument("--nz-per-unit", dest="nz_per_unit", type=int, default=None)
    sub.add_argument("--n-schedule", dest="n_schedule", default=None)
    sub.add_argument("--grad-tol", dest="grad_tol", type=float, default=None)
    sub.add_argument("--eps-tail", dest="eps_tail", type=float, default=None)
    sub.add_argument("--eps-h", dest="eps_h", type=float, default=None)
    sub.add_argument("--lambda-tol", dest="lambda_tol", type=float, default=None)
    sub.add_argument(
        "--lambda-override", dest="lambda_override", type=float, default=None
    )
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    sub.add_argument("--ramp-width", dest="ramp_width", type=float, default=None)


def build_parser():
    p = argparse.ArgumentParser(prog="heterocyl")
    subs = p.add_subparsers(dest="command", required=True)

    s = subs.add_parser("lambda-star", help="calibrate the critical parameter")
    _add_common(s)
    s.set_defaults(func=cmd_lambda_star)

    s = subs.add_parser("solve", help="solve for the monotone transition field")
    _add_common(s)
    s.set_defaults(func=cmd_solve)

    s = subs.add_parser("verify", help="run all checks on a checkpoint")
    s.add_argument("checkpoint")
    _add_common(s)
    s.set_defaults(func=cmd_verify)

    s = subs.add_parser("euler-export", help="export flow and angle CSVs")
    s.add_argument("checkpoint")
    s.add_argument("--kind", choices=euler.DOMAIN_KINDS, default="strip")
    s.add_argument("--window", default="0,1,-8,8")
    _add_common(s)
    s.set_defaults(func=cmd_euler_export)

    s = subs.add_parser("report", help="print saved reports")
    _add_common(s)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code not in (0, None) else 0
    try:
        return args.func(args)
    except SystemExit2 as err:
        print(str(err), file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
