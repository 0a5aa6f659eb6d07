"""Checkpoints, CSV exports, and structured-text reports.

Everything is written with 17 significant digits and fixed key order, so
identical runs produce byte-identical artifacts.
"""

from __future__ import annotations

import numpy as np

from .config import fmt
from .cylinder import CylinderField

FIELD_HEADER = "heterocyl-field v1"


class CorruptCheckpointError(RuntimeError):
    pass


def save_field(field: CylinderField, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(FIELD_HEADER + "\n")
        fh.write(
            ",".join(
                [
                    str(field.nx),
                    str(field.nz),
                    fmt(field.half_length),
                    fmt(field.shift),
                    fmt(field.lam),
                ]
            )
            + "\n"
        )
        for row in field.values:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def load_field(path) -> CylinderField:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header != FIELD_HEADER:
                raise CorruptCheckpointError(f"bad header {header!r}")
            meta = fh.readline().rstrip("\n").split(",")
            if len(meta) != 5:
                raise CorruptCheckpointError("bad metadata line")
            nx, nz = int(meta[0]), int(meta[1])
            half_length, shift, lam = (float(v) for v in meta[2:])
            values = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as err:
        raise CorruptCheckpointError(str(err)) from err
    if values.shape != (nx + 1, nz + 1):
        raise CorruptCheckpointError(
            f"value block {values.shape} does not match nx={nx}, nz={nz}"
        )
    return CylinderField(
        nx=nx,
        nz=nz,
        half_length=half_length,
        values=values,
        hx=1.0 / nx,
        hz=2.0 * half_length / nz,
        shift=shift,
        lam=lam,
    )


def save_profile_csv(profile, path):
    x = profile.x_nodes()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,phi\n")
        for xi, vi in zip(x, profile.values):
            fh.write(f"{fmt(xi)},{fmt(vi)}\n")


def save_trace_csv(trace, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,H\n")
        for t, h in zip(trace.heights, trace.values):
            fh.write(f"{fmt(t)},{fmt(h)}\n")


def save_flow_csv(flow, path):
    xs = flow.window[0] + flow.hx * np.arange(flow.u1.shape[0])
    zs = flow.window[2] + flow.hz * np.arange(flow.u1.shape[1])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,z,u1,u2,p\n")
        for i, x in enumerate(xs):
            for j, z in enumerate(zs):
                fh.write(
                    f"{fmt(x)},{fmt(z)},{fmt(flow.u1[i, j])},"
                    f"{fmt(flow.u2[i, j])},{fmt(flow.pressure[i, j])}\n"
                )


def save_theta_csv(theta_field, path):
    rho, theta = theta_field.rho, theta_field.theta
    xs, zs = theta_field.xs, theta_field.zs
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,z,rho,theta\n")
        for i, x in enumerate(xs):
            for j, z in enumerate(zs):
                fh.write(
                    f"{fmt(x)},{fmt(z)},{fmt(rho[i, j])},{fmt(theta[i, j])}\n"
                )


def write_report(path, title, rows):
    """rows: list of (key, value) or (key, value, threshold, passed)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {title}\n")
        for row in rows:
            if len(row) == 2:
                key, value = row
                fh.write(f"{key} = {_fmt_any(value)}\n")
            else:
                key, value, threshold, passed = row
                verdict = "PASS" if passed else "FAIL"
                fh.write(
                    f"{key} = {_fmt_any(value)} threshold {_fmt_any(threshold)} "
                    f"{verdict}\n"
                )


def _fmt_any(v):
    if isinstance(v, float):
        return fmt(v)
    return str(v)
