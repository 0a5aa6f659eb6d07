"""Flat key/value run configuration with lossless round-trip."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace


def fmt(x) -> str:
    """17 significant digits: lossless for doubles."""
    return f"{x:.17g}"


@dataclass
class RunConfig:
    nx: int = 64
    nz_per_unit: int = 64
    n_schedule: tuple = (4.0, 6.0, 8.0, 12.0)
    grad_tol: float = 1e-9
    eps_tail: float = 1e-2
    eps_H: float = 5e-2
    lambda_tol: float = 1e-3
    lambda_override: float | None = None
    output_dir: str | None = None
    seed: int = 0
    max_iter: int = 200_000
    ramp_width: float = 1.0

    def __post_init__(self):
        self.n_schedule = tuple(float(n) for n in self.n_schedule)
        for name in ("grad_tol", "eps_tail", "eps_H", "lambda_tol", "ramp_width"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.nx < 2 or self.nz_per_unit < 1:
            raise ValueError("nx >= 2 and nz_per_unit >= 1 required")
        if any(b <= a for a, b in zip(self.n_schedule, self.n_schedule[1:])):
            raise ValueError("n_schedule must be strictly increasing")
        if self.lambda_override is not None and self.lambda_override < 0:
            raise ValueError("lambda_override must be nonnegative")

    def replace(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if f.name == "n_schedule":
            s = ",".join(fmt(n) for n in v)
        elif v is None:
            s = "none"
        elif isinstance(v, float):
            s = fmt(v)
        else:
            s = str(v)
        lines.append(f"{f.name} = {s}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    kw = {}
    known = {f.name: f for f in fields(RunConfig)}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {ln}: unknown key {key!r}")
        kw[key] = _parse_value(key, val)
    return RunConfig(**kw)


def _parse_value(key, val):
    if key == "n_schedule":
        return tuple(float(v) for v in val.split(",") if v.strip())
    if key in ("nx", "nz_per_unit", "seed", "max_iter"):
        return int(val)
    if key in ("lambda_override", "output_dir") and val.lower() == "none":
        return None
    if key == "output_dir":
        return val
    return float(val)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(cfg))
