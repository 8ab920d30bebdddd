"""Run configuration: a flat TOML-subset file plus --key=value overrides.

Accepted keys (file or flag): domain, f, sigma, grid, out, seed, schedule,
figures, rho_cos, rho_sin.  Domain presets are compact strings
("disk:R", "ellipse:a,b", "star:base,amp,mode", "interval:d"); custom
profiles pass explicit coefficient lists with domain = "profile".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib as _toml
except ModuleNotFoundError:  # python < 3.11
    import tomli as _toml

from .curvature import CurvatureError, CurvatureFunction, parse_curvature
from .domain import Domain, DomainError
from .solver import ContinuationSchedule, default_schedule


class ConfigError(Exception):
    """Invalid configuration; message carries location diagnostics when known."""


_DEFAULTS = {
    "domain": "disk:1.0",
    "f": "mean",
    "sigma": 0.5,
    "grid": "32,64",
    "out": "run",
    "seed": 1234,
    "schedule": "",
    "figures": True,
    "rho_cos": None,
    "rho_sin": None,
}


@dataclass
class RunConfig:
    """Validated configuration of one solve."""

    domain: Domain
    f: CurvatureFunction
    f_spec: str
    sigma: float
    out: Path
    seed: int
    schedule_spec: str
    figures: bool
    raw: dict = field(default_factory=dict)

    @property
    def grid(self):
        if self.domain.n == 1:
            return [self.domain.n_r]
        return [self.domain.n_r, self.domain.n_phi]

    def schedule(self) -> ContinuationSchedule:
        return build_schedule(self.domain, self.f, self.schedule_spec)


def _parse_grid(value, n_dim):
    if isinstance(value, (list, tuple)):
        parts = [int(v) for v in value]
    else:
        parts = [int(p) for p in str(value).split(",") if p.strip()]
    if n_dim == 1:
        if len(parts) != 1:
            raise ConfigError("grid for an interval domain takes a single node count")
        return parts[0], 0
    if len(parts) != 2:
        raise ConfigError("grid must be NR,NPHI")
    return parts[0], parts[1]


def _parse_domain(raw: dict):
    spec = str(raw["domain"]).strip()
    head, _, rest = spec.partition(":")
    try:
        grid_raw = raw["grid"]
        if head == "interval":
            n_r, _ = _parse_grid(grid_raw, 1)
            return Domain.interval(float(rest), n_r=n_r)
        n_r, n_phi = _parse_grid(grid_raw, 2)
        if head == "disk":
            return Domain.disk(float(rest), n_r=n_r, n_phi=n_phi)
        if head == "ellipse":
            a, b = (float(p) for p in rest.split(","))
            return Domain.ellipse(a, b, n_r=n_r, n_phi=n_phi)
        if head == "star":
            base, amp, mode = rest.split(",")
            return Domain.star(float(base), float(amp), int(mode), n_r=n_r, n_phi=n_phi)
        if head == "profile":
            cos_c = raw.get("rho_cos")
            if not cos_c:
                raise ConfigError("domain 'profile' requires a rho_cos coefficient list")
            sin_c = raw.get("rho_sin") or ()
            return Domain(
                n=2,
                rho_cos=tuple(float(c) for c in cos_c),
                rho_sin=tuple(float(s) for s in sin_c),
                n_r=n_r,
                n_phi=n_phi,
            )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad domain spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown domain preset {head!r}")


def build_schedule(domain: Domain, f: CurvatureFunction, spec: str) -> ContinuationSchedule:
    """Default ladders with optional overrides.

    The override string is semicolon-separated assignments, e.g.
    ``t=0,0.5,1;theta=0.5,0.1,0;eps0=0.04;eps_levels=4`` or an explicit
    ``eps=0.04,0.02,0.01`` list.
    """
    base = default_schedule(domain, f)
    if not spec:
        return base
    t_steps = base.t_steps
    theta = base.theta_steps
    eps = base.eps_steps
    eps0 = None
    eps_levels = None
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, value = part.partition("=")
        key = key.strip()
        try:
            if key == "t":
                t_steps = tuple(float(v) for v in value.split(","))
            elif key == "theta":
                theta = tuple(float(v) for v in value.split(","))
            elif key == "eps":
                eps = tuple(float(v) for v in value.split(","))
            elif key == "eps0":
                eps0 = float(value)
            elif key == "eps_levels":
                eps_levels = int(value)
            else:
                raise ConfigError(f"unknown schedule key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"bad schedule entry {part!r}: {exc}") from exc
    if eps0 is not None or eps_levels is not None:
        e0 = eps0 if eps0 is not None else 0.05 * domain.max_radius
        levels = eps_levels if eps_levels is not None else 6
        eps = tuple(e0 * 2.0**-k for k in range(levels + 1))
    return ContinuationSchedule(
        t_steps=t_steps, theta_steps=theta, eps_steps=eps, label=f"override:{spec}" if spec else "default"
    )


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Read the config file (if any), apply overrides, validate everything."""
    raw = dict(_DEFAULTS)
    if path:
        try:
            with open(path, "rb") as fh:
                data = _toml.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except _toml.TOMLDecodeError as exc:
            # tomllib reports line/column in the message
            raise ConfigError(f"config parse error in {path}: {exc}") from exc
        for key, value in data.items():
            if key not in _DEFAULTS:
                raise ConfigError(f"unknown config key {key!r} in {path}")
            raw[key] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = value

    try:
        sigma = float(raw["sigma"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sigma must be a number, got {raw['sigma']!r}") from exc
    if not 0.0 < sigma < 1.0:
        raise ConfigError("sigma must lie in (0,1)")

    domain = _parse_domain(raw)
    try:
        domain.validate(strict=True)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    f_spec = str(raw["f"]).strip()
    try:
        f = parse_curvature(f_spec, domain.n)
    except CurvatureError as exc:
        raise ConfigError(str(exc)) from exc

    figures = raw["figures"]
    if isinstance(figures, str):
        figures = figures.strip().lower() not in ("0", "false", "no", "off")

    try:
        seed = int(raw["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer, got {raw['seed']!r}") from exc

    cfg = RunConfig(
        domain=domain,
        f=f,
        f_spec=f_spec,
        sigma=sigma,
        out=Path(str(raw["out"])),
        seed=seed,
        schedule_spec=str(raw["schedule"]),
        figures=bool(figures),
        raw={k: raw[k] for k in ("domain", "f", "sigma", "grid", "out", "seed", "schedule", "figures")},
    )
    # Fail early on a bad override string.
    cfg.schedule().validate(sigma)
    return cfg
