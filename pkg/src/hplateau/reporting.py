"""Run artifacts: CSV/JSON writers, atomic output, and run loaders.

All files are written atomically (temp file + rename) and byte-identically
for identical config and seed: floats are serialized with the shortest
round-trip decimal and no timestamps or environment data enter any file.

A run directory contains

    solution.csv     one row per node (fixed header, see solution_header)
    report.json      configuration echo, continuation trace, residuals
    scorecard.json   flat {check_id, lhs, rhs, tolerance, pass, margin} list
    ladder.json      eps ladder heights (for re-verification)
    convergence.log  per-stage Newton residual histories
    figures/*.png    rendered alongside the delimited output (optional)
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curvature import parse_curvature
from .domain import Domain, GridFunction, GridTopology, build_grid
from .solver import SolveReport, residual as solver_residual
from .verifier import Scorecard, SolutionGeometry


def fmt(x) -> str:
    """Shortest round-trip decimal of a float (bit-exact reload)."""
    return repr(float(x))


def write_atomic(path: Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def solution_header(n: int) -> list:
    if n == 1:
        return ["r", "phi", "x1", "u", "du1", "kappa1", "nu", "eta"]
    return ["r", "phi", "x1", "x2", "u", "du1", "du2", "kappa1", "kappa2", "nu", "eta"]


def solution_csv_text(topo: GridTopology, geom: SolutionGeometry) -> str:
    """Node table; row count equals interior plus boundary nodes."""
    lines = [",".join(solution_header(topo.n))]
    if topo.n == 2:
        n_r, n_phi = topo.shape
        r = np.repeat(topo.r, n_phi)
        phi = np.tile(topo.phi, n_r)
    else:
        r = np.abs(topo.x_flat[:, 0]) / topo.domain.half_width
        phi = np.where(topo.x_flat[:, 0] >= 0.0, 0.0, math.pi)
    for i in range(topo.n_nodes):
        row = [r[i], phi[i]]
        row += list(topo.x_flat[i])
        row.append(geom.u[i])
        row += list(geom.du[i])
        row += list(geom.kappa[i])
        row += [geom.nu[i], geom.eta[i]]
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def dual_csv_text(topo: GridTopology, cloud) -> str:
    n = topo.n
    header = [f"y{i+1}" for i in range(n)] + ["v"] + [f"dv{i+1}" for i in range(n)]
    header += [f"kappa_star{i+1}" for i in range(n)]
    lines = [",".join(header)]
    for i in range(topo.n_nodes):
        row = list(cloud.y[i]) + [cloud.v[i]] + list(cloud.dv[i]) + list(cloud.kappa_star[i])
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def domain_dict(domain: Domain) -> dict:
    return {
        "n": domain.n,
        "rho_cos": list(domain.rho_cos),
        "rho_sin": list(domain.rho_sin),
        "half_width": domain.half_width,
        "n_r": domain.n_r,
        "n_phi": domain.n_phi,
    }


def domain_from_dict(d: dict) -> Domain:
    return Domain(
        n=int(d["n"]),
        rho_cos=tuple(d["rho_cos"]),
        rho_sin=tuple(d["rho_sin"]),
        half_width=float(d["half_width"]),
        n_r=int(d["n_r"]),
        n_phi=int(d["n_phi"]),
    )


def report_dict(report: SolveReport, scorecard: Scorecard, config_echo: dict) -> dict:
    extras = {
        k: v for k, v in scorecard.extras.items() if _jsonable(v)
    }
    return {
        "config": config_echo,
        "domain": domain_dict(report.domain),
        "f": report.f_spec,
        "sigma": report.sigma,
        "schedule": {
            "label": report.schedule.label,
            "t_steps": list(report.schedule.t_steps),
            "theta_steps": list(report.schedule.theta_steps),
            "eps_steps": list(report.schedule.eps_steps),
        },
        "eps_final": report.eps_final,
        "final_residual": report.final_residual,
        "total_newton_iterations": report.total_iterations,
        "stages": [
            {
                "eps": s.eps,
                "theta": s.theta,
                "t": s.t,
                "sigma_t": s.sigma_t,
                "iterations": s.iterations,
                "residual_norms": list(s.residual_norms),
                "halvings": list(s.halvings),
                "bisection_depth": s.bisection_depth,
            }
            for s in report.stages
        ],
        "scorecard_all_pass": scorecard.all_pass,
        "verifier": extras,
    }


def _jsonable(v) -> bool:
    if isinstance(v, (bool, int, float, str, type(None))):
        return True
    if isinstance(v, (list, tuple)):
        return all(_jsonable(x) for x in v)
    if isinstance(v, dict):
        return all(isinstance(k, (str, float, int)) and _jsonable(x) for k, x in v.items())
    return False


def convergence_log_text(report: SolveReport) -> str:
    lines = []
    for k, s in enumerate(report.stages):
        lines.append(
            f"stage={k} eps={fmt(s.eps)} theta={fmt(s.theta)} t={fmt(s.t)} "
            f"sigma_t={fmt(s.sigma_t)} iterations={s.iterations} "
            f"bisection_depth={s.bisection_depth} halvings={s.halvings} "
            "residuals=[" + ", ".join(fmt(r) for r in s.residual_norms) + "]"
        )
    return "\n".join(lines) + "\n"


def write_run(outdir: Path, report: SolveReport, scorecard: Scorecard, geom: SolutionGeometry, config_echo: dict) -> None:
    outdir = Path(outdir)
    write_atomic(outdir / "solution.csv", solution_csv_text(report.topo, geom))
    write_atomic(outdir / "report.json", _json_text(report_dict(report, scorecard, config_echo)))
    write_atomic(outdir / "scorecard.json", _json_text(scorecard.as_json_entries()))
    ladder = {
        "eps": [e for e, _ in report.eps_ladder],
        "u": [np.asarray(u).reshape(-1).tolist() for _, u in report.eps_ladder],
    }
    write_atomic(outdir / "ladder.json", _json_text(ladder))
    write_atomic(outdir / "convergence.log", convergence_log_text(report))


@dataclass
class LoadedRun:
    """A run directory reloaded far enough to re-verify and dualize.

    Quacks like a SolveReport for the scorecard: exposes domain, sigma,
    f_spec, u, topo, eps_ladder, stages and final_residual.
    """

    domain: Domain
    f_spec: str
    sigma: float
    u: GridFunction
    topo: GridTopology
    eps_ladder: list
    stages: list
    final_residual: float

    @property
    def eps_final(self) -> float:
        return self.u.eps


def load_run(outdir: Path) -> LoadedRun:
    outdir = Path(outdir)
    with open(outdir / "report.json", "r", encoding="utf-8") as fh:
        rep = json.load(fh)
    domain = domain_from_dict(rep["domain"])
    topo = build_grid(domain)
    rows = np.loadtxt(outdir / "solution.csv", delimiter=",", skiprows=1)
    u_col = solution_header(domain.n).index("u")
    u = rows[:, u_col].reshape(topo.shape)
    eps_final = float(rep["eps_final"])
    ladder_path = outdir / "ladder.json"
    eps_ladder = []
    if ladder_path.exists():
        with open(ladder_path, "r", encoding="utf-8") as fh:
            ladder = json.load(fh)
        eps_ladder = [
            (float(e), np.asarray(vals, dtype=float).reshape(topo.shape))
            for e, vals in zip(ladder["eps"], ladder["u"])
        ]
    f = parse_curvature(rep["f"], domain.n)
    res, _ = solver_residual(topo, f, float(rep["sigma"]), eps_final, u)
    return LoadedRun(
        domain=domain,
        f_spec=rep["f"],
        sigma=float(rep["sigma"]),
        u=GridFunction(u, eps_final),
        topo=topo,
        eps_ladder=eps_ladder,
        stages=[],
        final_residual=float(np.abs(res).max()),
    )
