"""Figure rendering for the report path.

Every run directory gets a figures/ folder with field heatmaps, the
continuation residual history, the boundary-angle extrapolation, and the
scorecard margins, rendered next to the delimited output.  The CSV/JSON
files remain the primary machine-readable artifacts; figures can be
switched off with figures = false (or --figures=false).
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np

_DPI = 130


def _save(fig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)


def _field_axes(ax, topo, values, title):
    values = np.asarray(values).reshape(-1)
    if topo.n == 1:
        ax.plot(topo.x_flat[:, 0], values, "-o", ms=2.5, lw=1.0)
        ax.set_xlabel("x")
    else:
        tri = mtri.Triangulation(topo.x_flat[:, 0], topo.x_flat[:, 1])
        im = ax.tripcolor(tri, values, shading="gouraud", cmap="viridis")
        ax.set_aspect("equal")
        plt.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title)


def solution_figures(figdir: Path, topo, geom, sigma: float) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    _field_axes(ax, topo, geom.u, "height u")
    _save(fig, Path(figdir) / "solution_u.png")

    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    _field_axes(ax, topo, geom.kappa[:, -1], f"largest principal curvature (target {sigma:g})")
    _save(fig, Path(figdir) / "kappa_max.png")

    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    _field_axes(ax, topo, geom.eta, "eta = (sigma - nu)/u")
    _save(fig, Path(figdir) / "eta.png")


def residual_history_figure(figdir: Path, stages) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    pos = 0
    for s in stages:
        norms = [max(r, 1e-300) for r in s.residual_norms]
        xs = range(pos, pos + len(norms))
        ax.semilogy(xs, norms, "-o", ms=2.5, lw=1.0)
        pos += len(norms)
    ax.set_xlabel("cumulative Newton iteration")
    ax.set_ylabel("residual sup norm")
    ax.set_title("continuation stages")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, Path(figdir) / "residual_history.png")


def boundary_angle_figure(figdir: Path, eps_values, w_rows, w_limit, sigma: float) -> None:
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    eps_values = np.asarray(eps_values)
    w_rows = np.asarray(w_rows)
    for stat, label in ((w_rows.min(axis=1), "min over boundary"), (w_rows.max(axis=1), "max over boundary")):
        ax.plot(eps_values, stat, "-o", ms=3, lw=1.0, label=label)
    if w_limit is not None:
        lim = np.asarray(w_limit)
        ax.plot(0.0, lim.mean(), "s", color="k", label="extrapolated")
    ax.axhline(1.0 / sigma, color="crimson", lw=1.0, ls="--", label="1/sigma")
    ax.set_xlabel("boundary value eps")
    ax.set_ylabel("boundary slope factor w")
    ax.legend(fontsize=8)
    _save(fig, Path(figdir) / "boundary_angle.png")


def scorecard_figure(figdir: Path, entries) -> None:
    if not entries:
        return
    names = [e.check_id for e in entries]
    margins = np.array([e.margin for e in entries])
    # symlog-style transform so wildly different margins share an axis
    vals = np.sign(margins) * np.log10(1.0 + np.abs(margins) * 1e8)
    colors = ["#2a9d2a" if e.passed else "#c03030" for e in entries]
    fig, ax = plt.subplots(figsize=(6.4, 0.34 * len(entries) + 1.2))
    ax.barh(range(len(entries)), vals, color=colors)
    ax.set_yticks(range(len(entries)))
    ax.set_yticklabels(names, fontsize=8)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("signed log margin")
    ax.set_title("scorecard margins (green = pass)")
    ax.invert_yaxis()
    _save(fig, Path(figdir) / "scorecard.png")


def oracle_figure(figdir: Path, table) -> None:
    """Log-log error curves for the oracle comparison table."""
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    hs = np.array([row["h"] for row in table])
    for key, label in (
        ("du_err", "|Du - exact|"),
        ("d2u_err", "|D2u - exact|"),
        ("kappa_err", "|kappa - sigma|"),
        ("residual", "|F(A) - sigma|"),
        ("hessian_identity", "intrinsic Hessian identity"),
    ):
        errs = np.array([row[key] for row in table])
        ax.loglog(hs, errs, "-o", ms=3, lw=1.0, label=label)
    ref = hs**2 * (np.array([row["d2u_err"] for row in table])[-1] / hs[-1] ** 2)
    ax.loglog(hs, ref, "k--", lw=0.8, label="h^2 reference")
    ax.set_xlabel("mesh scale h")
    ax.set_ylabel("sup error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, Path(figdir) / "oracle_convergence.png")


def sweep_figure(figdir: Path, param_name: str, rows) -> None:
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    xs = [row[param_name] for row in rows]
    ax.plot(xs, [row["kappa_max"] for row in rows], "-o", ms=3, label="max kappa")
    ax.plot(xs, [row["eta_max"] for row in rows], "-s", ms=3, label="max eta")
    ax.set_xlabel(param_name)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, Path(figdir) / f"sweep_{param_name}.png")


def dual_cloud_figure(figdir: Path, cloud) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    if cloud.n == 1:
        ax.plot(cloud.y[:, 0], cloud.v, ".", ms=3)
        ax.set_xlabel("y")
        ax.set_ylabel("v")
    else:
        sc = ax.scatter(cloud.y[:, 0], cloud.y[:, 1], c=cloud.v, s=4, cmap="plasma")
        plt.colorbar(sc, ax=ax, shrink=0.85, label="v")
        ax.set_aspect("equal")
    ax.set_title("de Sitter dual cloud")
    _save(fig, Path(figdir) / "dual_cloud.png")
