"""Transport of a hyperbolic graph to its spacelike de Sitter dual.

The hodograph map y = Dq(x) with q = (|x|^2 + u^2)/2 sends the graph of u
to the graph of v(y) = u * sqrt(1 + |Du|^2) in the steady-state half-space
model of de Sitter space; gradients transport as grad v = Du / w and the
dual Hessian follows by the chain rule through the hodograph Jacobian
D^2 q = I + Du Du^T + u D^2u.  No re-gridding or interpolation enters, so
the curvature reciprocity kappa*_i kappa_i = 1 and the Legendre identity
p(y) + q(x) = x . y hold to rounding on the source grid itself.

Sign conventions are fixed so that the dual of a curvature-sigma cap has
kappa* = +1/sigma (the transport reverses time orientation; the signed
fundamental forms below absorb that).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import eigenvalues_generalized, eigenvalues_sym, slope_factors


class HodographDegenerate(Exception):
    """D^2 q lost positive definiteness; the source graph was not convex."""


class ExtrapolationUnstable(Exception):
    """Boundary samples do not follow a stable trend in eps."""


@dataclass
class DeSitterCloud:
    """Dual point cloud with attached tensors (one row per source node)."""

    y: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray
    w_s: np.ndarray
    g: np.ndarray
    h: np.ndarray
    kappa_star: np.ndarray  # ascending

    @property
    def n(self) -> int:
        return self.y.shape[-1]


def hodograph_transport(x, u, du, d2u):
    """Pointwise transport (y, v, grad v, Hess v, w_s) of graph data.

    Raises HodographDegenerate when the hodograph Jacobian
    D^2 q = I + Du Du^T + u D^2 u has a nonpositive eigenvalue, which
    contradicts strict convexity of u^2 + |x|^2 and indicates an upstream
    failure.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    d2u = np.asarray(d2u, dtype=float)
    n = du.shape[-1]
    w, _ = slope_factors(du)
    y = x + u[..., None] * du
    v = u * w
    dv = du / w[..., None]
    jac = (
        np.eye(n)
        + np.einsum("...i,...j->...ij", du, du)
        + u[..., None, None] * d2u
    )
    if np.any(eigenvalues_sym(jac)[..., 0] <= 0.0):
        raise HodographDegenerate("hodograph Jacobian D^2 q is not positive definite")
    # d_j (u_i / w) = u_ij / w - u_i (Du . D^2u)_j / w^3
    t = np.einsum("...k,...kj->...j", du, d2u)
    m = d2u / w[..., None, None] - np.einsum("...i,...j->...ij", du, t) / (w**3)[..., None, None]
    d2v = np.swapaxes(np.linalg.solve(jac, np.swapaxes(m, -1, -2)), -1, -2)
    d2v = 0.5 * (d2v + np.swapaxes(d2v, -1, -2))
    w_s = np.sqrt(1.0 - (dv**2).sum(axis=-1))
    return y, v, dv, d2v, w_s, jac


def forward_map(topo, u) -> DeSitterCloud:
    """Transport a grid solution to its de Sitter cloud.

    Derivatives are taken on the source grid and pushed through the
    hodograph Jacobian analytically.
    """
    du, d2u = topo.derivatives(u)
    u_flat = topo.to_flat(u)
    y, v, dv, d2v, w_s, _ = hodograph_transport(topo.x_flat, u_flat, du, d2u)
    g, h = dual_fundamental_forms(v, dv, d2v, w_s)
    kappa_star = eigenvalues_generalized(h, g)
    return DeSitterCloud(y=y, v=v, dv=dv, d2v=d2v, w_s=w_s, g=g, h=h, kappa_star=kappa_star)


def dual_fundamental_forms(v, dv, d2v, w_s=None):
    """Spacelike first and second fundamental forms of the dual graph.

    g_ij = (delta_ij - v_i v_j) / v^2 and
    h_ij = (delta_ij - v_i v_j - v v_ij) / (v^2 w_s).
    """
    v = np.asarray(v, dtype=float)
    dv = np.asarray(dv, dtype=float)
    d2v = np.asarray(d2v, dtype=float)
    n = dv.shape[-1]
    if w_s is None:
        w_s = np.sqrt(1.0 - (dv**2).sum(axis=-1))
    core = np.eye(n) - np.einsum("...i,...j->...ij", dv, dv)
    vv = v[..., None, None]
    g = core / vv**2
    h = (core - vv * d2v) / (vv**2 * w_s[..., None, None])
    return g, h


def dual_curvatures(cloud: DeSitterCloud) -> np.ndarray:
    """Dual principal curvatures (ascending), from the (h, g) pencil."""
    return eigenvalues_generalized(cloud.h, cloud.g)


def reciprocity_defect(kappa, kappa_star) -> np.ndarray:
    """max_i |kappa*_i kappa_i - 1| per node, after sort alignment.

    kappa is ascending; reciprocals reverse order, so kappa* is paired in
    descending order.
    """
    paired = kappa_star[..., ::-1]
    return np.abs(paired * np.asarray(kappa) - 1.0).max(axis=-1)


def legendre_defect(x, u, cloud: DeSitterCloud) -> np.ndarray:
    """p(y) + q(x) - x . y, identically zero for an exact transport."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    p = 0.5 * ((cloud.y**2).sum(axis=-1) - cloud.v**2)
    q = 0.5 * ((x**2).sum(axis=-1) + u**2)
    return p + q - (x * cloud.y).sum(axis=-1)


def extrapolate_to_zero(eps_values, rows, max_levels: int = 4):
    """Per-column linear-in-eps extrapolation of ladder samples.

    Uses the smallest ``max_levels`` ladder values; returns
    (limit, fit_residual).  Raises ExtrapolationUnstable when the samples
    deviate from the affine trend by more than a quarter of their spread.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if eps_values.size < 3:
        raise ExtrapolationUnstable("at least three ladder levels are required")
    order = np.argsort(eps_values)[: max(3, min(max_levels, eps_values.size))]
    e = eps_values[order]
    r = rows[order]
    basis = np.stack([np.ones_like(e), e], axis=1)
    coef, *_ = np.linalg.lstsq(basis, r, rcond=None)
    fit = basis @ coef
    resid = np.abs(fit - r).max(axis=0)
    spread = r.max(axis=0) - r.min(axis=0)
    if np.any(resid > 0.25 * spread + 1e-9):
        raise ExtrapolationUnstable("ladder samples are non-monotone beyond noise")
    return coef[0], resid


def dual_boundary_check(eps_values, ws_rows, sigma: float, rtol: float = 0.02):
    """Extrapolated boundary w_s against its asymptotic value sigma.

    Returns (worst_deviation, allowed, extrapolated_row); the dual of the
    boundary angle relation, since w_s = 1/w on mapped pairs.
    """
    limit, _ = extrapolate_to_zero(eps_values, ws_rows)
    worst = float(np.abs(limit - sigma).max())
    return worst, rtol * sigma, limit
