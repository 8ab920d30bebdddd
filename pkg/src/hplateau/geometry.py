"""Pointwise Euclidean and hyperbolic geometry of a graph.

Everything here is pure per-node algebra on (u, Du, D2u).  For an upward
oriented graph in the half-space model the Euclidean shape matrix is

    a^e_ij = gamma^{ik} u_kl gamma^{lj} / w,
    gamma^{ij} = delta_ij - u_i u_j / (w (1 + w)),   w = sqrt(1 + |Du|^2),

with {gamma^{ij}} the inverse square root of the first fundamental form,
and the hyperbolic shape matrix is A = u A^e + I/w, so each hyperbolic
principal curvature is kappa_i = u kappa^e_i + nu^{n+1} with
nu^{n+1} = 1/w.  The induced hyperbolic metric and second fundamental
form,

    g_ij = (delta_ij + u_i u_j) / u^2,
    h_ij = (delta_ij + u_i u_j + u u_ij) / (u^2 w),

give a second, independent route to kappa through the generalized
eigenvalue problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _outer(a, b):
    return np.einsum("...i,...j->...ij", a, b)


def slope_factors(du):
    """w = sqrt(1 + |Du|^2) and nu^{n+1} = 1/w."""
    w = np.sqrt(1.0 + np.einsum("...i,...i->...", du, du))
    return w, 1.0 / w


def shape_matrices(u, du, d2u):
    """(gamma, A^e, A) for height u, gradient du, Hessian d2u.

    Total function of finite inputs; requires u > 0 only for A to carry
    its hyperbolic meaning.
    """
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    d2u = np.asarray(d2u, dtype=float)
    n = du.shape[-1]
    w, nu = slope_factors(du)
    eye = np.eye(n)
    gamma = eye - _outer(du, du) / (w * (1.0 + w))[..., None, None]
    ae = np.einsum("...ik,...kl,...lj->...ij", gamma, d2u, gamma) / w[..., None, None]
    a = u[..., None, None] * ae + eye * nu[..., None, None]
    return gamma, ae, a


def eigenvalues_sym(a):
    """Ascending eigenvalues of symmetric matrices (closed form for n <= 2)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if n == 1:
        return a[..., 0, :].copy()
    if n == 2:
        mean = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
        gap = np.sqrt((0.5 * (a[..., 0, 0] - a[..., 1, 1])) ** 2 + a[..., 0, 1] ** 2)
        return np.stack([mean - gap, mean + gap], axis=-1)
    return np.linalg.eigvalsh(a)


def eigenvalues_generalized(h, g):
    """Ascending eigenvalues of h x = kappa g x for SPD g.

    Reduced through the Cholesky factor of g; closed form for n <= 2.
    """
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    if not np.isfinite(h).all() or not np.isfinite(g).all():
        raise ValueError("non-finite entries in generalized eigenvalue problem")
    if n == 1:
        if np.any(g[..., 0, 0] <= 0):
            raise ValueError("metric must be positive definite")
        return (h[..., 0, 0] / g[..., 0, 0])[..., None]
    if n == 2:
        g11, g12, g22 = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
        if np.any(g11 <= 0) or np.any(g11 * g22 - g12**2 <= 0):
            raise ValueError("metric must be positive definite")
        l11 = np.sqrt(g11)
        l21 = g12 / l11
        l22 = np.sqrt(g22 - l21**2)
        # m = L^-1 h L^-T, symmetric 2x2
        b11 = h[..., 0, 0] / l11
        b12 = h[..., 0, 1] / l11
        b21 = (h[..., 0, 1] - l21 * b11) / l22
        b22 = (h[..., 1, 1] - l21 * b12) / l22
        m11 = b11 / l11
        m12 = (b12 - l21 * m11) / l22
        m22 = (b22 - l21 * m12) / l22
        m = np.empty(h.shape)
        m[..., 0, 0] = m11
        m[..., 0, 1] = m[..., 1, 0] = m12
        m[..., 1, 1] = m22
        return eigenvalues_sym(m)
    import scipy.linalg

    flat_h = h.reshape(-1, n, n)
    flat_g = g.reshape(-1, n, n)
    out = np.stack([scipy.linalg.eigh(hh, gg, eigvals_only=True) for hh, gg in zip(flat_h, flat_g)])
    return out.reshape(h.shape[:-2] + (n,))


@dataclass
class PointGeometry:
    """Per-node geometric bundle of the graph of u."""

    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    w: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    ae: np.ndarray
    a: np.ndarray
    kappa_e: np.ndarray
    kappa: np.ndarray


def point_geometry(u, du, d2u) -> PointGeometry:
    """Evaluate the full pointwise bundle; curvatures sorted ascending."""
    u = np.asarray(u, dtype=float)
    w, nu = slope_factors(du)
    gamma, ae, a = shape_matrices(u, du, d2u)
    return PointGeometry(
        u=u,
        du=np.asarray(du, dtype=float),
        d2u=np.asarray(d2u, dtype=float),
        w=w,
        nu=nu,
        gamma=gamma,
        ae=ae,
        a=a,
        kappa_e=eigenvalues_sym(ae),
        kappa=eigenvalues_sym(a),
    )


@dataclass
class SurfaceTensors:
    """Induced hyperbolic metric data of the graph."""

    g: np.ndarray
    h: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray  # Gamma[..., k, i, j]


def surface_tensors(u, du, d2u) -> SurfaceTensors:
    """Metric, second fundamental form, and Christoffel symbols.

    The Christoffel symbols of g = (I + Du Du^T)/u^2 close over
    (u, Du, D2u); no third derivatives enter.
    """
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    d2u = np.asarray(d2u, dtype=float)
    n = du.shape[-1]
    if np.any(u <= 0):
        raise ValueError("surface tensors require u > 0")
    w, _ = slope_factors(du)
    eye = np.eye(n)
    uu = u[..., None, None]
    first = eye + _outer(du, du)
    g = first / uu**2
    h = (first + uu * d2u) / (uu**2 * w[..., None, None])
    g_inv = uu**2 * (eye - _outer(du, du) / (w**2)[..., None, None])
    # dg[..., k, i, j] = partial_k g_ij
    dk_outer = np.einsum("...ki,...j->...kij", d2u, du)
    dk_outer = dk_outer + np.swapaxes(dk_outer, -1, -2)
    dg = dk_outer / uu**2 - 2.0 * np.einsum("...k,...ij->...kij", du, first) / uu**3
    # Gamma^l_ij = 1/2 g^{lm} (d_i g_jm + d_j g_im - d_m g_ij)
    sym = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    christ = 0.5 * np.einsum("...lm,...ijm->...lij", g_inv, sym)
    return SurfaceTensors(g=g, h=h, g_inv=g_inv, christoffel=christ)


def intrinsic_hessian(topo, u, phi):
    """Covariant Hessian of a scalar field on the graph of u.

    nabla_ij phi = d_ij phi - Gamma^k_ij d_k phi with the Christoffel
    symbols evaluated analytically from (u, Du, D2u) and the derivatives
    of phi taken with the grid operators.
    """
    du, d2u = topo.derivatives(u)
    uf = topo.to_flat(u)
    tensors = surface_tensors(uf, du, d2u)
    dphi, d2phi = topo.derivatives(phi)
    return d2phi - np.einsum("...kij,...k->...ij", tensors.christoffel, dphi), tensors
