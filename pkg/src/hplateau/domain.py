"""Star-shaped domains, tensor-product grids, and grid differentiation.

Planar domains are described by a trigonometric radial profile
rho(phi) > 0 and gridded in mapped polar coordinates

    x(r, phi) = r * rho(phi) * (cos phi, sin phi),   r in (0, 1],

with Fourier collocation in the angle and finite differences in the
radius.  Cartesian derivatives are recovered pointwise through the exact
Jacobian of the map, and the same small stencil/collocation matrices are
reassembled into sparse operators for the solver's linearizations, so
residual evaluation and Jacobian assembly always agree.

There is no node at r = 0.  When the profile is centrally symmetric
(rho(phi + pi) = rho(phi)) the innermost ring differentiates across the
pole through the identification u(-r, phi) = u(r, phi + pi); otherwise
that identification does not map grid nodes to grid nodes and one-sided
stencils are used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class DomainError(ValueError):
    """Raised for domains that are not star-shaped or grids that are too coarse."""


# Grid sizes the library itself accepts; the CLI enforces the stricter
# production limits (n_r >= 8, n_phi even >= 16) at config validation.
_MIN_NR = 4
_MIN_NPHI = 4


@dataclass(frozen=True)
class Domain:
    """Star-shaped region with its grid resolution.

    For ``n == 2`` the boundary is the curve rho(phi)(cos phi, sin phi)
    with

        rho(phi) = rho_cos[0] + sum_k rho_cos[k] cos(k phi)
                              + sum_k rho_sin[k-1] sin(k phi),

    which must stay positive (star-shaped about the origin).  For
    ``n == 1`` the region is the interval [-half_width, half_width].
    """

    n: int = 2
    rho_cos: tuple = (1.0,)
    rho_sin: tuple = ()
    half_width: float = 1.0
    n_r: int = 32
    n_phi: int = 64

    # -- constructors ------------------------------------------------------

    @classmethod
    def disk(cls, radius: float, n_r: int = 32, n_phi: int = 64) -> "Domain":
        return cls(n=2, rho_cos=(float(radius),), rho_sin=(), n_r=n_r, n_phi=n_phi)

    @classmethod
    def ellipse(cls, a: float, b: float, n_r: int = 32, n_phi: int = 64) -> "Domain":
        """Ellipse x^2/a^2 + y^2/b^2 = 1 as a (truncated) cosine profile.

        The polar profile 1/sqrt(cos^2/a^2 + sin^2/b^2) is smooth and
        pi-periodic, so its cosine series converges geometrically; the
        fit is exact to ~1e-14 on the collocation circle.
        """
        if a <= 0 or b <= 0:
            raise DomainError("ellipse semi-axes must be positive")

        def profile(phi):
            return 1.0 / np.sqrt(np.cos(phi) ** 2 / a**2 + np.sin(phi) ** 2 / b**2)

        cos_c, sin_c = fit_profile(profile)
        return cls(n=2, rho_cos=cos_c, rho_sin=sin_c, n_r=n_r, n_phi=n_phi)

    @classmethod
    def star(cls, base: float, amplitude: float, mode: int, n_r: int = 32, n_phi: int = 64) -> "Domain":
        """Profile base + amplitude*cos(mode*phi)."""
        coeffs = [float(base)] + [0.0] * (int(mode) - 1) + [float(amplitude)]
        return cls(n=2, rho_cos=tuple(coeffs), rho_sin=(), n_r=n_r, n_phi=n_phi)

    @classmethod
    def interval(cls, half_width: float, n_r: int = 65) -> "Domain":
        return cls(n=1, half_width=float(half_width), n_r=n_r, n_phi=0)

    # -- profile evaluation ------------------------------------------------

    def rho(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = np.full_like(phi, self.rho_cos[0] if self.rho_cos else 0.0)
        for k, c in enumerate(self.rho_cos[1:], start=1):
            out = out + c * np.cos(k * phi)
        for k, s in enumerate(self.rho_sin, start=1):
            out = out + s * np.sin(k * phi)
        return out

    def rho_d1(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        for k, c in enumerate(self.rho_cos[1:], start=1):
            out = out - k * c * np.sin(k * phi)
        for k, s in enumerate(self.rho_sin, start=1):
            out = out + k * s * np.cos(k * phi)
        return out

    def rho_d2(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        for k, c in enumerate(self.rho_cos[1:], start=1):
            out = out - k * k * c * np.cos(k * phi)
        for k, s in enumerate(self.rho_sin, start=1):
            out = out - k * k * s * np.sin(k * phi)
        return out

    @property
    def centrally_symmetric(self) -> bool:
        """True when rho(phi + pi) = rho(phi), i.e. no odd harmonics."""
        scale = max(abs(c) for c in self.rho_cos) if self.rho_cos else 1.0
        odd = [c for k, c in enumerate(self.rho_cos) if k % 2 == 1]
        odd += [s for k, s in enumerate(self.rho_sin, start=1) if k % 2 == 1]
        return all(abs(c) <= 1e-13 * max(scale, 1.0) for c in odd)

    @property
    def max_radius(self) -> float:
        if self.n == 1:
            return self.half_width
        phi = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
        return float(self.rho(phi).max())

    def min_radius(self) -> float:
        if self.n == 1:
            return self.half_width
        phi = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
        return float(self.rho(phi).min())

    def validate(self, strict: bool = False) -> None:
        """Raise DomainError on an unusable domain.

        ``strict`` additionally enforces the production grid limits used
        by the CLI (n_r >= 8 and even n_phi >= 16).
        """
        if self.n not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {self.n}")
        if self.n == 1:
            if self.half_width <= 0:
                raise DomainError("interval half-width must be positive")
            if self.n_r < _MIN_NR:
                raise DomainError(f"n_r must be at least {_MIN_NR}")
            return
        if self.n_r < _MIN_NR:
            raise DomainError(f"n_r must be at least {_MIN_NR}")
        if self.n_phi < _MIN_NPHI or self.n_phi % 2:
            raise DomainError(f"n_phi must be even and at least {_MIN_NPHI}")
        if strict:
            if self.n_r < 8:
                raise DomainError("n_r must be at least 8")
            if self.n_phi < 16:
                raise DomainError("n_phi must be even and at least 16")
        if self.min_radius() <= 0.0:
            raise DomainError("radial profile must be positive at every angle (not star-shaped)")


@dataclass
class GridFunction:
    """Grid heights together with their Dirichlet boundary value."""

    values: np.ndarray
    eps: float

    def copy(self) -> "GridFunction":
        return GridFunction(self.values.copy(), self.eps)


def fit_profile(profile, n_sample: int = 1024, tol: float = 1e-14):
    """Project a smooth 2*pi-periodic profile onto a finite Fourier basis.

    Returns (cos_coeffs, sin_coeffs) truncated where the spectrum falls
    below ``tol`` relative to the largest coefficient.
    """
    phi = np.linspace(0.0, 2.0 * math.pi, n_sample, endpoint=False)
    vals = np.asarray(profile(phi), dtype=float)
    spec = np.fft.rfft(vals) / n_sample
    cos_c = np.concatenate([[spec[0].real], 2.0 * spec[1:].real])
    sin_c = -2.0 * spec[1:].imag
    scale = max(np.abs(cos_c).max(), np.abs(sin_c).max(), 1e-300)
    keep = max(
        [0]
        + [k for k in range(len(cos_c)) if abs(cos_c[k]) > tol * scale]
        + [k for k in range(1, n_sample // 2) if abs(sin_c[k - 1]) > tol * scale]
    )
    return tuple(cos_c[: keep + 1]), tuple(sin_c[:keep])


# ---------------------------------------------------------------------------
# Differentiation matrices
# ---------------------------------------------------------------------------


def fourier_diff_matrices(n: int):
    """First and second spectral differentiation matrices on 2*pi/n grid.

    Requires even n; the classic cotangent/cosecant formulas.
    """
    if n % 2:
        raise ValueError("Fourier collocation grid must have an even number of nodes")
    h = 2.0 * math.pi / n
    k = np.arange(n)
    diff = k[:, None] - k[None, :]
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = 0.5 * sign / np.tan(0.5 * h * diff)
        d2 = -0.5 * sign / np.sin(0.5 * h * diff) ** 2
    np.fill_diagonal(d1, 0.0)
    np.fill_diagonal(d2, -math.pi**2 / (3.0 * h**2) - 1.0 / 6.0)
    return d1, d2


# Exact stencil weights (per 1/h resp. 1/h^2).  "parity" rows differentiate
# at r = h using the extended nodes {-2h, -h, h, 2h}; the negative-radius
# values live on the antipodal column of the same/next ring.
_CENTER_D1 = np.array([-0.5, 0.0, 0.5])
_CENTER_D2 = np.array([1.0, -2.0, 1.0])
_FWD_D1 = np.array([-11.0 / 6.0, 3.0, -1.5, 1.0 / 3.0])
_FWD_D2 = np.array([2.0, -5.0, 4.0, -1.0])
_BWD_D1 = -_FWD_D1[::-1]
_BWD_D2 = _FWD_D2[::-1]
_PARITY_D1 = np.array([1.0 / 6.0, -0.5, -1.0 / 6.0, 0.5])  # nodes -2h,-h,h,2h at x0=h
_PARITY_D2 = np.array([-1.0 / 6.0, 2.0 / 3.0, -4.0 / 3.0, 5.0 / 6.0])


def _radial_matrices(n_r: int, h: float, parity: bool):
    """Stencil matrices (regular, antipodal) for d/dr and d2/dr2."""
    r1 = np.zeros((n_r, n_r))
    r2 = np.zeros((n_r, n_r))
    r1p = np.zeros((n_r, n_r))
    r2p = np.zeros((n_r, n_r))
    for j in range(1, n_r - 1):
        r1[j, j - 1 : j + 2] = _CENTER_D1 / h
        r2[j, j - 1 : j + 2] = _CENTER_D2 / h**2
    if parity:
        r1[0, 0:2] = _PARITY_D1[2:] / h
        r1p[0, 0:2] = _PARITY_D1[1::-1] / h
        r2[0, 0:2] = _PARITY_D2[2:] / h**2
        r2p[0, 0:2] = _PARITY_D2[1::-1] / h**2
    else:
        r1[0, 0:4] = _FWD_D1 / h
        r2[0, 0:4] = _FWD_D2 / h**2
    r1[n_r - 1, n_r - 4 :] = _BWD_D1 / h
    r2[n_r - 1, n_r - 4 :] = _BWD_D2 / h**2
    return r1, r2, r1p, r2p


# ---------------------------------------------------------------------------
# Grid topology
# ---------------------------------------------------------------------------


class GridTopology:
    """Precomputed grid data: nodes, map Jacobians, differentiation operators."""

    def __init__(self, domain: Domain):
        domain.validate()
        self.domain = domain
        self.n = domain.n
        if self.n == 2:
            self._init_polar(domain)
        else:
            self._init_interval(domain)

    # -- construction ------------------------------------------------------

    def _init_polar(self, domain: Domain):
        n_r, n_phi = domain.n_r, domain.n_phi
        self.shape = (n_r, n_phi)
        self.n_nodes = n_r * n_phi
        self.h_comp = 1.0 / n_r
        self.r = (np.arange(n_r) + 1.0) * self.h_comp
        self.phi = 2.0 * math.pi * np.arange(n_phi) / n_phi

        fine = np.linspace(0.0, 2.0 * math.pi, max(4096, 8 * n_phi), endpoint=False)
        if np.min(domain.rho(fine)) <= 0.0:
            raise DomainError("radial profile must be positive at every angle (not star-shaped)")

        rho = domain.rho(self.phi)
        drho = domain.rho_d1(self.phi)
        d2rho = domain.rho_d2(self.phi)
        self.rho_phi, self.drho_phi, self.d2rho_phi = rho, drho, d2rho
        self.max_rho = float(domain.rho(fine).max())
        self.h = self.max_rho * self.h_comp  # physical mesh scale for tolerances

        cos, sin = np.cos(self.phi), np.sin(self.phi)
        rr = self.r[:, None]
        x1 = rr * rho * cos
        x2 = rr * rho * sin
        self.x_grid = np.stack([x1, x2], axis=-1)
        self.x_flat = self.x_grid.reshape(-1, 2)

        dist = (n_r - 1) - np.arange(n_r)
        self.boundary_rings = np.repeat(dist, n_phi)  # rings from the boundary
        self.boundary_mask = self.boundary_rings == 0
        self.interior_mask = ~self.boundary_mask

        # Jacobian of the map and its inverse transpose, per node.
        j11 = np.broadcast_to(rho * cos, (n_r, n_phi))
        j21 = np.broadcast_to(rho * sin, (n_r, n_phi))
        j12 = rr * (drho * cos - rho * sin)
        j22 = rr * (drho * sin + rho * cos)
        det = j11 * j22 - j12 * j21  # = r * rho^2 > 0
        B = np.empty((n_r, n_phi, 2, 2))
        B[..., 0, 0] = j22 / det
        B[..., 0, 1] = -j21 / det
        B[..., 1, 0] = -j12 / det
        B[..., 1, 1] = j11 / det
        self.B = B.reshape(-1, 2, 2)

        hmap = np.zeros((n_r, n_phi, 2, 2, 2))
        x1_rp = drho * cos - rho * sin
        x2_rp = drho * sin + rho * cos
        x1_pp = rr * (d2rho * cos - 2.0 * drho * sin - rho * cos)
        x2_pp = rr * (d2rho * sin + 2.0 * drho * cos - rho * sin)
        hmap[..., 0, 0, 1] = hmap[..., 0, 1, 0] = x1_rp
        hmap[..., 1, 0, 1] = hmap[..., 1, 1, 0] = x2_rp
        hmap[..., 0, 1, 1] = x1_pp
        hmap[..., 1, 1, 1] = x2_pp
        self.Hmap = hmap.reshape(-1, 2, 2, 2)

        self.pole_parity = domain.centrally_symmetric
        self._r1, self._r2, self._r1p, self._r2p = _radial_matrices(n_r, self.h_comp, self.pole_parity)
        self._f1, self._f2 = fourier_diff_matrices(n_phi)
        self._half = n_phi // 2

        # Boundary curve data at the collocation angles.
        tlen = np.sqrt(rho**2 + drho**2)
        self.boundary_normal = np.stack(
            [(drho * sin + rho * cos) / tlen, (-drho * cos + rho * sin) / tlen], axis=-1
        )
        self.boundary_x_dot_normal = rho**2 / tlen
        self.boundary_mean_curvature = (rho**2 + 2.0 * drho**2 - rho * d2rho) / tlen**3

    def _init_interval(self, domain: Domain):
        n = domain.n_r
        d = domain.half_width
        self.shape = (n,)
        self.n_nodes = n
        x = np.linspace(-d, d, n)
        self.h_comp = x[1] - x[0]
        self.h = self.h_comp
        self.max_rho = d
        self.x_grid = x[:, None]
        self.x_flat = self.x_grid
        idx = np.arange(n)
        self.boundary_rings = np.minimum(idx, n - 1 - idx)
        self.boundary_mask = self.boundary_rings == 0
        self.interior_mask = ~self.boundary_mask
        self.B = np.ones((n, 1, 1))
        self.Hmap = np.zeros((n, 1, 1, 1))
        self.pole_parity = False
        d1 = np.zeros((n, n))
        d2 = np.zeros((n, n))
        h = self.h_comp
        for j in range(1, n - 1):
            d1[j, j - 1 : j + 2] = _CENTER_D1 / h
            d2[j, j - 1 : j + 2] = _CENTER_D2 / h**2
        d1[0, :4] = _FWD_D1 / h
        d2[0, :4] = _FWD_D2 / h**2
        d1[-1, -4:] = _BWD_D1 / h
        d2[-1, -4:] = _BWD_D2 / h**2
        self._d1, self._d2 = d1, d2
        self.boundary_normal = np.array([[-1.0], [1.0]])
        self.boundary_x_dot_normal = np.array([d, d])
        self.boundary_mean_curvature = np.zeros(2)

    # -- helpers -----------------------------------------------------------

    def to_grid(self, flat):
        return np.asarray(flat).reshape(self.shape)

    def to_flat(self, grid):
        return np.asarray(grid).reshape(-1)

    def horosphere(self, eps: float) -> np.ndarray:
        return np.full(self.shape, float(eps))

    def value_at_origin(self, u) -> float:
        """Estimate u(0); there is no node at the origin itself."""
        u = np.asarray(u).reshape(self.shape)
        if self.n == 2:
            return float(u[0].mean())
        x = self.x_flat[:, 0]
        return float(np.interp(0.0, x, u))

    def boundary_values(self, field_flat) -> np.ndarray:
        return np.asarray(field_flat).reshape(-1)[self.boundary_mask]

    def _roll_half(self, grid):
        return np.roll(grid, -self._half, axis=1)

    # -- differentiation ---------------------------------------------------

    def comp_derivatives(self, u):
        """Computational-space derivatives (u_r, u_phi, u_rr, u_rphi, u_phiphi)."""
        u = np.asarray(u, dtype=float).reshape(self.shape)
        if self.n == 1:
            raise ValueError("computational derivatives are only defined for the polar grid")
        ur = self._r1 @ u
        urr = self._r2 @ u
        if self.pole_parity:
            ru = self._roll_half(u)
            ur = ur + self._r1p @ ru
            urr = urr + self._r2p @ ru
        up = u @ self._f1.T
        upp = u @ self._f2.T
        urp = self._r1 @ up
        if self.pole_parity:
            urp = urp + self._r1p @ self._roll_half(up)
        return ur, up, urr, urp, upp

    def derivatives(self, u):
        """Cartesian (Du, D2u) at every node, flattened.

        Returns arrays of shape (n_nodes, n) and (n_nodes, n, n).
        """
        u = np.asarray(u, dtype=float).reshape(self.shape)
        if self.n == 1:
            du = (self._d1 @ u)[:, None]
            d2u = (self._d2 @ u)[:, None, None]
            return du, d2u
        ur, up, urr, urp, upp = self.comp_derivatives(u)
        grad_c = np.stack([ur.reshape(-1), up.reshape(-1)], axis=-1)
        hc = np.empty((self.n_nodes, 2, 2))
        hc[:, 0, 0] = urr.reshape(-1)
        hc[:, 0, 1] = hc[:, 1, 0] = urp.reshape(-1)
        hc[:, 1, 1] = upp.reshape(-1)
        du = np.einsum("nij,nj->ni", self.B, grad_c)
        hc -= np.einsum("ncab,nc->nab", self.Hmap, du)
        d2u = np.einsum("nia,nab,njb->nij", self.B, hc, self.B)
        d2u = 0.5 * (d2u + np.swapaxes(d2u, -1, -2))
        return du, d2u

    # -- sparse operators --------------------------------------------------

    @cached_property
    def _kron_ops(self):
        """Flattened sparse operators for r, phi and second derivatives."""
        if self.n == 1:
            return {
                "xx": sp.csr_matrix(self._d2),
                "x": sp.csr_matrix(self._d1),
            }
        n_r, n_phi = self.shape
        eye_p = sp.identity(n_phi, format="csr")
        f1 = sp.csr_matrix(self._f1)
        f2 = sp.csr_matrix(self._f2)
        shift = sp.csr_matrix(
            (np.ones(n_phi), (np.arange(n_phi), (np.arange(n_phi) + self._half) % n_phi)),
            shape=(n_phi, n_phi),
        )
        r1 = sp.csr_matrix(self._r1)
        r2 = sp.csr_matrix(self._r2)
        k_r = sp.kron(r1, eye_p, format="csr")
        k_rr = sp.kron(r2, eye_p, format="csr")
        k_rp = sp.kron(r1, f1, format="csr")
        if self.pole_parity:
            r1p = sp.csr_matrix(self._r1p)
            r2p = sp.csr_matrix(self._r2p)
            k_r = k_r + sp.kron(r1p, shift, format="csr")
            k_rr = k_rr + sp.kron(r2p, shift, format="csr")
            k_rp = k_rp + sp.kron(r1p, shift @ f1, format="csr")
        return {
            "r": k_r,
            "rr": k_rr,
            "p": sp.kron(sp.identity(n_r, format="csr"), f1, format="csr"),
            "pp": sp.kron(sp.identity(n_r, format="csr"), f2, format="csr"),
            "rp": k_rp,
        }

    def assemble_operator(self, c2, c1, c0) -> sp.csr_matrix:
        """Sparse operator sum_ab c2[ab] D_ab + sum_a c1[a] D_a + c0.

        Coefficient fields are Cartesian, per node; the chain rule to the
        computational coordinates is applied here.  Boundary rows are
        replaced by the identity.
        """
        c2 = np.asarray(c2, dtype=float).reshape(self.n_nodes, self.n, self.n)
        c1 = np.asarray(c1, dtype=float).reshape(self.n_nodes, self.n)
        c0 = np.asarray(c0, dtype=float).reshape(self.n_nodes)
        mask = self.interior_mask.astype(float)
        ops = self._kron_ops
        if self.n == 1:
            mat = (
                sp.diags(c2[:, 0, 0] * mask) @ ops["xx"]
                + sp.diags(c1[:, 0] * mask) @ ops["x"]
                + sp.diags(c0 * mask)
            )
        else:
            c2c = np.einsum("nab,nai,nbj->nij", c2, self.B, self.B)
            t = np.einsum("nij,ncij->nc", c2c, self.Hmap)
            c1c = np.einsum("na,nai->ni", c1, self.B) - np.einsum("nc,nci->ni", t, self.B)
            mat = (
                sp.diags(c2c[:, 0, 0] * mask) @ ops["rr"]
                + sp.diags((c2c[:, 0, 1] + c2c[:, 1, 0]) * mask) @ ops["rp"]
                + sp.diags(c2c[:, 1, 1] * mask) @ ops["pp"]
                + sp.diags(c1c[:, 0] * mask) @ ops["r"]
                + sp.diags(c1c[:, 1] * mask) @ ops["p"]
                + sp.diags(c0 * mask)
            )
        return (mat + sp.diags(self.boundary_mask.astype(float))).tocsr()


def build_grid(domain: Domain) -> GridTopology:
    """Validate the domain and build its grid topology.

    Rejects profiles that are not strictly positive (the region must be
    star-shaped about the origin).
    """
    return GridTopology(domain)
