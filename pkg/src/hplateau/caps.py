"""Equidistant-sphere caps: the closed-form comparison solutions.

A Euclidean sphere of radius R centered at height -sigma*R on the ideal
boundary plane is umbilic in hyperbolic space with all principal
curvatures equal to sigma.  Its upper portion is the graph of

    u(x) = sqrt(R^2 - |x|^2) - sigma*R

over the ball of radius R*sqrt(1 - sigma^2).  These caps are the exact
solutions used to calibrate every stage of the pipeline: derivatives,
shape matrices, residuals, solver output, the eta field, and the dual
transport all have closed forms here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EquidistantCap:
    """Spherical cap with constant hyperbolic curvature ``sigma``.

    Parameters
    ----------
    sigma : float
        Curvature level in (0, 1).
    radius : float
        Euclidean radius R of the generating sphere.
    """

    sigma: float
    radius: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("cap curvature must lie in (0, 1)")
        if self.radius <= 0.0:
            raise ValueError("cap radius must be positive")

    @property
    def domain_radius(self) -> float:
        """Radius of the asymptotic boundary circle, R*sqrt(1 - sigma^2)."""
        return self.radius * math.sqrt(1.0 - self.sigma**2)

    @classmethod
    def for_boundary_value(cls, sigma: float, domain_radius: float, eps: float) -> "EquidistantCap":
        """Cap through u = eps on the sphere |x| = domain_radius.

        Solves sqrt(R^2 - a^2) - sigma*R = eps for R in closed form; with
        eps = 0 this recovers R = a / sqrt(1 - sigma^2).
        """
        a = domain_radius
        if eps < 0.0:
            raise ValueError("boundary value must be nonnegative")
        disc = math.sqrt(sigma**2 * eps**2 + (1.0 - sigma**2) * (a**2 + eps**2))
        return cls(sigma, (sigma * eps + disc) / (1.0 - sigma**2))

    # -- pointwise closed forms ------------------------------------------

    def _s(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r2 = (x**2).sum(axis=-1)
        return x, np.sqrt(self.radius**2 - r2)

    def height(self, x):
        """u(x) = sqrt(R^2 - |x|^2) - sigma*R."""
        _, s = self._s(x)
        return s - self.sigma * self.radius

    def gradient(self, x):
        """Du = -x / s."""
        x, s = self._s(x)
        return -x / s[..., None]

    def hessian(self, x):
        """D^2u = -I/s - x (x)^T / s^3."""
        x, s = self._s(x)
        n = x.shape[-1]
        eye = np.eye(n)
        return -eye / s[..., None, None] - np.einsum("...i,...j->...ij", x, x) / s[..., None, None] ** 3

    def slope_factor(self, x):
        """w = sqrt(1 + |Du|^2) = R / s."""
        _, s = self._s(x)
        return self.radius / s

    def normal_height_component(self, x):
        """nu^{n+1} = 1/w = s / R."""
        _, s = self._s(x)
        return s / self.radius

    @property
    def eta(self) -> float:
        """(sigma - nu^{n+1}) / u, constant -1/R on the cap."""
        return -1.0 / self.radius

    def starshape_field(self, x):
        """u - x . Du = R^2/s - sigma*R (positive on the cap)."""
        _, s = self._s(x)
        return self.radius**2 / s - self.sigma * self.radius

    # -- de Sitter dual ---------------------------------------------------

    def dual_base_point(self, x):
        """y = x + u Du = sigma*R*x / s."""
        x, s = self._s(x)
        return self.sigma * self.radius * x / s[..., None]

    def dual_height(self, y):
        """v(y) = R - sqrt((sigma R)^2 + |y|^2), the dual spacelike graph."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return self.radius - np.sqrt((self.sigma * self.radius) ** 2 + (y**2).sum(axis=-1))

    def dual_gradient(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        root = np.sqrt((self.sigma * self.radius) ** 2 + (y**2).sum(axis=-1))
        return -y / root[..., None]

    def sample(self, topo) -> np.ndarray:
        """Heights at the nodes of a grid topology, in grid layout."""
        u = self.height(topo.x_flat)
        return u.reshape(topo.shape)
