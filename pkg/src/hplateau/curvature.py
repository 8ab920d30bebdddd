"""Admissible curvature functions: normalized symmetric means and friends.

Members of the family are positive, strictly monotone, concave, degree-one
homogeneous symmetric functions on the positive cone, normalized so that
f(1, ..., 1) = 1:

* ``PowerMean(n, k)``   -- H_k^{1/k} with H_k the normalized k-th
  elementary symmetric function; k = 1 is the mean, k = n the Gauss
  curvature root.
* ``Quotient(n, l)``    -- (H_n / H_l)^{1/(n-l)}.
* ``Blend(theta, f)``   -- theta * H_n^{1/n} + (1 - theta) * f, the
  regularization used by the continuation ladders.
* ``DualOf(f)``         -- f*(kappa) = 1 / f(1/kappa_1, ..., 1/kappa_n).

Matrix arguments go through ``matrix_value_and_derivative`` which returns
F(A) = f(lambda(A)) together with the derivative matrix F^{ij}; the Euler
identity F^{ij} a_ij = F holds for every member.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CurvatureError(ValueError):
    """Raised when a curvature vector leaves the positive cone."""


def _check_positive(kappa):
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0.0) or not np.isfinite(kappa).all():
        raise CurvatureError("curvature arguments must be finite and strictly positive")
    return kappa


def elementary_symmetric(kappa):
    """e_0 .. e_n of each row via the Newton-identity recursion.

    Exact for small n and free of the cancellation that plagues direct
    expansion; returns shape kappa.shape[:-1] + (n+1,).
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    power_sums = [None] + [(kappa**k).sum(axis=-1) for k in range(1, n + 1)]
    e = [np.ones(kappa.shape[:-1])]
    for k in range(1, n + 1):
        acc = np.zeros(kappa.shape[:-1])
        for i in range(1, k + 1):
            acc += (-1.0) ** (i - 1) * e[k - i] * power_sums[i]
        e.append(acc / k)
    return np.stack(e, axis=-1)


def elementary_symmetric_reduced(kappa, e=None):
    """E[..., i, j] = e_j of kappa with component i removed, j = 0..n-1.

    These are the gradients: d e_k / d kappa_i = E[..., i, k-1].
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if e is None:
        e = elementary_symmetric(kappa)
    out = np.empty(kappa.shape[:-1] + (n, n))
    out[..., :, 0] = 1.0
    for j in range(1, n):
        out[..., :, j] = e[..., None, j] - kappa * out[..., :, j - 1]
    return out


@dataclass(frozen=True)
class CurvatureFunction:
    """Base: a normalized degree-one homogeneous member of the family."""

    n: int

    def value(self, kappa):
        return self.value_and_gradient(kappa)[0]

    def value_and_gradient(self, kappa):
        raise NotImplementedError

    @property
    def is_gauss_like(self) -> bool:
        """True when the function coincides with H_n^{1/n}."""
        return False

    def spec_string(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.spec_string()


@dataclass(frozen=True)
class PowerMean(CurvatureFunction):
    """H_k^{1/k} with H_k = e_k / C(n, k)."""

    k: int = 1

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise CurvatureError(f"power mean index must satisfy 1 <= k <= n, got k={self.k}")

    def value_and_gradient(self, kappa):
        kappa = _check_positive(kappa)
        e = elementary_symmetric(kappa)
        binom = math.comb(self.n, self.k)
        hk = e[..., self.k] / binom
        val = hk ** (1.0 / self.k)
        reduced = elementary_symmetric_reduced(kappa, e)
        dhk = reduced[..., :, self.k - 1] / binom
        grad = (val / (self.k * hk))[..., None] * dhk
        return val, grad

    @property
    def is_gauss_like(self) -> bool:
        return self.k == self.n

    def spec_string(self) -> str:
        if self.k == 1:
            return "mean"
        if self.k == self.n:
            return "gauss"
        return f"power_mean:{self.k}"


@dataclass(frozen=True)
class Quotient(CurvatureFunction):
    """(H_n / H_l)^{1/(n-l)} for 0 <= l < n."""

    l: int = 1

    def __post_init__(self):
        if not 0 <= self.l < self.n:
            raise CurvatureError(f"quotient index must satisfy 0 <= l < n, got l={self.l}")

    def value_and_gradient(self, kappa):
        kappa = _check_positive(kappa)
        e = elementary_symmetric(kappa)
        binom_l = math.comb(self.n, self.l)
        ratio = binom_l * e[..., self.n] / e[..., self.l]
        power = 1.0 / (self.n - self.l)
        val = ratio**power
        reduced = elementary_symmetric_reduced(kappa, e)
        dlog = reduced[..., :, self.n - 1] / e[..., None, self.n]
        if self.l >= 1:
            dlog = dlog - reduced[..., :, self.l - 1] / e[..., None, self.l]
        grad = (power * val)[..., None] * dlog
        return val, grad

    @property
    def is_gauss_like(self) -> bool:
        return self.l == 0

    def spec_string(self) -> str:
        return f"quotient:{self.n},{self.l}"


@dataclass(frozen=True)
class Blend(CurvatureFunction):
    """theta * H_n^{1/n} + (1 - theta) * inner; affine in theta."""

    theta: float = 0.0
    inner: CurvatureFunction = None

    def __post_init__(self):
        if self.inner is None:
            raise CurvatureError("blend requires an inner curvature function")
        if self.inner.n != self.n:
            raise CurvatureError("blend dimension mismatch")
        if not 0.0 <= self.theta <= 1.0:
            raise CurvatureError("blend weight must lie in [0, 1]")

    def value_and_gradient(self, kappa):
        v_in, g_in = self.inner.value_and_gradient(kappa)
        if self.theta == 0.0:
            return v_in, g_in
        v_g, g_g = PowerMean(self.n, self.n).value_and_gradient(kappa)
        t = self.theta
        return t * v_g + (1.0 - t) * v_in, t * g_g + (1.0 - t) * g_in

    @property
    def is_gauss_like(self) -> bool:
        return self.inner.is_gauss_like

    def spec_string(self) -> str:
        return f"blend:{self.theta:g},{self.inner.spec_string()}"


@dataclass(frozen=True)
class DualOf(CurvatureFunction):
    """f*(kappa) = 1 / f(kappa_1^{-1}, ..., kappa_n^{-1})."""

    inner: CurvatureFunction = None

    def __post_init__(self):
        if self.inner is None:
            raise CurvatureError("dual requires an inner curvature function")
        if self.inner.n != self.n:
            raise CurvatureError("dual dimension mismatch")

    def value_and_gradient(self, kappa):
        kappa = _check_positive(kappa)
        mu = 1.0 / kappa
        v_in, g_in = self.inner.value_and_gradient(mu)
        val = 1.0 / v_in
        grad = g_in * mu**2 / (v_in**2)[..., None]
        return val, grad

    def closed_form(self):
        """Structural simplification of the dual, when one is known.

        The dual of a quotient (H_n/H_l)^{1/(n-l)} is H_{n-l}^{1/(n-l)};
        the Gauss root is self-dual.  Returns None otherwise.
        """
        inner = self.inner
        if isinstance(inner, Quotient):
            return PowerMean(self.n, self.n - inner.l)
        if isinstance(inner, PowerMean):
            if inner.k == self.n:
                return inner
            if inner.k == 1:
                return Quotient(self.n, self.n - 1)
        if isinstance(inner, DualOf):
            return inner.inner
        return None

    @property
    def is_gauss_like(self) -> bool:
        return self.inner.is_gauss_like

    def spec_string(self) -> str:
        return f"dual:{self.inner.spec_string()}"


def dual_curvature(f: CurvatureFunction) -> DualOf:
    """The dual curvature function, evaluated by definition."""
    return DualOf(f.n, f)


def blend_with_gauss(f: CurvatureFunction, theta: float) -> CurvatureFunction:
    """Continuation regularization; returns f unchanged at theta = 0."""
    if theta <= 0.0 or f.is_gauss_like:
        return f
    return Blend(f.n, theta, f)


def parse_curvature(spec: str, n: int) -> CurvatureFunction:
    """Parse a curvature-function name.

    Accepted forms: ``mean``, ``gauss``, ``power_mean:k``,
    ``quotient:n,l``, ``blend:theta,inner``, ``dual:inner``.
    """
    spec = spec.strip()
    if spec == "mean":
        return PowerMean(n, 1)
    if spec == "gauss":
        return PowerMean(n, n)
    head, _, rest = spec.partition(":")
    if head == "power_mean":
        try:
            return PowerMean(n, int(rest))
        except ValueError as exc:
            raise CurvatureError(f"bad power_mean index {rest!r}") from exc
    if head == "quotient":
        try:
            n_spec, l_spec = (int(p) for p in rest.split(","))
        except ValueError as exc:
            raise CurvatureError(f"bad quotient indices {rest!r}") from exc
        if n_spec != n:
            raise CurvatureError(f"quotient dimension {n_spec} does not match domain dimension {n}")
        return Quotient(n, l_spec)
    if head == "blend":
        theta_s, _, inner_s = rest.partition(",")
        try:
            theta = float(theta_s)
        except ValueError as exc:
            raise CurvatureError(f"bad blend weight {theta_s!r}") from exc
        return Blend(n, theta, parse_curvature(inner_s, n))
    if head == "dual":
        return DualOf(n, parse_curvature(rest, n))
    raise CurvatureError(f"unknown curvature function {spec!r}")


# ---------------------------------------------------------------------------
# Matrix calculus
# ---------------------------------------------------------------------------

# Eigenvalue gaps below this fraction of ||A||_F take the symmetric limit
# (f is symmetric, so F^{ij} tends to mean(f_i) * I at repeated eigenvalues).
_REPEATED_GAP_RTOL = 1e-8


def matrix_value_and_derivative(f: CurvatureFunction, a):
    """F(A) = f(lambda(A)) and F^{ij}(A) = Q diag(f_i) Q^T.

    For 2x2 matrices the spectral projector form avoids eigenvectors
    entirely; nearly repeated eigenvalues (gap below 1e-8 ||A||) take the
    symmetric limit F^{ij} = mean(f_i) * I.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if n != f.n:
        raise CurvatureError("matrix dimension does not match curvature function dimension")
    if n == 1:
        lam = a[..., :, 0]
        val, grad = f.value_and_gradient(lam)
        return val, grad[..., None]
    if n == 2:
        mean = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
        gap = np.sqrt((0.5 * (a[..., 0, 0] - a[..., 1, 1])) ** 2 + a[..., 0, 1] ** 2)
        lam = np.stack([mean - gap, mean + gap], axis=-1)
        val, grad = f.value_and_gradient(lam)
        norm = np.sqrt((a**2).sum(axis=(-1, -2)))
        grad_mean = 0.5 * (grad[..., 0] + grad[..., 1])
        grad_diff = 0.5 * (grad[..., 1] - grad[..., 0])
        eye = np.eye(2)
        safe_gap = np.where(gap > 0, gap, 1.0)
        reflect = (a - mean[..., None, None] * eye) / safe_gap[..., None, None]
        fij = grad_mean[..., None, None] * eye + grad_diff[..., None, None] * reflect
        near = gap <= _REPEATED_GAP_RTOL * norm
        if np.any(near):
            fij = np.where(near[..., None, None], grad_mean[..., None, None] * eye, fij)
        return val, fij
    lam, q = np.linalg.eigh(a)
    val, grad = f.value_and_gradient(lam)
    fij = np.einsum("...ik,...k,...jk->...ij", q, grad, q)
    return val, fij


# ---------------------------------------------------------------------------
# Structure verification
# ---------------------------------------------------------------------------


@dataclass
class StructureReport:
    """Sampled verification of the structure conditions."""

    samples: int
    violations: list
    boundary_values: np.ndarray  # f along a path to the cone boundary

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def boundary_limit(self) -> float:
        return float(self.boundary_values[-1])


def structure_check(f: CurvatureFunction, samples: int = 1000, seed: int = 0) -> StructureReport:
    """Randomized check of positivity, monotonicity, homogeneity, concavity.

    Samples the positive cone log-uniformly and records every violated
    condition.  Boundary behavior is probed along (delta, 1, ..., 1) with
    delta down to 1e-9; the decay values are reported, and flagged only
    when f fails to decrease toward the cone boundary at all (strict
    vanishing there holds for k >= 2 means and quotients but not for the
    mean itself).
    """
    rng = np.random.default_rng(seed)
    n = f.n
    kappa = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), size=(samples, n)))
    mu = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), size=(samples, n)))
    t = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), size=samples))
    violations = []

    val, grad = f.value_and_gradient(kappa)
    bad = np.nonzero(~(val > 0.0))[0]
    violations += [("positivity", i, float(val[i])) for i in bad[:20]]
    bad = np.nonzero(~(grad > 0.0).all(axis=-1))[0]
    violations += [("monotonicity", i, float(grad[i].min())) for i in bad[:20]]

    val_t = f.value(t[:, None] * kappa)
    rel = np.abs(val_t - t * val) / np.maximum(t * val, 1e-300)
    bad = np.nonzero(rel > 1e-12)[0]
    violations += [("homogeneity", i, float(rel[i])) for i in bad[:20]]

    val_mu = f.value(mu)
    val_mid = f.value(0.5 * (kappa + mu))
    gap = val_mid - 0.5 * (val + val_mu)
    bad = np.nonzero(gap < -1e-12 * np.maximum(val, val_mu))[0]
    violations += [("concavity", i, float(gap[i])) for i in bad[:20]]

    deltas = 10.0 ** -np.arange(1, 10)
    probe = np.ones((len(deltas), n))
    probe[:, 0] = deltas
    boundary = f.value(probe)
    if not boundary[-1] < 1.0 - 1e-9:
        violations.append(("boundary_decay", -1, float(boundary[-1])))
    return StructureReport(samples=samples, violations=violations, boundary_values=boundary)
