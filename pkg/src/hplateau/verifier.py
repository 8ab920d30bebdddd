"""Scorecard checks for converged solutions.

Every check is recorded as an inequality lhs <= rhs + tolerance with both
sides and the margin reported; a check passes only with explicit margin.
Discretization-limited checks use the tolerance 10 h^2 with h the
physical mesh scale.

Two measurement conventions, both recorded in the entries they affect:

* Pointwise quantities that divide by u are unreliable on the outermost
  grid ring once the boundary value eps falls below the mesh scale
  (eta = (sigma - nu)/u there is a ratio of two quantities of size eps,
  and the finite-difference error of nu is amplified by 1/eps).  The eta
  maximum principle is therefore checked against the discrete boundary
  strip {boundary ring, adjacent ring}; the differential inequality
  behind it holds on every subgraph, so the comparison remains
  theorem-faithful.  G_u sign checks skip the boundary ring for the same
  reason.
* The starshape field satisfies L S = 0 with zeroth-order coefficient
  G_u < 0, which yields S >= min(0, min_boundary S) but not a pointwise
  lower bound by the boundary minimum (the curvature-sigma cap is an
  explicit counterexample: S(0) = R(1-sigma) < R(1-sigma^2)/sigma on the
  boundary).  The weak form is what is checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import CurvatureFunction, dual_curvature, matrix_value_and_derivative, structure_check
from .desitter import (
    ExtrapolationUnstable,
    dual_curvatures,
    extrapolate_to_zero,
    forward_map,
    legendre_defect,
    reciprocity_defect,
)
from .domain import Domain, GridTopology
from .geometry import eigenvalues_sym, point_geometry


@dataclass
class ScorecardEntry:
    """One verified inequality: passes when lhs <= rhs + tolerance."""

    check_id: str
    lhs: float
    rhs: float
    tolerance: float

    @property
    def margin(self) -> float:
        return self.rhs + self.tolerance - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.tolerance

    def as_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "margin": self.margin,
        }


@dataclass
class Scorecard:
    """Collected entries plus the constants they were evaluated with."""

    entries: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def add(self, check_id, lhs, rhs, tolerance=0.0) -> ScorecardEntry:
        entry = ScorecardEntry(check_id, float(lhs), float(rhs), float(tolerance))
        self.entries.append(entry)
        return entry

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, check_id) -> ScorecardEntry:
        for e in self.entries:
            if e.check_id == check_id:
                return e
        raise KeyError(check_id)

    def as_json_entries(self) -> list:
        return [e.as_dict() for e in self.entries]


# ---------------------------------------------------------------------------
# Domain geometry: interior/exterior ball radii
# ---------------------------------------------------------------------------


def ball_radii(domain: Domain, samples: int = 2048):
    """Maximal uniform interior and exterior tangent-ball radii of the boundary.

    Brute force over sampled boundary pairs: the ball of radius r tangent
    at p (center p -+ r N) excludes a sampled point q exactly when
    |q - p|^2 -+ 2 r (q - p) . N >= 0, so each pair yields a critical
    radius and the uniform radius is the min over pairs and points.
    Convex domains report r2 = +inf.  Accuracy is bounded by the sampling
    density (about +-2 percent at the default resolution).
    """
    if domain.n == 1:
        return domain.half_width, math.inf
    phi = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    rho = domain.rho(phi)
    drho = domain.rho_d1(phi)
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)
    tlen = np.sqrt(rho**2 + drho**2)
    normals = np.stack(
        [(drho * np.sin(phi) + rho * np.cos(phi)) / tlen, (-drho * np.cos(phi) + rho * np.sin(phi)) / tlen],
        axis=-1,
    )
    diff = pts[None, :, :] - pts[:, None, :]  # diff[i, j] = q_j - p_i
    sq = (diff**2).sum(axis=-1)
    dot = np.einsum("ijk,ik->ij", diff, normals)
    eye = np.eye(samples, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        interior_crit = np.where((dot < 0.0) & ~eye, sq / (-2.0 * dot), np.inf)
        exterior_crit = np.where((dot > 0.0) & ~eye, sq / (2.0 * dot), np.inf)
    r1 = float(interior_crit.min())
    r2 = float(exterior_crit.min())
    if not math.isfinite(r2) or r2 > 1e6 * domain.max_radius:
        r2 = math.inf
    return r1, r2


def exterior_constant(sigma: float, eps: float, r2: float) -> float:
    """M = sqrt(1 - sigma^2)/r2 + eps (1 + sigma)/r2^2; zero for convex domains."""
    if math.isinf(r2):
        return 0.0
    return math.sqrt(1.0 - sigma**2) / r2 + eps * (1.0 + sigma) / r2**2


# ---------------------------------------------------------------------------
# Solution-side fields
# ---------------------------------------------------------------------------


@dataclass
class SolutionGeometry:
    """Pointwise fields of a converged solution used by the checks."""

    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    w: np.ndarray
    nu: np.ndarray
    kappa: np.ndarray
    eta: np.ndarray
    starshape: np.ndarray
    gu: np.ndarray
    f_value: np.ndarray
    hodograph: np.ndarray


def solution_geometry(topo: GridTopology, u, f: CurvatureFunction, sigma: float) -> SolutionGeometry:
    geom = point_geometry(topo.to_flat(u), *topo.derivatives(u))
    fval, fij = matrix_value_and_derivative(f, geom.a)
    fii = np.einsum("nii->n", fij)
    gu = (fval - fii / geom.w) / geom.u
    eta = (sigma - geom.nu) / geom.u
    starshape = geom.u - np.einsum("ni,ni->n", topo.x_flat, geom.du)
    hodograph = (
        np.eye(topo.n)
        + np.einsum("ni,nj->nij", geom.du, geom.du)
        + geom.u[:, None, None] * geom.d2u
    )
    return SolutionGeometry(
        u=geom.u,
        du=geom.du,
        d2u=geom.d2u,
        w=geom.w,
        nu=geom.nu,
        kappa=geom.kappa,
        eta=eta,
        starshape=starshape,
        gu=gu,
        f_value=fval,
        hodograph=hodograph,
    )


# ---------------------------------------------------------------------------
# Individual checks
# ---------------------------------------------------------------------------


def max_principle_check(card: Scorecard, geom: SolutionGeometry, topo: GridTopology, sigma: float, eps: float, r2: float):
    """Interior maximum of eta against the discrete boundary strip, and the
    quantitative upper bound eta <= M."""
    tol = 10.0 * topo.h**2
    rings = topo.boundary_rings
    core = rings >= 2
    strip = rings <= 1
    card.add("eta_max_principle", geom.eta[core].max(), geom.eta[strip].max(), tol)
    m_const = exterior_constant(sigma, eps, r2)
    card.add("eta_upper_bound", geom.eta[rings >= 1].max(), m_const, tol)
    card.extras["eta_interior_max"] = float(geom.eta[core].max())
    card.extras["eta_strip_max"] = float(geom.eta[strip].max())


def curvature_bound_check(card: Scorecard, geom: SolutionGeometry, topo: GridTopology, sigma: float, eps: float, r2: float):
    """Global curvature bound kappa_max <= 8 a^{-5/2} and its weighted form.

    The hypothesis nu >= 2a is asserted on convex domains, where
    2a = sigma exactly; when it fails on a nonconvex domain the bound
    entries are skipped and the hypothesis is recorded as unmet rather
    than failed (the estimate then does not apply).
    """
    tol = 10.0 * topo.h**2
    m_const = exterior_constant(sigma, eps, r2)
    max_u = float(geom.u.max())
    a = 0.5 * sigma / (1.0 + m_const * max_u)
    card.extras.update({"M": m_const, "a": a, "b": a / 4.0, "max_u": max_u})
    nu_min = float(geom.nu.min())
    convex = math.isinf(r2)
    hyp_ok = nu_min >= 2.0 * a - tol
    if convex or hyp_ok:
        card.add("curvature_hypothesis_nu", 2.0 * a, nu_min, tol)
    else:
        # The estimate's hypothesis does not hold, so the theorem does not
        # apply: reported in the extras, not failed.
        card.extras["curvature_hypothesis_unmet"] = {"two_a": 2.0 * a, "nu_min": nu_min}
        return
    kappa_max = geom.kappa[:, -1]
    bound = 8.0 * a**-2.5
    card.add("kappa_max_bound", float(kappa_max.max()), bound, 0.0)
    b = a / 4.0
    weighted = geom.u**b * kappa_max / (geom.nu - a)
    card.add("kappa_weighted_bound", float(weighted.max()), bound * max_u**b, 0.0)


def boundary_angle_check(card: Scorecard, topo: GridTopology, eps_ladder, sigma: float, r1: float, r2: float):
    """Richardson-extrapolated boundary slope against 1/sigma, the dual
    boundary factor against sigma, and the two-sided boundary-normal
    bounds at each ladder level."""
    if len(eps_ladder) < 3:
        card.extras["boundary_angle_skipped"] = "needs at least 3 eps levels"
        return
    eps_values = []
    w_rows = []
    nu_rows = []
    for eps_k, u_k in eps_ladder:
        du, _ = topo.derivatives(u_k)
        w = np.sqrt(1.0 + (du**2).sum(axis=-1))
        eps_values.append(eps_k)
        w_rows.append(topo.boundary_values(w))
        nu_rows.append(topo.boundary_values(1.0 / w))
    eps_values = np.asarray(eps_values)
    w_rows = np.asarray(w_rows)
    nu_rows = np.asarray(nu_rows)
    try:
        w_limit, _ = extrapolate_to_zero(eps_values, w_rows)
        card.add(
            "boundary_angle",
            float(np.abs(w_limit - 1.0 / sigma).max()),
            0.0,
            0.02 / sigma,
        )
        ws_limit, _ = extrapolate_to_zero(eps_values, 1.0 / w_rows)
        card.add("dual_boundary_angle", float(np.abs(ws_limit - sigma).max()), 0.0, 0.02 * sigma)
        card.extras["boundary_w_extrapolated"] = w_limit.tolist()
    except ExtrapolationUnstable as exc:
        card.extras["boundary_angle_unstable"] = str(exc)
        card.add("boundary_angle", math.inf, 0.0, 0.02 / sigma)

    # Eq.-level two-sided bounds on nu - sigma along the boundary.
    passing = []
    worst_at = {}
    for k in range(len(eps_values)):
        eps_k = eps_values[k]
        lower = -eps_k * math.sqrt(1.0 - sigma**2) / r2 - eps_k**2 * (1.0 + sigma) / r2**2 if math.isfinite(r2) else 0.0
        upper = eps_k * math.sqrt(1.0 - sigma**2) / r1 + eps_k**2 * (1.0 - sigma) / r1**2
        dev = nu_rows[k] - sigma
        violation = max(float(lower - dev.min()), float(dev.max() - upper))
        worst_at[float(eps_k)] = violation
        if violation < 0.0:
            passing.append(float(eps_k))
    card.extras["eq2200_violation_by_eps"] = worst_at
    card.extras["eq2200_passing_eps"] = passing
    card.extras["eq2200_largest_passing_eps"] = max(passing) if passing else None
    best = min(worst_at.values())
    card.add("boundary_two_sided_bounds", best, 0.0, 0.0)


def structure_of_solution_checks(card: Scorecard, geom: SolutionGeometry, topo: GridTopology, mean_convex: bool):
    """Convexity of u^2 + |x|^2, starshapedness, G_u sign, and Eq.-level
    pointwise consequences."""
    tol = 10.0 * topo.h**2
    interior = topo.interior_mask
    rings = topo.boundary_rings
    mineig = eigenvalues_sym(geom.hodograph)[:, 0]
    card.add("convexity_u2_plus_x2", 0.0, float(mineig[interior].min()), 0.0)
    card.add("starshape_positive", 0.0, float(geom.starshape.min()), 0.0)
    s_bd = float(geom.starshape[~interior].min())
    card.add("starshape_weak_minimum", min(0.0, s_bd), float(geom.starshape[interior].min()), tol)
    # x . nu recomputed from the normal vector components.
    nu_vec = np.concatenate([-geom.du, np.ones((topo.n_nodes, 1))], axis=1) / geom.w[:, None]
    pos = np.concatenate([topo.x_flat, geom.u[:, None]], axis=1)
    x_dot_nu = np.einsum("ni,ni->n", pos, nu_vec)
    card.add(
        "starshape_identity",
        float(np.abs(geom.starshape - geom.w * x_dot_nu).max()),
        0.0,
        1e-12,
    )
    if mean_convex:
        card.add("linearized_Gu_negative", float(geom.gu[rings >= 1].max()), 0.0, 0.0)
    else:
        card.extras["Gu_check_skipped"] = "domain is not mean convex"
    card.add(
        "normal_height_lower_bound",
        float((geom.u / geom.u.max() - geom.nu).max()),
        0.0,
        tol,
    )
    card.add("solution_convexity", 0.0, float(geom.kappa[:, 0].min()), 0.0)


def duality_checks(card: Scorecard, geom: SolutionGeometry, topo: GridTopology, f: CurvatureFunction, sigma: float):
    """Pointwise reciprocity, the dual level f*(kappa*) = 1/sigma, and the
    Legendre pairing identity."""
    cloud = forward_map(topo, geom.u.reshape(topo.shape))
    kappa_star = dual_curvatures(cloud)
    card.add("dual_reciprocity", float(reciprocity_defect(geom.kappa, kappa_star).max()), 0.0, 1e-8)
    f_star = dual_curvature(f)
    level = f_star.value(kappa_star[topo.interior_mask])
    card.add("dual_level", float(np.abs(level - 1.0 / sigma).max()), 0.0, 1e-8)
    card.add(
        "dual_legendre",
        float(np.abs(legendre_defect(topo.x_flat, geom.u, cloud)).max()),
        0.0,
        1e-10,
    )
    card.add("dual_spacelike", float(np.sqrt((cloud.dv**2).sum(axis=-1)).max()), 1.0 - 1e-12, 0.0)
    return cloud


# ---------------------------------------------------------------------------
# Full scorecard
# ---------------------------------------------------------------------------


def run_scorecard(report, f: CurvatureFunction) -> Scorecard:
    """Evaluate every per-run check on a SolveReport."""
    topo = report.topo
    sigma = report.sigma
    eps = report.u.eps
    card = Scorecard()
    r1, r2 = ball_radii(report.domain)
    card.extras.update({"r1": r1, "r2": None if math.isinf(r2) else r2, "eps": eps, "h": topo.h})
    geom = solution_geometry(topo, report.u.values, f, sigma)
    mean_convex = bool(np.min(topo.boundary_mean_curvature) >= -1e-12)
    card.extras["mean_convex"] = mean_convex
    max_principle_check(card, geom, topo, sigma, eps, r2)
    curvature_bound_check(card, geom, topo, sigma, eps, r2)
    boundary_angle_check(card, topo, report.eps_ladder, sigma, r1, r2)
    structure_of_solution_checks(card, geom, topo, mean_convex)
    duality_checks(card, geom, topo, f, sigma)
    card.extras["final_residual"] = report.final_residual
    return card
