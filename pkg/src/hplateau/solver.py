"""Damped Newton iteration inside the sigma/theta/epsilon continuation ladders.

The Dirichlet problem is G(D^2 u, Du, u) = sigma in Omega, u = eps on the
boundary, with G(D^2u, Du, u) = F(A[u]) the curvature function of the
hyperbolic shape matrix.  The equation is elliptic exactly while A[u]
stays positive definite, so every accepted iterate is kept locally
strictly convex and loss of convexity is signalled (ConvexityLoss), never
treated as a crash.

Continuation runs three ladders in sequence, warm-starting every stage
from the previous solution:

1. the curvature-level homotopy sigma^t = t*sigma + (1 - t) from the
   horosphere u = eps (t = 0 is exact and performs no iterations),
2. the Gauss-blend weight theta descending to its final value,
3. the boundary value eps descending, retaining each converged solution
   for the Richardson extrapolations used by the verifier.

A stage that makes no progress is bisected (up to 12 insertions) before
the schedule is declared exhausted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .curvature import CurvatureFunction, blend_with_gauss, matrix_value_and_derivative
from .domain import Domain, GridFunction, GridTopology, build_grid
from .geometry import eigenvalues_sym, point_geometry, shape_matrices, slope_factors


class ConvexityLoss(Exception):
    """A[u] lost positive definiteness at the listed interior nodes."""

    def __init__(self, nodes):
        self.nodes = np.asarray(nodes)
        super().__init__(f"local strict convexity lost at {self.nodes.size} node(s)")


class NoProgress(Exception):
    """Damped Newton could not decrease the residual."""


class SingularJacobian(Exception):
    """Direct factorization of the linearized operator failed."""


class ScheduleExhausted(Exception):
    """Bisection limit reached; carries the deepest successful stage."""

    def __init__(self, message, deepest, stages):
        super().__init__(message)
        self.deepest = deepest
        self.stages = stages


@dataclass
class NewtonOptions:
    """Knobs for a single damped Newton solve."""

    tol_scale: float = 1e-9  # residual tolerance is tol_scale * max(1, sigma)
    max_iterations: int = 40
    max_halvings: int = 30
    kappa_floor: float = 1e-8


def _linf(a) -> float:
    return float(np.abs(a).max())


def geometry_bundle(topo: GridTopology, u):
    """Pointwise geometric bundle of a grid function, flattened."""
    du, d2u = topo.derivatives(u)
    return point_geometry(topo.to_flat(u), du, d2u)


def residual(topo: GridTopology, f: CurvatureFunction, sigma: float, eps: float, u, bundle=None):
    """Grid residual: F(A[u]) - sigma at interior nodes, u - eps on the boundary.

    Returns (residual_flat, bundle).  Raises ConvexityLoss when any
    interior node has a nonpositive hyperbolic principal curvature; the
    caller's damping logic owns that signal.
    """
    if bundle is None:
        bundle = geometry_bundle(topo, u)
    kappa_min = bundle.kappa[:, 0]
    bad = np.nonzero(topo.interior_mask & (kappa_min <= 0.0))[0]
    if bad.size:
        raise ConvexityLoss(bad)
    res = bundle.u - eps
    ok = kappa_min > 0.0
    vals = np.zeros(topo.n_nodes)
    if np.any(ok):
        vals[ok] = f.value(bundle.kappa[ok])
    res = np.where(topo.interior_mask, vals - sigma, res)
    return res, bundle


@dataclass
class LinearizedOperator:
    """Coefficients and assembled matrix of the linearization at u.

    G^{st} = (u/w) F^{ij} gamma^{is} gamma^{jt} in closed form, G_u from
    the homogeneity identity u G_u = G - (1/w) sum F^{ii}, and G^s by
    Richardson-corrected central differences in the gradient slots (the
    closed form for G^s is never needed).  Boundary rows of the matrix
    are the identity.
    """

    matrix: object
    gst: np.ndarray
    gs: np.ndarray
    gu: np.ndarray
    f_value: np.ndarray
    fii_trace: np.ndarray
    bundle: object

    def apply(self, field_flat):
        return self.matrix @ np.asarray(field_flat).reshape(-1)

    def contraction_identity_residual(self, topo) -> float:
        """max |G^{st} u_st - u G_u| over interior nodes (Eq.-level identity)."""
        contraction = np.einsum("nij,nij->n", self.gst, self.bundle.d2u)
        gap = contraction - self.bundle.u * self.gu
        return _linf(gap[topo.interior_mask])


def _pointwise_values(f, u_flat, du, d2u, mask):
    """F(A[u]) on the masked nodes, for gradient-slot finite differences."""
    _, _, a = shape_matrices(u_flat[mask], du[mask], d2u[mask])
    kappa = eigenvalues_sym(a)
    if np.any(kappa[:, 0] <= 0.0):
        raise ConvexityLoss(np.nonzero(mask)[0][kappa[:, 0] <= 0.0])
    return f.value(kappa)


def linearize(topo: GridTopology, f: CurvatureFunction, sigma: float, eps: float, u, bundle=None) -> LinearizedOperator:
    """Linearized operator of the residual at u (exact up to G^s rounding)."""
    if bundle is None:
        bundle = geometry_bundle(topo, u)
    n = topo.n
    ok = bundle.kappa[:, 0] > 0.0
    fval = np.zeros(topo.n_nodes)
    fij = np.zeros((topo.n_nodes, n, n))
    if np.any(ok):
        fval[ok], fij[ok] = matrix_value_and_derivative(f, bundle.a[ok])
    gst = np.einsum(
        "n,nis,nij,njt->nst", bundle.u / bundle.w, bundle.gamma, fij, bundle.gamma
    )
    fii = np.einsum("nii->n", fij)
    gu = (fval - fii / bundle.w) / bundle.u
    # Central differences with one Richardson sweep in the Du slots.
    gs = np.zeros((topo.n_nodes, n))
    interior = topo.interior_mask
    u_int = bundle.u[interior]
    du_int = bundle.du[interior]
    d2u_int = bundle.d2u[interior]
    all_int = np.ones(u_int.shape[0], dtype=bool)
    speed = np.sqrt((du_int**2).sum(axis=-1))
    for s in range(n):
        h = 1e-6 * (1.0 + speed)
        diffs = []
        for step in (h, 2.0 * h):
            dup = du_int.copy()
            dup[:, s] += step
            dum = du_int.copy()
            dum[:, s] -= step
            gp = _pointwise_values(f, u_int, dup, d2u_int, all_int)
            gm = _pointwise_values(f, u_int, dum, d2u_int, all_int)
            diffs.append((gp - gm) / (2.0 * step))
        gs[interior, s] = (4.0 * diffs[0] - diffs[1]) / 3.0
    matrix = topo.assemble_operator(gst, gs, gu)
    return LinearizedOperator(
        matrix=matrix, gst=gst, gs=gs, gu=gu, f_value=fval, fii_trace=fii, bundle=bundle
    )


def newton_solve(topo: GridTopology, f: CurvatureFunction, sigma: float, eps: float, u0, options: NewtonOptions | None = None):
    """Damped Newton iteration down to tol_scale * max(1, sigma).

    Steps are computed by sparse direct factorization of the assembled
    linearization and halved (at most max_halvings times) until both the
    residual decreases and every interior node keeps its smallest
    hyperbolic curvature above kappa_floor.

    Returns (u, residual_norms, halvings); raises NoProgress or
    SingularJacobian for the continuation driver to bisect on.
    """
    opts = options or NewtonOptions()
    tol = opts.tol_scale * max(1.0, sigma)
    u = np.array(u0, dtype=float).reshape(topo.shape)
    res, bundle = residual(topo, f, sigma, eps, u)
    norms = [_linf(res)]
    halvings: list[int] = []
    while norms[-1] > tol:
        if len(norms) - 1 >= opts.max_iterations:
            raise NoProgress(f"no convergence in {opts.max_iterations} iterations")
        lin = linearize(topo, f, sigma, eps, u, bundle)
        try:
            lu = spla.splu(lin.matrix.tocsc())
            delta = lu.solve(-res)
        except RuntimeError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.isfinite(delta).all():
            raise SingularJacobian("non-finite Newton step")
        delta = delta.reshape(topo.shape)
        alpha = 1.0
        accepted = False
        for k in range(opts.max_halvings + 1):
            u_try = u + alpha * delta
            try:
                res_try, bundle_try = residual(topo, f, sigma, eps, u_try)
            except ConvexityLoss:
                alpha *= 0.5
                continue
            decreased = _linf(res_try) < norms[-1]
            convex = bundle_try.kappa[topo.interior_mask, 0].min() > opts.kappa_floor
            if decreased and convex:
                accepted = True
                halvings.append(k)
                break
            alpha *= 0.5
        if not accepted:
            raise NoProgress(f"{opts.max_halvings} halvings without residual decrease")
        u, res, bundle = u_try, res_try, bundle_try
        norms.append(_linf(res))
    return u, norms, halvings


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuationSchedule:
    """Monotone ladders for the three continuation parameters."""

    t_steps: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    theta_steps: tuple = ()
    eps_steps: tuple = (0.05,)
    label: str = "default"

    def validate(self, sigma: float) -> None:
        if not self.t_steps or self.t_steps[0] != 0.0 or self.t_steps[-1] != 1.0:
            raise ValueError("t ladder must ascend from 0 to 1")
        if any(b <= a for a, b in zip(self.t_steps, self.t_steps[1:])):
            raise ValueError("t ladder must be strictly ascending")
        if any(b >= a for a, b in zip(self.theta_steps, self.theta_steps[1:])):
            raise ValueError("theta ladder must be strictly descending")
        if self.theta_steps and not 0.0 <= self.theta_steps[-1] <= self.theta_steps[0] <= 1.0:
            raise ValueError("theta ladder must stay in [0, 1]")
        if not self.eps_steps or any(e <= 0 for e in self.eps_steps):
            raise ValueError("eps ladder must be positive")
        if any(b >= a for a, b in zip(self.eps_steps, self.eps_steps[1:])):
            raise ValueError("eps ladder must be strictly descending")
        for t in self.t_steps:
            st = t * sigma + (1.0 - t)
            if not min(sigma, 1.0) - 1e-12 <= st <= 1.0 + 1e-12:
                raise ValueError("homotopy level left [sigma, 1]")


def default_schedule(domain: Domain, f: CurvatureFunction, eps_levels: int = 6, eps0: float | None = None) -> ContinuationSchedule:
    """The stock ladders: five t steps, a Gauss-blend descent for
    non-Gauss curvature functions, and a halving eps ladder from
    0.05 * max rho."""
    if eps0 is None:
        eps0 = 0.05 * domain.max_radius
    eps = tuple(eps0 * 2.0**-k for k in range(eps_levels + 1))
    theta = () if f.is_gauss_like else (0.5, 0.25, 0.1, 0.02, 0.0)
    return ContinuationSchedule(theta_steps=theta, eps_steps=eps)


@dataclass
class StageRecord:
    """One converged continuation stage."""

    eps: float
    theta: float
    t: float
    sigma_t: float
    iterations: int
    residual_norms: list
    halvings: list
    bisection_depth: int = 0


@dataclass
class SolveReport:
    """Continuation trace plus the converged solution and its eps ladder."""

    domain: Domain
    f_spec: str
    sigma: float
    schedule: ContinuationSchedule
    u: GridFunction
    topo: GridTopology
    stages: list
    eps_ladder: list  # [(eps, u_grid)] at (t = 1, theta = theta_final)

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.stages)

    @property
    def final_residual(self) -> float:
        return self.stages[-1].residual_norms[-1]

    @property
    def eps_final(self) -> float:
        return self.u.eps


def continuation_solve(
    domain: Domain,
    f: CurvatureFunction,
    sigma: float,
    schedule: ContinuationSchedule | None = None,
    options: NewtonOptions | None = None,
    topo: GridTopology | None = None,
    max_bisections: int = 12,
) -> SolveReport:
    """Run the full ladder sequence and return the converged report."""
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0, 1)")
    if topo is None:
        topo = build_grid(domain)
    if schedule is None:
        schedule = default_schedule(domain, f)
    schedule.validate(sigma)
    opts = options or NewtonOptions()
    thetas = schedule.theta_steps if schedule.theta_steps else (0.0,)
    stages: list[StageRecord] = []
    state = {"bisections": 0}

    def run_stage(u_start, f_stage, sigma_t, eps, meta, depth):
        u_new, norms, halv = newton_solve(topo, f_stage, sigma_t, eps, u_start, opts)
        stages.append(
            StageRecord(
                eps=eps,
                theta=meta["theta"],
                t=meta["t"],
                sigma_t=sigma_t,
                iterations=len(norms) - 1,
                residual_norms=norms,
                halvings=halv,
                bisection_depth=depth,
            )
        )
        return u_new

    def advance(u_good, p_good, p_target, make_stage, deepest):
        """Move one ladder parameter from p_good to p_target, bisecting on failure."""
        stack = [p_target]
        while stack:
            target = stack[-1]
            u_start, f_stage, sigma_t, eps, meta = make_stage(u_good, p_good, target)
            try:
                u_good = run_stage(u_start, f_stage, sigma_t, eps, meta, len(stack) - 1)
            except (NoProgress, SingularJacobian, ConvexityLoss) as exc:
                state["bisections"] += 1
                if state["bisections"] > max_bisections:
                    raise ScheduleExhausted(
                        f"bisection limit reached while advancing to {meta}: {exc}",
                        deepest=deepest(),
                        stages=stages,
                    ) from exc
                stack.append(0.5 * (p_good + target))
                continue
            p_good = target
            stack.pop()
        return u_good, p_good

    eps0 = schedule.eps_steps[0]
    theta0 = thetas[0]
    f_theta = blend_with_gauss(f, theta0)
    u = topo.horosphere(eps0)

    # sigma homotopy at (eps0, theta0); the t = 0 endpoint is the exact
    # horosphere and is recorded without iterating.
    stages.append(
        StageRecord(eps=eps0, theta=theta0, t=0.0, sigma_t=1.0, iterations=0, residual_norms=[0.0], halvings=[])
    )
    t_good = 0.0
    for t_next in schedule.t_steps[1:]:

        def make_t(u_good, p_good, target):
            sigma_t = target * sigma + (1.0 - target)
            return u_good, f_theta, sigma_t, eps0, {"theta": theta0, "t": target}

        u, t_good = advance(u, t_good, t_next, make_t, lambda: (eps0, theta0, t_good))

    # theta descent at t = 1.
    theta_good = theta0
    for theta_next in thetas[1:]:

        def make_theta(u_good, p_good, target):
            return u_good, blend_with_gauss(f, target), sigma, eps0, {"theta": target, "t": 1.0}

        u, theta_good = advance(u, theta_good, theta_next, make_theta, lambda: (eps0, theta_good, 1.0))
    f_final = blend_with_gauss(f, thetas[-1])

    # eps descent at (t = 1, theta = theta_final); warm starts shift the
    # whole field by the boundary decrement, keeping the boundary exact.
    ladder = [(eps0, u.copy())]
    eps_good = eps0
    for eps_next in schedule.eps_steps[1:]:

        def make_eps(u_good, p_good, target):
            return u_good + (target - p_good), f_final, sigma, target, {"theta": thetas[-1], "t": 1.0}

        u, eps_good = advance(u, eps_good, eps_next, make_eps, lambda: (eps_good, thetas[-1], 1.0))
        ladder.append((eps_good, u.copy()))

    return SolveReport(
        domain=domain,
        f_spec=f.spec_string(),
        sigma=sigma,
        schedule=schedule,
        u=GridFunction(u, eps_good),
        topo=topo,
        stages=stages,
        eps_ladder=ladder,
    )
