"""Locally D-optimal designs through the dual variogram problem.

Step 1 maximizes the Cayley-Menger log-determinant ``log det inverse_farris(G)``
over the pair entries ``gamma = vec(G)`` subject to ``A gamma <= (m-1) 1`` with
``A = R^{-1} S L``. Cone membership is never imposed explicitly: the objective is
``-inf`` outside, and the line search backtracks.

The method is SQP. With ``K = expand(inverse_farris(G)^{-1})`` (the Laplacian the
variogram encodes) the derivatives are::

    d f / d gamma_uv            = -K_uv                      (edge weight Q_uv)
    d2 f / d gamma_uv d gamma_st = -(K_us K_vt + K_ut K_vs) / 2

The quadratic model uses this exact Hessian by default or a damped BFGS update.
Variables are rescaled so each column of the constraint matrix has maximum 1; at
a solution the constraint multipliers equal an optimal design.

Step 2 recovers a design ``xi >= 0, sum xi = 1`` with ``L S^T R^{-1} xi = Q*`` from
the optimal edge weights ``Q*`` by nonnegative least squares.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.optimize

from . import graphcore as gc
from .choicemodel import ChoiceProblem, design_variogram, uniform_design
from .exceptions import ConeError, ConvergenceError, RecoveryError
from .qp import solve_qp

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverTolerances:
    kkt: float = 1e-8
    feas: float = 1e-9
    recover: float = 1e-6
    max_iter_dual: int = 500
    max_iter_recover: int = 1000
    support_eps: float = 1e-8
    ridge: float = 1e-10
    active: float = 1e-6
    hessian: str = "exact"  # or "bfgs"
    selection: str = "ridge"  # or "sparse"

    def __post_init__(self):
        if self.hessian not in ("exact", "bfgs"):
            raise ValueError(f"unknown hessian mode {self.hessian!r}")
        if self.selection not in ("ridge", "sparse"):
            raise ValueError(f"unknown selection rule {self.selection!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverTolerances":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown tolerance fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class DualSolution:
    gamma: np.ndarray
    objective: float
    constraint_values: np.ndarray
    active_set: np.ndarray
    multipliers: np.ndarray
    iterations: int
    converged: bool
    kkt_residual: float
    max_violation: float
    history: list[float] = field(default_factory=list, repr=False)
    seconds: float = 0.0


@dataclass
class RecoveredDesign:
    design: np.ndarray
    residual: float
    scaled_residual: float
    support: np.ndarray
    edge_weights: np.ndarray
    ridge: float
    selection: str
    seconds: float = 0.0

    def support_graph(self, problem: ChoiceProblem) -> frozenset[tuple[int, int]]:
        """Pairs covered by some choice set in the support."""
        pairs = set()
        for j in self.support:
            c = problem.choice_sets[j]
            pairs.update((c[a], c[b]) for a in range(len(c)) for b in range(a + 1, len(c)))
        return frozenset(pairs)


def variable_scale(problem: ChoiceProblem) -> np.ndarray:
    """Per-pair scale ``D`` making every column of ``A D`` peak at 1."""
    return 1.0 / problem.constraint_matrix.max(axis=0)


class _DualObjective:
    """Objective, gradient and Hessian in scaled variables ``y`` (``gamma = D y``)."""

    def __init__(self, problem: ChoiceProblem):
        self.m = problem.m
        self.D = variable_scale(problem)
        u, v = np.array(gc.edge_list(problem.m)).T
        self.u, self.v = u, v
        self.evaluations = 0

    def value(self, y):
        self.evaluations += 1
        try:
            return gc.spd_logdet(gc.inverse_farris(gc.unvec(self.m, self.D * y)))
        except ConeError:
            return -np.inf

    def laplacian(self, y):
        return gc.expand(gc.spd_inverse(gc.inverse_farris(gc.unvec(self.m, self.D * y))))

    def full(self, y, hessian=True):
        f = self.value(y)
        if not np.isfinite(f):
            raise ConeError("iterate left the cone")
        K = self.laplacian(y)
        g = -self.D * K[self.u, self.v]
        if not hessian:
            return f, g, None
        u, v = self.u, self.v
        H = 0.5 * (K[np.ix_(u, u)] * K[np.ix_(v, v)] + K[np.ix_(u, v)] * K[np.ix_(v, u)])
        H = self.D[:, None] * H * self.D[None, :]
        return f, g, 0.5 * (H + H.T)


def dual_objective(gamma: np.ndarray) -> float:
    """``log det inverse_farris(Gamma)``; ``-inf`` outside the cone."""
    try:
        return gc.spd_logdet(gc.inverse_farris(gamma))
    except ConeError:
        return -np.inf


def gradient_dual(problem: ChoiceProblem, gamma: np.ndarray) -> np.ndarray:
    """Gradient of :func:`dual_objective` in the free entries ``vec(Gamma)``.

    It equals the edge weights of the Laplacian ``expand(inverse_farris(Gamma)^{-1})``.
    Raises :class:`ConeError` outside the cone.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (problem.m, problem.m):
        raise ValueError(f"gamma must be {problem.m} x {problem.m}")
    return optimal_edge_weights(gamma)


def initial_variogram(problem: ChoiceProblem) -> np.ndarray:
    """Feasible start: the uniform design's variogram shrunk into the constraint set."""
    G = design_variogram(problem, uniform_design(problem))
    c = problem.constraint_matrix @ gc.vec(G)
    t = min(1.0, (problem.m - 1) / c.max())
    return t * G


def _single_set_solution(problem: ChoiceProblem, t0: float) -> DualSolution:
    G = design_variogram(problem, np.ones(1))
    c = problem.constraint_matrix @ gc.vec(G)
    return DualSolution(
        gamma=G, objective=gc.spd_logdet(gc.inverse_farris(G)), constraint_values=c,
        active_set=np.array([0]), multipliers=np.ones(1), iterations=0, converged=True,
        kkt_residual=0.0, max_violation=max(0.0, float(c[0] - (problem.m - 1))),
        history=[], seconds=time.perf_counter() - t0,
    )


def solve_dual(problem: ChoiceProblem, tol: SolverTolerances | None = None) -> DualSolution:
    """Maximize the Cayley-Menger log-determinant under the design constraints.

    Raises :class:`ConvergenceError` (carrying the best iterate as a
    :class:`DualSolution`) when the KKT tolerances are not met within
    ``tol.max_iter_dual`` iterations.
    """
    tol = tol or SolverTolerances()
    t0 = time.perf_counter()
    if problem.k == problem.m:
        return _single_set_solution(problem, t0)

    m = problem.m
    obj = _DualObjective(problem)
    A = problem.constraint_matrix * obj.D[None, :]
    b = np.full(problem.n_sets, float(m - 1))

    y = gc.vec(initial_variogram(problem)) / obj.D
    f, g, H = obj.full(y)
    B = H if tol.hessian == "exact" else np.eye(len(y)) * np.mean(np.diag(H))
    history = [f]
    z = np.zeros(problem.n_sets)
    converged = False
    stat = comp = viol = np.inf

    it = 0
    for it in range(1, tol.max_iter_dual + 1):
        res = solve_qp(B, -g, A, b - A @ y, tol=1e-13, max_iter=200)
        d, z = res.x, res.z
        log.debug("qp: converged=%s iterations=%d gap=%.2e rp=%.2e rd=%.2e", res.converged, res.iterations, res.gap, res.primal_residual, res.dual_residual)
        slope = float(g @ d)

        alpha = 1.0
        floor = 1e-13 * max(1.0, abs(f))
        while True:
            f_new = obj.value(y + alpha * d)
            if f_new >= f + 1e-4 * alpha * slope - floor:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                break
        if not np.isfinite(f_new) or f_new < f - floor:
            log.debug("line search stalled at iteration %d", it)
            break
        y_new = y + alpha * d
        f_new, g_new, H_new = obj.full(y_new, hessian=tol.hessian == "exact")

        if tol.hessian == "exact":
            B = H_new
        else:
            B = _damped_bfgs(B, alpha * d, -(g_new - g))
        y, f, g = y_new, f_new, g_new
        history.append(f)

        slack = b - A @ y
        stat = float(np.max(np.abs(g - A.T @ z)))
        comp = float(np.max(np.abs(z * slack)))
        viol = float(max(0.0, -slack.min()))
        log.debug("iter %d f=%.15g alpha=%.3g stat=%.2e comp=%.2e viol=%.2e", it, f, alpha, stat, comp, viol)
        if stat <= tol.kkt and comp <= tol.kkt and viol <= tol.feas:
            converged = True
            break

    gamma = gc.unvec(m, obj.D * y)
    cvals = problem.constraint_matrix @ gc.vec(gamma)
    sol = DualSolution(
        gamma=gamma, objective=f, constraint_values=cvals,
        active_set=np.flatnonzero(cvals >= (m - 1) - tol.active),
        multipliers=z, iterations=it, converged=converged,
        kkt_residual=max(stat, comp), max_violation=float(max(0.0, (cvals - (m - 1)).max())),
        history=history, seconds=time.perf_counter() - t0,
    )
    if not converged:
        raise ConvergenceError(
            f"dual solver stopped after {it} iterations (stationarity {stat:.2e}, "
            f"complementarity {comp:.2e}, violation {viol:.2e})", best=sol)
    return sol


def _damped_bfgs(B, s, yk):
    """Powell-damped BFGS update of a positive definite model of the negated Hessian."""
    Bs = B @ s
    sBs = float(s @ Bs)
    if sBs <= 0:
        return B
    sy = float(s @ yk)
    theta = 1.0 if sy >= 0.2 * sBs else 0.8 * sBs / (sBs - sy)
    r = theta * yk + (1 - theta) * Bs
    return B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / float(s @ r)


def optimal_edge_weights(gamma: np.ndarray) -> np.ndarray:
    """``Q*``: edge weights of the Laplacian encoded by a variogram."""
    return gc.edge_weights(gc.expand(gc.spd_inverse(gc.inverse_farris(gamma))))


def recover_design(problem: ChoiceProblem, sol: DualSolution,
                   tol: SolverTolerances | None = None) -> RecoveredDesign:
    """Find a design whose information matrix has the optimal edge weights.

    Minimizes ``||D (Q* - P xi)||^2 + (1^T xi - 1)^2 + ridge ||xi||^2`` over
    ``xi >= 0`` (``D`` as in :func:`variable_scale`), restricted to the active
    choice sets first and to all sets if that leaves a residual. With the
    ``"ridge"`` rule the result is polished to the ``ridge -> 0`` limit on its
    support, i.e. the minimum-norm exact solution; ``"sparse"`` drops the ridge
    and returns the basic solution of the Lawson-Hanson iteration.
    """
    tol = tol or SolverTolerances()
    t0 = time.perf_counter()
    q_star = optimal_edge_weights(sol.gamma)
    if problem.k == problem.m:
        xi = np.ones(1)
        return RecoveredDesign(xi, 0.0, 0.0, np.array([0]), q_star, 0.0, tol.selection,
                               time.perf_counter() - t0)

    D = variable_scale(problem)
    P = problem.edge_map
    target = D * q_star
    if problem.k == 2:
        # the edge map is diagonal with entries lambda_uv: divide directly
        xi = np.clip(q_star / np.diag(P), 0.0, None)
        xi[xi < tol.support_eps] = 0.0
        xi /= xi.sum()
        scaled = float(np.linalg.norm(target - D * (P @ xi)))
        rec = RecoveredDesign(
            design=xi, residual=float(np.linalg.norm(q_star - P @ xi)), scaled_residual=scaled,
            support=np.flatnonzero(xi > 0), edge_weights=q_star, ridge=0.0,
            selection=tol.selection, seconds=time.perf_counter() - t0,
        )
        if scaled > tol.recover:
            raise RecoveryError(f"design recovery residual {scaled:.3e} exceeds {tol.recover:.1e}",
                                residual=scaled, design=rec)
        return rec
    ridge = tol.ridge if tol.selection == "ridge" else 0.0

    def fit(cols):
        Pc = D[:, None] * P[:, cols]
        rows = [Pc, np.ones((1, len(cols)))]
        rhs = [target, [1.0]]
        if ridge > 0:
            rows.append(np.sqrt(ridge) * np.eye(len(cols)))
            rhs.append(np.zeros(len(cols)))
        w, _ = scipy.optimize.nnls(np.vstack(rows), np.concatenate(rhs), maxiter=tol.max_iter_recover)
        xi = np.zeros(problem.n_sets)
        xi[cols] = w
        if ridge > 0:
            xi = _polish(xi, Pc, cols, target)
        xi[xi < tol.support_eps] = 0.0
        if xi.sum() <= 0:
            return xi, np.inf
        xi /= xi.sum()
        return xi, float(np.linalg.norm(target - D * (P @ xi)))

    active = sol.active_set if len(sol.active_set) else np.arange(problem.n_sets)
    xi, scaled = fit(active)
    if scaled > tol.recover and len(active) < problem.n_sets:
        xi_all, scaled_all = fit(np.arange(problem.n_sets))
        if scaled_all < scaled:
            xi, scaled = xi_all, scaled_all

    residual = float(np.linalg.norm(q_star - P @ xi))
    rec = RecoveredDesign(
        design=xi, residual=residual, scaled_residual=scaled,
        support=np.flatnonzero(xi > 0), edge_weights=q_star, ridge=ridge,
        selection=tol.selection, seconds=time.perf_counter() - t0,
    )
    if scaled > tol.recover:
        raise RecoveryError(f"design recovery residual {scaled:.3e} exceeds {tol.recover:.1e}",
                            residual=scaled, design=rec)
    return rec


def _polish(xi, Pc, cols, target):
    """Minimum-norm exact least-squares solution on the current support, if it stays positive."""
    local = xi[cols] > 0
    if not np.any(local):
        return xi
    M = np.vstack([Pc[:, local], np.ones((1, local.sum()))])
    rhs = np.concatenate([target, [1.0]])
    w, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.all(w > 0) and np.linalg.norm(M @ w - rhs) <= np.linalg.norm(M @ xi[cols][local] - rhs) + 1e-15:
        out = np.zeros_like(xi)
        out[np.asarray(cols)[local]] = w
        return out
    return xi


def duality_gap(problem: ChoiceProblem, xi) -> float:
    """``(m-1)(1^T xi - 1)``: difference of primal and dual objectives at a KKT pair."""
    return float((problem.m - 1) * (np.sum(xi) - 1.0))


@dataclass
class OptimalDesign:
    problem: ChoiceProblem
    dual: DualSolution
    recovered: RecoveredDesign
    tolerances: SolverTolerances

    @property
    def design(self) -> np.ndarray:
        return self.recovered.design

    @property
    def gamma(self) -> np.ndarray:
        return self.dual.gamma


def optimal_design(problem: ChoiceProblem, tol: SolverTolerances | None = None) -> OptimalDesign:
    """Run both steps: solve the dual, then recover a design."""
    tol = tol or SolverTolerances()
    sol = solve_dual(problem, tol)
    rec = recover_design(problem, sol, tol)
    return OptimalDesign(problem, sol, rec, tol)
