"""Dense convex quadratic programs with linear inequality constraints.

Solves::

    minimize    1/2 x^T G x + c^T x
    subject to  A x <= b

with ``G`` positive definite, by a primal-dual interior-point method with
Mehrotra predictor-corrector steps. Degenerate constraint sets (many more
constraints than variables, linearly dependent active rows) are handled
without special casing, which is the reason this is used instead of an
active-set method for the SQP subproblems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass
class QPResult:
    x: np.ndarray
    z: np.ndarray  # multipliers of A x <= b
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    gap: float


def _step_to_boundary(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    with np.errstate(over="ignore"):
        return min(1.0, float(np.min(-v[neg] / dv[neg])))


def solve_qp(G, c, A, b, tol: float = 1e-12, max_iter: int = 100) -> QPResult:
    """Solve the inequality-constrained QP. ``tol`` is relative to the data scale."""
    G = np.asarray(G, dtype=float)
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n, p = len(c), len(b)

    x = np.zeros(n)
    s = np.maximum(b - A @ x, 1.0)
    z = np.ones(p)
    scale_d = 1.0 + np.max(np.abs(c), initial=0.0)
    scale_p = 1.0 + np.max(np.abs(b), initial=0.0)

    # Once mu is tiny the normal matrix becomes ill-conditioned and the
    # iteration can drift away again, so the best iterate is kept and the loop
    # stops when it has not improved for a few steps.
    best, best_merit, stalled = None, np.inf, 0
    it = 0
    for it in range(1, max_iter + 1):
        rd = G @ x + c + A.T @ z
        rp = A @ x + s - b
        mu = float(s @ z) / p
        merit = max(np.max(np.abs(rd)) / scale_d, np.max(np.abs(rp)) / scale_p,
                    mu / (scale_d * scale_p))
        if merit < best_merit:
            best, best_merit, stalled = (x.copy(), s.copy(), z.copy()), merit, 0
        else:
            stalled += 1
        if best_merit <= tol or stalled >= 5:
            break

        w = z / s
        K = G + (A.T * w) @ A
        try:
            cf = scipy.linalg.cho_factor(K, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            K += 1e-14 * np.trace(K) / n * np.eye(n)
            cf = scipy.linalg.cho_factor(K, lower=True, check_finite=False)

        def newton(rc):
            # rc is the complementarity target residual: S dz + Z ds = rc
            rhs = -rd - A.T @ ((rc + z * rp) / s)
            dx = scipy.linalg.cho_solve(cf, rhs, check_finite=False)
            ds = -rp - A @ dx
            dz = (rc - z * ds) / s
            return dx, ds, dz

        # predictor
        dx, ds, dz = newton(-s * z)
        a_aff = min(_step_to_boundary(s, ds), _step_to_boundary(z, dz))
        mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / p
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx, ds, dz = newton(-s * z - ds * dz + sigma * mu)
        alpha = 0.995 * min(_step_to_boundary(s, ds), _step_to_boundary(z, dz))
        alpha = min(alpha, 1.0)
        x += alpha * dx
        s += alpha * ds
        z += alpha * dz
        s = np.maximum(s, 1e-300)
        z = np.maximum(z, 1e-300)

    x, s, z = best
    rd = G @ x + c + A.T @ z
    rp = A @ x + s - b
    return QPResult(
        x=x, z=z, iterations=it, converged=best_merit <= tol,
        primal_residual=float(np.max(np.abs(rp), initial=0.0)),
        dual_residual=float(np.max(np.abs(rd), initial=0.0)),
        gap=float(s @ z),
    )
