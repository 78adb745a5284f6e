"""Optimality certificates and D-efficiencies.

A design ``xi`` is locally D-optimal iff every directional derivative
``dd_j = (A vec Gamma(xi))_j - (m-1)`` is ``<= 0``, with equality on the support
(``A = R^{-1} S L``). The multipliers ``B = -dd`` are the KKT multipliers of the
nonnegativity constraints; ``mu = m - 1`` is the multiplier of ``sum xi = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import graphcore as gc
from .choicemodel import (
    ChoiceProblem,
    choice_set_information,
    design_variogram,
    log_det_reduced,
    reduced_information,
)
from .dualsolver import OptimalDesign, SolverTolerances, duality_gap, optimal_design
from .exceptions import ConeError, DimensionError

DEFAULT_TOL = 1e-6


def directional_derivatives(problem: ChoiceProblem, xi) -> np.ndarray:
    """``<<Q(C_j), Gamma(xi)>> - (m-1)`` for every choice set.

    Raises :class:`ConeError` if the information matrix of ``xi`` is singular.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (problem.n_sets,):
        raise DimensionError(f"design has {xi.size} weights, expected {problem.n_sets}")
    G = design_variogram(problem, xi)
    return problem.constraint_matrix @ gc.vec(G) - (problem.m - 1)


def directional_derivatives_trace(problem: ChoiceProblem, xi) -> np.ndarray:
    """Same quantity in trace form, ``<M^{(m)}(C_j), M^{(m)}(xi)^{-1}> - (m-1)``."""
    Sigma = gc.spd_inverse(reduced_information(problem, xi))
    out = np.empty(problem.n_sets)
    for j in range(problem.n_sets):
        out[j] = np.sum(gc.reduce(choice_set_information(problem, j)) * Sigma)
    return out - (problem.m - 1)


@dataclass
class KKTCertificate:
    directional_derivatives: np.ndarray
    max_violation: float
    complementarity_residual: float
    multipliers: np.ndarray
    mu: float
    design_residual: float
    optimal: bool
    tol: float
    connected: bool = True

    def to_dict(self) -> dict:
        return {
            "optimal": bool(self.optimal),
            "tolerance": self.tol,
            "connected": bool(self.connected),
            "max_violation": self.max_violation,
            "complementarity_residual": self.complementarity_residual,
            "design_residual": self.design_residual,
            "mu": self.mu,
            "directional_derivatives": [float(x) for x in self.directional_derivatives],
            "multipliers": [float(x) for x in self.multipliers],
        }


def certify(problem: ChoiceProblem, xi, tol: float = DEFAULT_TOL) -> KKTCertificate:
    """Check the KKT conditions for ``xi``.

    (i) ``xi`` lies in the simplex, (ii) all directional derivatives are
    ``<= tol``, (iii) ``max_j |xi_j dd_j| <= tol``. A disconnected design gets a
    certificate with infinite violation instead of an exception.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (problem.n_sets,):
        raise DimensionError(f"design has {xi.size} weights, expected {problem.n_sets}")
    mu = float(problem.m - 1)
    design_residual = max(abs(float(xi.sum()) - 1.0), float(max(0.0, -xi.min())))
    try:
        dd = directional_derivatives(problem, xi)
    except ConeError:
        inf = np.full(problem.n_sets, np.inf)
        return KKTCertificate(inf, np.inf, np.inf, -inf, mu, design_residual, False, tol, connected=False)
    max_violation = float(max(0.0, dd.max()))
    comp = float(np.max(np.abs(xi * dd)))
    optimal = max_violation <= tol and comp <= tol and design_residual <= tol
    return KKTCertificate(dd, max_violation, comp, -dd, mu, design_residual, optimal, tol)


@dataclass
class EfficiencyReport:
    """D-efficiencies of several designs against one optimum."""

    problem: ChoiceProblem
    optimum: OptimalDesign | None
    reference: np.ndarray
    certificate: KKTCertificate
    efficiencies: dict[str, float] = field(default_factory=dict)
    disconnected: list[str] = field(default_factory=list)


def d_efficiency(problem: ChoiceProblem, xi, xi_star=None, tol: SolverTolerances | None = None) -> float:
    """``(det M^{(m)}(xi) / det M^{(m)}(xi*))^{1/(m-1)}``; 0 for a disconnected ``xi``.

    When ``xi_star`` is omitted an optimal design is computed first.
    """
    if xi_star is None:
        xi_star = optimal_design(problem, tol).design
    ld_star = log_det_reduced(problem, xi_star)
    if not np.isfinite(ld_star):
        raise ValueError("reference design has a singular information matrix")
    ld = log_det_reduced(problem, xi)
    if not np.isfinite(ld):
        return 0.0
    return float(np.exp((ld - ld_star) / (problem.m - 1)))


def efficiency_report(problem: ChoiceProblem, designs: dict, xi_star=None,
                      tol: SolverTolerances | None = None,
                      certify_tol: float = DEFAULT_TOL) -> EfficiencyReport:
    """Efficiencies of named designs; solves for the optimum unless one is given."""
    opt = None
    if xi_star is None:
        opt = optimal_design(problem, tol)
        xi_star = opt.design
    xi_star = np.asarray(xi_star, dtype=float)
    cert = certify(problem, xi_star, certify_tol)
    rep = EfficiencyReport(problem, opt, xi_star, cert)
    for name, xi in designs.items():
        e = d_efficiency(problem, xi, xi_star)
        rep.efficiencies[name] = e
        if e == 0.0:
            rep.disconnected.append(name)
    return rep


__all__ = [
    "KKTCertificate",
    "EfficiencyReport",
    "certify",
    "d_efficiency",
    "directional_derivatives",
    "directional_derivatives_trace",
    "duality_gap",
    "efficiency_report",
]
