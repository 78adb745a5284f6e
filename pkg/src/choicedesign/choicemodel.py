"""Multinomial logit choice model: choice sets, incidence structure and information matrices.

A :class:`ChoiceProblem` fixes ``m`` alternatives, the choice-set size ``k`` and the
attractiveness vector ``pi``. Choice sets are the ``k``-subsets of ``[m]`` in
lexicographic order; a design is a weight vector over them.

The central linear map is ``P = L S^T R^{-1}`` (``edge_map``), taking a design to
the edge weights of its information matrix. Its transpose ``A = R^{-1} S L``
(``constraint_matrix``) appears in the dual constraints and in the
directional derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb

import numpy as np

from . import graphcore as gc
from .exceptions import ConeError, DimensionError


@lru_cache(maxsize=None)
def enumerate_choice_sets(m: int, k: int) -> tuple[tuple[int, ...], ...]:
    """All ``k``-subsets of ``range(m)`` in lexicographic order."""
    if not 2 <= k <= m:
        raise DimensionError(f"choice-set size k={k} must satisfy 2 <= k <= m={m}")
    return tuple(combinations(range(m), k))


def choice_set_rank(members, m: int) -> int:
    """0-based lexicographic position of a choice set."""
    members = tuple(sorted(int(x) for x in members))
    return enumerate_choice_sets(m, len(members)).index(members)


@lru_cache(maxsize=None)
def _incidence(m: int, k: int) -> np.ndarray:
    sets = enumerate_choice_sets(m, k)
    idx = gc.edge_index(m)
    S = np.zeros((len(sets), gc.n_pairs(m)), dtype=np.int8)
    for j, c in enumerate(sets):
        for e in combinations(c, 2):
            S[j, idx[e]] = 1
    S.setflags(write=False)
    return S


def incidence_matrix(m: int, k: int) -> np.ndarray:
    """Edge-hyperedge incidence matrix ``S`` (``C(m,k) x C(m,2)``, entries 0/1)."""
    return _incidence(m, k).copy()


@dataclass(frozen=True, eq=False)
class ChoiceProblem:
    """Alternatives ``m``, choice-set size ``k`` and positive attractiveness ``pi``.

    ``pi`` is kept as given (not normalized); every derived quantity is invariant
    under ``pi -> c * pi``.
    """

    m: int
    k: int
    pi: np.ndarray = field(repr=False)

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float).reshape(-1)
        if self.m < 2:
            raise DimensionError("need at least two alternatives")
        if pi.shape != (self.m,):
            raise DimensionError(f"pi has {pi.size} entries, expected m={self.m}")
        if not 2 <= self.k <= self.m:
            raise DimensionError(f"choice-set size k={self.k} must satisfy 2 <= k <= m={self.m}")
        if not np.all(np.isfinite(pi)) or np.any(pi <= 0):
            raise ValueError("pi must be finite and strictly positive")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def from_beta(cls, k: int, beta) -> "ChoiceProblem":
        beta = np.asarray(beta, dtype=float)
        return cls(len(beta), k, np.exp(beta - beta.max()))

    @property
    def beta(self) -> np.ndarray:
        return np.log(self.pi)

    @property
    def n_sets(self) -> int:
        return comb(self.m, self.k)

    @property
    def n_pairs(self) -> int:
        return gc.n_pairs(self.m)

    @property
    def choice_sets(self) -> tuple[tuple[int, ...], ...]:
        return enumerate_choice_sets(self.m, self.k)

    @property
    def incidence(self) -> np.ndarray:
        return _incidence(self.m, self.k)

    @cached_property
    def r_diag(self) -> np.ndarray:
        """``(sum_{i in C_j} pi_i)^2`` per choice set, computed on ``pi / max(pi)``."""
        p = self.pi / self.pi.max()
        return np.array([p[list(c)].sum() ** 2 for c in self.choice_sets])

    @cached_property
    def l_diag(self) -> np.ndarray:
        """``pi_u pi_v`` per pair, computed on ``pi / max(pi)``."""
        p = self.pi / self.pi.max()
        u, v = np.array(gc.edge_list(self.m)).T
        return p[u] * p[v]

    @cached_property
    def edge_map(self) -> np.ndarray:
        """``P = L S^T R^{-1}``: design weights to information-matrix edge weights."""
        P = self.l_diag[:, None] * self.incidence.T / self.r_diag[None, :]
        P.setflags(write=False)
        return P

    @property
    def constraint_matrix(self) -> np.ndarray:
        """``A = R^{-1} S L`` (the transpose of :attr:`edge_map`)."""
        return self.edge_map.T

    def scaled(self, c: float) -> "ChoiceProblem":
        return ChoiceProblem(self.m, self.k, c * self.pi)

    def to_dict(self) -> dict:
        return {"m": self.m, "k": self.k, "pi": [float(x) for x in self.pi]}

    @classmethod
    def from_dict(cls, d: dict) -> "ChoiceProblem":
        try:
            return cls(int(d["m"]), int(d["k"]), d["pi"])
        except KeyError as exc:
            raise DimensionError(f"problem is missing field {exc}") from exc


def r_diagonal(problem: ChoiceProblem) -> np.ndarray:
    """Diagonal of ``R`` with the caller's scale of ``pi``."""
    return problem.r_diag * problem.pi.max() ** 2


def l_diagonal(problem: ChoiceProblem) -> np.ndarray:
    """Diagonal of ``L`` with the caller's scale of ``pi``."""
    return problem.l_diag * problem.pi.max() ** 2


def choice_probabilities(problem: ChoiceProblem, members) -> np.ndarray:
    """Multinomial logit probabilities of each member of a choice set."""
    p = problem.pi[list(members)]
    return p / p.sum()


def uniform_design(problem: ChoiceProblem) -> np.ndarray:
    return np.full(problem.n_sets, 1.0 / problem.n_sets)


def as_design(problem: ChoiceProblem, weights, atol: float = 1e-10) -> np.ndarray:
    """Validate design weights: clamp tiny negatives to 0 and check the sum."""
    w = np.array(weights, dtype=float).reshape(-1)
    if w.shape != (problem.n_sets,):
        raise DimensionError(f"design has {w.size} weights, expected C({problem.m},{problem.k})={problem.n_sets}")
    if np.any(w < -1e-12):
        raise ValueError("design weights must be nonnegative")
    w = np.clip(w, 0.0, None)
    if abs(w.sum() - 1.0) > atol:
        raise ValueError(f"design weights sum to {w.sum():.12g}, expected 1")
    return w


def q_from_design(problem: ChoiceProblem, xi) -> np.ndarray:
    """Edge weights ``Q = L S^T R^{-1} xi`` of the design's information matrix."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (problem.n_sets,):
        raise DimensionError(f"design has {xi.size} weights, expected {problem.n_sets}")
    return problem.edge_map @ xi


def information_matrix(problem: ChoiceProblem, xi) -> np.ndarray:
    """Information matrix ``M(xi, pi)`` as an ``m x m`` Laplacian."""
    return gc.laplacian_from_edge_weights(problem.m, q_from_design(problem, xi))


def choice_set_information(problem: ChoiceProblem, j: int) -> np.ndarray:
    """Information of one observation of choice set ``j``: ``F Lambda_j F^T``.

    ``Lambda_j`` is the covariance of the multinomial response on the set and
    ``F`` the ``m x k`` matrix of unit vectors of its members.
    """
    members = list(problem.choice_sets[j])
    p = choice_probabilities(problem, members)
    cov = np.diag(p) - np.outer(p, p)
    F = np.zeros((problem.m, len(members)))
    F[members, np.arange(len(members))] = 1.0
    return F @ cov @ F.T


def reduced_information(problem: ChoiceProblem, xi) -> np.ndarray:
    return gc.reduce(information_matrix(problem, xi))


def log_det_reduced(problem: ChoiceProblem, xi) -> float:
    """``log det M^{(m)}(xi)``; ``-inf`` when the design's graph is disconnected."""
    try:
        return gc.spd_logdet(reduced_information(problem, xi))
    except ConeError:
        return -np.inf


def design_variogram(problem: ChoiceProblem, xi) -> np.ndarray:
    """``Gamma(xi)``: Farris transform of the inverse reduced information matrix.

    Raises :class:`ConeError` when the information matrix is singular.
    """
    return gc.farris(gc.spd_inverse(reduced_information(problem, xi)))


def log_det_gradient(problem: ChoiceProblem, xi) -> np.ndarray:
    """Gradient of :func:`log_det_reduced` in the design weights, ``R^{-1} S L vec Gamma(xi)``."""
    return problem.constraint_matrix @ gc.vec(design_variogram(problem, xi))


def design_support(xi, eps: float = 0.0) -> np.ndarray:
    return np.flatnonzero(np.asarray(xi) > eps)
