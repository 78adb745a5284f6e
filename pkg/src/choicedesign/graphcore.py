"""Linear algebra of graph Laplacians and variograms.

Conventions used throughout the package:

* vertices (alternatives) are 0-based, ``0 .. m-1``;
* pair-indexed vectors (edge weights ``q``, variogram entries ``vec(G)``) use the
  lexicographic pair order ``(0,1), (0,2), ..., (m-2,m-1)``, i.e. row-major upper
  triangle;
* reduced matrices drop the last vertex unless ``dropped`` says otherwise.

Matrices are plain ``numpy`` arrays. A variogram ``G`` is a symmetric matrix with
zero diagonal; it belongs to the cone of conditionally negative definite matrices
exactly when its inverse Farris transform is positive definite.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Iterable

import networkx as nx
import numpy as np
import scipy.linalg

from .exceptions import ConeError, DimensionError, StructureError

# relative pivot tolerance for the Jacobi-scaled Cholesky cone test
PIVOT_TOL = 1e-12


def n_pairs(m: int) -> int:
    return m * (m - 1) // 2


@lru_cache(maxsize=None)
def edge_list(m: int) -> tuple[tuple[int, int], ...]:
    """All vertex pairs of ``[m]`` in lexicographic order."""
    return tuple(combinations(range(m), 2))


@lru_cache(maxsize=None)
def edge_index(m: int) -> dict[tuple[int, int], int]:
    return {e: i for i, e in enumerate(edge_list(m))}


@lru_cache(maxsize=None)
def _triu(m: int) -> tuple[np.ndarray, np.ndarray]:
    iu = np.triu_indices(m, 1)
    iu[0].setflags(write=False)
    iu[1].setflags(write=False)
    return iu


def vec(G: np.ndarray) -> np.ndarray:
    """Upper-triangular entries of a symmetric matrix in lexicographic pair order."""
    G = np.asarray(G, dtype=float)
    return G[_triu(G.shape[0])].copy()


def unvec(m: int, v: np.ndarray) -> np.ndarray:
    """Symmetric zero-diagonal ``m x m`` matrix from its pair vector."""
    v = np.asarray(v, dtype=float)
    if v.shape != (n_pairs(m),):
        raise DimensionError(f"expected {n_pairs(m)} pair entries for m={m}, got shape {v.shape}")
    G = np.zeros((m, m))
    iu = _triu(m)
    G[iu] = v
    G[iu[1], iu[0]] = v
    return G


def laplacian_from_edge_weights(m: int, q) -> np.ndarray:
    """Laplacian of the weighted graph on ``[m]`` with pair weights ``q``.

    Off-diagonal entries are ``-q_uv``; the diagonal makes every row sum vanish.
    """
    if m < 2:
        raise DimensionError("need at least two vertices")
    L = -unvec(m, q)
    L[np.diag_indices(m)] = -L.sum(axis=1)
    return L


def edge_weights(L: np.ndarray) -> np.ndarray:
    """Pair weights ``q`` of a zero-row-sum matrix (negated off-diagonals)."""
    return -vec(L)


def _check_square(A: np.ndarray, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def reduce(L: np.ndarray, dropped: int | None = None) -> np.ndarray:
    """Principal submatrix of ``L`` with row and column ``dropped`` removed (default: last)."""
    L = _check_square(L, "L")
    m = L.shape[0]
    if dropped is None:
        dropped = m - 1
    if not 0 <= dropped < m:
        raise DimensionError(f"dropped index {dropped} out of range for m={m}")
    keep = np.delete(np.arange(m), dropped)
    return L[np.ix_(keep, keep)].copy()


def expand(R: np.ndarray, dropped: int | None = None) -> np.ndarray:
    """Zero-row-sum matrix whose reduction at ``dropped`` is ``R``.

    The missing row is minus the column sums of ``R``; the missing diagonal
    entry is the sum of all entries of ``R``.
    """
    R = _check_square(R, "R")
    n = R.shape[0]
    m = n + 1
    if dropped is None:
        dropped = m - 1
    if not 0 <= dropped < m:
        raise DimensionError(f"dropped index {dropped} out of range for m={m}")
    keep = np.delete(np.arange(m), dropped)
    L = np.empty((m, m))
    L[np.ix_(keep, keep)] = R
    border = -R.sum(axis=1)
    L[keep, dropped] = border
    L[dropped, keep] = border
    L[dropped, dropped] = R.sum()
    return L


def farris(A: np.ndarray) -> np.ndarray:
    """Farris transform of a symmetric ``(m-1) x (m-1)`` matrix.

    ``G_uv = A_uu + A_vv - 2 A_uv`` for ``u, v < m-1`` and ``G_u,m-1 = A_uu``.
    """
    A = _check_square(A, "A")
    n = A.shape[0]
    d = np.diag(A)
    G = np.zeros((n + 1, n + 1))
    G[:n, :n] = d[:, None] + d[None, :] - 2.0 * A
    G[:n, n] = d
    G[n, :n] = d
    G[np.diag_indices(n + 1)] = 0.0
    return G


def inverse_farris(G: np.ndarray) -> np.ndarray:
    """Inverse Farris transform: ``A_uv = (G_u,m-1 + G_v,m-1 - G_uv) / 2``."""
    G = _check_square(G, "G")
    n = G.shape[0] - 1
    last = G[:n, n]
    return 0.5 * (last[:, None] + last[None, :] - G[:n, :n])


def scaled_cholesky(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky factor of ``A`` after symmetric Jacobi scaling.

    Returns ``(C, s)`` with ``diag(s) A diag(s) = C C^T`` and ``s = diag(A)**-1/2``.
    Raises :class:`ConeError` when ``A`` is not positive definite up to the
    relative pivot tolerance.
    """
    d = np.diag(A)
    if A.shape[0] == 0:
        return np.zeros((0, 0)), np.zeros(0)
    if not np.all(np.isfinite(A)) or np.any(d <= 0.0):
        raise ConeError("matrix is not positive definite (non-positive diagonal)")
    s = 1.0 / np.sqrt(d)
    try:
        C = np.linalg.cholesky(A * s[:, None] * s[None, :])
    except np.linalg.LinAlgError as exc:
        raise ConeError("matrix is not positive definite") from exc
    if np.min(np.diag(C)) ** 2 <= PIVOT_TOL:
        raise ConeError("matrix is numerically singular")
    return C, s


def spd_logdet(A: np.ndarray) -> float:
    C, s = scaled_cholesky(np.asarray(A, dtype=float))
    return 2.0 * float(np.sum(np.log(np.diag(C))) - np.sum(np.log(s)))


def spd_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a positive definite matrix through the scaled Cholesky factor."""
    C, s = scaled_cholesky(np.asarray(A, dtype=float))
    inv = scipy.linalg.cho_solve((C, True), np.eye(len(s)))
    inv = s[:, None] * inv * s[None, :]
    return 0.5 * (inv + inv.T)


def in_cone(G: np.ndarray) -> bool:
    """True iff ``G`` is conditionally negative definite (strictly)."""
    try:
        scaled_cholesky(inverse_farris(G))
    except ConeError:
        return False
    return True


def bordered_matrix(G: np.ndarray) -> np.ndarray:
    G = _check_square(G, "G")
    m = G.shape[0]
    B = np.zeros((m + 1, m + 1))
    B[0, 1:] = -1.0
    B[1:, 0] = 1.0
    B[1:, 1:] = -0.5 * G
    return B


def cayley_menger_logdet(G: np.ndarray) -> float:
    """Log-determinant of the bordered matrix ``[[0, -1^T], [1, -G/2]]``.

    For ``G`` in the cone this equals ``log det inverse_farris(G)``.
    """
    sign, logdet = np.linalg.slogdet(bordered_matrix(G))
    if sign <= 0:
        raise ConeError("Cayley-Menger determinant is not positive; variogram outside the cone")
    return float(logdet)


def matrix_tree_value(m: int, q) -> float:
    """Weighted spanning-tree count: determinant of the reduced Laplacian.

    Returns 0 for disconnected weight graphs.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("edge weights must be nonnegative")
    R = reduce(laplacian_from_edge_weights(m, q))
    if R.size == 0:
        return 1.0
    sign, logdet = np.linalg.slogdet(R)
    if sign <= 0:
        return 0.0
    return float(np.exp(logdet))


# -- graphs ---------------------------------------------------------------------


def normalize_edges(m: int, edges: Iterable) -> frozenset[tuple[int, int]]:
    """Validate an edge collection and return it as a set of sorted pairs."""
    out = set()
    for e in edges:
        u, v = (int(x) for x in e)
        if u == v:
            raise StructureError(f"self-loop at vertex {u}")
        if not (0 <= u < m and 0 <= v < m):
            raise DimensionError(f"edge {(u, v)} outside vertex range 0..{m - 1}")
        out.add((min(u, v), max(u, v)))
    return frozenset(out)


def support_edges(m: int, q, eps: float = 0.0) -> frozenset[tuple[int, int]]:
    """Pairs whose weight exceeds ``eps``."""
    q = np.asarray(q, dtype=float)
    return frozenset(e for e, w in zip(edge_list(m), q) if w > eps)


def _adjacency(m: int, edges) -> list[set[int]]:
    adj = [set() for _ in range(m)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def is_connected(m: int, edges) -> bool:
    adj = _adjacency(m, normalize_edges(m, edges))
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == m


def maximum_cardinality_search(m: int, edges) -> list[int]:
    """Visit order of maximum cardinality search (ties broken by smallest vertex)."""
    adj = _adjacency(m, normalize_edges(m, edges))
    weight = [0] * m
    numbered = [False] * m
    order = []
    for _ in range(m):
        v = max((u for u in range(m) if not numbered[u]), key=lambda u: (weight[u], -u))
        numbered[v] = True
        order.append(v)
        for w in adj[v]:
            if not numbered[w]:
                weight[w] += 1
    return order


def is_chordal(m: int, edges) -> tuple[bool, list[int] | None]:
    """Chordality test by maximum cardinality search.

    Returns ``(True, peo)`` with a perfect elimination ordering when the graph
    is chordal, else ``(False, None)``.
    """
    edges = normalize_edges(m, edges)
    adj = _adjacency(m, edges)
    peo = maximum_cardinality_search(m, edges)[::-1]
    pos = {v: i for i, v in enumerate(peo)}
    for v in peo:
        later = [w for w in adj[v] if pos[w] > pos[v]]
        if not later:
            continue
        u = min(later, key=pos.__getitem__)
        if any(w != u and w not in adj[u] for w in later):
            return False, None
    return True, peo


def maximal_cliques(m: int, edges) -> list[tuple[int, ...]]:
    """Maximal cliques of a chordal graph, read off its elimination ordering."""
    edges = normalize_edges(m, edges)
    chordal, peo = is_chordal(m, edges)
    if not chordal:
        raise StructureError("graph is not chordal")
    adj = _adjacency(m, edges)
    pos = {v: i for i, v in enumerate(peo)}
    candidates = [frozenset({v} | {w for w in adj[v] if pos[w] > pos[v]}) for v in peo]
    cliques = [c for c in candidates if not any(c < other for other in candidates)]
    return sorted({tuple(sorted(c)) for c in cliques})


def clique_tree_order(cliques: list[tuple[int, ...]]) -> list[tuple[int, int | None]]:
    """Clique indices in an order with the running intersection property.

    Each entry is ``(clique, parent)``; the root has parent ``None``. The tree is a
    maximum-weight spanning tree of the clique intersection graph.
    """
    T = nx.Graph()
    T.add_nodes_from(range(len(cliques)))
    for i, j in combinations(range(len(cliques)), 2):
        w = len(set(cliques[i]) & set(cliques[j]))
        if w:
            T.add_edge(i, j, weight=w)
    T = nx.maximum_spanning_tree(T)
    if not nx.is_connected(T):
        raise StructureError("graph is not connected")
    order = [(0, None)]
    order.extend((child, parent) for parent, child in nx.bfs_edges(T, 0, sort_neighbors=sorted))
    return order


def complete_variogram_chordal(m: int, edges, gamma) -> np.ndarray:
    """Complete a variogram specified on the edges of a connected chordal graph.

    Entries of ``gamma`` (an ``m x m`` array) off the graph edges are ignored.
    The completion is the unique member of the cone whose associated Laplacian
    (``expand(inv(inverse_farris(G)))``) vanishes on every non-edge. Cliques are
    joined along a clique tree; each fill entry ``G_ab`` uses a reference vertex
    ``k`` in the separator ``S`` and the conditional covariance formula
    ``sigma_ab = Sigma_{a,S'} Sigma_{S'S'}^{-1} Sigma_{S',b}`` with ``S' = S - {k}``.
    On a tree this reduces to path sums.
    """
    edges = normalize_edges(m, edges)
    gamma = _check_square(gamma, "gamma")
    if gamma.shape[0] != m:
        raise DimensionError(f"gamma must be {m} x {m}")
    if not is_connected(m, edges):
        raise StructureError("graph is not connected")
    cliques = maximal_cliques(m, edges)

    G = np.full((m, m), np.nan)
    np.fill_diagonal(G, 0.0)
    for u, v in edges:
        G[u, v] = G[v, u] = gamma[u, v]
    if np.any(~np.isfinite(G[tuple(np.array(sorted(edges)).T)])):
        raise ValueError("gamma has non-finite entries on graph edges")

    def _check_clique(c):
        if len(c) > 1 and not in_cone(G[np.ix_(c, c)]):
            raise ConeError(f"edge data on clique {tuple(int(x) for x in c)} is not conditionally negative definite")

    known: set[int] = set()
    for ci, parent in clique_tree_order(cliques):
        clique = cliques[ci]
        _check_clique(list(clique))
        if parent is None:
            known.update(clique)
            continue
        sep = sorted(known & set(clique))
        new = sorted(set(clique) - known)
        old = sorted(known - set(sep))
        k, rest = sep[0], sep[1:]
        if rest:
            Srr = 0.5 * (G[rest, k][:, None] + G[k, rest][None, :] - G[np.ix_(rest, rest)])
            Sinv = spd_inverse(Srr)
        for a in old:
            for b in new:
                if rest:
                    sa = 0.5 * (G[a, k] + G[k, rest] - G[a, rest])
                    sb = 0.5 * (G[b, k] + G[k, rest] - G[b, rest])
                    sigma_ab = float(sa @ Sinv @ sb)
                else:
                    sigma_ab = 0.0
                G[a, b] = G[b, a] = G[a, k] + G[b, k] - 2.0 * sigma_ab
        known.update(new)

    if not in_cone(G):
        raise ConeError("completed variogram is not conditionally negative definite")
    return G


def shortest_chordless_cycle(m: int, edges) -> tuple[int, ...] | None:
    """Shortest induced cycle of length >= 4, or ``None`` for chordal graphs.

    The cycle starts at its smallest vertex and proceeds towards the smaller of
    that vertex's two cycle neighbours.
    """
    edges = normalize_edges(m, edges)
    if is_chordal(m, edges)[0]:
        return None
    g = nx.Graph()
    g.add_nodes_from(range(m))
    g.add_edges_from(edges)
    best = None
    for cyc in nx.chordless_cycles(g):
        if len(cyc) >= 4 and (best is None or len(cyc) < len(best)):
            best = cyc
            if len(cyc) == 4:
                break
    if best is None:
        return None
    i = best.index(min(best))
    cyc = best[i:] + best[:i]
    if cyc[-1] < cyc[1]:
        cyc = [cyc[0]] + cyc[1:][::-1]
    return tuple(int(v) for v in cyc)
