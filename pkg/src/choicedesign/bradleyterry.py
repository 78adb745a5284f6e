"""Paired comparisons (``k = 2``) and choice-count data.

For ``k = 2`` every choice set is a pair, the edge map is diagonal with entries
``lambda_uv = pi_u pi_v / (pi_u + pi_v)^2`` and a design is optimal iff
``Gamma_uv(xi) <= (m-1)/lambda_uv`` on every pair with equality on the support.
On a chordal support this pins down ``Gamma`` on the edges; the rest follows from
the unique cone completion, which makes the optimal weights rational in ``lambda``.

The second half handles observed choice data: a CSV format for per-set win
counts and a maximum likelihood fit of ``pi`` by minorization-maximization.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from math import isqrt
from pathlib import Path

import networkx as nx
import numpy as np

from . import graphcore as gc
from .exceptions import ConeError, DimensionError, ExistenceError, StructureError

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


def lambda_weights(pi) -> np.ndarray:
    """``lambda_uv = pi_u pi_v / (pi_u + pi_v)^2`` in lexicographic pair order."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size < 2:
        raise DimensionError("pi must be a vector with at least two entries")
    if np.any(pi <= 0) or not np.all(np.isfinite(pi)):
        raise ValueError("pi must be finite and strictly positive")
    u, v = np.array(gc.edge_list(pi.size)).T
    # ratio form keeps this exact under scaling and avoids overflow for large pi
    r = pi[u] / pi[v]
    return r / (1.0 + r) ** 2


def gamma_bar(pi) -> np.ndarray:
    """The bound ``(m-1)/lambda_uv`` as a symmetric matrix with zero diagonal.

    Every optimal design satisfies ``Gamma(xi*) <= gamma_bar`` entrywise, and
    ``gamma_bar`` itself is dually feasible.
    """
    pi = np.asarray(pi, dtype=float)
    return gc.unvec(pi.size, (pi.size - 1) / lambda_weights(pi))


def n_from_pairs(n: int) -> int:
    """Invert ``n = m(m-1)/2``."""
    m = (1 + isqrt(1 + 8 * n)) // 2
    if gc.n_pairs(m) != n:
        raise DimensionError(f"{n} is not a number of pairs m(m-1)/2")
    return m


@dataclass
class ClosedFormDesign:
    """Candidate optimal design on a prescribed support plus its feasibility report.

    ``optimal`` holds when all weights are nonnegative and the completed
    variogram respects ``Gamma_uv <= (m-1)/lambda_uv`` on every non-edge.
    ``boundary`` flags a non-edge attaining equality: the design is still optimal
    but an optimal design with larger support may exist.
    """

    pi: np.ndarray
    edges: frozenset
    design: np.ndarray
    gamma: np.ndarray
    weights_nonnegative: bool
    gamma_feasible: bool
    boundary: bool
    min_weight: float
    max_gamma_excess: float
    violations: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.weights_nonnegative and self.gamma_feasible

    def report(self) -> dict:
        return {
            "optimal": self.optimal,
            "weights_nonnegative": self.weights_nonnegative,
            "gamma_feasible": self.gamma_feasible,
            "boundary": self.boundary,
            "min_weight": self.min_weight,
            "max_gamma_excess": self.max_gamma_excess,
            "violations": [[u + 1, v + 1] for u, v in self.violations],
        }


def _feasibility(pi, edges, G, design, tol):
    m = len(pi)
    bound = gamma_bar(pi)
    non_edges = [e for e in gc.edge_list(m) if e not in edges]
    # relative excess of Gamma over its bound on non-edges
    excess = {e: (G[e] - bound[e]) / bound[e] for e in non_edges}
    worst = max(excess.values(), default=-np.inf)
    violations = sorted(e for e, x in excess.items() if x > tol)
    boundary = any(abs(x) <= tol for x in excess.values())
    min_w = float(min(design[gc.edge_index(m)[e]] for e in edges))
    return {
        "weights_nonnegative": min_w >= -tol,
        "gamma_feasible": not violations,
        "boundary": boundary,
        "min_weight": min_w,
        "max_gamma_excess": float(worst),
        "violations": violations,
    }


def closed_form_design(pi, edges, tol: float = FEASIBILITY_TOL) -> ClosedFormDesign:
    """Optimal paired-comparison design supported on a chordal graph.

    Sets ``Gamma_uv = (m-1)/lambda_uv`` on the edges, completes the variogram
    (order taken from the perfect elimination ordering), recovers the Laplacian
    ``M`` and reads off ``w_uv = -M_uv / lambda_uv``.

    Raises :class:`StructureError` for a disconnected or non-chordal support.
    If the edge data cannot be completed inside the cone the returned design is
    filled with NaN and flagged infeasible.
    """
    pi = np.asarray(pi, dtype=float)
    m = pi.size
    edges = gc.normalize_edges(m, edges)
    if not gc.is_connected(m, edges):
        raise StructureError("support graph is not connected")
    chordal, _ = gc.is_chordal(m, edges)
    if not chordal:
        cyc = gc.shortest_chordless_cycle(m, edges)
        raise StructureError(f"support graph is not chordal (chordless cycle {tuple(c + 1 for c in cyc)})")

    lam = lambda_weights(pi)
    bound = gamma_bar(pi)
    try:
        G = gc.complete_variogram_chordal(m, edges, bound)
    except ConeError as exc:
        log.debug("closed form: %s", exc)
        nan = np.full(gc.n_pairs(m), np.nan)
        return ClosedFormDesign(pi, edges, nan, np.full((m, m), np.nan), False, False, False,
                                np.nan, np.nan, [])
    M = gc.expand(gc.spd_inverse(gc.inverse_farris(G)))
    design = -gc.vec(M) / lam
    mask = np.zeros(gc.n_pairs(m), dtype=bool)
    idx = gc.edge_index(m)
    mask[[idx[e] for e in edges]] = True
    design[~mask] = 0.0
    return ClosedFormDesign(pi, edges, design, G, **_feasibility(pi, edges, G, design, tol))


def tree_path_sums(m: int, tree, edge_values) -> np.ndarray:
    """Sum an edge quantity along the unique tree path between every pair."""
    T = nx.Graph()
    T.add_nodes_from(range(m))
    for (u, v) in tree:
        T.add_edge(u, v, w=float(edge_values[u, v]))
    out = np.zeros((m, m))
    for s in range(m):
        dist = nx.single_source_dijkstra_path_length(T, s, weight="w")
        for t, d in dist.items():
            out[s, t] = d
    return 0.5 * (out + out.T)


def saturated_design(pi, tree, tol: float = FEASIBILITY_TOL) -> ClosedFormDesign:
    """Equal-weight design on a spanning tree.

    The weights are exactly ``1/(m-1)`` on the tree. ``Gamma`` equals
    ``(m-1)/lambda_uv`` on tree edges and is the path sum on every other pair;
    the design is optimal iff those path sums respect the bound.
    """
    pi = np.asarray(pi, dtype=float)
    m = pi.size
    tree = gc.normalize_edges(m, tree)
    if len(tree) != m - 1 or not gc.is_connected(m, tree):
        raise StructureError(f"expected a spanning tree with {m - 1} edges on {m} vertices")
    idx = gc.edge_index(m)
    design = np.zeros(gc.n_pairs(m))
    design[[idx[e] for e in tree]] = 1.0 / (m - 1)
    G = tree_path_sums(m, tree, gamma_bar(pi))
    return ClosedFormDesign(pi, tree, design, G, **_feasibility(pi, tree, G, design, tol))


@dataclass
class ChordalityReport:
    edges: frozenset
    connected: bool
    chordal: bool
    cycle: tuple | None  # 0-based shortest chordless cycle when not chordal

    def to_dict(self) -> dict:
        return {
            "connected": self.connected,
            "chordal": self.chordal,
            "cycle": None if self.cycle is None else [c + 1 for c in self.cycle],
            "edges": [[u + 1, v + 1] for u, v in sorted(self.edges)],
        }


def chordality_diagnostic(xi, eps: float = 1e-8) -> ChordalityReport:
    """Is the support graph of a paired-comparison design chordal?

    Purely diagnostic: decomposability of optimal supports is conjectured, not
    assumed anywhere in the package.
    """
    xi = np.asarray(xi, dtype=float)
    m = n_from_pairs(xi.size)
    edges = gc.support_edges(m, xi, eps)
    chordal, _ = gc.is_chordal(m, edges)
    cycle = None if chordal else gc.shortest_chordless_cycle(m, edges)
    return ChordalityReport(edges, gc.is_connected(m, edges), chordal, cycle)


# ---------------------------------------------------------------------------
# choice data


@dataclass
class ChoiceCounts:
    """Win counts per observed choice set.

    ``rows`` holds ``(members, counts)`` with 0-based ``members`` and
    ``counts[i]`` the number of times ``members[i]`` was chosen.
    """

    m: int
    rows: list[tuple[tuple[int, ...], tuple[int, ...]]]

    def __post_init__(self):
        clean = []
        for members, counts in self.rows:
            members = tuple(int(x) for x in members)
            counts = tuple(int(x) for x in counts)
            if len(members) != len(counts):
                raise DimensionError(f"set {members} has {len(counts)} counts")
            if len(set(members)) != len(members) or len(members) < 2:
                raise DimensionError(f"choice set {members} must have at least two distinct members")
            if any(not 0 <= x < self.m for x in members):
                raise DimensionError(f"choice set {members} has members outside 0..{self.m - 1}")
            if any(c < 0 for c in counts):
                raise ValueError("counts must be nonnegative")
            clean.append((members, counts))
        self.rows = clean

    @property
    def total(self) -> int:
        return sum(sum(c) for _, c in self.rows)

    def wins(self) -> np.ndarray:
        w = np.zeros(self.m)
        for members, counts in self.rows:
            w[list(members)] += counts
        return w

    def beats_graph(self) -> nx.DiGraph:
        """Edge ``i -> j`` when ``i`` was chosen from a set that contained ``j``."""
        D = nx.DiGraph()
        D.add_nodes_from(range(self.m))
        for members, counts in self.rows:
            for i, c in zip(members, counts):
                if c > 0:
                    D.add_edges_from((i, j) for j in members if j != i)
        return D

    def design(self, k: int | None = None) -> np.ndarray:
        """Observed design: choice-set frequencies over all ``k``-subsets."""
        from .choicemodel import enumerate_choice_sets

        sizes = {len(mb) for mb, _ in self.rows}
        if k is None:
            if len(sizes) != 1:
                raise DimensionError("rows have different set sizes; pass k")
            k = sizes.pop()
        sets = enumerate_choice_sets(self.m, k)
        pos = {s: i for i, s in enumerate(sets)}
        xi = np.zeros(len(sets))
        for members, counts in self.rows:
            key = tuple(sorted(members))
            if key not in pos:
                raise DimensionError(f"set {members} does not have size {k}")
            xi[pos[key]] += sum(counts)
        if xi.sum() <= 0:
            raise ValueError("no observations")
        return xi / xi.sum()


def log_likelihood(counts: ChoiceCounts, pi) -> float:
    pi = np.asarray(pi, dtype=float)
    ll = 0.0
    for members, c in counts.rows:
        p = pi[list(members)]
        c = np.asarray(c, dtype=float)
        ll += float(c @ np.log(p) - c.sum() * np.log(p.sum()))
    return ll


def check_existence(counts: ChoiceCounts) -> None:
    """Raise :class:`ExistenceError` unless the beats relation is strongly connected.

    The message names a set ``S`` whose members were never beaten by anyone
    outside ``S``; the likelihood then increases without bound as ``pi_S`` grows.
    """
    D = counts.beats_graph()
    if nx.is_strongly_connected(D):
        return
    C = nx.condensation(D)
    sources = sorted((sorted(C.nodes[c]["members"]) for c in C if C.in_degree(c) == 0))
    top = sources[0]
    rest = sorted(set(range(counts.m)) - set(top))
    raise ExistenceError(
        "maximum likelihood estimate does not exist: alternatives "
        f"{[x + 1 for x in top]} never lose to {[x + 1 for x in rest]}",
        partition=(tuple(top), tuple(rest)),
    )


@dataclass
class MLEFit:
    pi: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def fit_mle(counts: ChoiceCounts, tol: float = 1e-13, max_iter: int = 100_000,
            param_tol: float = 1e-11) -> MLEFit:
    """Maximum likelihood ``pi`` (normalized to sum 1) by minorization-maximization.

    Each sweep sets ``pi_i <- W_i / sum_{r: i in C_r} n_r / sum_{s in C_r} pi_s``
    where ``W_i`` are total wins and ``n_r`` the observations of row ``r``. The
    log-likelihood never decreases. Stops when its relative change is ``<= tol``
    and no entry of ``pi`` moved by more than ``param_tol`` relative to itself
    (the likelihood is flat near the optimum, so the first test alone stops
    early).
    """
    check_existence(counts)
    m = counts.m
    W = counts.wins()
    members = [np.array(mb) for mb, _ in counts.rows]
    n = np.array([sum(c) for _, c in counts.rows], dtype=float)
    keep = n > 0
    members = [mb for mb, k in zip(members, keep) if k]
    n = n[keep]

    pi = np.full(m, 1.0 / m)
    ll = log_likelihood(counts, pi)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        denom = np.zeros(m)
        for mb, nr in zip(members, n):
            denom[mb] += nr / pi[mb].sum()
        new = W / denom
        new /= new.sum()
        step = float(np.max(np.abs(new - pi) / new))
        pi = new
        ll_new = log_likelihood(counts, pi)
        history.append(ll_new)
        change = abs(ll_new - ll) / max(1.0, abs(ll))
        ll = ll_new
        if change <= tol and step <= param_tol:
            converged = True
            break
    return MLEFit(pi, ll, it, converged, history)


HEADER = ("set_members", "counts")


def parse_counts_csv(text: str, m: int | None = None) -> ChoiceCounts:
    """Parse ``set_members,counts`` rows; members are 1-based and ``|``-separated."""
    reader = csv.reader(io.StringIO(text))
    rows = []
    header_seen = False
    for line_no, rec in enumerate(reader, start=1):
        if not rec or not "".join(rec).strip() or rec[0].lstrip().startswith("#"):
            continue
        if not header_seen:
            if tuple(x.strip() for x in rec) != HEADER:
                raise ValueError(f"line {line_no}: expected header 'set_members,counts'")
            header_seen = True
            continue
        if len(rec) != 2:
            raise ValueError(f"line {line_no}: expected two fields, got {len(rec)}")
        try:
            members = tuple(int(x) - 1 for x in rec[0].split("|"))
            cnt = tuple(int(x) for x in rec[1].split("|"))
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from exc
        rows.append((members, cnt))
    if not header_seen:
        raise ValueError("empty counts file")
    if m is None:
        m = 1 + max((max(mb) for mb, _ in rows), default=0)
    return ChoiceCounts(m, rows)


def read_counts_csv(path, m: int | None = None) -> ChoiceCounts:
    return parse_counts_csv(Path(path).read_text(), m)


def format_counts_csv(counts: ChoiceCounts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for members, cnt in counts.rows:
        w.writerow(["|".join(str(x + 1) for x in members), "|".join(str(c) for c in cnt)])
    return buf.getvalue()


def write_counts_csv(counts: ChoiceCounts, path) -> None:
    Path(path).write_text(format_counts_csv(counts))
