"""Reference computations that share no code with the package."""

from itertools import combinations
from fractions import Fraction

import numpy as np


def spanning_tree_sum(m, weights):
    """Weighted spanning-tree count by deletion-contraction.

    ``weights`` maps pairs ``(u, v)`` to edge weights. Contraction merges ``v``
    into ``u`` and adds parallel edge weights together.
    """
    edges = {tuple(sorted(e)): w for e, w in weights.items() if w != 0}
    return _dc(frozenset(range(m)), edges)


def _dc(vertices, edges):
    if len(vertices) == 1:
        return 1
    if not edges:
        return 0
    (u, v), w = next(iter(sorted(edges.items())))
    rest = dict(edges)
    del rest[(u, v)]
    without = _dc(vertices, rest)
    merged = {}
    for (a, b), x in rest.items():
        a2 = u if a == v else a
        b2 = u if b == v else b
        if a2 == b2:
            continue
        key = tuple(sorted((a2, b2)))
        merged[key] = merged.get(key, 0) + x
    return without + w * _dc(vertices - {v}, merged)


def spanning_tree_enumeration(m, weights):
    """Sum over all (m-1)-edge subsets that form a spanning tree (tiny m only)."""
    items = [(tuple(sorted(e)), w) for e, w in weights.items() if w != 0]
    total = 0
    for sub in combinations(items, m - 1):
        parent = list(range(m))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        prod = 1
        for (a, b), w in sub:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
            prod *= w
        if ok:
            total += prod
    return total


def information_by_definition(m, sets, weights, pi):
    """``sum_j w_j F_j (diag(p_j) - p_j p_j^T) F_j^T`` built entry by entry."""
    M = np.zeros((m, m))
    for c, w in zip(sets, weights):
        s = sum(pi[i] for i in c)
        for a in c:
            for b in c:
                pa, pb = pi[a] / s, pi[b] / s
                M[a, b] += w * ((pa if a == b else 0.0) - pa * pb)
    return M


def m3_rational_weights(l12, l13, l23):
    """Closed-form optimal paired-comparison weights for three alternatives."""
    den = (l12**2 * l13**2 - 2 * l12**2 * l13 * l23 + l12**2 * l23**2
           - 2 * l12 * l13**2 * l23 - 2 * l12 * l13 * l23**2 + l13**2 * l23**2)
    return np.array([
        l13 * l23 * (-l12 * l13 - l12 * l23 + l13 * l23),
        l12 * l23 * (-l12 * l13 + l12 * l23 - l13 * l23),
        l12 * l13 * (l12 * l13 - l12 * l23 - l13 * l23),
    ]) / den


def lam(pu, pv):
    return pu * pv / (pu + pv) ** 2


def exact_lambda(pu, pv):
    pu, pv = Fraction(pu), Fraction(pv)
    return pu * pv / (pu + pv) ** 2
