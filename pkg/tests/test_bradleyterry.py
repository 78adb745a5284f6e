import numpy as np
import pytest

from choicedesign import bradleyterry as bt
from choicedesign import graphcore as gc
from choicedesign.certify import certify
from choicedesign.choicemodel import ChoiceProblem
from choicedesign.dualsolver import optimal_design
from choicedesign.exceptions import ExistenceError, StructureError

from oracles import exact_lambda, m3_rational_weights
from published import ICONS_PI, ICONS_ROWS

COMPLETE3 = [(0, 1), (0, 2), (1, 2)]


def test_lambda_weights():
    assert bt.lambda_weights([3.0, 3.0])[0] == 0.25
    assert bt.lambda_weights([2.0, 1.0])[0] == pytest.approx(2 / 9, rel=1e-15)
    rng = np.random.default_rng(0)
    pi = rng.uniform(0.1, 10, 6)
    lam = bt.lambda_weights(pi)
    assert np.all((lam > 0) & (lam <= 0.25))
    np.testing.assert_allclose(bt.lambda_weights(pi * 1e6), lam, rtol=1e-14)
    perm = rng.permutation(6)
    L = gc.unvec(6, lam)
    np.testing.assert_allclose(gc.unvec(6, bt.lambda_weights(pi[perm])), L[np.ix_(perm, perm)], rtol=1e-14)
    for (u, v), x in zip(gc.edge_list(6), lam):
        assert x == pytest.approx(float(exact_lambda(pi[u], pi[v])), rel=1e-14)


def test_gamma_bar_is_dually_feasible_with_equality():
    rng = np.random.default_rng(1)
    for m in range(3, 9):
        pi = rng.uniform(0.2, 5, m)
        G = bt.gamma_bar(pi)
        p = ChoiceProblem(m, 2, pi)
        np.testing.assert_allclose(p.constraint_matrix @ gc.vec(G), m - 1, rtol=1e-13)


def test_closed_form_matches_printed_three_alternative_formulas():
    rng = np.random.default_rng(2)
    n = 0
    while n < 300:
        pi = rng.uniform(0.2, 5, 3)
        w = m3_rational_weights(*bt.lambda_weights(pi))
        if np.any(w <= 0):
            continue
        n += 1
        cf = bt.closed_form_design(pi, COMPLETE3)
        assert cf.optimal
        np.testing.assert_allclose(cf.design, w, rtol=1e-10)


def test_closed_form_negative_weight_is_reported():
    rng = np.random.default_rng(3)
    while True:
        pi = rng.uniform(0.2, 5, 3)
        if np.any(m3_rational_weights(*bt.lambda_weights(pi)) < -1e-3):
            break
    cf = bt.closed_form_design(pi, COMPLETE3)
    assert not cf.weights_nonnegative and not cf.optimal


def test_closed_form_feasible_designs_are_certified():
    rng = np.random.default_rng(4)
    supports = [
        (4, [(0, 3), (1, 2), (1, 3), (2, 3)]),
        (4, [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
        (5, [(0, 1), (0, 4), (1, 4), (2, 3), (2, 4), (3, 4)]),
        (5, gc.edge_list(5)),
    ]
    hits = 0
    for m, edges in supports:
        for _ in range(200):
            pi = np.exp(rng.normal(0, 1.0, m))
            cf = bt.closed_form_design(pi, edges)
            if cf.optimal:
                hits += 1
                p = ChoiceProblem(m, 2, pi)
                assert certify(p, cf.design, 1e-9).max_violation <= 1e-9
                assert cf.design.sum() == pytest.approx(1.0, abs=1e-12)
                np.testing.assert_allclose(optimal_design(p).design, cf.design, atol=1e-6)
    assert hits > 20


def test_chordal_four_vertex_feasibility_conditions():
    # support 14, 23, 24, 34: optimal iff 3/l14 + 3/l24 <= 3/l12 and 3/l14 + 3/l34 <= 3/l13
    rng = np.random.default_rng(5)
    edges = [(0, 3), (1, 2), (1, 3), (2, 3)]
    for _ in range(200):
        pi = np.exp(rng.normal(0, 1.5, 4))
        lam = dict(zip(gc.edge_list(4), bt.lambda_weights(pi)))
        cond = (1 / lam[(0, 3)] + 1 / lam[(1, 3)] <= 1 / lam[(0, 1)]) and \
               (1 / lam[(0, 3)] + 1 / lam[(2, 3)] <= 1 / lam[(0, 2)])
        cf = bt.closed_form_design(pi, edges)
        if cf.weights_nonnegative:
            assert cf.gamma_feasible == cond


def test_non_chordal_support_is_rejected():
    with pytest.raises(StructureError, match="chordless cycle"):
        bt.closed_form_design(np.ones(4), [(0, 1), (0, 2), (1, 3), (2, 3)])
    with pytest.raises(StructureError):
        bt.closed_form_design(np.ones(4), [(0, 1), (2, 3)])


def test_saturated_design_weights_are_exact():
    rng = np.random.default_rng(6)
    for m in range(2, 9):
        tree = [(int(rng.integers(0, v)), v) for v in range(1, m)]
        s = bt.saturated_design(rng.uniform(0.2, 5, m), tree)
        on = s.design[s.design > 0]
        assert len(on) == m - 1
        assert np.all(np.abs(on - 1 / (m - 1)) <= 1e-15)


def test_saturated_path_feasibility_rule():
    rng = np.random.default_rng(7)
    for _ in range(100):
        pi = np.exp(rng.normal(0, 1.5, 3))
        l12, l13, l23 = bt.lambda_weights(pi)
        s = bt.saturated_design(pi, [(0, 1), (1, 2)])
        assert s.optimal == (2 / l12 + 2 / l23 <= 2 / l13 * (1 + 1e-9))
        assert s.gamma[0, 2] == pytest.approx(2 / l12 + 2 / l23)


@pytest.mark.parametrize("tree", [[(0, 1), (0, 2), (0, 3)], [(0, 1), (1, 2), (2, 3)]])
def test_saturated_tree_agrees_with_numeric_solver(tree):
    rng = np.random.default_rng(8)
    checked = optimal = 0
    for _ in range(100):
        # widely spread, sorted along the path so that saturated designs do occur
        pi = np.exp(np.cumsum(rng.uniform(0, 3.5, 4)))
        s = bt.saturated_design(pi, tree)
        if s.boundary:
            continue
        p = ChoiceProblem(4, 2, pi)
        assert certify(p, s.design, 1e-9).optimal == s.optimal
        if s.optimal:
            np.testing.assert_allclose(optimal_design(p).design, s.design, atol=1e-6)
            optimal += 1
        checked += 1
    assert checked > 50
    if tree[1] == (1, 2):
        assert optimal > 0


def test_saturated_rejects_non_tree():
    with pytest.raises(StructureError):
        bt.saturated_design(np.ones(3), COMPLETE3)


def test_chordality_diagnostic():
    tree = np.array([1, 1, 1, 0, 0, 0]) / 3
    r = bt.chordality_diagnostic(tree)
    assert r.chordal and r.cycle is None and r.connected
    cyc = np.array([1, 1, 0, 0, 1, 1]) / 4
    r = bt.chordality_diagnostic(cyc)
    assert not r.chordal and r.to_dict()["cycle"] == [1, 2, 4, 3]


# --- choice data ---------------------------------------------------------------

def test_fit_two_alternatives():
    f = bt.fit_mle(bt.ChoiceCounts(2, [((0, 1), (3, 1))]))
    np.testing.assert_allclose(f.pi, [0.75, 0.25], atol=1e-10)


def test_fit_symmetric_data_is_uniform():
    rows = [((u, v), (2, 2)) for u, v in gc.edge_list(4)]
    np.testing.assert_allclose(bt.fit_mle(bt.ChoiceCounts(4, rows)).pi, 0.25, atol=1e-12)


def test_fit_icons_table():
    f = bt.fit_mle(bt.ChoiceCounts(6, ICONS_ROWS))
    assert f.converged
    assert np.max(np.abs(f.pi - ICONS_PI)) <= 5e-4
    assert f.pi.sum() == pytest.approx(1.0)
    assert np.all(np.diff(f.history) >= -1e-12)


def test_fit_log_likelihood_nondecreasing_random():
    rng = np.random.default_rng(9)
    rows = []
    for _ in range(30):
        c = tuple(sorted(rng.choice(5, 3, replace=False)))
        rows.append((c, tuple(int(x) for x in rng.integers(1, 6, 3))))
    f = bt.fit_mle(bt.ChoiceCounts(5, rows))
    assert np.all(np.diff(f.history) >= -1e-12)


def test_fit_existence_error_names_partition():
    counts = bt.ChoiceCounts(3, [((0, 1), (3, 0)), ((1, 2), (2, 1))])
    with pytest.raises(ExistenceError) as info:
        bt.fit_mle(counts)
    assert info.value.partition == ((0,), (1, 2))


def test_counts_csv_round_trip(tmp_path):
    counts = bt.ChoiceCounts(6, ICONS_ROWS)
    text = bt.format_counts_csv(counts)
    assert text.splitlines()[0] == "set_members,counts"
    assert text.splitlines()[1] == "1|2|4|6,5|3|4|3"
    path = tmp_path / "icons.csv"
    bt.write_counts_csv(counts, path)
    again = bt.read_counts_csv(path)
    assert again.rows == counts.rows and again.m == 6 and again.total == 133


def test_counts_csv_errors():
    with pytest.raises(ValueError):
        bt.parse_counts_csv("members,wins\n1|2,1|1\n")
    with pytest.raises(ValueError):
        bt.parse_counts_csv("set_members,counts\n1|2,1\n")
    with pytest.raises(ValueError):
        bt.parse_counts_csv("set_members,counts\n1|x,1|2\n")


def test_observed_design_from_counts():
    xi = bt.ChoiceCounts(6, ICONS_ROWS).design()
    assert len(xi) == 15 and xi.sum() == pytest.approx(1.0)
    assert np.count_nonzero(xi) == 9
