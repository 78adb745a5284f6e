import numpy as np
import pytest

from choicedesign import graphcore as gc
from choicedesign.bradleyterry import gamma_bar, lambda_weights
from choicedesign.certify import certify, directional_derivatives
from choicedesign.choicemodel import (
    ChoiceProblem,
    log_det_reduced,
    q_from_design,
    uniform_design,
)
from choicedesign.dualsolver import (
    SolverTolerances,
    dual_objective,
    duality_gap,
    gradient_dual,
    initial_variogram,
    optimal_design,
    recover_design,
    solve_dual,
)
from choicedesign.exceptions import ConeError, ConvergenceError, RecoveryError

from oracles import m3_rational_weights


def test_tolerance_defaults_and_round_trip():
    t = SolverTolerances()
    assert (t.kkt, t.feas, t.recover, t.max_iter_dual, t.max_iter_recover, t.support_eps) == \
        (1e-8, 1e-9, 1e-6, 500, 1000, 1e-8)
    assert SolverTolerances.from_dict(t.to_dict()) == t
    with pytest.raises(ValueError):
        SolverTolerances.from_dict({"kkt": 1e-8, "bogus": 1})
    with pytest.raises(ValueError):
        SolverTolerances(hessian="newton")


def test_dual_gradient_by_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for m in range(3, 8):
        p = ChoiceProblem(m, 2, rng.uniform(0.5, 3, m))
        G = initial_variogram(p) * rng.uniform(0.8, 1.0)
        g = gradient_dual(p, G)
        fd = np.empty_like(g)
        for i, (u, v) in enumerate(gc.edge_list(m)):
            E = np.zeros((m, m))
            E[u, v] = E[v, u] = h
            fd[i] = (dual_objective(G + E) - dual_objective(G - E)) / (2 * h)
        assert np.max(np.abs(g - fd)) <= 1e-5


def test_dual_gradient_of_star_is_supported_on_star():
    m = 5
    q = np.zeros(gc.n_pairs(m))
    idx = gc.edge_index(m)
    for v in range(1, m):
        q[idx[(0, v)]] = 0.5 + v
    L = gc.laplacian_from_edge_weights(m, q)
    G = gc.farris(gc.spd_inverse(gc.reduce(L)))
    p = ChoiceProblem(m, 2, np.ones(m))
    np.testing.assert_allclose(gradient_dual(p, G), q, atol=1e-12)


def test_dual_gradient_equivariance():
    rng = np.random.default_rng(1)
    m = 5
    p = ChoiceProblem(m, 2, np.ones(m))
    G = initial_variogram(ChoiceProblem(m, 2, rng.uniform(0.5, 3, m)))
    perm = rng.permutation(m)
    Gp = G[np.ix_(perm, perm)]
    K = gc.unvec(m, gradient_dual(p, G))
    Kp = gc.unvec(m, gradient_dual(p, Gp))
    np.testing.assert_allclose(Kp, K[np.ix_(perm, perm)], atol=1e-12)


def test_dual_gradient_outside_cone():
    p = ChoiceProblem(3, 2, np.ones(3))
    with pytest.raises(ConeError):
        gradient_dual(p, gc.farris(-np.eye(2)))


@pytest.mark.parametrize("m,k", [(3, 2), (4, 2), (4, 3), (5, 3), (6, 3), (6, 4), (7, 3)])
def test_equal_pi_gives_exchangeable_optimum(m, k):
    p = ChoiceProblem(m, k, np.ones(m))
    sol = solve_dual(p)
    g = gc.vec(sol.gamma)
    assert np.ptp(g) <= 1e-8 * g.max()
    assert len(sol.active_set) == p.n_sets
    rec = recover_design(p, sol)
    np.testing.assert_allclose(rec.design, 1 / p.n_sets, atol=1e-10)
    assert rec.residual <= 1e-10


def test_three_alternatives_full_support():
    rng = np.random.default_rng(2)
    n = 0
    while n < 20:
        pi = rng.uniform(0.5, 2, 3)
        lam = lambda_weights(pi)
        w = m3_rational_weights(*lam)
        if np.any(w <= 0):
            continue
        n += 1
        p = ChoiceProblem(3, 2, pi)
        sol = solve_dual(p)
        np.testing.assert_allclose(sol.gamma, gamma_bar(pi), rtol=1e-8)
        rec = recover_design(p, sol)
        np.testing.assert_allclose(rec.design, w, atol=1e-9)
        assert rec.residual <= 1e-12


def test_random_instances_are_certified():
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = ChoiceProblem(6, 3, rng.uniform(1, 20, 6))
        od = optimal_design(p)
        cert = certify(p, od.design)
        assert cert.max_violation <= 1e-6 and cert.optimal
        assert abs(duality_gap(p, od.design)) <= 1e-12
        assert od.dual.converged and od.dual.kkt_residual <= 1e-8
        assert od.dual.max_violation <= 1e-9


def test_strong_duality_and_complementary_slackness():
    rng = np.random.default_rng(4)
    for m, k in [(5, 2), (6, 3), (7, 4)]:
        p = ChoiceProblem(m, k, rng.uniform(1, 20, m))
        od = optimal_design(p)
        # log det M(xi*) = -log det Sigma(Gamma*)
        assert -log_det_reduced(p, od.design) == pytest.approx(od.dual.objective, abs=1e-8)
        on = od.design > 1e-8
        assert np.max(np.abs(od.dual.constraint_values[on] - (m - 1))) <= 1e-6


def test_history_is_monotone_and_deterministic():
    rng = np.random.default_rng(5)
    p = ChoiceProblem(8, 4, rng.uniform(1, 20, 8))
    a = solve_dual(p)
    b = solve_dual(ChoiceProblem(8, 4, p.pi.copy()))
    assert np.all(np.diff(a.history) >= -1e-13 * np.abs(a.history[-1]))
    assert np.array_equal(a.gamma, b.gamma)
    assert np.array_equal(recover_design(p, a).design, recover_design(p, b).design)


def test_bfgs_model_reaches_same_optimum():
    rng = np.random.default_rng(6)
    p = ChoiceProblem(6, 3, rng.uniform(1, 20, 6))
    exact = solve_dual(p)
    bfgs = solve_dual(p, SolverTolerances(hessian="bfgs"))
    np.testing.assert_allclose(bfgs.gamma, exact.gamma, rtol=1e-6)


def test_round_trip_through_edge_weights():
    rng = np.random.default_rng(7)
    p = ChoiceProblem(7, 3, rng.uniform(1, 20, 7))
    sol = solve_dual(p)
    rec = recover_design(p, sol)
    assert np.linalg.norm(q_from_design(p, rec.design) - rec.edge_weights) <= rec.residual + 1e-15
    assert rec.scaled_residual <= 1e-6
    assert rec.ridge == 1e-10


def test_sparse_selection_has_no_larger_support():
    rng = np.random.default_rng(8)
    for _ in range(5):
        p = ChoiceProblem(6, 3, np.exp(rng.normal(0, 0.5, 6)))
        sol = solve_dual(p)
        ridge = recover_design(p, sol)
        sparse = recover_design(p, sol, SolverTolerances(selection="sparse"))
        assert len(sparse.support) <= len(ridge.support)
        assert certify(p, sparse.design).optimal


def test_single_choice_set():
    p = ChoiceProblem(4, 4, [1, 2, 3, 4])
    od = optimal_design(p)
    np.testing.assert_array_equal(od.design, [1.0])
    assert certify(p, od.design).optimal


def test_k2_recovery_is_direct():
    rng = np.random.default_rng(9)
    p = ChoiceProblem(6, 2, rng.uniform(0.5, 4, 6))
    sol = solve_dual(p)
    rec = recover_design(p, sol)
    assert rec.residual <= 1e-12
    np.testing.assert_allclose(rec.design * lambda_weights(p.pi), q_from_design(p, rec.design))


def test_duality_gap_formula():
    p = ChoiceProblem(4, 2, np.ones(4))
    assert duality_gap(p, uniform_design(p)) == pytest.approx(0, abs=1e-15)
    assert duality_gap(p, 1.5 * uniform_design(p)) == pytest.approx(1.5)


def test_iteration_cap_raises_with_best_iterate():
    p = ChoiceProblem(6, 3, np.arange(1.0, 7.0) ** 2)
    with pytest.raises(ConvergenceError) as info:
        solve_dual(p, SolverTolerances(max_iter_dual=1))
    assert info.value.best is not None and info.value.best.iterations == 1


def test_recovery_error_carries_diagnostics():
    p = ChoiceProblem(6, 3, np.arange(1.0, 7.0))
    sol = solve_dual(p)
    sol.gamma = sol.gamma * 0.5  # edge weights now double: no design reproduces them
    with pytest.raises(RecoveryError) as info:
        recover_design(p, sol)
    assert info.value.residual > 1e-6 and info.value.design is not None


def test_directional_derivatives_vanish_on_support():
    p = ChoiceProblem(6, 3, [1, 2, 3, 4, 5, 6])
    od = optimal_design(p)
    dd = directional_derivatives(p, od.design)
    assert dd.max() <= 1e-8
    assert np.max(np.abs(dd[od.design > 0])) <= 1e-8
