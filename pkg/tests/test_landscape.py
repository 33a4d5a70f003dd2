import math

import numpy as np
import pytest

from hardhex import build_grid, landscape
from hardhex.config import is_hardcore, stable_configs
from hardhex.landscape import (ConvergenceError, EnumerationLimitError, comm_height,
                               condition_absence_deep_cycles, condition_strict_time_scales,
                               enumerate_states, exact_hitting_distribution,
                               exact_mean_hitting, gibbs, mixing_time, phi_to_set,
                               spectral_gap, symmetrized_generator, transition_matrix,
                               verify_structure)

import oracles
from conftest import index_for


@pytest.mark.parametrize("K,L,count", [(2, 1, 58), (3, 1, 418), (2, 2, 3254)])
def test_enumeration_matches_naive_filter(K, L, count):
    idx = index_for(K, L)
    naive = oracles.naive_states(K, L)
    assert idx.size == len(naive) == count
    assert [int(s) for s in idx.states] == naive


def test_enumeration_invariants(idx22):
    g = idx22.grid
    assert all(is_hardcore(g, int(s)) for s in idx22.states)
    E = idx22.energy
    assert (E == -2 * g.K * g.L).sum() == 3
    assert sorted(idx22.stable) == sorted(idx22.id_of(s) for s in stable_configs(g))
    M = idx22.moves
    assert (M != M.T).nnz == 0
    # moves are exactly the Hamming-1 neighbours inside the state set
    mv = oracles.moves([int(s) for s in idx22.states], g.N)
    for k in range(0, idx22.size, 97):
        assert {int(idx22.states[j]) for j in idx22.neighbors(k)} == set(mv[int(idx22.states[k])])


def test_enumeration_limit():
    with pytest.raises(EnumerationLimitError):
        enumerate_states(build_grid((3, 2)))


@pytest.mark.parametrize("K,L", [(2, 1), (3, 1), (2, 2)])
def test_comm_height_matches_bfs_oracle(K, L):
    idx = index_for(K, L)
    states = [int(s) for s in idx.states]
    rng = np.random.default_rng(1000 * K + L)
    for _ in range(50):
        i, j = rng.choice(idx.size, 2, replace=False)
        want = oracles.comm_height_bfs(states, idx.grid.N, [states[i]], [states[j]])
        assert comm_height(idx, [i], [j]) == want


def test_comm_height_sets_and_errors(idx21):
    a, b, c = idx21.stable
    assert comm_height(idx21, [a], [b, c]) == comm_height(idx21, [a], [b])
    with pytest.raises(ValueError):
        comm_height(idx21, [a], [a])
    with pytest.raises(ValueError):
        comm_height(idx21, [], [b])


@pytest.mark.parametrize("K,L", [(2, 1), (2, 2), (3, 1), (4, 1)])
def test_structure(K, L):
    idx = index_for(K, L)
    rep = verify_structure(idx)
    gamma = min(K, 2 * L) + 1
    assert rep.passed, rep.clauses
    assert rep.gamma_expected == gamma
    assert set(rep.phi_pairs.values()) == {gamma}
    assert rep.max_depth_outside <= gamma - 1
    assert rep.conditions["AE(a,{b,c})"] and not rep.conditions["AE(a,{b})"]
    d = rep.to_dict()
    assert d["passed"] and d["n_states"] == idx.size


def test_phi_table_and_deep_cycle_asymmetry(idx22):
    a, b, c = idx22.stable
    E = idx22.energy
    phi_b = phi_to_set(idx22, [b])
    assert phi_b[a] - E[a] == phi_b[c] - E[c] == 3
    assert condition_absence_deep_cycles(idx22, a, [b, c])
    assert condition_strict_time_scales(idx22, a, [b, c])
    assert not condition_strict_time_scales(idx22, a, [b])


def test_lower_bound_on_barrier(idx21):
    """No path a -> b stays below H(a) + 3: the sublevel set at H(a)+2 separates them."""
    a, b, _ = idx21.stable
    states = [int(s) for s in idx21.states]
    h = oracles.comm_height_bfs(states, 12, [states[a]], [states[b]])
    assert h - idx21.energy[a] == 3


@pytest.mark.parametrize("beta", [1.0, 2.0, 3.0])
def test_mean_hitting_ratio_two(idx21, beta):
    a, b, c = [idx21.config(i) for i in idx21.stable]
    r = exact_mean_hitting(idx21, beta, a, [b]) / exact_mean_hitting(idx21, beta, a, [b, c])
    assert r == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("beta", [0.0, 1.5])
def test_mean_hitting_matches_dense_oracle(idx21, beta):
    states = [int(s) for s in idx21.states]
    P = oracles.dense_P(states, 12, beta)
    a, b, c = idx21.stable
    want = oracles.mean_hitting(P, a, [b, c])
    got = exact_mean_hitting(idx21, beta, idx21.config(a), [idx21.config(b), idx21.config(c)])
    assert got == pytest.approx(want, rel=1e-10)
    dist = exact_hitting_distribution(idx21, beta, idx21.config(a), [idx21.config(b), idx21.config(c)])
    assert np.allclose(dist, oracles.hitting_distribution(P, a, [b, c]), atol=1e-12)


def test_one_step_escape_at_beta_zero(idx21):
    P = transition_matrix(idx21, 0.0)
    k = 17
    others = [idx21.config(j) for j in range(idx21.size) if j != k]
    got = exact_mean_hitting(idx21, 0.0, idx21.config(k), others)
    assert got == pytest.approx(1.0 / (1.0 - P[k, k]))


def test_hitting_errors(idx21):
    a, b, _ = [idx21.config(i) for i in idx21.stable]
    with pytest.raises(ValueError):
        exact_mean_hitting(idx21, 1.0, a, [a, b])


@pytest.mark.parametrize("beta", [0.0, 1.0, 3.0])
def test_spectral_gap_against_dense_eigenvalues(idx21, beta):
    P = transition_matrix(idx21, beta).toarray()
    want = oracles.second_eigenvalue_gap(P)
    got = spectral_gap(idx21, beta)
    assert got > 0
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_spectral_gap_sparse_route(idx22):
    """The iterative eigensolver route (larger spaces) against a dense symmetric solve."""
    beta = 1.0
    G = symmetrized_generator(idx22, beta).toarray()
    assert np.allclose(G, G.T, atol=1e-14)
    ev = np.linalg.eigvalsh(G)
    assert spectral_gap(idx22, beta) == pytest.approx(ev[1], rel=1e-8)


def test_spectral_gap_convergence_error(idx21):
    with pytest.raises(ConvergenceError):
        spectral_gap(idx21, 2.0, tol=0.0)


def test_gibbs(idx21):
    mu = gibbs(idx21, 1.0)
    assert mu.sum() == pytest.approx(1.0)
    P = transition_matrix(idx21, 1.0)
    assert np.allclose(mu @ P.toarray(), mu, atol=1e-15)


@pytest.mark.parametrize("beta", [0.0, 1.0, 2.0])
def test_mixing_time_against_stepwise_oracle(idx21, beta):
    states = [int(s) for s in idx21.states]
    P = oracles.dense_P(states, 12, beta)
    want = oracles.mixing_time_bruteforce(P, oracles.gibbs(states, beta), 0.25)
    r = mixing_time(idx21, beta, 0.25)
    assert r.t_mix == want and not r.truncated and not r.lower_bound
    assert r.tv <= 0.25


def test_mixing_regression_baseline(idx21):
    assert mixing_time(idx21, 0.0, 0.25).t_mix == 39


def test_tv_monotone(idx21):
    P = transition_matrix(idx21, 1.0).toarray()
    mu = gibbs(idx21, 1.0)
    M = np.eye(idx21.size)
    prev = np.full(idx21.size, np.inf)
    for _ in range(300):
        tv = 0.5 * np.abs(M - mu).sum(axis=1)
        assert (tv <= prev + 1e-12).all()
        prev = tv
        M = M @ P


@pytest.mark.parametrize("beta", [0.5, 2.0])
def test_mixing_vector_route_matches_dense(idx21, beta, monkeypatch):
    dense = mixing_time(idx21, beta, 0.25)
    monkeypatch.setattr(landscape, "DENSE_MIXING_LIMIT", 10)  # force vector iteration
    r = mixing_time(idx21, beta, 0.25)
    assert r.t_mix == dense.t_mix and not r.lower_bound


def test_mixing_lower_bound_mode(idx21, monkeypatch):
    full = mixing_time(idx21, 1.0, 0.25)
    monkeypatch.setattr(landscape, "DENSE_MIXING_LIMIT", 10)
    monkeypatch.setattr(landscape, "MIXING_ALL_STARTS_LIMIT", 20)
    r = mixing_time(idx21, 1.0, 0.25)
    assert r.lower_bound
    assert r.t_mix <= full.t_mix


def test_mixing_cap_and_errors(idx21):
    r = mixing_time(idx21, 3.0, 0.25, cap=64)
    assert r.truncated
    for eps in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            mixing_time(idx21, 1.0, eps)
