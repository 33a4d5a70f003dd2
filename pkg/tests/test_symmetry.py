import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardhex import build_grid
from hardhex.config import Configuration, energy, is_hardcore, stable_configs
from hardhex.landscape import exact_hitting_distribution, exact_mean_hitting, transition_matrix
from hardhex.lattice import Automorphism
from hardhex.symmetry import (coupling_checks, induced, induced_color_perm,
                              state_permutation, verify_state_automorphism)

from conftest import index_for


def test_induced_examples():
    g = build_grid((2, 2))
    a, b, c = stable_configs(g)
    ab, ac, bc = g.axial_automorphisms()
    assert induced(bc, a) == a and induced(bc, b) == c and induced(bc, c) == b
    assert induced(ab, a) == b and induced(ab, c) == c
    assert induced(ac, a) == c and induced(ac, b) == b
    for aut in (ab, ac, bc, ac.compose(ab)):
        perm = induced_color_perm(aut)
        assert [induced(aut, s) for s in (a, b, c)] == [(a, b, c)[perm[x]] for x in range(3)]
    assert induced_color_perm(None) == (0, 1, 2)


@pytest.mark.parametrize("K,L", [(2, 1), (2, 2), (3, 1)])
def test_axial_maps_are_state_automorphisms(K, L):
    idx = index_for(K, L)
    ab, ac, bc = idx.grid.axial_automorphisms()
    for aut in (ab, ac, bc, ac.compose(ab), idx.grid.translation(1, 1)):
        assert verify_state_automorphism(idx, aut)
    pi = state_permutation(idx, bc)
    assert sorted(pi.tolist()) == list(range(idx.size))


def test_random_transposition_is_not_an_automorphism(idx21):
    rng = np.random.default_rng(0)
    for _ in range(10):
        u, v = rng.choice(12, 2, replace=False)
        perm = np.arange(12)
        perm[[u, v]] = perm[[v, u]]
        assert not verify_state_automorphism(idx21, Automorphism("swap", perm, (0, 1, 2)))
    assert not verify_state_automorphism(idx21, np.zeros(12, dtype=int))


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=(1 << 24) - 1), st.sampled_from([0, 1, 2]))
def test_induced_preserves_energy_and_hardcore(bits, which):
    g = build_grid((2, 2))
    b = 0
    for v in range(g.N):
        if (bits >> v) & 1 and not b & g.neighbor_masks[v]:
            b |= 1 << v
    sigma = Configuration(g, b)
    img = induced(g.axial_automorphisms()[which], sigma)
    assert energy(img) == energy(sigma) and is_hardcore(g, img)


@pytest.mark.parametrize("K,L", [(2, 1), (2, 2)])
@pytest.mark.parametrize("beta", [1.0, 3.0])
def test_exact_hitting_distribution_uniform(K, L, beta):
    idx = index_for(K, L)
    a, b, c = stable_configs(idx.grid)
    dist = exact_hitting_distribution(idx, beta, a, [b, c])
    assert np.abs(dist - 0.5).max() <= 1e-10


def test_exact_tunneling_time_laws(idx21):
    """Hitting-time law and its independence from the entered state, exactly for t <= 3000."""
    a, b, c = [int(i) for i in idx21.stable]
    P = transition_matrix(idx21, 1.0).toarray()

    def joint(start, targets):
        keep = [k for k in range(idx21.size) if k not in targets]
        Q, R = P[np.ix_(keep, keep)], P[np.ix_(keep, targets)]
        x = np.zeros(len(keep))
        x[keep.index(start)] = 1.0
        out = []
        for _ in range(3000):
            out.append(x @ R)
            x = x @ Q
        return np.array(out)  # out[t-1, j] = P(tau = t, X_tau = targets[j])

    ja = joint(a, [b, c])
    jb = joint(b, [a, c])
    assert np.abs(ja[:, 0] - ja[:, 1]).max() < 1e-15  # (iii): independence with a fair coin
    assert np.abs(ja.sum(1) - jb.sum(1)).max() < 1e-15  # (ii): same law from a and from b
    assert ja.sum() > 0.99


def test_exact_means_agree(idx21):
    a, b, c = stable_configs(idx21.grid)
    assert exact_mean_hitting(idx21, 2.0, a, [b, c]) == pytest.approx(
        exact_mean_hitting(idx21, 2.0, b, [a, c]), rel=1e-12)


def test_coupling_checks_pass_and_are_reproducible():
    g = build_grid((2, 1))
    rep = coupling_checks(g, 1.0, 400, seed=3)
    assert rep.passed, rep.to_dict()
    assert rep.truncated == 0 and 0.4 < rep.frac_b < 0.6
    again = coupling_checks(g, 1.0, 400, seed=3, workers=4)
    assert again.to_dict() == rep.to_dict()
    assert set(rep.to_dict()["clauses"]) == set(rep.clauses)


@pytest.mark.parametrize("kwargs", [dict(beta=1.0, n_samples=99), dict(beta=0.0, n_samples=200),
                                    dict(beta=-1.0, n_samples=200)])
def test_coupling_checks_reject_bad_input(kwargs):
    with pytest.raises(ValueError):
        coupling_checks(build_grid((2, 1)), seed=0, **kwargs)


def test_coupling_checks_detect_truncation():
    rep = coupling_checks(build_grid((2, 2)), 3.0, 100, seed=1, cap=50)
    assert rep.truncated == 200 and not rep.passed
