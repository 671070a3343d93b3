from __future__ import annotations

import numpy as np
import pytest

import rclt
from rclt.decomposition import _horizon_vectors

from .fixture_chains import (
    flip_chain,
    identity_fixture_pairs,
    iid_chain,
    observable,
    two_state,
)


def _fixed_trajectory(chain, f, states):
    states = np.asarray(states, dtype=np.int64)
    x = f.values[states]
    partial = np.concatenate(([0.0], np.cumsum(x[1:])))
    return rclt.Trajectory(states=states, observables=x, partial_sums=partial, seed=0)


def test_forward_difference_iid_is_observable() -> None:
    chain = iid_chain((0.3, 0.7))
    f = observable(chain, [1.0, -2.0])
    traj = rclt.sample_trajectory(chain, f, 30, seed=3)
    for n in (1, 2, 9):
        for k in (1, 7, 30):
            assert rclt.forward_difference(chain, f, traj, k, n) == pytest.approx(
                traj.observables[k], abs=1e-13
            )
            if k < 30:
                assert rclt.reversed_difference(chain, f, traj, k, n) == pytest.approx(
                    traj.observables[k], abs=1e-13
                )


def test_forward_difference_hand_value() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = _fixed_trajectory(chain, f, [0, 0])
    assert rclt.forward_difference(chain, f, traj, 1, 2) == pytest.approx(0.625, abs=1e-14)


def test_forward_difference_index_errors() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 10, seed=1)
    with pytest.raises(rclt.IndexOutOfRange):
        rclt.forward_difference(chain, f, traj, 0, 3)
    with pytest.raises(rclt.IndexOutOfRange):
        rclt.forward_difference(chain, f, traj, 11, 3)
    with pytest.raises(rclt.IndexOutOfRange):
        rclt.reversed_difference(chain, f, traj, 10, 3)


def test_martingale_certificates_finite_and_limit() -> None:
    for chain, f in identity_fixture_pairs():
        assert rclt.martingale_certificate(chain, f) <= 1e-12
        for n in (1, 2, 5, 40):
            assert rclt.martingale_certificate(chain, f, horizon=n) <= 1e-12


def test_boundary_term_hand_value() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = _fixed_trajectory(chain, f, [0, 1, 0, 1, 0])
    # state 0 at position 2, two remaining steps of a 4-step horizon
    assert rclt.boundary_term(chain, f, traj, 2, 4) == pytest.approx(0.1875, abs=1e-14)
    assert rclt.boundary_term(chain, f, traj, 4, 4) == 0.0


def test_boundary_term_iid_vanishes() -> None:
    chain = iid_chain()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 12, seed=4)
    for k in (0, 3, 12):
        assert rclt.boundary_term(chain, f, traj, k, 12) == pytest.approx(0.0, abs=1e-14)


def test_boundary_term_index_errors() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 5, seed=2)
    with pytest.raises(rclt.IndexOutOfRange):
        rclt.boundary_term(chain, f, traj, 4, 3)
    with pytest.raises(rclt.IndexOutOfRange):
        rclt.boundary_term(chain, f, traj, 0, 6)


def test_boundary_l2_norm_examples_and_decay() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    assert rclt.boundary_l2_norm(chain, f, 4, 2) == pytest.approx(0.03515625, abs=1e-15)

    iid = iid_chain()
    fi = observable(iid, [1, -1])
    assert rclt.boundary_l2_norm(iid, fi, 10, 3) == 0.0

    rho = rclt.spectral_measure(chain, f)
    bound_constant = 2.0 * rclt.finiteness_integral(rho)
    for n in (10, 100, 1000):
        assert rclt.boundary_l2_norm(chain, f, n, 0, rho=rho) <= bound_constant / n + 1e-15


def test_limit_difference_examples() -> None:
    iid = iid_chain((0.4, 0.6))
    fi = observable(iid, [1.0, -0.5])
    traj = rclt.sample_trajectory(iid, fi, 20, seed=8)
    for k in (1, 5, 20):
        assert rclt.limit_difference(iid, fi, traj, k) == pytest.approx(traj.observables[k], abs=1e-13)

    chain = two_state()
    f = observable(chain, [1, -1])
    traj2 = rclt.sample_trajectory(chain, f, 20, seed=8)
    for k in (1, 9):
        expected = 2.0 * traj2.observables[k] - traj2.observables[k - 1]
        assert rclt.limit_difference(chain, f, traj2, k) == pytest.approx(expected, abs=1e-12)


def test_limit_difference_variance_matches_sigma2() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    assert rclt.limit_difference_second_moment(chain, f) == pytest.approx(3.0, abs=1e-12)
    for chain, f in identity_fixture_pairs():
        sigma2 = rclt.asymptotic_variance_spectral(rclt.spectral_measure(chain, f))
        assert abs(rclt.limit_difference_second_moment(chain, f) - sigma2) <= 1e-9


def test_limit_increments_are_pairwise_orthogonal() -> None:
    # E(D_j D_k) = 0 for j < k, summed exactly over the joint law
    for chain, f in identity_fixture_pairs():
        if chain.n_states > 4:
            continue
        _, w = rclt.resolvent_pair(chain, f)
        value = f.values + w
        q = chain.kernel
        pi = chain.stationary
        power = np.eye(chain.n_states)
        for gap in range(1, 4):  # k - j - 1 = gap - 1
            mid = power  # Q^{gap-1}
            total = 0.0
            for a in range(chain.n_states):
                for b in range(chain.n_states):
                    d_ab = value[b] - w[a]
                    for c in range(chain.n_states):
                        for d in range(chain.n_states):
                            total += (
                                pi[a] * q[a, b] * mid[b, c] * q[c, d] * d_ab * (value[d] - w[c])
                            )
            assert abs(total) <= 1e-12, f"gap {gap}"
            power = power @ q


def test_l2_convergence_table_examples() -> None:
    iid = iid_chain()
    fi = observable(iid, [1, -1])
    np.testing.assert_allclose(rclt.l2_convergence_table(iid, fi, [1, 5, 50]), 0.0, atol=1e-13)

    chain = two_state()
    f = observable(chain, [1, -1])
    table = rclt.l2_convergence_table(chain, f, [10, 100, 1000])
    assert np.all(np.diff(table) < 0)
    constant = table[0] * 10  # fit C at n = 10, check C/n dominates later entries
    assert table[1] <= constant / 100 + 1e-12
    assert table[2] <= constant / 1000 + 1e-12

    single = rclt.l2_convergence_table(chain, f, [1])
    assert single[0] >= 0.0

    with pytest.raises(ValueError):
        rclt.l2_convergence_table(chain, f, [10, 5])


def test_l2_convergence_decays_to_zero_on_fixtures() -> None:
    for chain, f in identity_fixture_pairs():
        table = rclt.l2_convergence_table(chain, f, [10, 100, 1000])
        assert np.all(np.diff(table) <= 1e-15)
        assert table[-1] <= 1e-3 * max(1.0, table[0])


def test_decompose_iid_pins_index_convention() -> None:
    chain = iid_chain()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 200, seed=21)
    terms = rclt.decompose_trajectory(chain, f, traj)
    assert terms.max_pair_residual <= 1e-12
    assert terms.max_decomposition_residual <= 1e-12
    # iid: forward martingale is the plain partial sum
    np.testing.assert_allclose(terms.forward_martingale, traj.partial_sums, atol=1e-12)


def test_decompose_flip_chain_degenerates() -> None:
    chain = flip_chain()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 60, seed=5)
    terms = rclt.decompose_trajectory(chain, f, traj)
    np.testing.assert_allclose(terms.forward_martingale, 0.0, atol=1e-13)
    np.testing.assert_allclose(terms.reversed_martingale, 0.0, atol=1e-13)
    np.testing.assert_allclose(
        2.0 * traj.partial_sums, traj.observables - traj.observables[0], atol=1e-13
    )


def test_decompose_short_two_state_trajectory() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 3, seed=77)
    terms = rclt.decompose_trajectory(chain, f, traj, horizon=2)
    assert terms.max_pair_residual <= 1e-12
    assert terms.max_decomposition_residual <= 1e-12
    assert terms.horizon == 2


def test_decompose_rejects_tiny_trajectories() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 1, seed=1)
    with pytest.raises(ValueError):
        rclt.decompose_trajectory(chain, f, traj)


def test_finite_horizon_terms_converge_to_limit_terms() -> None:
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 40, seed=6)
    limit = np.array([rclt.limit_difference(chain, f, traj, k) for k in range(1, 41)])
    gaps = []
    for n in (2, 16, 128):
        finite = np.array([rclt.forward_difference(chain, f, traj, k, n) for k in range(1, 41)])
        gaps.append(np.max(np.abs(finite - limit)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 0.1


def test_cesaro_prediction_definition() -> None:
    # theta_k = S_k + (phi - f)(state_k), and fwd_k = theta_k - E_{k-1} theta_k
    chain = two_state()
    f = observable(chain, [1, -1])
    traj = rclt.sample_trajectory(chain, f, 25, seed=13)
    horizon = 7
    terms = rclt.decompose_trajectory(chain, f, traj, horizon=horizon)
    phi, pred, _ = _horizon_vectors(chain, f, horizon)
    s = traj.states
    for k in range(1, 26):
        theta_k = terms.cesaro_prediction[k]
        # E_{k-1}(theta_k): previous partial sum, the predicted step, and the
        # averaged predicted corrections one step out
        predicted = traj.partial_sums[k - 1] + pred[s[k - 1]]
        assert theta_k - predicted == pytest.approx(terms.forward_finite[k], abs=1e-12)
