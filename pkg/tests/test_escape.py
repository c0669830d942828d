import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

import crep
from crep import (
    crep as crep_metric,
    escape_prob_freq,
    escape_prob_line,
    network_from_arrays,
    smib_analytic,
    smib_network,
)

from conftest import random_connected_network

HALF_PI = math.pi / 2

# frozen from the standard normal CDF: P(|Z| > 1) and P(|Z| > 2)
P_BEYOND_1 = 0.31731050786291415
P_BEYOND_2 = 0.04550026389635842


def test_escape_prob_line_centered_one_sigma():
    value = escape_prob_line(0.0, HALF_PI)
    assert value == pytest.approx(P_BEYOND_1, abs=1e-15)
    # independent oracle: normal CDF difference
    oracle = 1.0 - (norm.cdf(1.0) - norm.cdf(-1.0))
    assert value == pytest.approx(oracle, abs=1e-14)


def test_escape_prob_line_zero_sigma():
    assert escape_prob_line(0.0, 0.0) == 0.0
    assert escape_prob_line(1.2, 0.0) == 0.0


def test_escape_prob_line_large_sigma_saturates():
    assert escape_prob_line(0.0, 1e3) > 0.99


def test_escape_prob_line_shifted_mean_oracle():
    mean, sigma = 0.8, 0.4
    oracle = 1.0 - (norm.cdf((HALF_PI - mean) / sigma) - norm.cdf((-HALF_PI - mean) / sigma))
    assert escape_prob_line(mean, sigma) == pytest.approx(oracle, rel=1e-12)


def test_escape_prob_line_domain_error():
    with pytest.raises(ValueError):
        escape_prob_line(HALF_PI, 1.0)
    with pytest.raises(ValueError):
        escape_prob_line(-2.0, 1.0)
    with pytest.raises(ValueError):
        escape_prob_line(0.0, -1.0)


def test_escape_prob_freq_oracle_values():
    assert escape_prob_freq(0.01, 0.02) == pytest.approx(P_BEYOND_2, abs=1e-15)
    assert escape_prob_freq(0.5, 0.5) == pytest.approx(P_BEYOND_1, abs=1e-15)
    assert escape_prob_freq(0.0, 0.02) == 0.0


def test_escape_prob_freq_domain_error():
    with pytest.raises(ValueError):
        escape_prob_freq(0.1, 0.0)
    with pytest.raises(ValueError):
        escape_prob_freq(-0.1, 0.1)


@given(
    sigma=st.floats(1e-3, 10.0),
    bump=st.floats(1e-6, 1.0),
    mean=st.floats(-1.5, 1.5),
)
@settings(max_examples=60, deadline=None)
def test_escape_prob_line_monotone_in_sigma(sigma, bump, mean):
    low = escape_prob_line(mean, sigma)
    high = escape_prob_line(mean, sigma + bump)
    assert high >= low
    if low > 0.0 and high < 1.0:  # strict except at the underflow/saturation ends
        assert high > low


@given(
    mean=st.floats(0.0, 1.5),
    bump=st.floats(1e-6, 0.05),
    sigma=st.floats(0.05, 5.0),
)
@settings(max_examples=60, deadline=None)
def test_escape_prob_line_monotone_in_absolute_mean(mean, bump, sigma):
    if mean + bump >= HALF_PI:
        bump = HALF_PI - mean - 1e-9
    if bump <= 0:
        return
    low = escape_prob_line(mean, sigma)
    high = escape_prob_line(mean + bump, sigma)
    assert high >= low
    assert escape_prob_line(-mean, sigma) == pytest.approx(low, rel=1e-12)


@given(
    sigma=st.floats(1e-3, 5.0),
    bump=st.floats(1e-6, 1.0),
    eps=st.floats(1e-3, 1.0),
)
@settings(max_examples=60, deadline=None)
def test_escape_prob_freq_monotone(sigma, bump, eps):
    base = escape_prob_freq(sigma, eps)
    wider = escape_prob_freq(sigma + bump, eps)
    tighter = escape_prob_freq(sigma, eps + bump)
    assert wider >= base >= tighter
    if base > 0.0 and wider < 1.0:
        assert wider > base
    if tighter > 0.0:
        assert tighter < base


def test_crep_zero_noise_gives_zero_metric():
    net = network_from_arrays(
        [0.5, -0.5], [1.0] * 2, [1.0] * 2, [0.0] * 2, [(1, 2, 2.0)]
    )
    report = crep_metric(net)
    assert report.phi == 0.0
    assert report.phi_delta == 0.0
    assert report.phi_omega == 0.0


def test_crep_matches_smib_composition():
    M, D, K, P, b = 2.0, 3.0, 5.0, 3.0, 1.0
    closed = smib_analytic(M, D, K, P, b)
    report = crep_metric(smib_network(M, D, K, P, b), eps=0.5)
    expected_f_delta = escape_prob_line(math.asin(P / K), math.sqrt(closed.sigma2_delta))
    expected_f_omega = escape_prob_freq(math.sqrt(closed.sigma2_omega), 0.5)
    assert report.f_delta[0] == pytest.approx(expected_f_delta, rel=1e-6)
    assert report.f_omega[0] == pytest.approx(expected_f_omega, rel=1e-8)
    assert closed.f_delta == pytest.approx(expected_f_delta, rel=1e-15)


def test_crep_noise_swap_symmetry():
    lines = [(1, 2, 2.0)]
    a = network_from_arrays([0.4, -0.4], [1.0] * 2, [1.0] * 2, [0.3, 0.1], lines)
    b = network_from_arrays([0.4, -0.4], [1.0] * 2, [1.0] * 2, [0.1, 0.3], lines)
    assert crep_metric(a).phi == pytest.approx(crep_metric(b).phi, rel=1e-12)


def test_crep_argmax_tie_breaks_to_lowest_index():
    report = crep.crep_from_moments(
        np.array([0.3, 0.3]), np.array([0.01, 0.01]), np.array([0.004, 0.001]), 0.02
    )
    assert report.f_delta[0] == report.f_delta[1]
    assert report.argmax_line == 1
    assert report.argmax_node == 1


def test_crep_symmetric_star_has_symmetric_escape():
    net = network_from_arrays(
        [-0.4, 0.2, 0.2], [1.0] * 3, [1.0] * 3, [0.2, 0.2, 0.2],
        [(1, 2, 1.0), (1, 3, 1.0)],
    )
    report = crep_metric(net)
    assert report.f_delta[0] == pytest.approx(report.f_delta[1], rel=1e-10)


def test_crep_entries_within_unit_interval():
    rng = np.random.default_rng(21)
    for _ in range(10):
        net = random_connected_network(rng)
        report = crep_metric(net)
        assert np.all(report.f_delta >= 0.0) and np.all(report.f_delta <= 1.0)
        assert np.all(report.f_omega >= 0.0) and np.all(report.f_omega <= 1.0)
        assert 0.0 <= report.phi <= 1.0
        assert report.phi == max(report.phi_delta, report.phi_omega)
        assert report.phi_delta == report.f_delta[report.argmax_line - 1]
        assert report.phi_omega == report.f_omega[report.argmax_node - 1]


def test_crep_single_node_network():
    net = network_from_arrays([0.0], [1.0], [0.5], [0.3], [])
    report = crep_metric(net, eps=0.2)
    assert report.f_delta.size == 0
    assert report.argmax_line is None
    assert report.phi_delta == 0.0
    # single machine: frequency variance is noise^2 / (2 m d)
    expected = escape_prob_freq(math.sqrt(0.3**2 / (2 * 0.5)), 0.2)
    assert report.phi_omega == pytest.approx(expected, rel=1e-9)
    assert report.phi == report.phi_omega


def test_crep_propagates_state_errors():
    overloaded = network_from_arrays(
        [3.0, -3.0], [1.0] * 2, [1.0] * 2, [0.1] * 2, [(1, 2, 2.0)]
    )
    with pytest.raises(crep.SynchronousStateError):
        crep_metric(overloaded)


def test_smib_analytic_values():
    closed = smib_analytic(2.0, 3.0, 5.0, 3.0, 1.0)
    assert closed.sigma2_delta == pytest.approx(1.0 / 24.0, rel=1e-15)
    assert closed.sigma2_omega == pytest.approx(1.0 / 12.0, rel=1e-15)


def test_smib_analytic_no_load_case():
    b, D, K = 0.7, 1.3, 2.0
    closed = smib_analytic(1.0, D, K, 0.0, b)
    assert closed.sigma2_delta == pytest.approx(b**2 / (2 * D * K), rel=1e-15)
    assert closed.f_delta == pytest.approx(
        escape_prob_line(0.0, math.sqrt(b**2 / (2 * D * K))), rel=1e-15
    )


def test_smib_analytic_saturates_near_capacity():
    # D*K small enough that the gap variance blows past the interval width
    closed = smib_analytic(2.0, 0.2, 0.2, 0.9999 * 0.2, 1.0)
    assert closed.f_delta > 0.9


def test_smib_analytic_domain_errors():
    with pytest.raises(ValueError):
        smib_analytic(1.0, 1.0, 1.0, 1.0, 1.0)  # P == K
    with pytest.raises(ValueError):
        smib_analytic(1.0, 1.0, 1.0, -0.1, 1.0)
    with pytest.raises(ValueError):
        smib_analytic(0.0, 1.0, 1.0, 0.5, 1.0)


def test_smib_f_delta_monotone_toward_capacity():
    # shrinking capacity toward the load drives the escape probability to one
    caps = np.linspace(2.0, 1.0 + 1e-4, 50)
    values = [smib_analytic(1.0, 0.1, float(k), 1.0, 1.0).f_delta for k in caps]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] > 0.9


def test_smib_f_delta_independent_of_inertia():
    values = {smib_analytic(m, 1.1, 2.0, 1.0, 0.4).f_delta for m in (0.5, 1.0, 7.0)}
    assert len(values) == 1


def test_pipeline_matches_analytic_oracle_across_parameters():
    rng = np.random.default_rng(22)
    for _ in range(5):
        K = rng.uniform(0.5, 4.0)
        P = rng.uniform(0.0, 0.9 * K)
        M = rng.uniform(0.5, 3.0)
        D = rng.uniform(0.4, 2.0)
        b = rng.uniform(0.2, 1.5)
        closed = smib_analytic(M, D, K, P, b)
        net = smib_network(M, D, K, P, b)
        state = crep.solve_synchronous_state(net)
        var = crep.solve_lyapunov(
            crep.spectral_reduce(crep.build_linearization(net, state), net)
        )
        assert var.sigma2_delta[0] == pytest.approx(closed.sigma2_delta, rel=1e-8)
        assert var.sigma2_omega[0] == pytest.approx(closed.sigma2_omega, rel=1e-8)


def test_smib_oracle_against_literal_one_dof_solve():
    # literal 2x2 Lyapunov solve of the single-machine linear SDE
    import scipy.linalg

    M, D, K, P, b = 1.7, 0.9, 3.0, 1.2, 0.8
    stiffness = math.sqrt(K**2 - P**2)
    a = np.array([[0.0, 1.0], [-stiffness / M, -D / M]])
    g = np.array([[0.0], [b / M]])
    q = scipy.linalg.solve_continuous_lyapunov(a, -g @ g.T)
    closed = smib_analytic(M, D, K, P, b)
    assert q[0, 0] == pytest.approx(closed.sigma2_delta, rel=1e-12)
    assert q[1, 1] == pytest.approx(closed.sigma2_omega, rel=1e-12)
