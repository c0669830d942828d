import math

import numpy as np
import pytest

from crep import (
    NoConvergence,
    OutOfDomain,
    SynchronousStateError,
    network_from_arrays,
    solve_synchronous_state,
    synchronous_output,
)

from conftest import random_connected_network, two_node_net

ARCSIN_HALF = math.asin(0.5)


def test_two_node_arcsin():
    state = solve_synchronous_state(two_node_net(p=1.0, cap=2.0))
    assert state.output_phase_diffs[0] == pytest.approx(ARCSIN_HALF, abs=1e-12)
    assert state.phase[0] == 0.0


def test_zero_injections_give_zero_state():
    net = network_from_arrays(
        [0.0, 0.0, 0.0], [1.0] * 3, [1.0] * 3, [0.1] * 3,
        [(1, 2, 1.0), (2, 3, 1.0)],
    )
    state = solve_synchronous_state(net)
    assert np.array_equal(state.phase, np.zeros(3))
    assert np.array_equal(state.output_phase_diffs, np.zeros(2))


def test_overload_has_no_admissible_state():
    with pytest.raises(SynchronousStateError):
        solve_synchronous_state(two_node_net(p=3.0, cap=2.0))


def test_marginal_overload_has_no_admissible_state():
    # any |P| > l, however slight, leaves the balance equations unsolvable
    with pytest.raises((OutOfDomain, NoConvergence)):
        solve_synchronous_state(two_node_net(p=2.0 + 1e-6, cap=2.0))


def test_three_node_path_flows():
    net = network_from_arrays(
        [1.0, 0.0, -1.0], [1.0] * 3, [1.0] * 3, [0.0] * 3,
        [(1, 2, 2.0), (2, 3, 2.0)],
    )
    state = solve_synchronous_state(net)
    assert np.allclose(state.output_phase_diffs, [ARCSIN_HALF, ARCSIN_HALF], atol=1e-12)


def test_residual_below_tolerance_on_random_networks():
    rng = np.random.default_rng(11)
    for _ in range(10):
        net = random_connected_network(rng)
        state = solve_synchronous_state(net, tol=1e-10)
        assert state.residual <= 1e-10
        assert state.phase[0] == 0.0
        gaps = np.abs(state.output_phase_diffs)
        if gaps.size:
            assert gaps.max() < math.pi / 2


def test_joint_scaling_of_power_and_capacity():
    rng = np.random.default_rng(12)
    net = random_connected_network(rng)
    state = solve_synchronous_state(net)
    for c in (0.5, 3.0):
        scaled = net.with_arrays(power=net.power * c, capacity=net.capacity * c)
        scaled_state = solve_synchronous_state(scaled)
        assert np.allclose(scaled_state.phase, state.phase, atol=1e-9)


def test_gauge_shift_leaves_phase_differences():
    net = two_node_net()
    state = solve_synchronous_state(net)
    shifted = state.phase + 0.7
    diffs = shifted[net.line_from] - shifted[net.line_to]
    assert np.allclose(diffs, state.output_phase_diffs, atol=1e-15)


def test_synchronous_output_layout():
    net = two_node_net()
    state = solve_synchronous_state(net)
    out = synchronous_output(state, net)
    assert out.shape == (3,)
    assert out[0] == pytest.approx(ARCSIN_HALF, abs=1e-12)
    assert np.array_equal(out[1:], np.zeros(2))


def test_synchronous_output_all_zero():
    net = network_from_arrays(
        [0.0, 0.0], [1.0] * 2, [1.0] * 2, [0.0] * 2, [(1, 2, 1.0)]
    )
    state = solve_synchronous_state(net)
    assert np.array_equal(synchronous_output(state, net), np.zeros(3))


def test_single_node_network():
    net = network_from_arrays([0.0], [1.0], [1.0], [0.5], [])
    state = solve_synchronous_state(net)
    assert state.phase.shape == (1,)
    assert state.residual == 0.0


def test_tol_must_be_positive():
    with pytest.raises(ValueError):
        solve_synchronous_state(two_node_net(), tol=0.0)
