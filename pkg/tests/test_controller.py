import itertools

import numpy as np
import pytest

from decfsc.controller import (
    CorrelationDevice,
    Fsc,
    JointPolicy,
    attach_trivial_device,
    dims_match,
    random_deterministic,
    simplex_report,
    uncorrelate,
    uniform_device,
)
from _factories import random_model, random_policy


def test_fsc_shape_checks():
    psi = np.full((1, 2, 3), 1 / 3)
    eta = np.full((1, 2, 3, 2, 2), 0.5)
    f = Fsc(psi, eta)
    assert (f.num_nodes, f.num_actions, f.num_observations) == (2, 3, 2)
    assert f.device_states == 1
    with pytest.raises(ValueError):
        Fsc(psi, np.full((1, 3, 3, 2, 3), 1 / 3))
    with pytest.raises(ValueError):
        Fsc(psi, eta, initial_node=2)


def test_device_square_and_uniform():
    d = uniform_device(3)
    assert d.num_states == 3
    assert np.allclose(d.transition, 1 / 3)
    with pytest.raises(ValueError):
        CorrelationDevice(np.ones((2, 3)))


def test_joint_policy_basics():
    rng = np.random.default_rng(0)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=2, device_size=2)
    assert pol.num_agents == 2
    assert pol.node_dims == (2, 2)
    assert pol.num_joint_nodes == 4
    assert pol.device_size == 2
    assert pol.initial_joint_node == 0
    assert pol.device_matrix().shape == (2, 2)
    plain = random_policy(rng, m, nodes=2)
    assert plain.device is None
    assert plain.device_matrix().shape == (1, 1)
    assert plain.device_size == 1


def test_joint_tensors_match_explicit_products():
    rng = np.random.default_rng(1)
    m = random_model(rng, num_states=2, action_counts=(2, 3),
                     obs_counts=(2, 2))
    pol = random_policy(rng, m, nodes=2, device_size=2)
    x = pol.joint_action_tensor()
    # x[c, qj, aj] must equal the product of the agents' rows
    for c in range(2):
        for qv in itertools.product(range(2), range(2)):
            qj = int(np.ravel_multi_index(qv, (2, 2)))
            for av in itertools.product(range(2), range(3)):
                aj = int(np.ravel_multi_index(av, (2, 3)))
                want = (pol.controllers[0].action_selection[c, qv[0], av[0]]
                        * pol.controllers[1].action_selection[c, qv[1], av[1]])
                assert x[c, qj, aj] == pytest.approx(want, abs=1e-15)
    y = pol.joint_transition_tensor()
    for c in range(2):
        for qv in itertools.product(range(2), range(2)):
            qj = int(np.ravel_multi_index(qv, (2, 2)))
            for av in itertools.product(range(2), range(3)):
                aj = int(np.ravel_multi_index(av, (2, 3)))
                for ov in itertools.product(range(2), range(2)):
                    oj = int(np.ravel_multi_index(ov, (2, 2)))
                    for qv2 in itertools.product(range(2), range(2)):
                        qj2 = int(np.ravel_multi_index(qv2, (2, 2)))
                        want = 1.0
                        for i in range(2):
                            want *= pol.controllers[i].node_transition[
                                c, qv[i], av[i], ov[i], qv2[i]]
                        assert y[c, qj, aj, oj, qj2] == pytest.approx(
                            want, abs=1e-15)


def test_leave_one_out_products():
    rng = np.random.default_rng(2)
    m = random_model(rng, num_states=2, action_counts=(2, 2),
                     obs_counts=(2, 2))
    pol = random_policy(rng, m, nodes=2)
    full = pol.joint_action_tensor()
    for agent in range(2):
        loo = pol.leave_one_out_action(agent)
        own = pol.controllers[agent].action_selection
        # multiplying the agent's own factor back in restores the product
        for qv in itertools.product(range(2), range(2)):
            qj = int(np.ravel_multi_index(qv, (2, 2)))
            for av in itertools.product(range(2), range(2)):
                aj = int(np.ravel_multi_index(av, (2, 2)))
                want = own[0, qv[agent], av[agent]] * loo[0, qj, aj]
                assert full[0, qj, aj] == pytest.approx(want, abs=1e-14)


def test_random_deterministic_properties():
    rng = np.random.default_rng(3)
    m = random_model(rng)
    pol = random_deterministic(m, nodes_per_agent=3, device_size=2, seed=7)
    for f in pol.controllers:
        assert np.all(np.isin(f.action_selection, (0.0, 1.0)))
        assert np.allclose(f.action_selection.sum(axis=-1), 1.0)
        assert np.all(np.isin(f.node_transition, (0.0, 1.0)))
        assert np.allclose(f.node_transition.sum(axis=-1), 1.0)
    assert pol.device is not None and pol.device.num_states == 2
    again = random_deterministic(m, nodes_per_agent=3, device_size=2, seed=7)
    for a, b in zip(pol.controllers, again.controllers):
        assert np.array_equal(a.action_selection, b.action_selection)
        assert np.array_equal(a.node_transition, b.node_transition)
    other = random_deterministic(m, nodes_per_agent=3, device_size=2, seed=8)
    assert any(
        not np.array_equal(a.action_selection, b.action_selection)
        or not np.array_equal(a.node_transition, b.node_transition)
        for a, b in zip(pol.controllers, other.controllers))


def test_uncorrelate_and_attach():
    rng = np.random.default_rng(4)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=2)
    wrapped = attach_trivial_device(pol)
    assert wrapped.device is not None and wrapped.device.num_states == 1
    back = uncorrelate(wrapped)
    assert back.device is None
    two = random_policy(rng, m, nodes=2, device_size=2)
    with pytest.raises(ValueError):
        uncorrelate(two)


def test_simplex_report_flags_bad_rows():
    rng = np.random.default_rng(5)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=2)
    assert simplex_report(pol) == []
    bad = pol.copy()
    bad.controllers[0].action_selection[0, 0, :] = 0.9
    assert simplex_report(bad) != []


def test_dims_match_raises_on_mismatch():
    rng = np.random.default_rng(6)
    m = random_model(rng, action_counts=(2, 2), obs_counts=(2, 2))
    other = random_model(rng, action_counts=(3, 2), obs_counts=(2, 2))
    pol = random_policy(rng, m, nodes=2)
    dims_match(m, pol)
    with pytest.raises(ValueError):
        dims_match(other, pol)
