import numpy as np
import pytest

from decfsc.controller import Fsc, JointPolicy
from decfsc.domains import (
    BroadcastParams,
    RecyclingParams,
    TigerParams,
    broadcast,
    build,
    recycling,
    tiger,
)
from decfsc.evaluation import evaluate, objective
from decfsc.model import flatten_joint, validate
from _factories import random_policy


def _aj(model, labels):
    idx = tuple(model.actions[i].index(lab)
                for i, lab in enumerate(labels))
    return flatten_joint(idx, model.action_dims)


# -- broadcast ---------------------------------------------------------------


def test_broadcast_shape_and_validation():
    m = broadcast()
    assert m.num_states == 4
    assert m.num_joint_actions == 4
    assert m.num_joint_observations == 25
    assert m.action_dims == (2, 2)
    assert m.observation_dims == (5, 5)
    assert validate(m) == []
    assert m.discount == 0.9
    # starts with node 1 loaded and node 2 empty
    assert m.start[m.states.index("10")] == 1.0


def test_broadcast_rewards_by_hand():
    m = broadcast()
    s = m.states.index
    both = _aj(m, ["send", "send"])
    only1 = _aj(m, ["send", "wait"])
    only2 = _aj(m, ["wait", "send"])
    neither = _aj(m, ["wait", "wait"])
    assert m.reward[s("11"), both] == 0.0          # collision
    assert m.reward[s("10"), only1] == 1.0
    assert m.reward[s("01"), only2] == 1.0
    assert m.reward[s("10"), only2] == 0.0         # empty buffer sent
    assert np.all(m.reward[s("00"), :] == 0.0)
    assert m.reward[s("11"), neither] == 0.0


def test_broadcast_transitions_by_hand():
    m = broadcast()
    s = m.states.index
    neither = _aj(m, ["wait", "wait"])
    # from empty buffers the refill rates act independently
    row = m.transition[s("00"), neither]
    assert row[s("10")] == pytest.approx(0.9 * 0.9)
    assert row[s("11")] == pytest.approx(0.9 * 0.1)
    assert row[s("00")] == pytest.approx(0.1 * 0.9)
    assert row[s("01")] == pytest.approx(0.1 * 0.1)
    # a full buffer that is not drained stays full
    row = m.transition[s("11"), neither]
    assert row[s("11")] == pytest.approx(1.0)
    # a successful send vacates and refills at the arrival rate
    only1 = _aj(m, ["send", "wait"])
    row = m.transition[s("10"), only1]
    assert row[s("10")] == pytest.approx(0.9 * 0.9)
    assert row[s("00")] == pytest.approx(0.1 * 0.9)


def test_broadcast_null_observation_never_emitted():
    m = broadcast()
    cube = m.observation_fn.reshape(4, 4, 5, 5)
    assert np.all(cube[:, :, 4, :] == 0.0)
    assert np.all(cube[:, :, :, 4] == 0.0)
    # every row is a point mass
    assert np.all(m.observation_fn.max(axis=-1) == 1.0)


def test_broadcast_no_arrivals_caps_value_at_initial_message():
    # with refill rates zero the only deliverable packet is the one the
    # start state places in node 1's buffer, worth at most 1
    m = broadcast(BroadcastParams(arrival_probs=(0.0, 0.0)))
    rng = np.random.default_rng(60)
    for _ in range(5):
        pol = random_policy(rng, m, nodes=2)
        val = objective(m, pol, evaluate(m, pol))
        assert -1e-9 <= val <= 1.0 + 1e-9
    sender = _deterministic_pair(m, "send", "wait")
    assert objective(m, sender, evaluate(m, sender)) == pytest.approx(
        1.0, abs=1e-12)
    idle = _deterministic_pair(m, "wait", "wait")
    assert abs(objective(m, idle, evaluate(m, idle))) <= 1e-12


def _deterministic_pair(model, a0, a1):
    ctrls = []
    for i, act in enumerate((a0, a1)):
        na = len(model.actions[i])
        no = len(model.observations[i])
        psi = np.zeros((1, 1, na))
        psi[0, 0, model.actions[i].index(act)] = 1.0
        eta = np.ones((1, 1, na, no, 1))
        ctrls.append(Fsc(psi, eta))
    return JointPolicy(ctrls)


def test_broadcast_greedy_sender_value_is_exactly_9_1():
    # node 1 always sends, node 2 always waits: reward 1 now, then the
    # buffer refills at 0.9, so V = 1 + sum_t 0.9^t * 0.9 = 9.1 exactly
    m = broadcast()
    pol = _deterministic_pair(m, "send", "wait")
    assert objective(m, pol, evaluate(m, pol)) == pytest.approx(9.1,
                                                                abs=1e-9)


# -- recycling ---------------------------------------------------------------


def test_recycling_shape_and_validation():
    m = recycling()
    assert m.num_states == 4
    assert m.num_joint_actions == 9
    assert m.num_joint_observations == 4
    assert m.action_dims == (3, 3)
    assert m.observation_dims == (2, 2)
    assert validate(m) == []
    assert m.start[m.states.index("hh")] == 1.0


def test_recycling_rewards_by_hand():
    m = recycling()
    s = m.states.index
    assert m.reward[s("hh"), _aj(m, ["large", "large"])] == 5.0
    assert m.reward[s("hh"), _aj(m, ["small", "small"])] == 4.0
    assert m.reward[s("hh"), _aj(m, ["small", "large"])] == 2.0
    assert m.reward[s("hh"), _aj(m, ["recharge", "recharge"])] == 0.0
    # low battery searching risks a depletion penalty in expectation
    assert m.reward[s("ll"), _aj(m, ["small", "small"])] == pytest.approx(
        2 * (2.0 - 3.0 * 0.3))
    assert m.reward[s("ll"), _aj(m, ["large", "large"])] == pytest.approx(
        5.0 - 2 * 3.0 * 0.6)


def test_recycling_transitions_by_hand():
    m = recycling()
    s = m.states.index
    both_large = _aj(m, ["large", "large"])
    row = m.transition[s("hh"), both_large]
    assert row[s("hh")] == pytest.approx(0.25)     # each stays high w.p. 0.5
    assert row[s("ll")] == pytest.approx(0.25)
    # depletion sends a low robot back to high
    row = m.transition[s("ll"), both_large]
    assert row[s("hh")] == pytest.approx(0.6 * 0.6)
    # recharge is deterministic
    both_charge = _aj(m, ["recharge", "recharge"])
    assert m.transition[s("ll"), both_charge][s("hh")] == 1.0


def test_recycling_agents_observe_own_battery_exactly():
    m = recycling()
    cube = m.observation_fn.reshape(9, 4, 2, 2)
    for aj in range(9):
        for ti, lab in enumerate(m.states):
            want = (0 if lab[0] == "h" else 1, 0 if lab[1] == "h" else 1)
            assert cube[aj, ti, want[0], want[1]] == 1.0


def test_recycling_one_step_large_can_value():
    m = recycling(RecyclingParams(discount=0.0))
    pol = _deterministic_pair(m, "large", "large")
    assert objective(m, pol, evaluate(m, pol)) == pytest.approx(5.0,
                                                                abs=1e-12)


# -- tiger -------------------------------------------------------------------


def test_tiger_shape_and_validation():
    m = tiger()
    assert m.num_states == 2
    assert m.num_joint_actions == 9
    assert m.num_joint_observations == 4
    assert m.action_dims == (3, 3)
    assert m.observation_dims == (2, 2)
    assert validate(m) == []
    assert np.allclose(m.start, 0.5)


def test_tiger_listen_keeps_state_opening_resets():
    m = tiger()
    both_listen = _aj(m, ["listen", "listen"])
    assert np.allclose(m.transition[:, both_listen, :], np.eye(2))
    for labels in (["open_left", "listen"], ["open_left", "open_right"],
                   ["listen", "open_right"], ["open_right", "open_right"]):
        aj = _aj(m, labels)
        assert np.allclose(m.transition[:, aj, :], 0.5)


def test_tiger_rewards_by_hand():
    m = tiger()
    left = m.states.index("tiger_left")
    assert m.reward[left, _aj(m, ["listen", "listen"])] == -2.0
    assert m.reward[left, _aj(m, ["open_right", "open_right"])] == 20.0
    assert m.reward[left, _aj(m, ["open_left", "open_left"])] == -50.0
    assert m.reward[left, _aj(m, ["open_left", "open_right"])] == -100.0
    assert m.reward[left, _aj(m, ["listen", "open_right"])] == 9.0
    assert m.reward[left, _aj(m, ["listen", "open_left"])] == -101.0


def test_tiger_hearing_only_informative_when_both_listen():
    m = tiger()
    cube = m.observation_fn.reshape(9, 2, 2, 2)
    both_listen = _aj(m, ["listen", "listen"])
    left = m.states.index("tiger_left")
    hear_left = 0
    assert cube[both_listen, left, hear_left, hear_left] == pytest.approx(
        0.85 * 0.85)
    assert cube[both_listen, left, 1, 1] == pytest.approx(0.15 * 0.15)
    one_open = _aj(m, ["open_left", "listen"])
    assert np.allclose(cube[one_open], 0.25)


def test_tiger_param_validation():
    with pytest.raises(ValueError):
        TigerParams(listen_accuracy=1.5)
    with pytest.raises(ValueError):
        BroadcastParams(arrival_probs=(0.9, -0.1))
    with pytest.raises(ValueError):
        RecyclingParams(discount=1.0)


# -- registry ----------------------------------------------------------------


def test_build_registry():
    for name in ("broadcast", "recycling", "tiger"):
        m = build(name)
        assert m.name == name
        assert validate(m) == []
    with pytest.raises(KeyError, match="broadcast"):
        build("gridworld")


def test_builders_are_pure():
    a, b = tiger(), tiger()
    assert np.array_equal(a.transition, b.transition)
    assert np.array_equal(a.observation_fn, b.observation_fn)
    assert np.array_equal(a.reward, b.reward)
    assert np.array_equal(a.start, b.start)
