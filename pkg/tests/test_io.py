import numpy as np
import pytest

from decfsc.controller import random_deterministic
from decfsc.domains import broadcast, recycling, tiger
from decfsc.evaluation import evaluate
from decfsc.io import (
    ParseError,
    export_nlp,
    parse_instance,
    parse_policy,
    write_instance,
    write_policy,
)
from _factories import random_model, random_policy


MINIMAL = """\
agents: 1
discount: 0.5
states: only
actions 1: act
observations 1: obs
start: 1
T: act : only : only : 1
O: act : only : obs : 1
R: act : only : 2.5
"""


# -- instance files ----------------------------------------------------------


def test_instance_round_trip_all_builtins():
    for builder in (broadcast, recycling, tiger):
        m = builder()
        back = parse_instance(write_instance(m))
        assert back.states == m.states
        assert back.actions == m.actions
        assert back.observations == m.observations
        assert np.max(np.abs(back.transition - m.transition)) <= 1e-12
        assert np.max(np.abs(back.observation_fn - m.observation_fn)) <= 1e-12
        assert np.max(np.abs(back.reward - m.reward)) <= 1e-12
        assert np.max(np.abs(back.start - m.start)) <= 1e-12
        assert back.discount == pytest.approx(m.discount, abs=1e-15)


def test_instance_round_trip_random_model():
    rng = np.random.default_rng(70)
    m = random_model(rng, num_states=4, action_counts=(2, 3),
                     obs_counts=(3, 2))
    back = parse_instance(write_instance(m))
    assert np.max(np.abs(back.transition - m.transition)) <= 1e-12
    assert np.max(np.abs(back.observation_fn - m.observation_fn)) <= 1e-12
    assert np.max(np.abs(back.reward - m.reward)) <= 1e-12


def test_minimal_degenerate_instance():
    m = parse_instance(MINIMAL)
    assert m.num_states == 1
    assert m.num_joint_actions == 1
    assert m.reward[0, 0] == 2.5
    assert m.discount == 0.5


def test_syntax_error_carries_position():
    bad = MINIMAL.replace("discount: 0.5", "discount: half")
    with pytest.raises(ParseError) as exc:
        parse_instance(bad)
    assert exc.value.line == 2
    assert exc.value.col > 1


def test_unknown_label_is_positioned():
    bad = MINIMAL.replace("T: act : only : only : 1",
                          "T: act : nowhere : only : 1")
    with pytest.raises(ParseError) as exc:
        parse_instance(bad)
    assert exc.value.line == 7
    assert "nowhere" in str(exc.value)


def test_duplicate_entry_rejected():
    bad = MINIMAL + "R: act : only : 2.5\n"
    with pytest.raises(ParseError) as exc:
        parse_instance(bad)
    assert exc.value.line == 10


def test_half_sum_row_rejected_without_normalize():
    bad = MINIMAL.replace("T: act : only : only : 1",
                          "T: act : only : only : 0.5")
    with pytest.raises(ParseError) as exc:
        parse_instance(bad)
    assert "transition" in str(exc.value).lower()


def test_normalize_flag_rescales_rows():
    text = MINIMAL.replace("agents: 1", "agents: 1\nnormalize: true")
    text = text.replace("T: act : only : only : 1",
                        "T: act : only : only : 0.5")
    m = parse_instance(text)
    assert m.transition[0, 0, 0] == pytest.approx(1.0, abs=1e-12)


def test_comments_and_whitespace_ignored():
    noisy = "# header comment\n" + MINIMAL.replace(
        "start: 1", "start:    1   # trailing note")
    m = parse_instance(noisy)
    assert m.start[0] == 1.0


# -- policy files ------------------------------------------------------------


def test_policy_round_trip_plain():
    rng = np.random.default_rng(71)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=3)
    back = parse_policy(write_policy(pol))
    assert back.device is None
    for a, b in zip(pol.controllers, back.controllers):
        assert np.max(np.abs(a.action_selection - b.action_selection)) <= 1e-12
        assert np.max(np.abs(a.node_transition - b.node_transition)) <= 1e-12
        assert a.initial_node == b.initial_node


def test_policy_round_trip_with_device():
    rng = np.random.default_rng(72)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=2, device_size=3)
    back = parse_policy(write_policy(pol))
    assert back.device is not None
    assert np.max(np.abs(back.device.transition
                         - pol.device.transition)) <= 1e-12
    assert back.device.initial_state == pol.device.initial_state
    for a, b in zip(pol.controllers, back.controllers):
        assert np.max(np.abs(a.action_selection - b.action_selection)) <= 1e-12
        assert np.max(np.abs(a.node_transition - b.node_transition)) <= 1e-12


def test_tampered_policy_row_is_positioned_error():
    rng = np.random.default_rng(73)
    m = random_model(rng)
    pol = random_deterministic(m, 2, seed=0)
    lines = write_policy(pol).splitlines()
    target = next(i for i, ln in enumerate(lines) if ln.startswith("psi"))
    head, _, _ = lines[target].partition(":")
    lines[target] = head + ": 0.9 0.9"
    with pytest.raises(ParseError) as exc:
        parse_policy("\n".join(lines) + "\n")
    assert exc.value.line == target + 1


# -- algebraic export --------------------------------------------------------


def _count_prefix(names, prefix):
    return sum(1 for v in names if v.startswith(prefix))


def test_export_tiger_one_node_variable_counts():
    exp = export_nlp(tiger(), 1)
    assert _count_prefix(exp.variable_names, "x_") == 9
    assert _count_prefix(exp.variable_names, "y_") == 36
    assert _count_prefix(exp.variable_names, "z_") == 2
    assert _count_prefix(exp.variable_names, "w_") == 0
    assert "# variables: x=9 y=36 z=2 w=0" in exp.text


def test_export_bellman_row_count():
    m = tiger()
    for nodes, dev in ((1, 1), (2, 1), (2, 2)):
        exp = export_nlp(m, nodes, device_size=dev)
        assert len(exp.bellman_rows) == (nodes ** 2) * m.num_states * dev


def test_export_device_adds_w_rows():
    exp = export_nlp(tiger(), 1, device_size=2)
    assert _count_prefix(exp.variable_names, "w_") == 4
    names = [row.name for row in exp.linear_rows]
    assert "prob_w_0" in names and "prob_w_1" in names
    assert "var w_0_0 >= 0;" in exp.text


def test_export_is_deterministic():
    a = export_nlp(recycling(), 2)
    b = export_nlp(recycling(), 2)
    assert a.text == b.text
    assert a.variable_names == b.variable_names


def test_export_rejects_bad_sizes():
    m = tiger()
    with pytest.raises(ValueError):
        export_nlp(m, 0)
    with pytest.raises(ValueError):
        export_nlp(m, (2, 2, 2))
    with pytest.raises(ValueError):
        export_nlp(m, 1, device_size=0)


def _assignment(model, policy):
    """Variable values induced by a concrete policy, keyed by export name."""
    x = policy.joint_action_tensor()
    y = policy.joint_transition_tensor()
    v = evaluate(model, policy).values
    w = policy.device_matrix()
    dev = policy.device_size > 1
    sfx = (lambda c: f"_{c}") if dev else (lambda c: "")
    vals = {}
    for c in range(policy.device_size):
        for q in range(policy.num_joint_nodes):
            for a in range(model.num_joint_actions):
                vals[f"x_{q}_{a}{sfx(c)}"] = x[c, q, a]
                for o in range(model.num_joint_observations):
                    for p in range(policy.num_joint_nodes):
                        vals[f"y_{q}_{a}_{o}_{p}{sfx(c)}"] = y[c, q, a, o, p]
            for s in range(model.num_states):
                vals[f"z_{q}_{s}{sfx(c)}"] = v[c, q, s]
    if dev:
        for c in range(policy.device_size):
            for d in range(policy.device_size):
                vals[f"w_{c}_{d}"] = w[c, d]
    return vals


def _check_rows_at_policy(model, policy, exp):
    vals = _assignment(model, policy)
    for row in exp.bellman_rows:
        rhs = sum(coef * vals[xv] for coef, xv in row.reward_terms)
        for coef, xv, yv, wv, zv in row.future_terms:
            prod = coef * vals[xv] * vals[yv] * vals[zv]
            if wv is not None:
                prod *= vals[wv]
            rhs += prod
        assert abs(vals[row.value_var] - rhs) <= 1e-8, row.name
    for row in exp.linear_rows:
        lhs = sum(coef * vals[v] for coef, v in row.terms)
        assert abs(lhs - row.rhs) <= 1e-8, row.name


def test_export_agrees_with_evaluation_plain():
    rng = np.random.default_rng(74)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=2)
    _check_rows_at_policy(m, pol, export_nlp(m, 2))


def test_export_agrees_with_evaluation_with_device():
    rng = np.random.default_rng(75)
    m = random_model(rng, num_states=2)
    pol = random_policy(rng, m, nodes=2, device_size=2)
    _check_rows_at_policy(m, pol, export_nlp(m, 2, device_size=2))


def test_export_objective_is_start_weighted_initial_values():
    m = tiger()
    exp = export_nlp(m, 2)
    assert sorted(exp.objective_terms) == sorted(
        [(0.5, "z_0_0"), (0.5, "z_0_1")])
