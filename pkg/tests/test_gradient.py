"""Exact policy gradient checked against central finite differences.

The perturbed tables leave the probability simplex, which is fine: the
evaluation linear system is defined for any table entries, so the partial
derivatives are plain partials of the unconstrained objective.
"""

import numpy as np

from decfsc.controller import CorrelationDevice, Fsc, JointPolicy
from decfsc.evaluation import evaluate, gradient, objective, value_and_gradient
from _factories import random_model, random_policy
from _oracles import finite_difference_gradient

FD_STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-8


def _tables(policy):
    out = [f.action_selection for f in policy.controllers]
    out += [f.node_transition for f in policy.controllers]
    if policy.device is not None:
        out.append(policy.device.transition)
    return out


def _rebuild(policy, tables):
    n = policy.num_agents
    ctrls = [Fsc(tables[i], tables[n + i],
                 initial_node=policy.controllers[i].initial_node)
             for i in range(n)]
    dev = None
    if policy.device is not None:
        dev = CorrelationDevice(tables[2 * n],
                                initial_state=policy.device.initial_state)
    return JointPolicy(ctrls, device=dev)


def _objective_of(model, policy):
    def fun(tables):
        pol = _rebuild(policy, tables)
        return objective(model, pol, evaluate(model, pol, method="direct"))
    return fun


def _check(model, policy):
    val, table, grad = value_and_gradient(model, policy)
    assert val == objective(model, policy, table)
    want = finite_difference_gradient(
        _objective_of(model, policy), _tables(policy), h=FD_STEP)
    got = grad.arrays()
    assert len(got) == len(want)
    for g, w in zip(got, want):
        err = np.abs(g - w)
        ok = err <= np.maximum(ABS_FLOOR, REL_TOL * np.abs(w))
        assert np.all(ok), f"max abs err {err.max():.3e}"


def test_gradient_matches_finite_differences_plain():
    rng = np.random.default_rng(30)
    for _ in range(4):
        m = random_model(rng, num_states=int(rng.integers(2, 4)))
        pol = random_policy(rng, m, nodes=int(rng.integers(1, 3)))
        _check(m, pol)


def test_gradient_matches_finite_differences_with_device():
    rng = np.random.default_rng(31)
    m = random_model(rng, num_states=2)
    pol = random_policy(rng, m, nodes=2, device_size=2)
    _check(m, pol)


def test_gradient_shapes_mirror_policy():
    rng = np.random.default_rng(32)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=2, device_size=2)
    grad = gradient(m, pol)
    for g, f in zip(grad.action_selection, pol.controllers):
        assert g.shape == f.action_selection.shape
    for g, f in zip(grad.node_transition, pol.controllers):
        assert g.shape == f.node_transition.shape
    assert grad.device is not None
    assert grad.device.shape == pol.device.transition.shape
    plain = random_policy(rng, m, nodes=2)
    assert gradient(m, plain).device is None


def test_gradient_norm_is_euclidean():
    rng = np.random.default_rng(33)
    m = random_model(rng)
    pol = random_policy(rng, m, nodes=2)
    grad = gradient(m, pol)
    want = np.sqrt(sum(float(np.sum(a * a)) for a in grad.arrays()))
    assert abs(grad.norm() - want) <= 1e-12
