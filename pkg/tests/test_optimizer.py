import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decfsc.controller import Fsc, JointPolicy, simplex_report
from decfsc.decbpi import BpiConfig, solve_bpi
from decfsc.domains import build
from decfsc.evaluation import evaluate, objective
from decfsc.model import DecPomdp
from decfsc.optimizer import (
    NlpConfig,
    project_simplex,
    solve_nlp,
    solve_restarts,
)
from _factories import random_model
from _oracles import qp_simplex_projection


# -- simplex projection ----------------------------------------------------


def test_project_simplex_known_points():
    assert np.allclose(project_simplex(np.array([0.5, 0.8])), [0.35, 0.65],
                       atol=1e-12)
    assert np.allclose(project_simplex(np.array([-1.0, -1.0])), [0.5, 0.5],
                       atol=1e-12)
    on = np.array([0.2, 0.3, 0.5])
    assert np.allclose(project_simplex(on), on, atol=1e-12)
    with pytest.raises(ValueError):
        project_simplex(np.array([]))


def test_project_simplex_matches_qp_oracle():
    rng = np.random.default_rng(40)
    for _ in range(60):
        dim = int(rng.integers(1, 7))
        v = rng.uniform(-3.0, 3.0, size=dim)
        got = project_simplex(v)
        want = qp_simplex_projection(v)
        assert np.max(np.abs(got - want)) <= 1e-6


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1,
                max_size=8))
def test_project_simplex_output_is_feasible(entries):
    out = project_simplex(np.array(entries))
    assert abs(out.sum() - 1.0) <= 1e-9
    assert np.all(out >= -1e-12)
    again = project_simplex(out)
    assert np.max(np.abs(again - out)) <= 1e-9


# -- configuration ---------------------------------------------------------


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        NlpConfig(gradient_tolerance=0.0)
    with pytest.raises(ValueError):
        NlpConfig(restarts=0)
    with pytest.raises(ValueError):
        NlpConfig(backtrack_factor=1.0)
    with pytest.raises(ValueError):
        NlpConfig(device_size=0)


# -- single solves ---------------------------------------------------------


def _small_solve(seed=0, restarts=3, device_size=1):
    rng = np.random.default_rng(41)
    m = random_model(rng)
    cfg = NlpConfig(restarts=restarts, seed=seed, device_size=device_size)
    return (m,) + solve_nlp(m, 2, cfg)


def test_traces_are_monotone():
    _, _, rep = _small_solve()
    for rec in rep.restarts:
        trace = np.asarray(rec.trace)
        assert trace.size >= 1
        assert np.all(np.diff(trace) >= -1e-12)
        assert rec.objective == pytest.approx(trace[-1], abs=1e-12)


def test_result_policy_is_feasible_and_consistent():
    m, pol, rep = _small_solve(device_size=2)
    assert simplex_report(pol) == []
    got = objective(m, pol, evaluate(m, pol))
    assert got == pytest.approx(rep.best_objective, abs=1e-9)
    assert rep.best_objective == max(rep.objectives)
    assert rep.restarts[rep.best_index].objective == rep.best_objective
    for rec in rep.restarts:
        assert rec.bellman_residual <= 1e-8


def test_converged_restarts_meet_stationarity():
    _, _, rep = _small_solve()
    assert any(r.converged for r in rep.restarts)
    for rec in rep.restarts:
        if rec.converged:
            assert rec.stationarity <= NlpConfig().gradient_tolerance


def test_joint_action_distribution_stays_a_product():
    m, pol, _ = _small_solve()
    x = pol.joint_action_tensor()
    tables = [f.action_selection for f in pol.controllers]
    dims = tuple(t.shape[-1] for t in tables)
    for qv in itertools.product(*(range(f.num_nodes) for f in pol.controllers)):
        qj = int(np.ravel_multi_index(qv, pol.node_dims))
        for av in itertools.product(*map(range, dims)):
            aj = int(np.ravel_multi_index(av, dims))
            want = 1.0
            for i, t in enumerate(tables):
                want *= t[0, qv[i], av[i]]
            assert x[0, qj, aj] == pytest.approx(want, abs=1e-14)


def test_single_action_model_needs_no_iterations():
    rng = np.random.default_rng(42)
    m = random_model(rng, action_counts=(1, 1), obs_counts=(2, 2))
    cfg = NlpConfig(restarts=1, seed=0)
    pol, rep = solve_nlp(m, 1, cfg)
    rec = rep.restarts[0]
    assert rec.converged and rec.iterations == 0
    want = objective(m, pol, evaluate(m, pol))
    assert rep.best_objective == pytest.approx(want, abs=1e-12)


def test_recovers_dominant_action():
    # one agent, two states; action a0 pays 1 everywhere, a1 pays 0
    transition = np.full((2, 2, 2), 0.5)
    observation = np.full((2, 2, 2), 0.5)
    reward = np.array([[1.0, 0.0], [1.0, 0.0]])
    m = DecPomdp(states=["s0", "s1"], actions=[["a0", "a1"]],
                 observations=[["o0", "o1"]], transition=transition,
                 observation_fn=observation, reward=reward, discount=0.9,
                 start=np.array([0.5, 0.5]), name="toy")
    # enumeration over deterministic one-node controllers
    best_det = -np.inf
    for a in range(2):
        psi = np.zeros((1, 1, 2))
        psi[0, 0, a] = 1.0
        eta = np.ones((1, 1, 2, 2, 1))
        det = JointPolicy([Fsc(psi, eta)])
        best_det = max(best_det, objective(m, det, evaluate(m, det)))
    assert best_det == pytest.approx(10.0, abs=1e-9)
    pol, rep = solve_nlp(m, 1, NlpConfig(restarts=3, seed=0))
    assert rep.best_objective == pytest.approx(best_det, abs=1e-6)
    assert pol.controllers[0].action_selection[0, 0, 0] >= 1.0 - 1e-6


# -- restart protocol ------------------------------------------------------


def test_restarts_one_equals_single_solve():
    rng = np.random.default_rng(43)
    m = random_model(rng)
    cfg = NlpConfig(restarts=1, seed=5)
    _, a = solve_nlp(m, 2, cfg)
    b = solve_restarts(m, 2, cfg)
    assert a.objectives == b.objectives
    assert a.best_objective == b.best_objective


def test_solve_restarts_is_deterministic():
    rng = np.random.default_rng(44)
    m = random_model(rng)
    cfg = NlpConfig(restarts=3, seed=9)
    a = solve_restarts(m, 2, cfg)
    b = solve_restarts(m, 2, cfg)
    assert a.objectives == b.objectives
    assert [r.iterations for r in a.restarts] == \
        [r.iterations for r in b.restarts]


def test_restart_seeds_are_offset_from_config_seed():
    rng = np.random.default_rng(45)
    m = random_model(rng)
    rep = solve_restarts(m, 1, NlpConfig(restarts=3, seed=100))
    assert [r.seed for r in rep.restarts] == [100, 101, 102]


# -- orderings on the built-in domains --------------------------------------


def test_correlation_never_hurts_on_tiger():
    tiger = build("tiger")
    plain = solve_nlp(tiger, 1, NlpConfig(restarts=5, seed=0))[1]
    corr = solve_nlp(tiger, 1,
                     NlpConfig(restarts=5, seed=0, device_size=2))[1]
    assert corr.best_objective >= plain.best_objective - 0.05


def test_recycling_mean_beats_bpi_mean():
    rec = build("recycling")
    for k in (1, 2, 3, 4):
        nlp = solve_restarts(rec, k, NlpConfig(restarts=10, seed=10))
        _, bpi = solve_bpi(rec, k, 1, BpiConfig(restarts=10, seed=10))
        assert nlp.mean_objective >= bpi.mean_objective, f"size {k}"
