import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decfsc.model import (
    DecPomdp,
    flatten_joint,
    joint_actions,
    joint_components,
    joint_observations,
    unflatten_joint,
    validate,
)
from _factories import random_model


def test_dimensions_and_shapes():
    rng = np.random.default_rng(0)
    m = random_model(rng, num_states=3, action_counts=(2, 3), obs_counts=(2, 2))
    assert m.num_agents == 2
    assert m.num_states == 3
    assert m.action_dims == (2, 3)
    assert m.observation_dims == (2, 2)
    assert m.num_joint_actions == 6
    assert m.num_joint_observations == 4
    assert m.transition.shape == (3, 6, 3)
    assert m.observation_fn.shape == (6, 3, 4)
    assert m.reward.shape == (3, 6)


def test_joint_enumeration_order_last_agent_fastest():
    rng = np.random.default_rng(1)
    m = random_model(rng, action_counts=(2, 3), obs_counts=(2, 2))
    acts = joint_actions(m)
    assert acts[0] == (0, 0)
    assert acts[1] == (0, 1)
    assert acts[3] == (1, 0)
    assert len(acts) == 6
    obs = joint_observations(m)
    assert obs == [(0, 0), (0, 1), (1, 0), (1, 1)]


@given(st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=4),
       st.data())
@settings(max_examples=200, deadline=None)
def test_flatten_unflatten_bijection(dims, data):
    dims = tuple(dims)
    tup = tuple(data.draw(st.integers(min_value=0, max_value=d - 1))
                for d in dims)
    flat = flatten_joint(tup, dims)
    assert 0 <= flat < int(np.prod(dims))
    assert unflatten_joint(flat, dims) == tup
    # agreement with numpy's C-order convention
    assert flat == int(np.ravel_multi_index(tup, dims))


def test_joint_components_table():
    dims = (2, 3)
    table = joint_components(dims)
    assert table.shape == (6, 2)
    for flat in range(6):
        assert tuple(table[flat]) == unflatten_joint(flat, dims)


def test_validate_clean_on_random_model():
    rng = np.random.default_rng(2)
    m = random_model(rng)
    assert validate(m) == []


def test_validate_flags_bad_rows():
    rng = np.random.default_rng(3)
    m = random_model(rng, num_states=2, action_counts=(2,), obs_counts=(2,))
    bad_t = m.transition.copy()
    bad_t[0, 0, :] = [0.7, 0.7]
    m2 = DecPomdp(states=m.states, actions=m.actions,
                  observations=m.observations, transition=bad_t,
                  observation_fn=m.observation_fn, reward=m.reward,
                  discount=m.discount, start=m.start)
    kinds = {v.kind for v in validate(m2)}
    assert "transition-row-sum" in kinds


def test_validate_flags_negative_entries_and_bad_start():
    rng = np.random.default_rng(4)
    m = random_model(rng, num_states=2, action_counts=(2,), obs_counts=(2,))
    bad_o = m.observation_fn.copy()
    bad_o[0, 0, :] = [1.5, -0.5]
    m2 = DecPomdp(states=m.states, actions=m.actions,
                  observations=m.observations, transition=m.transition,
                  observation_fn=bad_o, reward=m.reward,
                  discount=m.discount, start=np.array([0.4, 0.4]))
    kinds = {v.kind for v in validate(m2)}
    assert "observation-range" in kinds
    assert "start-sum" in kinds


def test_validate_flags_discount_and_reward():
    rng = np.random.default_rng(5)
    m = random_model(rng, num_states=2, action_counts=(2,), obs_counts=(2,))
    bad_r = m.reward.copy()
    bad_r[0, 0] = np.nan
    m_disc = DecPomdp(states=m.states, actions=m.actions,
                      observations=m.observations, transition=m.transition,
                      observation_fn=m.observation_fn, reward=m.reward,
                      discount=1.0, start=m.start)
    assert "discount-range" in {v.kind for v in validate(m_disc)}
    m2 = DecPomdp(states=m.states, actions=m.actions,
                  observations=m.observations, transition=m.transition,
                  observation_fn=m.observation_fn, reward=bad_r,
                  discount=m.discount, start=m.start)
    kinds = {v.kind for v in validate(m2)}
    assert "reward-finite" in kinds


def test_shape_mismatch_raises():
    rng = np.random.default_rng(6)
    m = random_model(rng, num_states=3, action_counts=(2, 2), obs_counts=(2, 2))
    with pytest.raises(ValueError):
        DecPomdp(states=m.states, actions=m.actions,
                 observations=m.observations,
                 transition=m.transition[:, :, :2],
                 observation_fn=m.observation_fn, reward=m.reward,
                 discount=m.discount, start=m.start)
