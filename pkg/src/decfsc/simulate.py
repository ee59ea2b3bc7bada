"""Monte Carlo rollout of a joint policy under decentralized information.

Each agent samples from its own tables using only its own node, its own
observation, and the shared device signal.  That locality is structural:
every (episode, participant) pair gets an independent RNG stream, split
deterministically from the config seed, so agent i's draws cannot depend on
anything another agent did.  Participants are tagged 0..n-1 for the agents,
n for the environment, and n+1 for the device.

The infinite-horizon return is truncated at a horizon H chosen so that the
tail bound gamma^H * max|R| / (1 - gamma) falls below a tolerance; the bound
is reported alongside the estimate so callers can account for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import backend
from .controller import JointPolicy, dims_match
from .model import DecPomdp

DEFAULT_TRUNCATION_TOL = 1e-4


class ValueEstimate(NamedTuple):
    mean: float
    std_error: float
    truncation_bound: float


@dataclass(frozen=True)
class RolloutConfig:
    num_episodes: int = 10_000
    seed: int = 0
    horizon: int | None = None          # None: derive from the tolerance
    truncation_tolerance: float = DEFAULT_TRUNCATION_TOL
    confidence: float = 0.95

    def __post_init__(self) -> None:
        if self.num_episodes < 1:
            raise ValueError("num_episodes must be at least 1")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1 when given")
        if self.truncation_tolerance <= 0.0:
            raise ValueError("truncation_tolerance must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be inside (0, 1)")


def truncation_horizon(model: DecPomdp, tolerance: float) -> int:
    """Smallest H with gamma^H * max|R| / (1 - gamma) <= tolerance."""
    if tolerance <= 0.0:
        raise ValueError("tolerance must be positive")
    gamma = model.discount
    peak = float(np.max(np.abs(model.reward)))
    if gamma == 0.0 or peak == 0.0:
        return 1
    h = math.log(tolerance * (1.0 - gamma) / peak) / math.log(gamma)
    return max(1, math.ceil(h))


def tail_bound(model: DecPomdp, horizon: int) -> float:
    """Worst-case absolute value of the truncated tail."""
    gamma = model.discount
    peak = float(np.max(np.abs(model.reward)))
    if gamma == 0.0:
        return 0.0
    return gamma ** horizon * peak / (1.0 - gamma)


def z_value(confidence: float) -> float:
    """Two-sided normal quantile, solved by bisection on erf."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be inside (0, 1)")
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.erf(mid / math.sqrt(2.0)) < confidence:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _stream(seed: int, episode: int, tag: int) -> np.random.Generator:
    # Identical (seed, episode, tag) always reproduces the same stream,
    # independent of how many episodes or agents surround it.
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(episode, tag)))


def _uniform_blocks(seed: int, episodes: int, horizon: int, n_agents: int
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    agent_u = np.empty((n_agents, episodes, horizon, 2))
    env_u = np.empty((episodes, 1 + 2 * horizon))
    dev_u = np.empty((episodes, horizon))
    for e in range(episodes):
        for i in range(n_agents):
            agent_u[i, e] = _stream(seed, e, i).random((horizon, 2))
        env_u[e] = _stream(seed, e, n_agents).random(1 + 2 * horizon)
        dev_u[e] = _stream(seed, e, n_agents + 1).random(horizon)
    return agent_u, env_u, dev_u


def _padded_tables(policy: JointPolicy) -> tuple[np.ndarray, np.ndarray]:
    n = policy.num_agents
    c = policy.device_size
    qmax = max(policy.node_dims)
    amax = max(f.num_actions for f in policy.controllers)
    omax = max(f.num_observations for f in policy.controllers)
    psis = np.zeros((n, c, qmax, amax))
    etas = np.zeros((n, c, qmax, amax, omax, qmax))
    for i, fsc in enumerate(policy.controllers):
        q, a, o = fsc.num_nodes, fsc.num_actions, fsc.num_observations
        psis[i, :, :q, :a] = fsc.action_selection
        etas[i, :, :q, :a, :o, :q] = fsc.node_transition
    return psis, etas


def estimate_value(model: DecPomdp, policy: JointPolicy,
                   config: RolloutConfig | None = None) -> ValueEstimate:
    """Sample mean of the truncated discounted return, with its errors.

    Deterministic given the seed; the same seed and episode count give the
    same estimate on either kernel backend.
    """
    config = config or RolloutConfig()
    dims_match(model, policy)
    horizon = config.horizon if config.horizon is not None else \
        truncation_horizon(model, config.truncation_tolerance)

    psis, etas = _padded_tables(policy)
    w = policy.device_matrix()
    q0 = np.array([f.initial_node for f in policy.controllers],
                  dtype=np.int64)
    c0 = policy.initial_device_state
    agent_u, env_u, dev_u = _uniform_blocks(
        config.seed, config.num_episodes, horizon, policy.num_agents)

    returns = backend.kernels.simulate_returns(
        psis, etas, w, model.transition, model.observation_fn, model.reward,
        model.start, q0, c0, model.discount, horizon,
        np.asarray(policy.node_dims, dtype=np.int64),
        np.asarray(model.action_dims, dtype=np.int64),
        np.asarray(model.observation_dims, dtype=np.int64),
        agent_u, env_u, dev_u)

    mean = float(np.mean(returns))
    if config.num_episodes > 1:
        std_error = float(np.std(returns, ddof=1)
                          / math.sqrt(config.num_episodes))
    else:
        std_error = 0.0
    return ValueEstimate(mean=mean, std_error=std_error,
                         truncation_bound=tail_bound(model, horizon))
