"""Dense joint-space kernels, pure numpy (einsum) implementation.

Shared argument conventions, all float64 and C-contiguous:

    X   (C, Qj, Aj)          joint action selection, prod_i psi_i
    Y   (C, Qj, Aj, Oj, Qj)  joint node transition, prod_i eta_i
    W   (C, C)               device transition
    P   (S, Aj, S)           state transition
    Om  (Aj, S, Oj)          observation function (conditioned on new state)
    R   (S, Aj)              reward

Value tables and occupancy measures are (C, Qj, S); the flattened system
index is C-ordered over (c, qj, s).  The numba twin in ``_kernels_numba``
implements the same signatures with explicit loops; either module can serve
as the active backend (see ``decfsc.backend``).
"""

from __future__ import annotations

import numpy as np

KERNEL_NAMES = (
    "expected_reward",
    "transition_matrix",
    "lookahead",
    "eta_weight_tensor",
    "push_nodes_states",
    "grad_action",
    "grad_node",
    "simulate_returns",
)


def expected_reward(X: np.ndarray, R: np.ndarray) -> np.ndarray:
    """r[c, q, s] = sum_a X[c, q, a] R[s, a]."""
    return np.einsum("cqa,sa->cqs", X, R)


def transition_matrix(X: np.ndarray, Y: np.ndarray, W: np.ndarray,
                      P: np.ndarray, Om: np.ndarray) -> np.ndarray:
    """Markov matrix of the joint (device, nodes, state) chain.

    M[(c,q,s), (d,p,t)] = sum_{a,o} X[c,q,a] P[s,a,t] Om[a,t,o]
                                     Y[c,q,a,o,p] W[c,d]
    Row-stochastic whenever the factor tables are.
    """
    c, qj, _ = X.shape
    s = P.shape[0]
    e = np.einsum("cqa,sat,ato,cqaop->cqspt", X, P, Om, Y, optimize=True)
    m6 = np.einsum("cqspt,cd->cqsdpt", e, W)
    n = c * qj * s
    return np.ascontiguousarray(m6.reshape(n, n))


def lookahead(Y: np.ndarray, W: np.ndarray, P: np.ndarray, Om: np.ndarray,
              R: np.ndarray, V: np.ndarray, gamma: float) -> np.ndarray:
    """One-step action values against a fixed continuation table.

    G[c,q,s,a] = R[s,a] + gamma * sum_{t,o,p,d}
                 P[s,a,t] Om[a,t,o] Y[c,q,a,o,p] W[c,d] V[d,p,t]
    """
    vw = np.einsum("cd,dpt->cpt", W, V)
    u = np.einsum("cqaop,cpt->cqaot", Y, vw, optimize=True)
    z = np.einsum("ato,cqaot->cqat", Om, u)
    fut = np.einsum("sat,cqat->cqsa", P, z, optimize=True)
    return R[np.newaxis, np.newaxis] + gamma * fut


def eta_weight_tensor(mu: np.ndarray, X: np.ndarray, P: np.ndarray,
                      Om: np.ndarray, Vw: np.ndarray) -> np.ndarray:
    """Occupancy-weighted continuation coefficients for node transitions.

    H[c,q,a,o,p] = sum_{s,t} mu[c,q,s] X[c,q,a] P[s,a,t] Om[a,t,o] Vw[c,p,t]
    (no discount factor applied here).
    """
    a1 = np.einsum("cqs,cqa,sat->cqat", mu, X, P, optimize=True)
    a2 = np.einsum("cqat,ato->cqaot", a1, Om)
    return np.einsum("cqaot,cpt->cqaop", a2, Vw, optimize=True)


def push_nodes_states(mu: np.ndarray, X: np.ndarray, Y: np.ndarray,
                      P: np.ndarray, Om: np.ndarray) -> np.ndarray:
    """One-step pushforward of an occupancy, before the device transition.

    pn[c,p,t] = sum_{q,s,a,o} mu[c,q,s] X[c,q,a] P[s,a,t] Om[a,t,o]
                               Y[c,q,a,o,p]
    """
    a1 = np.einsum("cqs,cqa,sat->cqat", mu, X, P, optimize=True)
    a2 = np.einsum("cqat,ato->cqaot", a1, Om)
    return np.einsum("cqaot,cqaop->cpt", a2, Y, optimize=True)


def grad_action(T: np.ndarray, node_dims: np.ndarray,
                action_dims: np.ndarray, agent: int) -> np.ndarray:
    """Reduce T[c, qj, aj] onto agent's own (node, action) axes.

    T is expected to carry the leave-one-out action factor already, so the
    result is the exact objective gradient w.r.t. the agent's rows.
    """
    c = T.shape[0]
    qd = tuple(int(d) for d in node_dims)
    ad = tuple(int(d) for d in action_dims)
    n = len(qd)
    shaped = T.reshape((c,) + qd + ad)
    keep = {0, 1 + agent, 1 + n + agent}
    axes = tuple(ax for ax in range(1 + 2 * n) if ax not in keep)
    return np.ascontiguousarray(shaped.sum(axis=axes))


def grad_node(T: np.ndarray, node_dims: np.ndarray, action_dims: np.ndarray,
              obs_dims: np.ndarray, agent: int) -> np.ndarray:
    """Reduce T[c, qj, aj, oj, qj'] onto agent's (q, a, o, q') axes."""
    c = T.shape[0]
    qd = tuple(int(d) for d in node_dims)
    ad = tuple(int(d) for d in action_dims)
    od = tuple(int(d) for d in obs_dims)
    n = len(qd)
    shaped = T.reshape((c,) + qd + ad + od + qd)
    keep = {0, 1 + agent, 1 + n + agent, 1 + 2 * n + agent, 1 + 3 * n + agent}
    axes = tuple(ax for ax in range(1 + 4 * n) if ax not in keep)
    return np.ascontiguousarray(shaped.sum(axis=axes))


def simulate_returns(psis: np.ndarray, etas: np.ndarray, W: np.ndarray,
                     P: np.ndarray, Om: np.ndarray, R: np.ndarray,
                     b0: np.ndarray, q0: np.ndarray, c0: int, gamma: float,
                     horizon: int, node_dims: np.ndarray,
                     action_dims: np.ndarray, obs_dims: np.ndarray,
                     agent_u: np.ndarray, env_u: np.ndarray,
                     dev_u: np.ndarray) -> np.ndarray:
    """Discounted returns of every episode, all episodes in lockstep.

    Sampling consumes pre-drawn uniforms: agent_u[i, e, t, 0] picks agent
    i's action at step t of episode e, agent_u[i, e, t, 1] its next node;
    env_u[e, 0] the initial state, env_u[e, 1 + 2t] / env_u[e, 2 + 2t] the
    state transition and joint observation; dev_u[e, t] the device step
    (consumed only when the device has more than one state).  Categorical
    draws count how many prefix sums fall at or below the uniform, which
    matches the sequential scan used by the numba twin bit for bit.
    """
    n_agents = psis.shape[0]
    c_dev = W.shape[0]
    episodes = env_u.shape[0]

    def draw(rows: np.ndarray, u: np.ndarray, dim: int) -> np.ndarray:
        cums = np.cumsum(rows[:, :dim], axis=1)
        idx = np.sum(cums <= u[:, None], axis=1)
        return np.minimum(idx, dim - 1)

    astride = np.ones(n_agents, dtype=np.int64)
    for i in range(n_agents - 2, -1, -1):
        astride[i] = astride[i + 1] * action_dims[i + 1]
    ostride = np.ones(n_agents, dtype=np.int64)
    for i in range(n_agents - 2, -1, -1):
        ostride[i] = ostride[i + 1] * obs_dims[i + 1]

    state = draw(np.broadcast_to(b0, (episodes, b0.shape[0])),
                 env_u[:, 0], b0.shape[0])
    nodes = np.empty((n_agents, episodes), dtype=np.int64)
    for i in range(n_agents):
        nodes[i] = q0[i]
    c_state = np.full(episodes, c0, dtype=np.int64)

    returns = np.zeros(episodes)
    disc = 1.0
    for t in range(horizon):
        acts = np.empty((n_agents, episodes), dtype=np.int64)
        for i in range(n_agents):
            rows = psis[i, c_state, nodes[i]]
            acts[i] = draw(rows, agent_u[i, :, t, 0], int(action_dims[i]))
        aj = np.zeros(episodes, dtype=np.int64)
        for i in range(n_agents):
            aj += acts[i] * astride[i]

        returns += disc * R[state, aj]

        nxt = draw(P[state, aj], env_u[:, 1 + 2 * t], P.shape[2])
        oj = draw(Om[aj, nxt], env_u[:, 2 + 2 * t], Om.shape[2])
        for i in range(n_agents):
            o_i = (oj // ostride[i]) % obs_dims[i]
            rows = etas[i, c_state, nodes[i], acts[i], o_i]
            nodes[i] = draw(rows, agent_u[i, :, t, 1], int(node_dims[i]))
        if c_dev > 1:
            rows = W[c_state]
            c_state = draw(rows, dev_u[:, t], c_dev)
        state = nxt
        disc *= gamma
    return returns
