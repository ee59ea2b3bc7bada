"""Dense joint-space kernels, numba-compiled twin of ``_kernels_numpy``.

Same signatures and conventions as the numpy module; see its docstring.
Loops are written against flat joint indices, decoding per-agent components
with stride arithmetic.  No fastmath: accumulation order is fixed so the two
backends agree to rounding (and bit for bit in the simulator, which consumes
identical pre-drawn uniforms in the same order).
"""

from __future__ import annotations

import numpy as np
from numba import njit

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


@njit(cache=True)
def expected_reward(X, R):
    c, qj, aj = X.shape
    s = R.shape[0]
    out = np.zeros((c, qj, s))
    for ci in range(c):
        for q in range(qj):
            for si in range(s):
                acc = 0.0
                for a in range(aj):
                    acc += X[ci, q, a] * R[si, a]
                out[ci, q, si] = acc
    return out


@njit(cache=True)
def transition_matrix(X, Y, W, P, Om):
    c, qj, aj = X.shape
    s = P.shape[0]
    oj = Om.shape[2]
    n = c * qj * s
    m = np.zeros((n, n))
    for ci in range(c):
        for q in range(qj):
            for si in range(s):
                row = (ci * qj + q) * s + si
                for a in range(aj):
                    xf = X[ci, q, a]
                    if xf == 0.0:
                        continue
                    for t in range(s):
                        pf = xf * P[si, a, t]
                        if pf == 0.0:
                            continue
                        for o in range(oj):
                            of = pf * Om[a, t, o]
                            if of == 0.0:
                                continue
                            for p in range(qj):
                                yf = of * Y[ci, q, a, o, p]
                                if yf == 0.0:
                                    continue
                                for d in range(c):
                                    col = (d * qj + p) * s + t
                                    m[row, col] += yf * W[ci, d]
    return m


@njit(cache=True)
def lookahead(Y, W, P, Om, R, V, gamma):
    c, qj, aj, oj, _ = Y.shape
    s = P.shape[0]
    vw = np.zeros((c, qj, s))
    for ci in range(c):
        for p in range(qj):
            for t in range(s):
                acc = 0.0
                for d in range(c):
                    acc += W[ci, d] * V[d, p, t]
                vw[ci, p, t] = acc
    g = np.zeros((c, qj, s, aj))
    for ci in range(c):
        for q in range(qj):
            for a in range(aj):
                for t in range(s):
                    acc = 0.0
                    for o in range(oj):
                        of = Om[a, t, o]
                        if of == 0.0:
                            continue
                        inner = 0.0
                        for p in range(qj):
                            inner += Y[ci, q, a, o, p] * vw[ci, p, t]
                        acc += of * inner
                    for si in range(s):
                        g[ci, q, si, a] += P[si, a, t] * acc
    for ci in range(c):
        for q in range(qj):
            for si in range(s):
                for a in range(aj):
                    g[ci, q, si, a] = R[si, a] + gamma * g[ci, q, si, a]
    return g


@njit(cache=True)
def eta_weight_tensor(mu, X, P, Om, Vw):
    c, qj, aj = X.shape
    s = P.shape[0]
    oj = Om.shape[2]
    a2 = np.zeros((c, qj, aj, oj, s))
    for ci in range(c):
        for q in range(qj):
            for a in range(aj):
                xf = X[ci, q, a]
                if xf == 0.0:
                    continue
                for t in range(s):
                    acc = 0.0
                    for si in range(s):
                        acc += mu[ci, q, si] * P[si, a, t]
                    acc *= xf
                    if acc == 0.0:
                        continue
                    for o in range(oj):
                        a2[ci, q, a, o, t] = acc * Om[a, t, o]
    h = np.zeros((c, qj, aj, oj, qj))
    for ci in range(c):
        for q in range(qj):
            for a in range(aj):
                for o in range(oj):
                    for p in range(qj):
                        acc = 0.0
                        for t in range(s):
                            acc += a2[ci, q, a, o, t] * Vw[ci, p, t]
                        h[ci, q, a, o, p] = acc
    return h


@njit(cache=True)
def push_nodes_states(mu, X, Y, P, Om):
    c, qj, aj = X.shape
    s = P.shape[0]
    oj = Om.shape[2]
    pn = np.zeros((c, qj, s))
    for ci in range(c):
        for q in range(qj):
            for a in range(aj):
                xf = X[ci, q, a]
                if xf == 0.0:
                    continue
                for t in range(s):
                    acc = 0.0
                    for si in range(s):
                        acc += mu[ci, q, si] * P[si, a, t]
                    acc *= xf
                    if acc == 0.0:
                        continue
                    for o in range(oj):
                        w = acc * Om[a, t, o]
                        if w == 0.0:
                            continue
                        for p in range(qj):
                            pn[ci, p, t] += w * Y[ci, q, a, o, p]
    return pn


@njit(cache=True)
def grad_action(T, node_dims, action_dims, agent):
    c, qj, aj = T.shape
    n = node_dims.shape[0]
    qstride = 1
    for j in range(agent + 1, n):
        qstride *= node_dims[j]
    astride = 1
    for j in range(agent + 1, n):
        astride *= action_dims[j]
    qi = node_dims[agent]
    ai = action_dims[agent]
    out = np.zeros((c, qi, ai))
    for ci in range(c):
        for q in range(qj):
            qc = (q // qstride) % qi
            for a in range(aj):
                ac = (a // astride) % ai
                out[ci, qc, ac] += T[ci, q, a]
    return out


@njit(cache=True)
def grad_node(T, node_dims, action_dims, obs_dims, agent):
    c, qj, aj, oj, _ = T.shape
    n = node_dims.shape[0]
    qstride = 1
    astride = 1
    ostride = 1
    for j in range(agent + 1, n):
        qstride *= node_dims[j]
        astride *= action_dims[j]
        ostride *= obs_dims[j]
    qi = node_dims[agent]
    ai = action_dims[agent]
    oi = obs_dims[agent]
    out = np.zeros((c, qi, ai, oi, qi))
    for ci in range(c):
        for q in range(qj):
            qc = (q // qstride) % qi
            for a in range(aj):
                ac = (a // astride) % ai
                for o in range(oj):
                    oc = (o // ostride) % oi
                    for p in range(qj):
                        pc = (p // qstride) % qi
                        out[ci, qc, ac, oc, pc] += T[ci, q, a, o, p]
    return out


@njit(cache=True)
def _draw(row, dim, u):
    acc = 0.0
    for k in range(dim):
        acc += row[k]
        if acc > u:
            return k
    return dim - 1


@njit(cache=True)
def simulate_returns(psis, etas, W, P, Om, R, b0, q0, c0, gamma, horizon,
                     node_dims, action_dims, obs_dims, agent_u, env_u, dev_u):
    n_agents = psis.shape[0]
    c_dev = W.shape[0]
    episodes = env_u.shape[0]
    s_dim = P.shape[0]
    oj_dim = Om.shape[2]

    astride = np.ones(n_agents, dtype=np.int64)
    for i in range(n_agents - 2, -1, -1):
        astride[i] = astride[i + 1] * action_dims[i + 1]
    ostride = np.ones(n_agents, dtype=np.int64)
    for i in range(n_agents - 2, -1, -1):
        ostride[i] = ostride[i + 1] * obs_dims[i + 1]

    returns = np.zeros(episodes)
    acts = np.zeros(n_agents, dtype=np.int64)
    nodes = np.zeros(n_agents, dtype=np.int64)
    for e in range(episodes):
        state = _draw(b0, s_dim, env_u[e, 0])
        for i in range(n_agents):
            nodes[i] = q0[i]
        c_state = c0
        disc = 1.0
        total = 0.0
        for t in range(horizon):
            aj = 0
            for i in range(n_agents):
                acts[i] = _draw(psis[i, c_state, nodes[i]],
                                action_dims[i], agent_u[i, e, t, 0])
                aj += acts[i] * astride[i]
            total += disc * R[state, aj]
            nxt = _draw(P[state, aj], s_dim, env_u[e, 1 + 2 * t])
            oj = _draw(Om[aj, nxt], oj_dim, env_u[e, 2 + 2 * t])
            for i in range(n_agents):
                o_i = (oj // ostride[i]) % obs_dims[i]
                nodes[i] = _draw(etas[i, c_state, nodes[i], acts[i], o_i],
                                 node_dims[i], agent_u[i, e, t, 1])
            if c_dev > 1:
                c_state = _draw(W[c_state], c_dev, dev_u[e, t])
            state = nxt
            disc *= gamma
        returns[e] = total
    return returns
