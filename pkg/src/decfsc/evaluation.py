"""Exact policy evaluation and adjoint gradients.

The joint process over (device state, joint node, hidden state) is a Markov
chain once a policy is fixed, so the infinite-horizon discounted value table
solves a linear system

    (I - gamma * M) V = r

with M the chain's transition matrix and r the expected immediate reward.
Small systems are solved directly (LU); past ``DIRECT_SOLVE_MAX_DIM``
unknowns the solver switches to iterative Bellman backups, exploiting the
gamma-contraction and never materializing M.

The value recursion steps the device together with the nodes and the state:
the continuation value is taken at the *next* device state, weighted by the
device's transition row.  ``printed_correlation=True`` selects an alternate
recursion that keeps the continuation at the current device state; under it
the device rows cancel (they sum to one), so each device state decouples
into an independent evaluation.  It exists for comparison only.

Gradients come from the adjoint method: with b the start vector,
J = b' (I - gamma M)^(-1) r, so dJ = mu' (dr + gamma dM V) where mu solves
the transposed system (the discounted occupancy measure).  One forward
solve, one adjoint solve, no finite differences.  Rows of the policy are
not validated here: evaluation is well defined off the simplex as long as
the system stays nonsingular, which finite-difference checks rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .controller import JointPolicy, dims_match
from .model import DecPomdp

# Past this many unknowns the direct LU solve gives way to backups.
DIRECT_SOLVE_MAX_DIM = 5000
# Iterative path stops once the sup-norm Bellman residual drops below this.
ITERATIVE_RESIDUAL_TOL = 1e-10
_ITERATIVE_MAX_SWEEPS = 2_000_000


@dataclass
class ValueTable:
    """Joint controller values, indexed values[c, qj, s]."""

    values: np.ndarray              # (C, Qj, S)
    node_dims: tuple[int, ...]

    @property
    def device_size(self) -> int:
        return self.values.shape[0]

    @property
    def num_states(self) -> int:
        return self.values.shape[2]

    def value(self, joint_node, state: int, device_state: int = 0) -> float:
        qj = joint_node
        if not isinstance(qj, (int, np.integer)):
            flat = 0
            for k, d in zip(qj, self.node_dims):
                flat = flat * d + k
            qj = flat
        return float(self.values[device_state, qj, state])


@dataclass
class PolicyGradient:
    """Objective partial derivatives, mirroring the policy's tables."""

    action_selection: list[np.ndarray]   # per agent (C, Q, A)
    node_transition: list[np.ndarray]    # per agent (C, Q, A, O, Q)
    device: np.ndarray | None            # (C, C) when the policy has a device

    def arrays(self) -> list[np.ndarray]:
        out = list(self.action_selection) + list(self.node_transition)
        if self.device is not None:
            out.append(self.device)
        return out

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(a * a)) for a in self.arrays()))


def _policy_tensors(model: DecPomdp, policy: JointPolicy):
    dims_match(model, policy)
    x = policy.joint_action_tensor()
    y = policy.joint_transition_tensor()
    w = policy.device_matrix()
    return x, y, w


def _start_vector(model: DecPomdp, policy: JointPolicy) -> np.ndarray:
    c = policy.device_size
    qj = policy.num_joint_nodes
    b = np.zeros((c, qj, model.num_states))
    b[policy.initial_device_state, policy.initial_joint_node, :] = model.start
    return b


def _solve_direct(model, x, y, w, shape):
    m = backend.kernels.transition_matrix(x, y, w, model.transition,
                                  model.observation_fn)
    r = backend.kernels.expected_reward(x, model.reward).reshape(-1)
    a = -model.discount * m
    np.fill_diagonal(a, a.diagonal() + 1.0)
    try:
        v = np.linalg.solve(a, r)
        mu_of = lambda b: np.linalg.solve(a.T, b.reshape(-1)).reshape(shape)
    except np.linalg.LinAlgError as exc:   # pragma: no cover - defensive
        raise RuntimeError(
            "evaluation system is singular; the model or policy is "
            "internally inconsistent") from exc
    return v.reshape(shape), mu_of


def _solve_iterative(model, x, y, w, shape):
    v = np.zeros(shape)
    for _ in range(_ITERATIVE_MAX_SWEEPS):
        g = backend.kernels.lookahead(y, w, model.transition, model.observation_fn,
                              model.reward, v, model.discount)
        tv = np.einsum("cqa,cqsa->cqs", x, g)
        if float(np.max(np.abs(tv - v))) <= ITERATIVE_RESIDUAL_TOL:
            return tv
        v = tv
    raise RuntimeError("iterative evaluation failed to contract")


def evaluate(model: DecPomdp, policy: JointPolicy, method: str = "auto",
             printed_correlation: bool = False) -> ValueTable:
    """Value table of a fixed joint policy.

    method: "auto" (direct below DIRECT_SOLVE_MAX_DIM unknowns, iterative
    above), or "direct"/"iterative" to force a path.
    """
    if method not in ("auto", "direct", "iterative"):
        raise ValueError(f"unknown evaluation method {method!r}")
    x, y, w = _policy_tensors(model, policy)
    if printed_correlation:
        w = np.eye(policy.device_size)
    shape = (policy.device_size, policy.num_joint_nodes, model.num_states)
    dim = int(np.prod(shape))
    if method == "direct" or (method == "auto" and dim <= DIRECT_SOLVE_MAX_DIM):
        v, _ = _solve_direct(model, x, y, w, shape)
    else:
        v = _solve_iterative(model, x, y, w, shape)
    return ValueTable(values=v, node_dims=policy.node_dims)


def objective(model: DecPomdp, policy: JointPolicy, table: ValueTable) -> float:
    """Expected value at the start distribution and initial nodes."""
    expect = (policy.device_size, policy.num_joint_nodes, model.num_states)
    if table.values.shape != expect:
        raise ValueError(
            f"value table shape {table.values.shape} does not match "
            f"policy/model shape {expect}")
    row = table.values[policy.initial_device_state,
                       policy.initial_joint_node, :]
    return float(np.dot(model.start, row))


def bellman_residual(model: DecPomdp, policy: JointPolicy, table: ValueTable,
                     printed_correlation: bool = False) -> float:
    """Sup-norm self-consistency error of a value table."""
    x, y, w = _policy_tensors(model, policy)
    if printed_correlation:
        w = np.eye(policy.device_size)
    expect = (policy.device_size, policy.num_joint_nodes, model.num_states)
    if table.values.shape != expect:
        raise ValueError(
            f"value table shape {table.values.shape} does not match "
            f"policy/model shape {expect}")
    g = backend.kernels.lookahead(y, w, model.transition, model.observation_fn,
                          model.reward, table.values, model.discount)
    tv = np.einsum("cqa,cqsa->cqs", x, g)
    return float(np.max(np.abs(tv - table.values)))


def value_and_gradient(model: DecPomdp, policy: JointPolicy
                       ) -> tuple[float, ValueTable, PolicyGradient]:
    """Objective, value table, and exact gradient in one pass."""
    x, y, w = _policy_tensors(model, policy)
    shape = (policy.device_size, policy.num_joint_nodes, model.num_states)
    gamma = model.discount
    p, om, r = model.transition, model.observation_fn, model.reward

    dim = int(np.prod(shape))
    b = _start_vector(model, policy)
    if dim <= DIRECT_SOLVE_MAX_DIM:
        v, mu_of = _solve_direct(model, x, y, w, shape)
        mu = mu_of(b)
    else:
        v = _solve_iterative(model, x, y, w, shape)
        mu = _occupancy_iterative(model, x, y, w, b)
    table = ValueTable(values=v, node_dims=policy.node_dims)
    j = objective(model, policy, table)

    node_dims = np.asarray(policy.node_dims, dtype=np.int64)
    action_dims = np.asarray(model.action_dims, dtype=np.int64)
    obs_dims = np.asarray(model.observation_dims, dtype=np.int64)

    g = backend.kernels.lookahead(y, w, p, om, r, v, gamma)
    f = np.einsum("cqs,cqsa->cqa", mu, g)
    vw = np.einsum("cd,dpt->cpt", w, v)
    h = backend.kernels.eta_weight_tensor(mu, x, p, om, vw)

    d_psi = []
    d_eta = []
    for i in range(policy.num_agents):
        xloo = policy.leave_one_out_action(i)
        d_psi.append(backend.kernels.grad_action(
            np.ascontiguousarray(f * xloo), node_dims, action_dims, i))
        yloo = policy.leave_one_out_transition(i)
        d_eta.append(gamma * backend.kernels.grad_node(
            np.ascontiguousarray(h * yloo), node_dims, action_dims,
            obs_dims, i))
    d_dev = None
    if policy.device is not None:
        pn = backend.kernels.push_nodes_states(mu, x, y, p, om)
        d_dev = gamma * np.einsum("cpt,dpt->cd", pn, v)
    return j, table, PolicyGradient(d_psi, d_eta, d_dev)


def gradient(model: DecPomdp, policy: JointPolicy) -> PolicyGradient:
    """Exact objective gradient w.r.t. every policy table entry."""
    return value_and_gradient(model, policy)[2]


def _occupancy_iterative(model, x, y, w, b):
    """Solve the adjoint system by pushforward iteration (large systems)."""
    mu = b.copy()
    gamma = model.discount
    for _ in range(_ITERATIVE_MAX_SWEEPS):
        pn = backend.kernels.push_nodes_states(mu, x, y, model.transition,
                                       model.observation_fn)
        stepped = np.einsum("cd,cpt->dpt", w, pn)
        nxt = b + gamma * stepped
        if float(np.max(np.abs(nxt - mu))) <= ITERATIVE_RESIDUAL_TOL:
            return nxt
        mu = nxt
    raise RuntimeError("occupancy iteration failed to contract")
