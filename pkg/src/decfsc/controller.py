"""Stochastic finite-state controllers and their joint-product tensors.

Each agent runs an ``Fsc`` with a fixed node count.  Rows are conditioned on
the state of an optional shared correlation device; controllers without a
device keep a device axis of size one so that every code path sees the same
array layout:

    action_selection[c, q, a]          P(a | q, c)
    node_transition[c, q, a, o, q']    P(q' | q, a, o, c)

A ``JointPolicy`` bundles one controller per agent plus the optional device
and knows how to expand itself into dense joint-space tensors (the products
over agents used by evaluation, gradients, and the improvement LPs).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DecPomdp, Violation, joint_components

SIMPLEX_TOL = 1e-9


@dataclass
class Fsc:
    """One agent's finite-state controller (device axis first)."""

    action_selection: np.ndarray   # (C, Q, A)
    node_transition: np.ndarray    # (C, Q, A, O, Q)
    initial_node: int = 0

    def __post_init__(self) -> None:
        self.action_selection = np.ascontiguousarray(self.action_selection,
                                                     dtype=np.float64)
        self.node_transition = np.ascontiguousarray(self.node_transition,
                                                    dtype=np.float64)
        if self.action_selection.ndim != 3:
            raise ValueError("action_selection must have shape (C, Q, A)")
        if self.node_transition.ndim != 5:
            raise ValueError("node_transition must have shape (C, Q, A, O, Q)")
        c, q, a = self.action_selection.shape
        c2, q2, a2, _, q3 = self.node_transition.shape
        if (c2, q2, a2) != (c, q, a) or q3 != q:
            raise ValueError(
                f"controller tables disagree: action_selection "
                f"{self.action_selection.shape} vs node_transition "
                f"{self.node_transition.shape}")
        if not 0 <= self.initial_node < q:
            raise ValueError(f"initial node {self.initial_node} out of range")

    @property
    def num_nodes(self) -> int:
        return self.action_selection.shape[1]

    @property
    def num_actions(self) -> int:
        return self.action_selection.shape[2]

    @property
    def num_observations(self) -> int:
        return self.node_transition.shape[3]

    @property
    def device_states(self) -> int:
        return self.action_selection.shape[0]

    def action_prob(self, node: int, action: int, device_state: int = 0) -> float:
        return float(self.action_selection[device_state, node, action])

    def transition_prob(self, node: int, action: int, observation: int,
                        next_node: int, device_state: int = 0) -> float:
        return float(self.node_transition[device_state, node, action,
                                          observation, next_node])

    def copy(self) -> "Fsc":
        return Fsc(self.action_selection.copy(), self.node_transition.copy(),
                   self.initial_node)


@dataclass
class CorrelationDevice:
    """Shared finite-state Markov chain all agents can condition on."""

    transition: np.ndarray   # (C, C), rows P(c' | c)
    initial_state: int = 0

    def __post_init__(self) -> None:
        self.transition = np.ascontiguousarray(self.transition, dtype=np.float64)
        if self.transition.ndim != 2 or \
                self.transition.shape[0] != self.transition.shape[1]:
            raise ValueError("device transition must be square (C, C)")
        if not 0 <= self.initial_state < self.num_states:
            raise ValueError(f"device initial state {self.initial_state} out of range")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    def copy(self) -> "CorrelationDevice":
        return CorrelationDevice(self.transition.copy(), self.initial_state)


def uniform_device(num_states: int) -> CorrelationDevice:
    if num_states < 1:
        raise ValueError(f"device needs at least one state, got {num_states}")
    w = np.full((num_states, num_states), 1.0 / num_states)
    return CorrelationDevice(w, 0)


@dataclass
class JointPolicy:
    """One controller per agent, optionally sharing a correlation device."""

    controllers: list[Fsc]
    device: CorrelationDevice | None = None

    def __post_init__(self) -> None:
        if not self.controllers:
            raise ValueError("policy needs at least one controller")
        c = self.device_size
        for i, fsc in enumerate(self.controllers):
            if fsc.device_states != c:
                raise ValueError(
                    f"controller {i} conditioned on {fsc.device_states} device "
                    f"states, policy has {c}")

    @property
    def num_agents(self) -> int:
        return len(self.controllers)

    @property
    def node_dims(self) -> tuple[int, ...]:
        return tuple(f.num_nodes for f in self.controllers)

    @property
    def num_joint_nodes(self) -> int:
        return int(np.prod(self.node_dims))

    @property
    def device_size(self) -> int:
        return 1 if self.device is None else self.device.num_states

    @property
    def initial_joint_node(self) -> int:
        flat = 0
        for fsc in self.controllers:
            flat = flat * fsc.num_nodes + fsc.initial_node
        return flat

    @property
    def initial_device_state(self) -> int:
        return 0 if self.device is None else self.device.initial_state

    def device_matrix(self) -> np.ndarray:
        if self.device is None:
            return np.ones((1, 1))
        return self.device.transition

    def copy(self) -> "JointPolicy":
        dev = None if self.device is None else self.device.copy()
        return JointPolicy([f.copy() for f in self.controllers], dev)

    # -- joint-space expansion -------------------------------------------

    def _expand(self, skip: int | None, transitions: bool) -> np.ndarray:
        """Product over agents (optionally all but one) of per-agent tables.

        Returns (C, Qj, Aj) for action tables, (C, Qj, Aj, Oj, Qj) for
        transition tables, indexed by flat joint node/action/observation.
        """
        c = self.device_size
        qd = self.node_dims
        ad = tuple(f.num_actions for f in self.controllers)
        od = tuple(f.num_observations for f in self.controllers)
        qc = joint_components(qd)
        acomp = joint_components(ad)
        ocomp = joint_components(od)
        crange = np.arange(c)
        if transitions:
            out = np.ones((c, int(np.prod(qd)), int(np.prod(ad)),
                           int(np.prod(od)), int(np.prod(qd))))
        else:
            out = np.ones((c, int(np.prod(qd)), int(np.prod(ad))))
        for i, fsc in enumerate(self.controllers):
            if i == skip:
                continue
            if transitions:
                out *= fsc.node_transition[np.ix_(
                    crange, qc[:, i], acomp[:, i], ocomp[:, i], qc[:, i])]
            else:
                out *= fsc.action_selection[np.ix_(crange, qc[:, i], acomp[:, i])]
        return out

    def joint_action_tensor(self) -> np.ndarray:
        """X[c, qj, aj] = prod_i P(a_i | q_i, c)."""
        return self._expand(skip=None, transitions=False)

    def joint_transition_tensor(self) -> np.ndarray:
        """Y[c, qj, aj, oj, qj'] = prod_i P(q_i' | q_i, a_i, o_i, c)."""
        return self._expand(skip=None, transitions=True)

    def leave_one_out_action(self, agent: int) -> np.ndarray:
        """Same as the action tensor, with agent's own factor dropped."""
        return self._expand(skip=agent, transitions=False)

    def leave_one_out_transition(self, agent: int) -> np.ndarray:
        """Same as the transition tensor, with agent's own factor dropped."""
        return self._expand(skip=agent, transitions=True)


# -- construction and checks ---------------------------------------------


def dims_match(model: DecPomdp, policy: JointPolicy) -> None:
    """Raise ValueError unless the policy fits the model's alphabets."""
    if policy.num_agents != model.num_agents:
        raise ValueError(f"policy has {policy.num_agents} agents, "
                         f"model has {model.num_agents}")
    for i, fsc in enumerate(policy.controllers):
        if fsc.num_actions != len(model.actions[i]):
            raise ValueError(
                f"agent {i}: controller has {fsc.num_actions} actions, "
                f"model has {len(model.actions[i])}")
        if fsc.num_observations != len(model.observations[i]):
            raise ValueError(
                f"agent {i}: controller has {fsc.num_observations} "
                f"observations, model has {len(model.observations[i])}")


def random_deterministic(model: DecPomdp, nodes_per_agent: int,
                         device_size: int = 1, seed: int = 0) -> JointPolicy:
    """Uniformly drawn deterministic controllers (point-mass rows).

    Every action-selection row puts mass one on a uniformly drawn action and
    every node-transition row on a uniformly drawn next node, independently
    per (device state, node[, action, observation]).  Device rows, when a
    device is requested, start uniform.  Deterministic function of the seed.
    """
    if nodes_per_agent < 1:
        raise ValueError(f"nodes_per_agent must be >= 1, got {nodes_per_agent}")
    if device_size < 1:
        raise ValueError(f"device_size must be >= 1, got {device_size}")
    rng = np.random.default_rng(seed)
    q = nodes_per_agent
    c = device_size
    controllers = []
    for i in range(model.num_agents):
        na = len(model.actions[i])
        no = len(model.observations[i])
        acts = rng.integers(na, size=(c, q))
        psi = np.zeros((c, q, na))
        np.put_along_axis(psi, acts[:, :, None], 1.0, axis=2)
        nxt = rng.integers(q, size=(c, q, na, no))
        eta = np.zeros((c, q, na, no, q))
        np.put_along_axis(eta, nxt[:, :, :, :, None], 1.0, axis=4)
        controllers.append(Fsc(psi, eta, initial_node=0))
    device = uniform_device(c) if c > 1 else None
    return JointPolicy(controllers, device)


def uncorrelate(policy: JointPolicy) -> JointPolicy:
    """Drop a one-state device, keeping the controller tables untouched."""
    if policy.device is None:
        return policy
    if policy.device.num_states != 1:
        raise ValueError(
            f"cannot uncorrelate a policy with {policy.device.num_states} "
            f"device states")
    return JointPolicy(list(policy.controllers), None)


def attach_trivial_device(policy: JointPolicy) -> JointPolicy:
    """Inverse of :func:`uncorrelate`: wrap with a one-state device."""
    if policy.device is not None:
        raise ValueError("policy already has a device")
    return JointPolicy(list(policy.controllers),
                       CorrelationDevice(np.ones((1, 1)), 0))


def simplex_report(policy: JointPolicy, tol: float = SIMPLEX_TOL) -> list[Violation]:
    """All controller/device rows that fail to be probability distributions."""
    report: list[Violation] = []

    def check(arr: np.ndarray, label: str, agent: int | None) -> None:
        sums = arr.sum(axis=-1)
        for idx in np.argwhere(np.abs(sums - 1.0) > tol):
            loc = tuple(int(v) for v in idx)
            res = float(abs(sums[tuple(idx)] - 1.0))
            who = f"agent {agent} " if agent is not None else ""
            report.append(Violation(
                kind=f"{label}-row-sum", location=loc, residual=res,
                message=f"{who}{label} row {loc} sums to "
                        f"{sums[tuple(idx)]:.12g}"))
        if arr.size and (arr.min() < -tol or arr.max() > 1.0 + tol):
            for idx in np.argwhere((arr < -tol) | (arr > 1.0 + tol)):
                loc = tuple(int(v) for v in idx)
                val = float(arr[tuple(idx)])
                who = f"agent {agent} " if agent is not None else ""
                report.append(Violation(
                    kind=f"{label}-range", location=loc,
                    residual=max(-val, val - 1.0),
                    message=f"{who}{label} entry {loc} = {val:.12g} "
                            f"outside [0, 1]"))

    for i, fsc in enumerate(policy.controllers):
        check(fsc.action_selection, "action-selection", i)
        check(fsc.node_transition, "node-transition", i)
    if policy.device is not None:
        check(policy.device.transition, "device", None)
    return report
