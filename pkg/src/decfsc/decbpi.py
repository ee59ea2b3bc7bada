"""Decentralized bounded policy iteration baseline.

One node of one agent is improved at a time.  The candidate node's behavior
is encoded by joint "action and transition" variables

    cpsi[x]        probability of taking action x at the node
    ceta[x, y, k]  joint probability of taking x and moving to node k after
                   observing y (so ceta summed over k equals cpsi[x])

which keep the one-step lookahead *linear* when the continuation uses the
current value table.  The LP maximizes a uniform improvement margin eps over
every hidden state and every joint node of the other agents (and every
device state when a correlation device is present); the old rows are always
feasible with eps = 0, so the LP is never infeasible.  An accepted
improvement can only raise the value table entrywise, which makes sweeps
monotone; sweeps stop once no node improves beyond a small threshold.

The LP solver is a self-contained dense two-phase revised simplex.  The
basis is refactorized from the original matrix at every iteration, so the
working data never accumulates elimination round-off; pricing is Dantzig
with Bland's rule engaged during degenerate stretches for cycling safety.
Infeasible and unbounded outcomes are reported as result markers, never
exceptions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .controller import JointPolicy, dims_match, random_deterministic
from .evaluation import ValueTable, bellman_residual, evaluate, objective
from .model import DecPomdp, joint_components
from .optimizer import RestartRecord, SolveReport

_PIVOT_TOL = 1e-10
_REDUCED_TOL = 1e-9
_MAX_PIVOTS = 100_000
_DEGENERATE_STEP = 1e-12
_BLAND_AFTER = 30


# -- dense LP ----------------------------------------------------------------


@dataclass
class LpProblem:
    """maximize objective @ x, subject to A_ub x <= b_ub, A_eq x = b_eq,
    and per-variable bounds (finite lower, optional upper)."""

    objective: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: list[tuple[float, float | None]] | None = None


@dataclass
class LpResult:
    status: str                  # "optimal" | "infeasible" | "unbounded"
    value: float | None = None
    x: np.ndarray | None = None


def _run_simplex(full: np.ndarray, rhs: np.ndarray, basis: np.ndarray,
                 obj: np.ndarray) -> tuple[str, np.ndarray]:
    """Maximize obj @ x over full @ x = rhs, x >= 0, from the given basis.

    Revised simplex: the basis matrix is refactorized from the original
    columns at every iteration, so elimination round-off never accumulates.
    Entering column by largest reduced cost; after a run of degenerate steps
    both choices switch to smallest-index (Bland) until a real step is made,
    which rules out cycling.  Updates basis in place, returns the status and
    the basic solution.
    """
    m = full.shape[0]
    degenerate = 0
    for _ in range(_MAX_PIVOTS):
        b_mat = full[:, basis]
        xb = np.linalg.solve(b_mat, rhs)
        y = np.linalg.solve(b_mat.T, obj[basis])
        reduced = obj - y @ full
        reduced[basis] = 0.0
        bland = degenerate >= _BLAND_AFTER
        if bland:
            enter = -1
            for j in range(reduced.shape[0]):
                if reduced[j] > _REDUCED_TOL:
                    enter = j
                    break
        else:
            enter = int(np.argmax(reduced))
            if reduced[enter] <= _REDUCED_TOL:
                enter = -1
        if enter < 0:
            return "optimal", xb
        d = np.linalg.solve(b_mat, full[:, enter])
        leave = -1
        best = np.inf
        for i in range(m):
            if d[i] <= _PIVOT_TOL:
                continue
            ratio = max(xb[i], 0.0) / d[i]
            if leave < 0 or ratio < best - 1e-12:
                best = ratio
                leave = i
            elif ratio <= best + 1e-12:
                if bland:
                    if basis[i] < basis[leave]:
                        leave = i
                elif d[i] > d[leave]:
                    leave = i
                if ratio < best:
                    best = ratio
        if leave < 0:
            return "unbounded", xb
        degenerate = degenerate + 1 if best <= _DEGENERATE_STEP else 0
        basis[leave] = enter
    raise RuntimeError("simplex did not terminate")  # pragma: no cover


def solve_lp(problem: LpProblem) -> LpResult:
    """Two-phase dense simplex.  Small problems only; no sparsity."""
    c = np.asarray(problem.objective, dtype=np.float64)
    n = c.shape[0]
    a_ub = np.zeros((0, n)) if problem.a_ub is None \
        else np.asarray(problem.a_ub, dtype=np.float64).reshape(-1, n)
    b_ub = np.zeros(0) if problem.b_ub is None \
        else np.asarray(problem.b_ub, dtype=np.float64).ravel()
    a_eq = np.zeros((0, n)) if problem.a_eq is None \
        else np.asarray(problem.a_eq, dtype=np.float64).reshape(-1, n)
    b_eq = np.zeros(0) if problem.b_eq is None \
        else np.asarray(problem.b_eq, dtype=np.float64).ravel()
    bounds = problem.bounds or [(0.0, None)] * n
    if len(bounds) != n:
        raise ValueError(f"{len(bounds)} bounds for {n} variables")

    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    if not np.all(np.isfinite(lo)):
        raise ValueError("every variable needs a finite lower bound")
    # Shift to z = x - lo >= 0 and fold finite upper bounds into <= rows.
    extra_rows = []
    extra_rhs = []
    for i, (_, hi) in enumerate(bounds):
        if hi is not None:
            row = np.zeros(n)
            row[i] = 1.0
            extra_rows.append(row)
            extra_rhs.append(hi - lo[i])
    if extra_rows:
        a_ub = np.vstack([a_ub, np.array(extra_rows)])
        b_ub = np.concatenate([b_ub, np.array(extra_rhs)])
    b_ub = b_ub - a_ub @ lo
    b_eq = b_eq - a_eq @ lo

    m1, m2 = a_ub.shape[0], a_eq.shape[0]
    m = m1 + m2
    if m == 0:
        # Nothing but z >= 0: bounded iff no positive objective direction.
        if np.any(c > _REDUCED_TOL):
            return LpResult("unbounded")
        x = lo.copy()
        return LpResult("optimal", float(c @ x), x)

    rows = np.vstack([a_ub, a_eq])
    rhs = np.concatenate([b_ub, b_eq])
    slack = np.zeros((m, m1))
    slack[:m1, :] = np.eye(m1)
    flip = rhs < 0
    rows[flip] *= -1.0
    slack[flip] *= -1.0
    rhs = np.where(flip, -rhs, rhs)

    # Artificials: equality rows always; flipped inequality rows too.
    need_art = np.zeros(m, dtype=bool)
    need_art[m1:] = True
    need_art[:m1] |= flip[:m1]
    art_cols = int(need_art.sum())
    art = np.zeros((m, art_cols))
    basis = np.zeros(m, dtype=np.int64)
    art_at = 0
    for i in range(m):
        if need_art[i]:
            art[i, art_at] = 1.0
            basis[i] = n + m1 + art_at
            art_at += 1
        else:
            basis[i] = n + i  # its own slack, coefficient +1
    full = np.hstack([rows, slack, art])

    # Phase 1: drive artificials to zero.
    if art_cols:
        p1 = np.zeros(n + m1 + art_cols)
        p1[n + m1:] = -1.0
        status, xb = _run_simplex(full, rhs, basis, p1)
        if status != "optimal":  # pragma: no cover - phase 1 is bounded
            raise RuntimeError("phase 1 simplex failed")
        if -(p1[basis] @ xb) > 1e-8:
            return LpResult("infeasible")
        # Swap surviving zero-level artificials out of the basis; rows that
        # admit no replacement column are redundant and get dropped.
        i = 0
        while i < basis.shape[0]:
            if basis[i] < n + m1:
                i += 1
                continue
            b_mat = full[:, basis]
            t_row = np.linalg.solve(b_mat, full[:, :n + m1])[i]
            in_basis = set(basis.tolist())
            swap = -1
            for j in range(n + m1):
                if j not in in_basis and abs(t_row[j]) > _PIVOT_TOL:
                    swap = j
                    break
            if swap >= 0:
                basis[i] = swap
                i += 1
            else:
                full = np.delete(full, i, axis=0)
                rhs = np.delete(rhs, i)
                basis = np.delete(basis, i)
        full = full[:, :n + m1]

    p2 = np.zeros(n + m1)
    p2[:n] = c
    status, xb = _run_simplex(full, rhs, basis, p2)
    if status == "unbounded":
        return LpResult("unbounded")
    z = np.zeros(n + m1)
    z[basis] = xb
    x = z[:n] + lo
    return LpResult("optimal", float(c @ x), x)


# -- node improvement ---------------------------------------------------------


@dataclass
class NodeImprovement:
    """Replacement rows for one node, with the achieved margin."""

    agent: int
    node: int
    epsilon: float
    action_selection: np.ndarray   # (C, A)
    node_transition: np.ndarray    # (C, A, O, Q)


@dataclass
class BpiConfig:
    max_sweeps: int = 200
    improvement_threshold: float = 1e-9
    restarts: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def _others_product(policy: JointPolicy, agent: int, transitions: bool
                    ) -> np.ndarray:
    """Product of the other agents' tables over their own joint spaces."""
    others = [f for i, f in enumerate(policy.controllers) if i != agent]
    c = policy.device_size
    qd = tuple(f.num_nodes for f in others)
    ad = tuple(f.num_actions for f in others)
    od = tuple(f.num_observations for f in others)
    qm = int(np.prod(qd)) if qd else 1
    am = int(np.prod(ad)) if ad else 1
    om = int(np.prod(od)) if od else 1
    if transitions:
        out = np.ones((c, qm, am, om, qm))
    else:
        out = np.ones((c, qm, am))
    if not others:
        return out
    qc = joint_components(qd)
    ac = joint_components(ad)
    oc = joint_components(od)
    crange = np.arange(c)
    for j, fsc in enumerate(others):
        if transitions:
            out *= fsc.node_transition[np.ix_(
                crange, qc[:, j], ac[:, j], oc[:, j], qc[:, j])]
        else:
            out *= fsc.action_selection[np.ix_(crange, qc[:, j], ac[:, j])]
    return out


def _split_joint_axis(arr: np.ndarray, axis: int, dims: tuple[int, ...],
                      agent: int) -> np.ndarray:
    """Factor a flat joint axis into (agent's component, the rest)."""
    shape = arr.shape
    expanded = arr.reshape(shape[:axis] + tuple(dims) + shape[axis + 1:])
    moved = np.moveaxis(expanded, axis + agent, axis)
    rest = int(np.prod(dims)) // dims[agent]
    return moved.reshape(shape[:axis] + (dims[agent], rest) + shape[axis + 1:])


def _lookahead_coefficients(model: DecPomdp, policy: JointPolicy,
                            table: ValueTable, agent: int):
    """alpha[c,m,s,x] and beta[c,m,s,x,y,k] for agent's improvement LPs.

    m ranges over the other agents' joint nodes, x/y/k over the agent's own
    actions, observations, and candidate next nodes.  beta already carries
    the discount factor.
    """
    ad = model.action_dims
    od = model.observation_dims
    nd = policy.node_dims
    psi_m = _others_product(policy, agent, transitions=False)
    eta_m = _others_product(policy, agent, transitions=True)
    p_r = _split_joint_axis(model.transition, 1, ad, agent)
    om_r = _split_joint_axis(
        _split_joint_axis(model.observation_fn, 0, ad, agent), 3, od, agent)
    r_r = _split_joint_axis(model.reward, 1, ad, agent)
    w = policy.device_matrix()
    vw = np.einsum("cd,dpt->cpt", w, table.values)
    vw_r = _split_joint_axis(vw, 1, nd, agent)

    alpha = np.einsum("cma,sxa->cmsx", psi_m, r_r)
    beta = model.discount * np.einsum(
        "cma,sxat,xatyo,cmaoz,ckzt->cmsxyk",
        psi_m, p_r, om_r, eta_m, vw_r, optimize=True)
    return alpha, beta


def improve_node(model: DecPomdp, policy: JointPolicy, table: ValueTable,
                 agent: int, node: int) -> NodeImprovement:
    """Best uniform-margin replacement rows for one node of one agent."""
    dims_match(model, policy)
    if not 0 <= agent < policy.num_agents:
        raise ValueError(f"agent index {agent} out of range")
    fsc = policy.controllers[agent]
    if not 0 <= node < fsc.num_nodes:
        raise ValueError(f"node index {node} out of range for agent {agent}")

    alpha, beta = _lookahead_coefficients(model, policy, table, agent)
    c_dev = policy.device_size
    n_act = fsc.num_actions
    n_obs = fsc.num_observations
    n_nodes = fsc.num_nodes
    v_r = _split_joint_axis(table.values, 1, policy.node_dims, agent)
    v_node = v_r[:, node]          # (C, Qm, S)

    def psi_var(c: int, x: int) -> int:
        return 1 + c * n_act + x

    def eta_var(c: int, x: int, y: int, k: int) -> int:
        return 1 + c_dev * n_act + ((c * n_act + x) * n_obs + y) * n_nodes + k

    nvars = 1 + c_dev * n_act + c_dev * n_act * n_obs * n_nodes

    eq_rows = []
    eq_rhs = []
    for c in range(c_dev):
        row = np.zeros(nvars)
        for x in range(n_act):
            row[psi_var(c, x)] = 1.0
        eq_rows.append(row)
        eq_rhs.append(1.0)
    for c in range(c_dev):
        for x in range(n_act):
            for y in range(n_obs):
                row = np.zeros(nvars)
                row[psi_var(c, x)] = -1.0
                for k in range(n_nodes):
                    row[eta_var(c, x, y, k)] = 1.0
                eq_rows.append(row)
                eq_rhs.append(0.0)

    qm = alpha.shape[1]
    ub_rows = []
    ub_rhs = []
    for c in range(c_dev):
        for m in range(qm):
            for s in range(model.num_states):
                row = np.zeros(nvars)
                row[0] = 1.0
                for x in range(n_act):
                    row[psi_var(c, x)] = -alpha[c, m, s, x]
                    for y in range(n_obs):
                        for k in range(n_nodes):
                            row[eta_var(c, x, y, k)] = -beta[c, m, s, x, y, k]
                ub_rows.append(row)
                ub_rhs.append(-float(v_node[c, m, s]))

    obj = np.zeros(nvars)
    obj[0] = 1.0
    result = solve_lp(LpProblem(
        objective=obj,
        a_ub=np.array(ub_rows), b_ub=np.array(ub_rhs),
        a_eq=np.array(eq_rows), b_eq=np.array(eq_rhs)))
    if result.status != "optimal":  # pragma: no cover - always feasible
        raise RuntimeError(
            f"node improvement LP came back {result.status}; the inputs "
            f"are internally inconsistent")

    eps = float(result.x[0])
    new_psi = np.empty((c_dev, n_act))
    new_eta = np.empty((c_dev, n_act, n_obs, n_nodes))
    for c in range(c_dev):
        for x in range(n_act):
            new_psi[c, x] = result.x[psi_var(c, x)]
            for y in range(n_obs):
                joint = np.array([result.x[eta_var(c, x, y, k)]
                                  for k in range(n_nodes)])
                total = joint.sum()
                if total > 1e-12:
                    new_eta[c, x, y] = joint / total
                else:
                    # Action never taken by the candidate: keep the old row.
                    new_eta[c, x, y] = fsc.node_transition[c, node, x, y]
    row_sums = new_psi.sum(axis=1, keepdims=True)
    new_psi /= row_sums
    return NodeImprovement(agent=agent, node=node, epsilon=eps,
                           action_selection=new_psi, node_transition=new_eta)


def apply_improvement(policy: JointPolicy, imp: NodeImprovement) -> JointPolicy:
    """New policy with the improved node's rows swapped in."""
    out = policy.copy()
    fsc = out.controllers[imp.agent]
    fsc.action_selection[:, imp.node, :] = imp.action_selection
    fsc.node_transition[:, imp.node, :, :, :] = imp.node_transition
    return out


def solve_bpi(model: DecPomdp, nodes_per_agent: int, device_size: int,
              config: BpiConfig) -> tuple[JointPolicy, SolveReport]:
    """Best-of-restarts bounded policy iteration."""
    t0 = time.perf_counter()
    best_policy = None
    best_idx = -1
    records: list[RestartRecord] = []
    for krun in range(config.restarts):
        seed = config.seed + krun
        rt0 = time.perf_counter()
        policy = random_deterministic(model, nodes_per_agent, device_size,
                                      seed)
        table = evaluate(model, policy)
        trace = [objective(model, policy, table)]
        sweeps = 0
        last_eps = 0.0
        clean = False
        while sweeps < config.max_sweeps:
            sweeps += 1
            improved = False
            last_eps = 0.0
            for agent in range(policy.num_agents):
                for node in range(policy.controllers[agent].num_nodes):
                    imp = improve_node(model, policy, table, agent, node)
                    last_eps = max(last_eps, imp.epsilon)
                    if imp.epsilon > config.improvement_threshold:
                        policy = apply_improvement(policy, imp)
                        table = evaluate(model, policy)
                        trace.append(objective(model, policy, table))
                        improved = True
            if not improved:
                clean = True
                break
        records.append(RestartRecord(
            seed=seed,
            objective=trace[-1],
            iterations=sweeps,
            stationarity=last_eps,
            bellman_residual=bellman_residual(model, policy, table),
            time_s=time.perf_counter() - rt0,
            converged=clean,
            trace=trace,
        ))
        if best_idx < 0 or records[-1].objective > records[best_idx].objective:
            best_policy, best_idx = policy, krun
    report = SolveReport(
        best_objective=records[best_idx].objective,
        best_index=best_idx,
        restarts=records,
        wall_time_s=time.perf_counter() - t0,
    )
    return best_policy, report
