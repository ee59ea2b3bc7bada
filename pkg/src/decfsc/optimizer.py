"""Projected gradient ascent over controller parameters.

The reduced search space is the set of row-stochastic policy tables (every
action-selection, node-transition, and device row lives on a probability
simplex); values are eliminated by exact evaluation, so the objective of a
candidate point is one linear solve.  Each iteration takes an ascent step
along the exact adjoint gradient with every simplex row's component capped
to unit length (huge early gradients would otherwise snap each row to a
vertex in one jump), projects every row back onto its simplex (Euclidean
projection, sort-based), and accepts the step under an Armijo
sufficient-increase test with geometric backtracking measured against the
raw directional derivative.  Accepted objectives never decrease, and
stationarity is measured by the projected-gradient mapping
|P(theta + g) - theta| with the uncapped gradient.

Multi-restart wrappers draw a fresh random deterministic controller per
restart (seed + restart index) and keep the best local optimum, which is
the standard reporting protocol for this family of solvers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import Fsc, JointPolicy, random_deterministic
from .evaluation import bellman_residual, evaluate, objective, value_and_gradient
from .model import DecPomdp


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex.

    Sort-based algorithm; ties in the support threshold resolve
    deterministically through the descending sort.  O(n log n).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("project_simplex expects a non-empty 1-D vector")
    return _project_rows(v[None, :])[0]


def _project_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise simplex projection of a 2-D array."""
    n = rows.shape[1]
    u = np.sort(rows, axis=1)[:, ::-1]
    cssv = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - cssv / ind > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = cssv[np.arange(rows.shape[0]), rho] / (rho + 1)
    return np.maximum(rows - theta[:, None], 0.0)


def _project_table(arr: np.ndarray) -> np.ndarray:
    flat = arr.reshape(-1, arr.shape[-1])
    return _project_rows(flat).reshape(arr.shape)


@dataclass
class NlpConfig:
    """Knobs for the ascent and the restart protocol."""

    max_iterations: int = 2000
    gradient_tolerance: float = 1e-6
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    armijo_constant: float = 1e-4
    min_step: float = 1e-12
    restarts: int = 10
    seed: int = 0
    device_size: int = 1

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0.0 < self.armijo_constant < 1.0:
            raise ValueError("armijo_constant must lie in (0, 1)")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.device_size < 1:
            raise ValueError("device_size must be >= 1")


@dataclass
class RestartRecord:
    """Outcome of one ascent run from one random initial controller."""

    seed: int
    objective: float
    iterations: int
    stationarity: float
    bellman_residual: float
    time_s: float
    converged: bool
    trace: list[float] = field(default_factory=list)


@dataclass
class SolveReport:
    """Best-of-restarts summary; restart k used seed config.seed + k."""

    best_objective: float
    best_index: int
    restarts: list[RestartRecord]
    wall_time_s: float

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.restarts]

    @property
    def mean_objective(self) -> float:
        return float(np.mean(self.objectives))

    @property
    def min_objective(self) -> float:
        return float(np.min(self.objectives))

    @property
    def max_objective(self) -> float:
        return float(np.max(self.objectives))

    @property
    def mean_time_s(self) -> float:
        return float(np.mean([r.time_s for r in self.restarts]))


def _policy_arrays(policy: JointPolicy) -> list[np.ndarray]:
    out = [f.action_selection for f in policy.controllers]
    out += [f.node_transition for f in policy.controllers]
    if policy.device is not None:
        out.append(policy.device.transition)
    return out


def _rebuild(policy: JointPolicy, arrays: list[np.ndarray]) -> JointPolicy:
    n = policy.num_agents
    controllers = [
        Fsc(arrays[i], arrays[n + i], policy.controllers[i].initial_node)
        for i in range(n)
    ]
    device = None
    if policy.device is not None:
        device = replace(policy.device, transition=arrays[2 * n])
    return JointPolicy(controllers, device)


def _step_and_project(policy: JointPolicy, grad, step: float) -> JointPolicy:
    arrays = [
        _project_table(cur + step * g)
        for cur, g in zip(_policy_arrays(policy), grad.arrays())
    ]
    return _rebuild(policy, arrays)


def _capped_direction(grad) -> list[np.ndarray]:
    """Gradient with each simplex row's component capped to unit length.

    A discounted objective produces gradients orders of magnitude larger
    than any row's simplex, so stepping along the raw gradient would snap
    every row to a vertex in one jump and strand the ascent at whatever
    vertex-stationary point that greedy walk reaches.  Capping per row keeps
    the line search local in every coordinate block while leaving
    already-small components untouched.
    """
    out = []
    for g in grad.arrays():
        flat = g.reshape(-1, g.shape[-1])
        norms = np.linalg.norm(flat, axis=1, keepdims=True)
        out.append((flat / np.maximum(1.0, norms)).reshape(g.shape))
    return out


def _step_along(policy: JointPolicy, direction: list[np.ndarray],
                step: float) -> JointPolicy:
    arrays = [
        _project_table(cur + step * d)
        for cur, d in zip(_policy_arrays(policy), direction)
    ]
    return _rebuild(policy, arrays)


def _gradient_inner(grad, policy_a: JointPolicy, policy_b: JointPolicy) -> float:
    """<g, a - b> over all policy tables."""
    total = 0.0
    for g, pa, pb in zip(grad.arrays(), _policy_arrays(policy_a),
                         _policy_arrays(policy_b)):
        total += float(np.sum(g * (pa - pb)))
    return total


def _projected_gradient_norm(policy: JointPolicy, grad) -> float:
    """Norm of the unit-step gradient mapping P(theta + g) - theta."""
    stepped = _step_and_project(policy, grad, 1.0)
    total = 0.0
    for pa, pb in zip(_policy_arrays(stepped), _policy_arrays(policy)):
        d = pa - pb
        total += float(np.sum(d * d))
    return float(np.sqrt(total))


def _ascend(model: DecPomdp, policy: JointPolicy, config: NlpConfig,
            seed: int) -> tuple[JointPolicy, RestartRecord]:
    t0 = time.perf_counter()
    j, table, grad = value_and_gradient(model, policy)
    trace = [j]
    iterations = 0
    stat = _projected_gradient_norm(policy, grad)
    converged = stat <= config.gradient_tolerance
    while not converged and iterations < config.max_iterations:
        # The Armijo gain and the stationarity measure use the raw
        # gradient; only the search direction is row-capped.
        direction = _capped_direction(grad)
        step = config.initial_step
        accepted = None
        while step >= config.min_step:
            cand = _step_along(policy, direction, step)
            j_cand = objective(model, cand, evaluate(model, cand))
            gain = _gradient_inner(grad, cand, policy)
            if gain > 0.0 and j_cand >= j + config.armijo_constant * gain:
                accepted = cand
                break
            step *= config.backtrack_factor
        if accepted is None:
            # Line search exhausted: no acceptable ascent step remains.
            break
        policy = accepted
        iterations += 1
        j, table, grad = value_and_gradient(model, policy)
        trace.append(j)
        stat = _projected_gradient_norm(policy, grad)
        converged = stat <= config.gradient_tolerance
    record = RestartRecord(
        seed=seed,
        objective=j,
        iterations=iterations,
        stationarity=stat,
        bellman_residual=bellman_residual(model, policy, table),
        time_s=time.perf_counter() - t0,
        converged=converged,
        trace=trace,
    )
    return policy, record


def solve_nlp(model: DecPomdp, nodes_per_agent: int, config: NlpConfig
              ) -> tuple[JointPolicy, SolveReport]:
    """Best policy over config.restarts gradient-ascent runs."""
    t0 = time.perf_counter()
    best_policy = None
    best_idx = -1
    records: list[RestartRecord] = []
    for k in range(config.restarts):
        seed = config.seed + k
        init = random_deterministic(model, nodes_per_agent,
                                    config.device_size, seed)
        policy, record = _ascend(model, init, config, seed)
        records.append(record)
        if best_idx < 0 or record.objective > records[best_idx].objective:
            best_policy, best_idx = policy, k
    report = SolveReport(
        best_objective=records[best_idx].objective,
        best_index=best_idx,
        restarts=records,
        wall_time_s=time.perf_counter() - t0,
    )
    return best_policy, report


def solve_restarts(model: DecPomdp, nodes_per_agent: int, config: NlpConfig
                   ) -> SolveReport:
    """Per-seed breakdown: one single-restart solve per derived seed.

    Seed derivation matches solve_nlp (config.seed + index), so with equal
    configs the two produce the same runs; restarts=1 reduces to a single
    solve_nlp call.
    """
    t0 = time.perf_counter()
    records = []
    for k in range(config.restarts):
        single = replace(config, restarts=1, seed=config.seed + k)
        _, rep = solve_nlp(model, nodes_per_agent, single)
        records.append(rep.restarts[0])
    best_idx = max(range(len(records)), key=lambda i: records[i].objective)
    return SolveReport(
        best_objective=records[best_idx].objective,
        best_index=best_idx,
        restarts=records,
        wall_time_s=time.perf_counter() - t0,
    )
