"""Decentralized POMDP model container and joint-index utilities.

A model couples a shared hidden Markov chain with per-agent action and
observation alphabets.  Dynamics are stored densely over the *joint* action
and observation spaces:

    transition[s, aj, s']     P(s' | s, joint action aj)
    observation_fn[aj, s', oj] P(joint observation oj | s', joint action aj)
    reward[s, aj]              immediate joint reward

Joint indices enumerate per-agent tuples lexicographically with the last
agent's index varying fastest, i.e. C-order over the per-agent dimensions.
``flatten_joint``/``unflatten_joint`` are the bijection between tuples and
flat indices, and all dense tensors in this package use that convention.

Construction performs structural (shape) checks only.  Probabilistic
invariants are checked by :func:`validate`, which reports violations instead
of raising so that callers can collect and display all of them at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

# Tolerance for stochasticity checks (row sums, entry ranges).
PROB_TOL = 1e-9


@dataclass(frozen=True)
class Violation:
    """A single failed model invariant.

    kind: short machine-readable tag ("transition-row-sum", ...).
    location: index tuple of the offending row or entry.
    residual: how far the quantity is from its required value.
    """

    kind: str
    location: tuple
    residual: float
    message: str

    def __str__(self) -> str:
        return self.message


@dataclass
class DecPomdp:
    """Immutable n-agent DEC-POMDP with dense joint-space dynamics.

    Arrays are converted to float64 and frozen (writeable=False) on
    construction; treat instances as read-only.
    """

    states: list[str]
    actions: list[list[str]]        # one label list per agent
    observations: list[list[str]]   # one label list per agent
    transition: np.ndarray          # (S, Aj, S)
    observation_fn: np.ndarray      # (Aj, S, Oj)
    reward: np.ndarray              # (S, Aj)
    discount: float
    start: np.ndarray               # (S,)
    name: str = ""

    def __post_init__(self) -> None:
        self.transition = np.ascontiguousarray(self.transition, dtype=np.float64)
        self.observation_fn = np.ascontiguousarray(self.observation_fn, dtype=np.float64)
        self.reward = np.ascontiguousarray(self.reward, dtype=np.float64)
        self.start = np.ascontiguousarray(self.start, dtype=np.float64)
        self.discount = float(self.discount)

        if not self.actions or not self.observations:
            raise ValueError("model needs at least one agent")
        if len(self.actions) != len(self.observations):
            raise ValueError(
                f"{len(self.actions)} action lists but "
                f"{len(self.observations)} observation lists"
            )
        s = self.num_states
        aj = self.num_joint_actions
        oj = self.num_joint_observations
        if self.transition.shape != (s, aj, s):
            raise ValueError(
                f"transition shape {self.transition.shape}, expected {(s, aj, s)}"
            )
        if self.observation_fn.shape != (aj, s, oj):
            raise ValueError(
                f"observation_fn shape {self.observation_fn.shape}, "
                f"expected {(aj, s, oj)}"
            )
        if self.reward.shape != (s, aj):
            raise ValueError(f"reward shape {self.reward.shape}, expected {(s, aj)}")
        if self.start.shape != (s,):
            raise ValueError(f"start shape {self.start.shape}, expected {(s,)}")

        for arr in (self.transition, self.observation_fn, self.reward, self.start):
            arr.setflags(write=False)

    # -- derived sizes ------------------------------------------------------

    @property
    def num_agents(self) -> int:
        return len(self.actions)

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    @property
    def observation_dims(self) -> tuple[int, ...]:
        return tuple(len(o) for o in self.observations)

    @property
    def num_joint_actions(self) -> int:
        return int(np.prod(self.action_dims))

    @property
    def num_joint_observations(self) -> int:
        return int(np.prod(self.observation_dims))


# -- joint enumeration -------------------------------------------------------


def joint_actions(model: DecPomdp) -> list[tuple[int, ...]]:
    """All joint action tuples, last agent's index fastest."""
    return list(itertools.product(*(range(d) for d in model.action_dims)))


def joint_observations(model: DecPomdp) -> list[tuple[int, ...]]:
    """All joint observation tuples, last agent's index fastest."""
    return list(itertools.product(*(range(d) for d in model.observation_dims)))


def flatten_joint(index: tuple[int, ...], dims: tuple[int, ...]) -> int:
    """Flat index of a per-agent tuple under the C-order convention."""
    if len(index) != len(dims):
        raise ValueError(f"index {index} does not match dims {dims}")
    flat = 0
    for k, d in zip(index, dims):
        if not 0 <= k < d:
            raise ValueError(f"component {k} out of range for dims {dims}")
        flat = flat * d + k
    return flat


def unflatten_joint(flat: int, dims: tuple[int, ...]) -> tuple[int, ...]:
    """Inverse of :func:`flatten_joint`."""
    size = int(np.prod(dims))
    if not 0 <= flat < size:
        raise ValueError(f"flat index {flat} out of range for dims {dims}")
    out = []
    for d in reversed(dims):
        out.append(flat % d)
        flat //= d
    return tuple(reversed(out))


def joint_components(dims: tuple[int, ...]) -> np.ndarray:
    """Decode table of shape (prod(dims), n): row j holds unflatten(j)."""
    grids = np.indices(dims).reshape(len(dims), -1)
    return np.ascontiguousarray(grids.T.astype(np.int64))


# -- validation ---------------------------------------------------------------


def _check_rows(arr: np.ndarray, axis_label: str, kind: str,
                out: list[Violation]) -> None:
    sums = arr.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
    for idx in bad:
        loc = tuple(int(v) for v in idx)
        res = float(abs(sums[tuple(idx)] - 1.0))
        out.append(Violation(
            kind=kind, location=loc, residual=res,
            message=f"{axis_label} row {loc} sums to {sums[tuple(idx)]:.12g} "
                    f"(residual {res:.3g})"))


def _check_range(arr: np.ndarray, axis_label: str, kind: str,
                 out: list[Violation]) -> None:
    bad = np.argwhere((arr < -PROB_TOL) | (arr > 1.0 + PROB_TOL))
    for idx in bad:
        loc = tuple(int(v) for v in idx)
        val = float(arr[tuple(idx)])
        res = max(0.0 - val, val - 1.0)
        out.append(Violation(
            kind=kind, location=loc, residual=res,
            message=f"{axis_label} entry {loc} = {val:.12g} outside [0, 1] "
                    f"(residual {res:.3g})"))


def validate(model: DecPomdp) -> list[Violation]:
    """Check every probabilistic invariant; return all violations found.

    An empty list means the model is well formed.  Pure: same model in,
    same report out.
    """
    report: list[Violation] = []

    _check_range(model.transition, "transition", "transition-range", report)
    _check_rows(model.transition, "transition", "transition-row-sum", report)
    _check_range(model.observation_fn, "observation", "observation-range", report)
    _check_rows(model.observation_fn, "observation", "observation-row-sum", report)
    _check_range(model.start, "start", "start-range", report)

    ssum = float(model.start.sum())
    if abs(ssum - 1.0) > PROB_TOL:
        report.append(Violation(
            kind="start-sum", location=(), residual=abs(ssum - 1.0),
            message=f"start distribution sums to {ssum:.12g}"))

    if not (0.0 <= model.discount < 1.0):
        report.append(Violation(
            kind="discount-range", location=(), residual=abs(model.discount),
            message=f"discount out of range: {model.discount!r} not in [0, 1)"))

    if not np.all(np.isfinite(model.reward)):
        loc = tuple(int(v) for v in np.argwhere(~np.isfinite(model.reward))[0])
        report.append(Violation(
            kind="reward-finite", location=loc, residual=math.inf,
            message=f"reward entry {loc} is not finite"))

    return report
