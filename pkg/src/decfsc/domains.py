"""Built-in two-agent benchmark models.

Three classics, each produced by a pure generator over a small parameter
dataclass so the exact instance is inspectable and reproducible:

broadcast
    Two network nodes share one channel.  Each step each node may send or
    wait; if both send the transmission collides and nothing gets through,
    if exactly one sends a full buffer it earns reward 1.  Buffers refill
    independently (defaults 0.9 and 0.1).  Observations report the channel:
    collision, a lone transmission ("clear"), or silence tagged with the
    node's own buffer state.  A fifth "null" symbol is reserved and never
    emitted, giving the documented 4/2/5 state/action/observation counts.

recycling
    Two recycling robots with two-level batteries.  Searching for small
    cans pays 2 per robot; the large can pays 5 once and only when both
    robots go for it together.  Searching risks battery degradation, and
    searching on a low battery risks a depletion event: the robot is hauled
    back to the charger (battery high again) at a fixed cost, folded into
    the reward as an expected value.  Each robot observes exactly its own
    new battery level.

tiger
    Two agents face two doors with a tiger behind one.  Listening is cheap
    and keeps the world still; opening any door pays out by the joint
    choice and resets the tiger uniformly.  Hearing is informative (and
    independent across agents) only when both agents listen.  Reward
    numbers follow the common two-agent convention: both opening the good
    door is best, splitting across doors is worst.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DecPomdp, joint_components


@dataclass(frozen=True)
class BroadcastParams:
    arrival_probs: tuple[float, float] = (0.9, 0.1)
    success_reward: float = 1.0
    discount: float = 0.9

    def __post_init__(self) -> None:
        for p in self.arrival_probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"arrival probability {p} outside [0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount out of range: {self.discount}")


@dataclass(frozen=True)
class RecyclingParams:
    small_reward: float = 2.0
    large_reward: float = 5.0
    depletion_penalty: float = 3.0
    degrade_prob_small: float = 0.3
    degrade_prob_large: float = 0.5
    deplete_prob_small: float = 0.3
    deplete_prob_large: float = 0.6
    discount: float = 0.9

    def __post_init__(self) -> None:
        probs = (self.degrade_prob_small, self.degrade_prob_large,
                 self.deplete_prob_small, self.deplete_prob_large)
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount out of range: {self.discount}")


@dataclass(frozen=True)
class TigerParams:
    listen_accuracy: float = 0.85
    both_listen_reward: float = -2.0
    both_open_good: float = 20.0
    both_open_bad: float = -50.0
    open_split: float = -100.0
    listen_other_good: float = 9.0
    listen_other_bad: float = -101.0
    discount: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 <= self.listen_accuracy <= 1.0:
            raise ValueError(
                f"listen accuracy {self.listen_accuracy} outside [0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount out of range: {self.discount}")


def broadcast(params: BroadcastParams | None = None) -> DecPomdp:
    """Two-node shared-channel model; starts with only node 1 loaded."""
    p = params or BroadcastParams()
    states = ["10", "11", "00", "01"]
    # State label convention: first digit is node 1's buffer (1 = full).
    # "10" leads so the start distribution reads naturally; order is
    # otherwise immaterial.
    actions = [["send", "wait"], ["send", "wait"]]
    obs = [["quiet_empty", "quiet_full", "clear", "collision", "null"]] * 2
    send = 0

    acomp = joint_components((2, 2))
    n_aj = 4
    trans = np.zeros((4, n_aj, 4))
    obs_fn = np.zeros((n_aj, 4, 25))
    reward = np.zeros((4, n_aj))

    buffers = [(int(lab[0]), int(lab[1])) for lab in states]
    for si, b in enumerate(buffers):
        for aj in range(n_aj):
            a = (int(acomp[aj, 0]), int(acomp[aj, 1]))
            collision = a[0] == send and a[1] == send
            delivered = [b[i] == 1 and a[i] == send and not collision
                         for i in range(2)]
            reward[si, aj] = p.success_reward * sum(delivered)
            # Per-node probability of being full next step: a delivered
            # packet vacates the buffer, which then refills at the arrival
            # rate; an undelivered full buffer stays full; an empty buffer
            # fills at the arrival rate no matter what was attempted.
            full_next = [
                p.arrival_probs[i] if (b[i] == 0 or delivered[i]) else 1.0
                for i in range(2)
            ]
            for ti, nb in enumerate(buffers):
                prob = 1.0
                for i in range(2):
                    prob *= full_next[i] if nb[i] == 1 else 1.0 - full_next[i]
                trans[si, aj, ti] = prob

    # Channel observations depend only on the joint action, except in a
    # quiet step where each node checks its own (new) buffer.
    for aj in range(n_aj):
        a = (int(acomp[aj, 0]), int(acomp[aj, 1]))
        n_send = sum(1 for x in a if x == send)
        for ti, nb in enumerate(buffers):
            if n_send == 2:
                o = (3, 3)
            elif n_send == 1:
                o = (2, 2)
            else:
                o = tuple(1 if nb[i] == 1 else 0 for i in range(2))
            obs_fn[aj, ti, o[0] * 5 + o[1]] = 1.0

    start = np.zeros(4)
    start[states.index("10")] = 1.0
    return DecPomdp(states=states, actions=actions, observations=obs,
                    transition=trans, observation_fn=obs_fn, reward=reward,
                    discount=p.discount, start=start, name="broadcast")


def recycling(params: RecyclingParams | None = None) -> DecPomdp:
    """Two recycling robots; both start with high batteries."""
    p = params or RecyclingParams()
    states = ["hh", "hl", "lh", "ll"]
    action_labels = ["small", "large", "recharge"]
    actions = [action_labels, action_labels]
    obs = [["high", "low"], ["high", "low"]]
    small, large, recharge = 0, 1, 2
    high, low = "h", "l"

    acomp = joint_components((3, 3))
    n_aj = 9
    trans = np.zeros((4, n_aj, 4))
    obs_fn = np.zeros((n_aj, 4, 4))
    reward = np.zeros((4, n_aj))

    def battery_next(level: str, act: int) -> tuple[float, float]:
        """(P(high next), P(depletion event)) for one robot."""
        if act == recharge:
            return 1.0, 0.0
        degrade = (p.degrade_prob_small if act == small
                   else p.degrade_prob_large)
        deplete = (p.deplete_prob_small if act == small
                   else p.deplete_prob_large)
        if level == high:
            return 1.0 - degrade, 0.0
        # Low battery: a depletion event sends the robot back to the
        # charger, so it re-emerges with a high battery.
        return deplete, deplete

    for si, lab in enumerate(states):
        for aj in range(n_aj):
            a = (int(acomp[aj, 0]), int(acomp[aj, 1]))
            r = 0.0
            p_high = [0.0, 0.0]
            for i in range(2):
                p_high[i], p_dep = battery_next(lab[i], a[i])
                if a[i] == small:
                    r += p.small_reward
                r -= p.depletion_penalty * p_dep
            if a[0] == large and a[1] == large:
                r += p.large_reward
            reward[si, aj] = r
            for ti, tlab in enumerate(states):
                prob = 1.0
                for i in range(2):
                    prob *= p_high[i] if tlab[i] == high else 1.0 - p_high[i]
                trans[si, aj, ti] = prob

    # Each robot observes its own new battery level exactly.
    for aj in range(n_aj):
        for ti, tlab in enumerate(states):
            o = tuple(0 if tlab[i] == high else 1 for i in range(2))
            obs_fn[aj, ti, o[0] * 2 + o[1]] = 1.0

    start = np.zeros(4)
    start[states.index("hh")] = 1.0
    return DecPomdp(states=states, actions=actions, observations=obs,
                    transition=trans, observation_fn=obs_fn, reward=reward,
                    discount=p.discount, start=start, name="recycling")


def tiger(params: TigerParams | None = None) -> DecPomdp:
    """Two-agent tiger; the tiger starts behind either door equally."""
    p = params or TigerParams()
    states = ["tiger_left", "tiger_right"]
    action_labels = ["listen", "open_left", "open_right"]
    actions = [action_labels, action_labels]
    obs = [["hear_left", "hear_right"], ["hear_left", "hear_right"]]
    listen, open_left, open_right = 0, 1, 2

    acomp = joint_components((3, 3))
    n_aj = 9
    trans = np.zeros((2, n_aj, 2))
    obs_fn = np.zeros((n_aj, 2, 4))
    reward = np.zeros((2, n_aj))

    def pair_reward(tiger_side: int, a: tuple[int, int]) -> float:
        good = open_right if tiger_side == 0 else open_left
        bad = open_left if tiger_side == 0 else open_right
        if a == (listen, listen):
            return p.both_listen_reward
        if a[0] == good and a[1] == good:
            return p.both_open_good
        if a[0] == bad and a[1] == bad:
            return p.both_open_bad
        opens = [x for x in a if x != listen]
        if len(opens) == 2:
            # One good door and one bad door.
            return p.open_split
        # Exactly one agent listened.
        return p.listen_other_good if opens[0] == good else p.listen_other_bad

    for aj in range(n_aj):
        a = (int(acomp[aj, 0]), int(acomp[aj, 1]))
        both_listen = a == (listen, listen)
        for si in range(2):
            reward[si, aj] = pair_reward(si, a)
            if both_listen:
                trans[si, aj, si] = 1.0
            else:
                trans[si, aj, :] = 0.5
        for ti in range(2):
            correct = ti  # hear_left when tiger_left, hear_right otherwise
            for o1 in range(2):
                for o2 in range(2):
                    if both_listen:
                        p1 = p.listen_accuracy if o1 == correct \
                            else 1.0 - p.listen_accuracy
                        p2 = p.listen_accuracy if o2 == correct \
                            else 1.0 - p.listen_accuracy
                    else:
                        p1 = p2 = 0.5
                    obs_fn[aj, ti, o1 * 2 + o2] = p1 * p2

    start = np.full(2, 0.5)
    return DecPomdp(states=states, actions=actions, observations=obs,
                    transition=trans, observation_fn=obs_fn, reward=reward,
                    discount=p.discount, start=start, name="tiger")


BUILDERS = {
    "broadcast": broadcast,
    "recycling": recycling,
    "tiger": tiger,
}


def build(name: str) -> DecPomdp:
    """Named default-parameter benchmark; KeyError lists the valid names."""
    try:
        factory = BUILDERS[name]
    except KeyError:
        raise KeyError(
            f"unknown domain {name!r}; choose from {sorted(BUILDERS)}"
        ) from None
    return factory()
