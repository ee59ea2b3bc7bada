"""Text formats: model instances, policies, and an algebraic NLP export.

Instance grammar (line oriented, '#' starts a comment, blank lines ignored,
whitespace between tokens is free):

    agents: <n>
    discount: <float>
    values: reward|cost          # optional; cost negates rewards on load
    normalize: true|false        # optional; renormalize rows before checks
    states: <labels...>
    actions <i>: <labels...>     # agent index 1-based, one line per agent
    observations <i>: <labels...>
    start: <p...>                # one probability per state
    T: <a1> ... <an> : <s> : <s'> : <p>
    O: <a1> ... <an> : <s'> : <o1> ... <on> : <p>
    R: <a1> ... <an> : <s> : <r>

Unlisted T/O/R entries default to 0; duplicates are errors.  Parse and
semantic errors carry a 1-based line and column.  Policy files use integer
indices instead of labels since a policy is meaningful only next to a model:

    agents: <n>
    device: <C>                  # optional block, present iff correlated
    device-start: <c0>
    w <c>: <p...>
    agent <i>                    # sections in order, 1-based
    nodes: <Q>
    start: <q0>
    psi <q> [<c>]: <p over actions>
    eta <q> <a> <o> [<c>]: <p over next nodes>

Probabilities are written with 17 significant digits so round-trips are
exact to 1e-12 and better.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .controller import CorrelationDevice, Fsc, JointPolicy
from .model import DecPomdp, joint_components, validate

_TOKEN = re.compile(r"\S+")
_ROW_TOL = 1e-9


class ParseError(Exception):
    """Syntax or semantic failure with a 1-based source position."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _check_label(label: str, what: str) -> None:
    if not label or _TOKEN.fullmatch(label) is None or ":" in label \
            or "#" in label:
        raise ValueError(
            f"{what} label {label!r} is not writable (needs to be non-empty "
            f"with no whitespace, ':' or '#')")


def _tokens(text: str, base: int) -> list[tuple[str, int]]:
    """(token, 1-based column) pairs; base is the text's offset in the line."""
    return [(m.group(), base + m.start() + 1) for m in _TOKEN.finditer(text)]


def _fields(text: str, base: int) -> list[tuple[str, int]]:
    """Split on ':' keeping each field's offset within the line."""
    out = []
    start = 0
    while True:
        nxt = text.find(":", start)
        if nxt < 0:
            out.append((text[start:], base + start))
            return out
        out.append((text[start:nxt], base + start))
        start = nxt + 1


def _strip_comment(raw: str) -> str:
    cut = raw.find("#")
    return raw if cut < 0 else raw[:cut]


def _parse_float(token: str, line: int, col: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", line, col) from None


def _parse_int(token: str, line: int, col: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"bad {what} {token!r}", line, col) from None


# -- instance files -----------------------------------------------------------


@dataclass
class InstanceDocument:
    """Parsed instance text, one resolution step away from a model."""

    num_agents: int
    discount: float
    values_type: str
    normalize: bool
    states: list[str]
    actions: list[list[str]]
    observations: list[list[str]]
    start: np.ndarray
    transition_entries: list[tuple[int, int, int, float]]
    observation_entries: list[tuple[int, int, int, float]]
    reward_entries: list[tuple[int, int, float]]
    source_lines: dict = field(default_factory=dict)

    def resolve(self) -> DecPomdp:
        s = len(self.states)
        aj = int(np.prod([len(a) for a in self.actions]))
        oj = int(np.prod([len(o) for o in self.observations]))
        trans = np.zeros((s, aj, s))
        obs_fn = np.zeros((aj, s, oj))
        reward = np.zeros((s, aj))
        for si, a, s2, p in self.transition_entries:
            trans[si, a, s2] = p
        for a, s2, o, p in self.observation_entries:
            obs_fn[a, s2, o] = p
        for si, a, r in self.reward_entries:
            reward[si, a] = r
        if self.values_type == "cost":
            reward = -reward
        start = self.start.copy()
        if self.normalize:
            tsum = trans.sum(axis=-1, keepdims=True)
            np.divide(trans, tsum, out=trans, where=tsum > 0)
            osum = obs_fn.sum(axis=-1, keepdims=True)
            np.divide(obs_fn, osum, out=obs_fn, where=osum > 0)
            if start.sum() > 0:
                start = start / start.sum()
        model = DecPomdp(states=self.states, actions=self.actions,
                         observations=self.observations, transition=trans,
                         observation_fn=obs_fn, reward=reward,
                         discount=self.discount, start=start)
        violations = validate(model)
        if violations:
            raise self._semantic_error(violations[0])
        return model

    def _semantic_error(self, viol) -> ParseError:
        lines = self.source_lines
        eof = lines.get("eof", 1)

        def joint_action_labels(a: int) -> str:
            dims = tuple(len(x) for x in self.actions)
            comp = []
            rem = a
            for d in reversed(dims):
                comp.append(rem % d)
                rem //= d
            comp.reverse()
            return " ".join(self.actions[i][k] for i, k in enumerate(comp))

        kind, loc = viol.kind, viol.location
        if kind.startswith("transition") and len(loc) >= 2:
            si, a = loc[0], loc[1]
            where = lines.get(("T", si, a), eof)
            return ParseError(
                f"transition row 'T: {joint_action_labels(a)} : "
                f"{self.states[si]} : *' invalid: {viol.message}", where)
        if kind.startswith("observation") and len(loc) >= 2:
            a, s2 = loc[0], loc[1]
            where = lines.get(("O", a, s2), eof)
            return ParseError(
                f"observation row 'O: {joint_action_labels(a)} : "
                f"{self.states[s2]} : *' invalid: {viol.message}", where)
        if kind.startswith("start"):
            return ParseError(viol.message, lines.get("start", eof))
        if kind.startswith("discount"):
            return ParseError(viol.message, lines.get("discount", eof))
        return ParseError(viol.message, eof)


def _strides(dims: list[int]) -> list[int]:
    out = [1] * len(dims)
    for i in range(len(dims) - 2, -1, -1):
        out[i] = out[i + 1] * dims[i + 1]
    return out


def _lookup(label: str, table: list[str], line: int, col: int,
            what: str) -> int:
    try:
        return table.index(label)
    except ValueError:
        raise ParseError(f"unknown {what} label {label!r}", line, col) \
            from None


def parse_instance_document(text: str) -> InstanceDocument:
    headers: dict[str, tuple[list[tuple[str, int]], int]] = {}
    indexed: dict[tuple[str, int], tuple[list[tuple[str, int]], int]] = {}
    entries: list[tuple[str, list[tuple[str, int]], int]] = []
    n_lines = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        n_lines = lineno
        content = _strip_comment(raw)
        if not content.strip():
            continue
        colon = content.find(":")
        if colon < 0:
            first = _tokens(content, 0)[0]
            raise ParseError(f"expected ':' after {first[0]!r}",
                             lineno, first[1])
        head = _tokens(content[:colon], 0)
        if not head:
            raise ParseError("missing directive before ':'", lineno)
        key = head[0][0]
        body = content[colon + 1:]
        base = colon + 1

        if key in ("T", "O", "R"):
            if len(head) != 1:
                raise ParseError(f"unexpected token {head[1][0]!r} before "
                                 f"':'", lineno, head[1][1])
            entries.append((key, _fields(body, base), lineno))
        elif key in ("actions", "observations"):
            if len(head) != 2:
                raise ParseError(f"'{key}' needs an agent index", lineno,
                                 head[0][1])
            idx = _parse_int(head[1][0], lineno, head[1][1], "agent index")
            if (key, idx) in indexed:
                raise ParseError(f"duplicate '{key} {idx}:' line", lineno,
                                 head[0][1])
            indexed[(key, idx)] = (_tokens(body, base), lineno)
        elif key in ("agents", "discount", "values", "normalize", "states",
                     "start"):
            if len(head) != 1:
                raise ParseError(f"unexpected token {head[1][0]!r} before "
                                 f"':'", lineno, head[1][1])
            if key in headers:
                raise ParseError(f"duplicate '{key}:' line", lineno,
                                 head[0][1])
            headers[key] = (_tokens(body, base), lineno)
        else:
            raise ParseError(f"unknown directive {key!r}", lineno, head[0][1])

    eof = n_lines + 1

    def need(key: str) -> tuple[list[tuple[str, int]], int]:
        if key not in headers:
            raise ParseError(f"missing '{key}:' line", eof)
        return headers[key]

    toks, agents_line = need("agents")
    if len(toks) != 1:
        raise ParseError("'agents:' takes exactly one number", agents_line)
    n = _parse_int(toks[0][0], agents_line, toks[0][1], "agent count")
    if n < 1:
        raise ParseError("agent count must be at least 1", agents_line,
                         toks[0][1])

    toks, disc_line = need("discount")
    if len(toks) != 1:
        raise ParseError("'discount:' takes exactly one number", disc_line)
    discount = _parse_float(toks[0][0], disc_line, toks[0][1], "discount")

    values_type = "reward"
    if "values" in headers:
        toks, vline = headers["values"]
        if len(toks) != 1 or toks[0][0] not in ("reward", "cost"):
            raise ParseError("'values:' must be 'reward' or 'cost'", vline)
        values_type = toks[0][0]

    normalize = False
    if "normalize" in headers:
        toks, nline = headers["normalize"]
        if len(toks) != 1 or toks[0][0] not in ("true", "false"):
            raise ParseError("'normalize:' must be 'true' or 'false'", nline)
        normalize = toks[0][0] == "true"

    def label_list(toks: list[tuple[str, int]], line: int,
                   what: str) -> list[str]:
        if not toks:
            raise ParseError(f"empty {what} list", line)
        labels = []
        for tok, col in toks:
            if tok in labels:
                raise ParseError(f"duplicate {what} label {tok!r}", line, col)
            labels.append(tok)
        return labels

    toks, states_line = need("states")
    states = label_list(toks, states_line, "state")

    actions: list[list[str]] = []
    observations: list[list[str]] = []
    for key, store in (("actions", actions), ("observations", observations)):
        for i in range(1, n + 1):
            if (key, i) not in indexed:
                raise ParseError(f"missing '{key} {i}:' line", eof)
            toks, line = indexed[(key, i)]
            store.append(label_list(toks, line, f"agent-{i} {key[:-1]}"))
    for (key, i), (toks, line) in indexed.items():
        if not 1 <= i <= n:
            raise ParseError(
                f"'{key} {i}:' given but there are only {n} agents", line)

    toks, start_line = need("start")
    if len(toks) != len(states):
        raise ParseError(
            f"'start:' needs {len(states)} probabilities, got {len(toks)}",
            start_line)
    start = np.array([_parse_float(t, start_line, c, "start probability")
                      for t, c in toks])

    astrides = _strides([len(a) for a in actions])
    ostrides = _strides([len(o) for o in observations])
    source_lines: dict = {"eof": eof, "start": start_line,
                          "discount": disc_line}
    seen: dict[tuple, int] = {}
    t_entries: list[tuple[int, int, int, float]] = []
    o_entries: list[tuple[int, int, int, float]] = []
    r_entries: list[tuple[int, int, float]] = []

    def joint_index(toks: list[tuple[str, int]], tables: list[list[str]],
                    strides: list[int], line: int, what: str) -> int:
        if len(toks) != n:
            raise ParseError(
                f"expected {n} {what} labels, got {len(toks)}", line,
                toks[0][1] if toks else 1)
        flat = 0
        for i, (tok, col) in enumerate(toks):
            flat += strides[i] * _lookup(tok, tables[i], line, col,
                                         f"agent-{i + 1} {what}")
        return flat

    def single(fields: list[tuple[str, int]], k: int, line: int,
               what: str) -> tuple[str, int]:
        toks = _tokens(fields[k][0], fields[k][1])
        if len(toks) != 1:
            raise ParseError(f"expected one {what}", line,
                             fields[k][1] + 1)
        return toks[0]

    for key, fields_, lineno in entries:
        want = {"T": 4, "O": 4, "R": 3}[key]
        if len(fields_) != want:
            raise ParseError(
                f"'{key}:' entry needs {want} ':'-separated fields, got "
                f"{len(fields_)}", lineno, fields_[0][1] + 1)
        a_toks = _tokens(fields_[0][0], fields_[0][1])
        a = joint_index(a_toks, actions, astrides, lineno, "action")
        if key == "T":
            tok, col = single(fields_, 1, lineno, "state label")
            si = _lookup(tok, states, lineno, col, "state")
            tok, col = single(fields_, 2, lineno, "state label")
            s2 = _lookup(tok, states, lineno, col, "state")
            tok, col = single(fields_, 3, lineno, "probability")
            p = _parse_float(tok, lineno, col, "probability")
            dup_key = ("T", si, a, s2)
            loc_key = ("T", si, a)
            t_entries.append((si, a, s2, p))
        elif key == "O":
            tok, col = single(fields_, 1, lineno, "state label")
            s2 = _lookup(tok, states, lineno, col, "state")
            o_toks = _tokens(fields_[2][0], fields_[2][1])
            o = joint_index(o_toks, observations, ostrides, lineno,
                            "observation")
            tok, col = single(fields_, 3, lineno, "probability")
            p = _parse_float(tok, lineno, col, "probability")
            dup_key = ("O", a, s2, o)
            loc_key = ("O", a, s2)
            o_entries.append((a, s2, o, p))
        else:
            tok, col = single(fields_, 1, lineno, "state label")
            si = _lookup(tok, states, lineno, col, "state")
            tok, col = single(fields_, 2, lineno, "reward")
            r = _parse_float(tok, lineno, col, "reward")
            dup_key = ("R", si, a)
            loc_key = None
            r_entries.append((si, a, r))
        if dup_key in seen:
            raise ParseError(
                f"duplicate '{key}:' entry (first at line {seen[dup_key]})",
                lineno)
        seen[dup_key] = lineno
        if loc_key is not None and loc_key not in source_lines:
            source_lines[loc_key] = lineno

    return InstanceDocument(
        num_agents=n, discount=discount, values_type=values_type,
        normalize=normalize, states=states, actions=actions,
        observations=observations, start=start,
        transition_entries=t_entries, observation_entries=o_entries,
        reward_entries=r_entries, source_lines=source_lines)


def parse_instance(text: str) -> DecPomdp:
    """Text to model; raises ParseError with position on any failure."""
    return parse_instance_document(text).resolve()


def write_instance(model: DecPomdp) -> str:
    """Model to text; parse_instance(write_instance(m)) == m entrywise."""
    for lab in model.states:
        _check_label(lab, "state")
    for i, labs in enumerate(model.actions):
        for lab in labs:
            _check_label(lab, f"agent-{i + 1} action")
    for i, labs in enumerate(model.observations):
        for lab in labs:
            _check_label(lab, f"agent-{i + 1} observation")

    acomp = joint_components(model.action_dims)
    ocomp = joint_components(model.observation_dims)

    def action_labels(a: int) -> str:
        return " ".join(model.actions[i][acomp[a, i]]
                        for i in range(model.num_agents))

    out = []
    if model.name:
        out.append(f"# {model.name}")
    out.append(f"agents: {model.num_agents}")
    out.append(f"discount: {_fmt(model.discount)}")
    out.append("values: reward")
    out.append("states: " + " ".join(model.states))
    for i, labs in enumerate(model.actions):
        out.append(f"actions {i + 1}: " + " ".join(labs))
    for i, labs in enumerate(model.observations):
        out.append(f"observations {i + 1}: " + " ".join(labs))
    out.append("start: " + " ".join(_fmt(p) for p in model.start))
    for a in range(model.num_joint_actions):
        for si in range(model.num_states):
            for s2 in range(model.num_states):
                p = model.transition[si, a, s2]
                if p != 0.0:
                    out.append(f"T: {action_labels(a)} : {model.states[si]} "
                               f": {model.states[s2]} : {_fmt(p)}")
    for a in range(model.num_joint_actions):
        for s2 in range(model.num_states):
            for o in range(model.num_joint_observations):
                p = model.observation_fn[a, s2, o]
                if p != 0.0:
                    labs = " ".join(model.observations[i][ocomp[o, i]]
                                    for i in range(model.num_agents))
                    out.append(f"O: {action_labels(a)} : {model.states[s2]} "
                               f": {labs} : {_fmt(p)}")
    for a in range(model.num_joint_actions):
        for si in range(model.num_states):
            r = model.reward[si, a]
            if r != 0.0:
                out.append(f"R: {action_labels(a)} : {model.states[si]} "
                           f": {_fmt(r)}")
    return "\n".join(out) + "\n"


# -- policy files -------------------------------------------------------------


def _check_prob_row(values: list[float], line: int, what: str) -> None:
    if min(values) < -_ROW_TOL:
        raise ParseError(f"{what} has a negative probability", line)
    total = sum(values)
    if abs(total - 1.0) > max(_ROW_TOL, 1e-12 * len(values)):
        raise ParseError(f"{what} sums to {total:.12g}, expected 1", line)


def write_policy(policy: JointPolicy) -> str:
    out = [f"agents: {policy.num_agents}"]
    device = policy.device
    if device is not None:
        c_dev = device.transition.shape[0]
        out.append(f"device: {c_dev}")
        out.append(f"device-start: {device.initial_state}")
        for c in range(c_dev):
            out.append(f"w {c}: " + " ".join(_fmt(p)
                                             for p in device.transition[c]))
    for i, fsc in enumerate(policy.controllers):
        out.append(f"agent {i + 1}")
        out.append(f"nodes: {fsc.num_nodes}")
        out.append(f"start: {fsc.initial_node}")
        c_dev = fsc.device_states
        with_c = device is not None
        for q in range(fsc.num_nodes):
            for c in range(c_dev):
                idx = f"{q} {c}" if with_c else f"{q}"
                out.append(f"psi {idx}: " + " ".join(
                    _fmt(p) for p in fsc.action_selection[c, q]))
        for q in range(fsc.num_nodes):
            for a in range(fsc.num_actions):
                for o in range(fsc.num_observations):
                    for c in range(c_dev):
                        idx = f"{q} {a} {o} {c}" if with_c \
                            else f"{q} {a} {o}"
                        out.append(f"eta {idx}: " + " ".join(
                            _fmt(p) for p in fsc.node_transition[c, q, a, o]))
    return "\n".join(out) + "\n"


def parse_policy(text: str) -> JointPolicy:
    """Text to policy; every probability row is checked against its simplex."""
    n_agents = None
    device_size = None
    device_start = 0
    w_rows: dict[int, tuple[list[float], int]] = {}
    # agent sections: list of dicts
    sections: list[dict] = []
    current: dict | None = None
    n_lines = 0

    def floats(toks: list[tuple[str, int]], line: int,
               what: str) -> list[float]:
        if not toks:
            raise ParseError(f"empty {what}", line)
        return [_parse_float(t, line, c, what) for t, c in toks]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        n_lines = lineno
        content = _strip_comment(raw)
        if not content.strip():
            continue
        colon = content.find(":")
        head = _tokens(content if colon < 0 else content[:colon], 0)
        body_toks = [] if colon < 0 else _tokens(content[colon + 1:],
                                                 colon + 1)
        key = head[0][0]

        if key == "agent":
            if colon >= 0 or len(head) != 2:
                raise ParseError("'agent' line must read 'agent <i>'",
                                 lineno, head[0][1])
            idx = _parse_int(head[1][0], lineno, head[1][1], "agent index")
            if idx != len(sections) + 1:
                raise ParseError(
                    f"expected 'agent {len(sections) + 1}', got "
                    f"'agent {idx}'", lineno, head[1][1])
            current = {"line": lineno, "nodes": None, "start": 0,
                       "psi": {}, "eta": {}}
            sections.append(current)
            continue
        if colon < 0:
            raise ParseError(f"expected ':' after {key!r}", lineno,
                             head[0][1])

        if key == "agents":
            if n_agents is not None:
                raise ParseError("duplicate 'agents:' line", lineno)
            n_agents = _parse_int(body_toks[0][0], lineno, body_toks[0][1],
                                  "agent count") if body_toks else None
            if n_agents is None or n_agents < 1:
                raise ParseError("'agents:' needs a positive count", lineno)
        elif key == "device":
            if device_size is not None:
                raise ParseError("duplicate 'device:' line", lineno)
            if not body_toks:
                raise ParseError("'device:' needs a size", lineno)
            device_size = _parse_int(body_toks[0][0], lineno,
                                     body_toks[0][1], "device size")
            if device_size < 1:
                raise ParseError("device size must be at least 1", lineno)
        elif key == "device-start":
            if not body_toks:
                raise ParseError("'device-start:' needs an index", lineno)
            device_start = _parse_int(body_toks[0][0], lineno,
                                      body_toks[0][1], "device start")
        elif key == "w":
            if len(head) != 2:
                raise ParseError("'w' row must read 'w <c>: <p...>'",
                                 lineno, head[0][1])
            c = _parse_int(head[1][0], lineno, head[1][1], "device state")
            if c in w_rows:
                raise ParseError(f"duplicate 'w {c}:' row", lineno)
            w_rows[c] = (floats(body_toks, lineno, "device probability"),
                         lineno)
        elif key == "nodes":
            if current is None:
                raise ParseError("'nodes:' outside an agent section", lineno)
            if current["nodes"] is not None:
                raise ParseError("duplicate 'nodes:' line", lineno)
            current["nodes"] = _parse_int(body_toks[0][0], lineno,
                                          body_toks[0][1], "node count") \
                if body_toks else None
            if current["nodes"] is None or current["nodes"] < 1:
                raise ParseError("'nodes:' needs a positive count", lineno)
        elif key == "start":
            if current is None:
                raise ParseError("'start:' outside an agent section", lineno)
            if not body_toks:
                raise ParseError("'start:' needs a node index", lineno)
            current["start"] = _parse_int(body_toks[0][0], lineno,
                                          body_toks[0][1], "start node")
        elif key in ("psi", "eta"):
            if current is None:
                raise ParseError(f"'{key}' row outside an agent section",
                                 lineno)
            want = {"psi": (1, 2), "eta": (3, 4)}[key]
            idx_toks = head[1:]
            if len(idx_toks) not in want:
                raise ParseError(
                    f"'{key}' row needs {want[0]} indices "
                    f"({want[1]} with a device)", lineno, head[0][1])
            idx = tuple(_parse_int(t, lineno, c, "index")
                        for t, c in idx_toks)
            if idx in current[key]:
                raise ParseError(f"duplicate '{key} "
                                 f"{' '.join(map(str, idx))}:' row", lineno)
            current[key][idx] = (floats(body_toks, lineno,
                                        f"{key} probability"), lineno)
        else:
            raise ParseError(f"unknown directive {key!r}", lineno,
                             head[0][1])

    eof = n_lines + 1
    if n_agents is None:
        raise ParseError("missing 'agents:' line", eof)
    if len(sections) != n_agents:
        raise ParseError(
            f"{len(sections)} agent sections for {n_agents} agents", eof)

    has_device = device_size is not None
    c_dev = device_size if has_device else 1
    device = None
    if has_device:
        w = np.zeros((c_dev, c_dev))
        for c in range(c_dev):
            if c not in w_rows:
                raise ParseError(f"missing 'w {c}:' row", eof)
            vals, line = w_rows[c]
            if len(vals) != c_dev:
                raise ParseError(
                    f"'w {c}:' needs {c_dev} probabilities", line)
            _check_prob_row(vals, line, f"device row {c}")
            w[c] = vals
        for c in w_rows:
            if not 0 <= c < c_dev:
                raise ParseError(f"'w {c}:' out of range",
                                 w_rows[c][1])
        if not 0 <= device_start < c_dev:
            raise ParseError("device start state out of range", eof)
        device = CorrelationDevice(transition=w, initial_state=device_start)
    elif w_rows:
        line = min(line for _, line in w_rows.values())
        raise ParseError("'w' rows given without a 'device:' line", line)

    controllers = []
    for ai, sec in enumerate(sections):
        q_count = sec["nodes"]
        if q_count is None:
            raise ParseError(f"agent {ai + 1} is missing 'nodes:'", eof)
        if not 0 <= sec["start"] < q_count:
            raise ParseError(f"agent {ai + 1} start node out of range", eof)
        want_idx = 2 if has_device else 1
        a_count = None
        for idx, (vals, line) in sec["psi"].items():
            if len(idx) != want_idx:
                raise ParseError(
                    f"'psi' row has {len(idx)} indices, expected "
                    f"{want_idx}", line)
            if a_count is None:
                a_count = len(vals)
            elif len(vals) != a_count:
                raise ParseError(
                    f"'psi' row has {len(vals)} probabilities, another row "
                    f"had {a_count}", line)
        if a_count is None:
            raise ParseError(f"agent {ai + 1} has no 'psi' rows", eof)
        psi = np.zeros((c_dev, q_count, a_count))
        filled = np.zeros((c_dev, q_count), dtype=bool)
        for idx, (vals, line) in sec["psi"].items():
            q = idx[0]
            c = idx[1] if has_device else 0
            if not 0 <= q < q_count or not 0 <= c < c_dev:
                raise ParseError("'psi' row index out of range", line)
            _check_prob_row(vals, line, f"agent {ai + 1} psi row")
            psi[c, q] = vals
            filled[c, q] = True
        if not filled.all():
            raise ParseError(
                f"agent {ai + 1} is missing psi rows for some (node"
                f"{', device' if has_device else ''}) combinations", eof)

        o_count = 0
        for idx, (vals, line) in sec["eta"].items():
            if len(idx) != want_idx + 2:
                raise ParseError(
                    f"'eta' row has {len(idx)} indices, expected "
                    f"{want_idx + 2}", line)
            o_count = max(o_count, idx[2] + 1)
        if not sec["eta"]:
            raise ParseError(f"agent {ai + 1} has no 'eta' rows", eof)
        eta = np.zeros((c_dev, q_count, a_count, o_count, q_count))
        efilled = np.zeros((c_dev, q_count, a_count, o_count), dtype=bool)
        for idx, (vals, line) in sec["eta"].items():
            q, a, o = idx[0], idx[1], idx[2]
            c = idx[3] if has_device else 0
            if not (0 <= q < q_count and 0 <= a < a_count
                    and 0 <= o < o_count and 0 <= c < c_dev):
                raise ParseError("'eta' row index out of range", line)
            if len(vals) != q_count:
                raise ParseError(
                    f"'eta' row needs {q_count} probabilities (one per "
                    f"node), got {len(vals)}", line)
            _check_prob_row(vals, line, f"agent {ai + 1} eta row")
            eta[c, q, a, o] = vals
            efilled[c, q, a, o] = True
        if not efilled.all():
            raise ParseError(
                f"agent {ai + 1} is missing eta rows for some (node, "
                f"action, observation{', device' if has_device else ''}) "
                f"combinations", eof)
        controllers.append(Fsc(action_selection=psi, node_transition=eta,
                               initial_node=sec["start"]))

    return JointPolicy(controllers=controllers, device=device)


# -- algebraic export ---------------------------------------------------------


@dataclass
class BellmanRow:
    """One value-definition equality of the exported program.

    value_var = sum(reward_terms coef * x)
              + sum(future_terms coef * x * y [* w] * z)
    """

    name: str
    value_var: str
    reward_terms: list[tuple[float, str]]
    future_terms: list[tuple[float, str, str, str | None, str]]


@dataclass
class LinearRow:
    """One linear equality: sum(coef * var) = rhs."""

    name: str
    terms: list[tuple[float, str]]
    rhs: float


@dataclass
class NlpExport:
    """Algebraic program text plus a structured copy for numeric checks."""

    text: str
    nodes_per_agent: tuple[int, ...]
    device_size: int
    variable_names: list[str]
    objective_terms: list[tuple[float, str]]
    bellman_rows: list[BellmanRow]
    linear_rows: list[LinearRow]


def _expr_lines(terms: list[str], indent: str = "    ",
                per_line: int = 4) -> list[str]:
    lines = []
    for k in range(0, len(terms), per_line):
        lines.append(indent + " ".join(terms[k:k + per_line]))
    return lines


def _term(coef: float, names: list[str], lead: bool) -> str:
    sign = "-" if coef < 0 else "+"
    body = "*".join([_fmt(abs(coef))] + names)
    return f"{sign} {body}" if not lead else (
        f"-{body}" if coef < 0 else body)


def export_nlp(model: DecPomdp, nodes_per_agent, device_size: int = 1
               ) -> NlpExport:
    """Full-variable algebraic program over joint-node quantities.

    Joint action selection, joint node transition, and per-(node, state)
    value variables are tied together by bilinear value equalities;
    independence constraints (reference indices fixed at 0) force the joint
    probabilities to factor per agent.  Output text is AMPL syntax with a
    deterministic ordering, so identical inputs diff as identical files.
    """
    n = model.num_agents
    if isinstance(nodes_per_agent, int):
        nd = (nodes_per_agent,) * n
    else:
        nd = tuple(int(k) for k in nodes_per_agent)
    if len(nd) != n or any(k < 1 for k in nd):
        raise ValueError(f"bad nodes_per_agent {nodes_per_agent!r} for "
                         f"{n} agents")
    if device_size < 1:
        raise ValueError("device_size must be at least 1")

    ad = model.action_dims
    od = model.observation_dims
    s_count = model.num_states
    qj = int(np.prod(nd))
    aj = model.num_joint_actions
    oj = model.num_joint_observations
    c_dev = device_size
    with_dev = c_dev > 1
    gamma = model.discount

    qcomp = joint_components(nd)
    acomp = joint_components(ad)
    ocomp = joint_components(od)
    qstr = _strides(list(nd))
    astr = _strides(list(ad))
    ostr = _strides(list(od))

    def suffix(c: int) -> str:
        return f"_{c}" if with_dev else ""

    def xn(q: int, a: int, c: int) -> str:
        return f"x_{q}_{a}{suffix(c)}"

    def yn(q: int, a: int, o: int, p: int, c: int) -> str:
        return f"y_{q}_{a}_{o}_{p}{suffix(c)}"

    def zn(q: int, s: int, c: int) -> str:
        return f"z_{q}_{s}{suffix(c)}"

    def wn(c: int, d: int) -> str:
        return f"w_{c}_{d}"

    crange = range(c_dev)
    names: list[str] = []
    decls: list[str] = []
    for q in range(qj):
        for a in range(aj):
            for c in crange:
                names.append(xn(q, a, c))
                decls.append(f"var {names[-1]} >= 0;")
    for q in range(qj):
        for a in range(aj):
            for o in range(oj):
                for p in range(qj):
                    for c in crange:
                        names.append(yn(q, a, o, p, c))
                        decls.append(f"var {names[-1]} >= 0;")
    for q in range(qj):
        for s in range(s_count):
            for c in crange:
                names.append(zn(q, s, c))
                decls.append(f"var {names[-1]};")
    if with_dev:
        for c in crange:
            for d in crange:
                names.append(wn(c, d))
                decls.append(f"var {names[-1]} >= 0;")

    q0 = 0  # every controller starts at its node 0
    c0 = 0
    objective_terms = [(float(model.start[s]), zn(q0, s, c0))
                       for s in range(s_count) if model.start[s] != 0.0]

    bellman_rows: list[BellmanRow] = []
    for c in crange:
        for q in range(qj):
            for s in range(s_count):
                rew = [(float(model.reward[s, a]), xn(q, a, c))
                       for a in range(aj) if model.reward[s, a] != 0.0]
                fut: list[tuple[float, str, str, str | None, str]] = []
                for a in range(aj):
                    for t in range(s_count):
                        pst = model.transition[s, a, t]
                        if pst == 0.0:
                            continue
                        for o in range(oj):
                            base = gamma * pst * model.observation_fn[a, t, o]
                            if base == 0.0:
                                continue
                            for p in range(qj):
                                if with_dev:
                                    for d in crange:
                                        fut.append((base, xn(q, a, c),
                                                    yn(q, a, o, p, c),
                                                    wn(c, d), zn(p, t, d)))
                                else:
                                    fut.append((base, xn(q, a, c),
                                                yn(q, a, o, p, c),
                                                None, zn(p, t, 0)))
                bellman_rows.append(BellmanRow(
                    name=f"bellman_{q}_{s}{suffix(c)}",
                    value_var=zn(q, s, c),
                    reward_terms=rew, future_terms=fut))

    linear_rows: list[LinearRow] = []

    # Independence: joint action selection must not vary with the other
    # agents' nodes; reference nodes are index 0.
    for i in range(n):
        for c in crange:
            for q in range(qj):
                if all(qcomp[q, j] == 0 for j in range(n) if j != i):
                    continue
                qref = int(qcomp[q, i]) * qstr[i]
                rows: list[list[tuple[float, str]]] = \
                    [[] for _ in range(ad[i])]
                for a in range(aj):
                    ai = int(acomp[a, i])
                    rows[ai].append((1.0, xn(q, a, c)))
                    rows[ai].append((-1.0, xn(qref, a, c)))
                for ai, terms in enumerate(rows):
                    linear_rows.append(LinearRow(
                        name=f"indep_x_{i}_{q}_{ai}{suffix(c)}",
                        terms=terms, rhs=0.0))

    # Independence: node transitions must not vary with the other agents'
    # nodes, actions, or observations.
    for i in range(n):
        for c in crange:
            for q in range(qj):
                q_is_ref = all(qcomp[q, j] == 0 for j in range(n) if j != i)
                qref = int(qcomp[q, i]) * qstr[i]
                for a in range(aj):
                    a_is_ref = all(acomp[a, j] == 0
                                   for j in range(n) if j != i)
                    aref = int(acomp[a, i]) * astr[i]
                    for o in range(oj):
                        if q_is_ref and a_is_ref and all(
                                ocomp[o, j] == 0 for j in range(n)
                                if j != i):
                            continue
                        oref = int(ocomp[o, i]) * ostr[i]
                        for qip in range(nd[i]):
                            terms: list[tuple[float, str]] = []
                            for p in range(qj):
                                if qcomp[p, i] != qip:
                                    continue
                                terms.append((1.0, yn(q, a, o, p, c)))
                                terms.append((-1.0,
                                              yn(qref, aref, oref, p, c)))
                            linear_rows.append(LinearRow(
                                name=f"indep_y_{i}_{q}_{a}_{o}_{qip}"
                                     f"{suffix(c)}",
                                terms=terms, rhs=0.0))

    # Simplex rows at the reference slices.
    for i in range(n):
        for c in crange:
            for qi in range(nd[i]):
                qref = qi * qstr[i]
                terms = [(1.0, xn(qref, a, c)) for a in range(aj)]
                linear_rows.append(LinearRow(
                    name=f"prob_x_{i}_{qi}{suffix(c)}", terms=terms, rhs=1.0))
    for i in range(n):
        for c in crange:
            for qi in range(nd[i]):
                for ai in range(ad[i]):
                    for oi in range(od[i]):
                        qref = qi * qstr[i]
                        aref = ai * astr[i]
                        oref = oi * ostr[i]
                        terms = [(1.0, yn(qref, aref, oref, p, c))
                                 for p in range(qj)]
                        linear_rows.append(LinearRow(
                            name=f"prob_y_{i}_{qi}_{ai}_{oi}{suffix(c)}",
                            terms=terms, rhs=1.0))
    if with_dev:
        for c in crange:
            terms = [(1.0, wn(c, d)) for d in crange]
            linear_rows.append(LinearRow(
                name=f"prob_w_{c}", terms=terms, rhs=1.0))

    # Render the AMPL text.
    lines: list[str] = []
    title = model.name or "model"
    lines.append(f"# fixed-size stochastic controller program: {title}")
    lines.append(f"# agents: {n}, states: {s_count}, nodes per agent: "
                 + " ".join(str(k) for k in nd)
                 + f", device states: {c_dev}")
    counts = {"x": qj * aj * c_dev, "y": qj * aj * oj * qj * c_dev,
              "z": qj * s_count * c_dev,
              "w": c_dev * c_dev if with_dev else 0}
    lines.append(f"# variables: x={counts['x']} y={counts['y']} "
                 f"z={counts['z']} w={counts['w']}")
    lines.extend(decls)
    lines.append("")
    obj_terms = [_term(coef, [var], lead=(k == 0))
                 for k, (coef, var) in enumerate(objective_terms)]
    lines.append("maximize total_value:")
    lines.extend(_expr_lines(obj_terms))
    lines[-1] += ";"
    lines.append("")
    for row in bellman_rows:
        lines.append(f"subject to {row.name}:")
        terms = []
        first = True
        for coef, x in row.reward_terms:
            terms.append(_term(coef, [x], lead=first))
            first = False
        for coef, x, y, w, z in row.future_terms:
            parts = [x, y] + ([w] if w else []) + [z]
            terms.append(_term(coef, parts, lead=first))
            first = False
        if not terms:
            terms = ["0"]
        lines.append(f"    {row.value_var} =")
        lines.extend(_expr_lines(terms, indent="        "))
        lines[-1] += ";"
    for row in linear_rows:
        lines.append(f"subject to {row.name}:")
        terms = [_term(coef, [var], lead=(k == 0))
                 for k, (coef, var) in enumerate(row.terms)]
        lines.extend(_expr_lines(terms))
        lines[-1] += f" = {_fmt(row.rhs)};"
    text = "\n".join(lines) + "\n"

    return NlpExport(text=text, nodes_per_agent=nd, device_size=c_dev,
                     variable_names=names, objective_terms=objective_terms,
                     bellman_rows=bellman_rows, linear_rows=linear_rows)
