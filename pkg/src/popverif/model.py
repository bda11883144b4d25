"""Population protocol syntax and operational semantics.

Protocols are finite sets of pairwise interaction rules over anonymous
agents; a configuration is a multiset of agent states, kept here as a
dense count vector.  All types are immutable values and all operations
are pure functions, so everything is safe to share across threads.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

from .errors import NotEnabledError, ProtocolError, ProtocolSyntaxError

# Minimum number of agents a configuration may hold.
MIN_AGENTS = 2


@dataclass(frozen=True)
class StateId:
    index: int
    name: str


@dataclass(frozen=True)
class Transition:
    """Interaction rule (q1, q2) -> (q3, q4).

    The rule is immediate-observation when q4 == q2: agent q1 (the mover)
    observes an agent resting in q2 and moves to q3.
    """

    tid: str
    pre: tuple[int, int]
    post: tuple[int, int]

    @property
    def is_iopp(self) -> bool:
        return self.post[1] == self.pre[1]

    @property
    def iopp_form(self) -> tuple[int, int, int] | None:
        """(mover, observer, target) indices, or None for a general rule."""
        if not self.is_iopp:
            return None
        return (self.pre[0], self.pre[1], self.post[0])


@dataclass(frozen=True)
class Protocol:
    states: tuple[StateId, ...]
    transitions: tuple[Transition, ...]
    initial: frozenset[int]
    opinion: tuple[tuple[int, int], ...] | None = None  # (state index, 0|1)

    def __post_init__(self):
        if not self.states:
            raise ProtocolError("protocol has no states")
        if not self.initial:
            raise ProtocolError("protocol has no initial states")

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {s.name: s.index for s in self.states}

    @cached_property
    def by_tid(self) -> dict[str, Transition]:
        return {t.tid: t for t in self.transitions}

    @cached_property
    def opinion_map(self) -> dict[int, int] | None:
        return dict(self.opinion) if self.opinion is not None else None

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def is_iopp(self) -> bool:
        return all(t.is_iopp for t in self.transitions)

    @property
    def is_total(self) -> bool:
        covered = {t.pre for t in self.transitions}
        n = self.num_states
        return all((i, j) in covered for i in range(n) for j in range(n))

    def transition_ids(self) -> tuple[str, ...]:
        return tuple(t.tid for t in self.transitions)

    def state_name(self, index: int) -> str:
        return self.states[index].name


@dataclass(frozen=True)
class Configuration:
    """Dense agent-count vector indexed by state index."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ProtocolError(f"negative agent count in {self.counts}")
        if sum(self.counts) < MIN_AGENTS:
            raise ProtocolError(
                f"configurations need at least {MIN_AGENTS} agents, got {sum(self.counts)}"
            )

    @property
    def size(self) -> int:
        return sum(self.counts)

    def add_agent(self, q: int) -> "Configuration":
        c = list(self.counts)
        c[q] += 1
        return Configuration(tuple(c))

    def pretty(self, protocol: Protocol) -> str:
        parts = [
            f"{protocol.state_name(i)}:{c}" for i, c in enumerate(self.counts) if c
        ]
        return "{" + ",".join(parts) + "}"

    @staticmethod
    def from_dict(protocol: Protocol, counts: dict[str, int]) -> "Configuration":
        vec = [0] * protocol.num_states
        for name, c in counts.items():
            if name not in protocol.index_of:
                raise ProtocolError(f"unknown state {name!r}")
            vec[protocol.index_of[name]] = c
        return Configuration(tuple(vec))


_TRANS_IOPP = re.compile(r"^(\w+)\s*--\s*(\w+)\s*-->\s*(\w+)$")
_TRANS_PAIR = re.compile(r"^\(\s*(\w+)\s*,\s*(\w+)\s*\)\s*->\s*\(\s*(\w+)\s*,\s*(\w+)\s*\)$")
_OPINION = re.compile(r"^(\w+)\s*=\s*([01])$")


def parse_protocol(text: str) -> Protocol:
    """Parse the line-oriented protocol format.

    Directives: ``states``, ``initial``, ``opinion``, ``trans``; ``#``
    starts a comment.  Totality is not enforced here; see
    :func:`complete_totality`.
    """
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            lines.append((lineno, line))

    states: list[StateId] = []
    seen_names: dict[str, int] = {}
    # First pass: collect state declarations so later lines may refer to them.
    for lineno, line in lines:
        head = line.split(None, 1)[0]
        if head != "states":
            continue
        for m in re.finditer(r"\S+", line):
            tok = m.group(0)
            if tok == "states":
                continue
            if not re.fullmatch(r"\w+", tok):
                raise ProtocolSyntaxError(f"bad state name {tok!r}", lineno, m.start() + 1)
            if tok in seen_names:
                raise ProtocolSyntaxError(f"duplicate state {tok!r}", lineno, m.start() + 1)
            seen_names[tok] = len(states)
            states.append(StateId(len(states), tok))

    def state_index(tok: str, lineno: int, col: int) -> int:
        if tok not in seen_names:
            raise ProtocolSyntaxError(f"undeclared state {tok!r}", lineno, col)
        return seen_names[tok]

    initial: set[int] = set()
    opinion: dict[int, int] = {}
    saw_opinion = False
    transitions: list[Transition] = []
    tids: set[str] = set()

    for lineno, line in lines:
        m0 = re.match(r"\s*(\S+)", line)
        head, head_col = m0.group(1), m0.start(1) + 1
        rest = line[m0.end(1):]
        rest_col = m0.end(1) + 1

        if head == "states":
            continue
        elif head == "initial":
            for m in re.finditer(r"\S+", rest):
                initial.add(state_index(m.group(0), lineno, rest_col + m.start()))
        elif head == "opinion":
            saw_opinion = True
            for m in re.finditer(r"\S+", rest):
                om = _OPINION.match(m.group(0))
                if not om:
                    raise ProtocolSyntaxError(
                        f"expected <state>=<0|1>, got {m.group(0)!r}",
                        lineno, rest_col + m.start(),
                    )
                q = state_index(om.group(1), lineno, rest_col + m.start())
                opinion[q] = int(om.group(2))
        elif head == "trans":
            tm = re.match(r"\s*(\w+)\s*:\s*", rest)
            if not tm:
                raise ProtocolSyntaxError("expected '<id>:' after 'trans'", lineno, rest_col)
            tid = tm.group(1)
            if tid in tids:
                raise ProtocolSyntaxError(f"duplicate transition id {tid!r}", lineno,
                                          rest_col + tm.start(1))
            body = rest[tm.end():].strip()
            body_col = rest_col + tm.end()
            mi = _TRANS_IOPP.match(body)
            mp = _TRANS_PAIR.match(body)
            if mi:
                q1, q2, q3 = (state_index(g, lineno, body_col) for g in mi.groups())
                pre, post = (q1, q2), (q3, q2)
            elif mp:
                q1, q2, q3, q4 = (state_index(g, lineno, body_col) for g in mp.groups())
                pre, post = (q1, q2), (q3, q4)
            else:
                raise ProtocolSyntaxError(
                    f"bad transition body {body!r} (want 'a --b--> c' or '(a,b)->(c,d)')",
                    lineno, body_col,
                )
            tids.add(tid)
            transitions.append(Transition(tid, pre, post))
        else:
            raise ProtocolSyntaxError(f"unknown directive {head!r}", lineno, head_col)

    if not states:
        raise ProtocolError("protocol has no states")
    if not initial:
        raise ProtocolError("protocol has no initial states")
    return Protocol(
        states=tuple(states),
        transitions=tuple(transitions),
        initial=frozenset(initial),
        opinion=tuple(sorted(opinion.items())) if saw_opinion else None,
    )


def complete_totality(protocol: Protocol) -> Protocol:
    """Add idle self-loops so every state pair has an activated transition.

    New rules get reserved ids ``idle_<q1>_<q2>``; a clash with a user id
    is an error so serialized protocols stay faithful to their source.
    """
    covered = {t.pre for t in protocol.transitions}
    existing = {t.tid for t in protocol.transitions}
    added = []
    n = protocol.num_states
    for i in range(n):
        for j in range(n):
            if (i, j) in covered:
                continue
            tid = f"idle_{protocol.state_name(i)}_{protocol.state_name(j)}"
            if tid in existing:
                raise ProtocolError(f"reserved idle id {tid!r} collides with a user transition")
            added.append(Transition(tid, (i, j), (i, j)))
    if not added:
        return protocol
    return Protocol(
        states=protocol.states,
        transitions=protocol.transitions + tuple(added),
        initial=protocol.initial,
        opinion=protocol.opinion,
    )


def enabled(gamma: Configuration, t: Transition) -> bool:
    q1, q2 = t.pre
    if q1 == q2:
        return gamma.counts[q1] >= 2
    return gamma.counts[q1] >= 1 and gamma.counts[q2] >= 1


def step(gamma: Configuration, t: Transition) -> Configuration:
    """Fire t once: gamma - q1 - q2 + q3 + q4."""
    if not enabled(gamma, t):
        raise NotEnabledError(f"{t.tid} not activated at {gamma.counts}")
    c = list(gamma.counts)
    c[t.pre[0]] -= 1
    c[t.pre[1]] -= 1
    c[t.post[0]] += 1
    c[t.post[1]] += 1
    return Configuration(tuple(c))


def accelerated_successors(
    gamma: Configuration, t: Transition
) -> list[tuple[int, Configuration]]:
    """All (k, gamma') with k >= 1 reachable by firing t exactly k times.

    Defined for immediate-observation rules only.  For t: q1 --q2--> q3
    the k range depends on whether the observer sits in the mover's
    source state and whether the rule is a self-map.
    """
    form = t.iopp_form
    if form is None:
        raise ProtocolError(f"accelerated semantics needs an IOPP rule, got {t.tid}")
    mover, obs, target = form
    if not enabled(gamma, t):
        return []
    if mover == target:
        return [(1, gamma)]  # self-map: any k yields gamma again
    if obs == mover:
        kmax = gamma.counts[mover] - 1  # last firing still needs an observer
    else:
        kmax = gamma.counts[mover]
    out = []
    for k in range(1, kmax + 1):
        c = list(gamma.counts)
        c[mover] -= k
        c[target] += k
        out.append((k, Configuration(tuple(c))))
    return out


def enumerate_configs(n: int, support: list[int], num_states: int):
    """Yield every size-n configuration over `support`, largest-first lex.

    Emits exactly C(n+s-1, s-1) configurations for s support states.
    """
    if n < MIN_AGENTS:
        raise ProtocolError(f"population size must be at least {MIN_AGENTS}, got {n}")
    support = list(support)

    def rec(pos: int, remaining: int, acc: list[int]):
        if pos == len(support) - 1:
            acc2 = acc + [remaining]
            vec = [0] * num_states
            for q, c in zip(support, acc2):
                vec[q] = c
            yield Configuration(tuple(vec))
            return
        for c in range(remaining, -1, -1):
            yield from rec(pos + 1, remaining - c, acc + [c])

    if not support:
        return
    yield from rec(0, n, [])


def count_configs(n: int, s: int) -> int:
    return math.comb(n + s - 1, s - 1)


def reach_set(gamma0: Configuration, protocol: Protocol) -> set[Configuration]:
    """Breadth-first closure of gamma0 under single steps."""
    seen = {gamma0}
    queue = deque([gamma0])
    while queue:
        g = queue.popleft()
        for t in protocol.transitions:
            if enabled(g, t):
                nxt = step(g, t)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return seen
