"""Explicit-state engine over product systems (protocol x Rabin automaton).

A product configuration pairs an agent multiset with one control state of
a deterministic Rabin automaton that reads the fired transitions.  Under
strong fairness a run settles into and fully covers one bottom SCC of the
reachable graph, so satisfaction questions reduce to SCC analysis; the
pre*/complement characterization of the winning set is evaluated on the
full fixed-size slice and cross-checked against the SCC route in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .errors import ModeGateError, ProtocolError, ResourceLimitError
from .ltl import Ltl, contains_next
from .model import (
    Configuration,
    Protocol,
    accelerated_successors,
    enabled,
    enumerate_configs,
    step,
)
from .rabin import DeterministicRabinAutomaton, ltl_to_dra
from . import rabin

DEFAULT_NODE_CAP = 200_000

PLAIN = "plain"
ACCELERATED = "accelerated"


@dataclass(frozen=True)
class ProdConfig:
    config: Configuration
    loc: int

    def pretty(self, protocol: Protocol) -> str:
        return f"{self.config.pretty(protocol)}@{self.loc}"


@dataclass(frozen=True)
class ProductSystem:
    protocol: Protocol
    dra: DeterministicRabinAutomaton
    mode: str = ACCELERATED

    def __post_init__(self):
        if self.mode not in (PLAIN, ACCELERATED):
            raise ModeGateError(f"unknown semantics mode {self.mode!r}")
        if set(self.dra.alphabet) != set(self.protocol.transition_ids()):
            raise ProtocolError("automaton alphabet must equal the transition ids")
        if not self.protocol.is_total:
            raise ProtocolError(
                "protocol is not total; run complete_totality() first"
            )
        if self.mode == ACCELERATED and not self.protocol.is_iopp:
            raise ModeGateError("accelerated semantics requires an IOPP")

    def successors(self, pc: ProdConfig):
        """Labeled successor pairs (transition id, ProdConfig)."""
        out = []
        for t in self.protocol.transitions:
            if not enabled(pc.config, t):
                continue
            loc2 = self.dra.step(pc.loc, t.tid)
            if self.mode == PLAIN:
                out.append((t.tid, ProdConfig(step(pc.config, t), loc2)))
            else:
                seen = set()
                for _k, gamma2 in accelerated_successors(pc.config, t):
                    if gamma2 not in seen:
                        seen.add(gamma2)
                        out.append((t.tid, ProdConfig(gamma2, loc2)))
        return out


def make_product_system(
    protocol: Protocol,
    phi: Ltl,
    mode: str = "auto",
    max_dra_states: int = rabin.DEFAULT_STATE_CAP,
) -> ProductSystem:
    """Build protocol x DRA(phi), gating accelerated semantics on IOPP + X-free."""
    if mode == "auto":
        mode = ACCELERATED if (protocol.is_iopp and not contains_next(phi)) else PLAIN
    if mode == ACCELERATED and contains_next(phi):
        raise ModeGateError("accelerated semantics requires an X-free formula")
    dra = ltl_to_dra(phi, protocol.transition_ids(), max_dra_states)
    return ProductSystem(protocol=protocol, dra=dra, mode=mode)


@dataclass
class ConfigGraph:
    """Reachable closure of a root set with SCC decomposition."""

    nodes: list[ProdConfig]
    index: dict[ProdConfig, int]
    adj: list[list[tuple[str, int]]]  # adj[i] = [(transition id, target index)]
    sccs: list[list[int]]
    scc_of: list[int]
    bottom: list[bool]  # per SCC

    @cached_property
    def radj(self) -> list[list[int]]:
        rev: list[list[int]] = [[] for _ in self.nodes]
        for i, edges in enumerate(self.adj):
            for _tid, j in edges:
                rev[j].append(i)
        return rev

    def bottom_sccs(self) -> list[list[int]]:
        return [comp for sid, comp in enumerate(self.sccs) if self.bottom[sid]]


def build_graph(
    ps: ProductSystem, roots, max_nodes: int = DEFAULT_NODE_CAP
) -> ConfigGraph:
    roots = list(roots)
    sizes = {pc.config.size for pc in roots}
    if len(sizes) > 1:
        raise ProtocolError(f"roots must share one population size, got {sorted(sizes)}")

    nodes: list[ProdConfig] = []
    index: dict[ProdConfig, int] = {}
    adj: list[list[tuple[str, int]]] = []

    def intern(pc: ProdConfig) -> int:
        if pc in index:
            return index[pc]
        if len(nodes) >= max_nodes:
            raise ResourceLimitError(f"configuration graph exceeded {max_nodes} nodes")
        index[pc] = len(nodes)
        nodes.append(pc)
        adj.append([])
        return index[pc]

    frontier = [intern(pc) for pc in roots]
    done = 0
    while done < len(nodes):
        i = done
        done += 1
        for tid, succ in ps.successors(nodes[i]):
            j = intern(succ)
            adj[i].append((tid, j))

    sccs = rabin._tarjan(range(len(nodes)), lambda i: (j for _t, j in adj[i]))
    scc_of = [0] * len(nodes)
    for sid, comp in enumerate(sccs):
        for i in comp:
            scc_of[i] = sid
    bottom = [True] * len(sccs)
    for i in range(len(nodes)):
        for _tid, j in adj[i]:
            if scc_of[j] != scc_of[i]:
                bottom[scc_of[i]] = False
    return ConfigGraph(
        nodes=nodes, index=index, adj=adj, sccs=sccs, scc_of=scc_of, bottom=bottom
    )


def scc_winning(
    scc_nodes, pairs: tuple[tuple[frozenset[int], frozenset[int]], ...]
) -> bool:
    """Some Rabin pair has the SCC missing F and touching G."""
    locs = {pc.loc for pc in scc_nodes}
    return any(not (locs & f) and (locs & g) for f, g in pairs)


def _root_node(gamma0: Configuration, ps: ProductSystem) -> ProdConfig:
    return ProdConfig(gamma0, ps.dra.initial)


def sat_exists(
    gamma0: Configuration, ps: ProductSystem, max_nodes: int = DEFAULT_NODE_CAP
) -> bool:
    """Does some strongly fair run from gamma0 satisfy the automaton's language?"""
    g = build_graph(ps, [_root_node(gamma0, ps)], max_nodes)
    return any(
        scc_winning([g.nodes[i] for i in comp], ps.dra.pairs)
        for comp in g.bottom_sccs()
    )


def sat_forall(
    gamma0: Configuration, ps: ProductSystem, max_nodes: int = DEFAULT_NODE_CAP
) -> bool:
    """Do all strongly fair runs from gamma0 satisfy it?"""
    g = build_graph(ps, [_root_node(gamma0, ps)], max_nodes)
    return all(
        scc_winning([g.nodes[i] for i in comp], ps.dra.pairs)
        for comp in g.bottom_sccs()
    )


def pre_star(targets, g: ConfigGraph) -> set[ProdConfig]:
    seen = {pc for pc in targets if pc in g.index}
    stack = [g.index[pc] for pc in seen]
    seen_idx = set(stack)
    while stack:
        i = stack.pop()
        for p in g.radj[i]:
            if p not in seen_idx:
                seen_idx.add(p)
                stack.append(p)
    return {g.nodes[i] for i in seen_idx}


def post_star(sources, g: ConfigGraph) -> set[ProdConfig]:
    stack = [g.index[pc] for pc in sources if pc in g.index]
    seen_idx = set(stack)
    while stack:
        i = stack.pop()
        for _tid, j in g.adj[i]:
            if j not in seen_idx:
                seen_idx.add(j)
                stack.append(j)
    return {g.nodes[i] for i in seen_idx}


def full_slice_graph(
    ps: ProductSystem, n: int, max_nodes: int = DEFAULT_NODE_CAP
) -> ConfigGraph:
    """Graph over every configuration of size n and every control state.

    Complements in the winning-set formula are taken within this slice,
    which is sound because steps conserve the number of agents.
    """
    m = ps.protocol.num_states
    roots = [
        ProdConfig(gamma, loc)
        for gamma in enumerate_configs(n, list(range(m)), m)
        for loc in range(ps.dra.num_states)
    ]
    return build_graph(ps, roots, max_nodes)


def winning_set_cwin(
    g: ConfigGraph, pairs: tuple[tuple[frozenset[int], frozenset[int]], ...]
) -> set[ProdConfig]:
    """Literal pre*/complement evaluation of the winning-set characterization.

    Requires g to cover the full size-n slice so complements make sense.
    """
    universe = set(g.nodes)
    union: set[ProdConfig] = set()
    for f_locs, g_locs in pairs:
        in_f = {pc for pc in g.nodes if pc.loc in f_locs}
        in_g = {pc for pc in g.nodes if pc.loc in g_locs}
        avoid_f = universe - pre_star(in_f, g)  # cannot ever reach F-control
        stuck_g = universe - pre_star(in_g, g)  # cannot reach G-control
        always_g = universe - pre_star(stuck_g, g)  # every future keeps G reachable
        union |= avoid_f & always_g
    return pre_star(union, g)


def to_dot(g: ConfigGraph, protocol: Protocol, pairs=None) -> str:
    """Graphviz dump with SCCs as clusters; bottom SCCs carry verdicts."""
    lines = ["digraph product {", "  rankdir=LR;", "  node [shape=box];"]
    for sid, comp in enumerate(g.sccs):
        lines.append(f"  subgraph cluster_{sid} {{")
        if g.bottom[sid]:
            verdict = ""
            if pairs is not None:
                win = scc_winning([g.nodes[i] for i in comp], pairs)
                verdict = " (winning)" if win else " (losing)"
            lines.append(f'    label="bottom{verdict}";')
            lines.append('    style=filled; color=lightgrey;')
        else:
            lines.append('    label="";')
        for i in comp:
            label = g.nodes[i].pretty(protocol)
            lines.append(f'    n{i} [label="{label}"];')
        lines.append("  }")
    for i, edges in enumerate(g.adj):
        for tid, j in edges:
            lines.append(f'  n{i} -> n{j} [label="{tid}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
