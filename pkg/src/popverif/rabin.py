"""LTL to deterministic Rabin automata.

Pipeline: negation normal form, tableau construction to a generalized
Buchi automaton, counter degeneralization to a plain NBA, then a
Safra-style determinization.  Letters are whole transition ids, so each
letter fixes the valuation of every atom (atoms are mutually exclusive);
this keeps the tableau's letter sets tiny.

Every stage is checked against the independent lasso-word oracle in
`ltl` rather than trusted structurally; a configurable state cap turns
blow-ups into explicit errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .errors import FormulaError, ResourceLimitError
from .ltl import (
    And,
    Atom,
    Eventually,
    FALSE,
    Globally,
    Implies,
    LassoWord,
    Ltl,
    LtlFalse,
    LtlTrue,
    Next,
    Not,
    Or,
    Release,
    TRUE,
    Until,
    to_text,
)

DEFAULT_STATE_CAP = 50_000


# Smart constructors fold constants away; the tableau's acceptance sets
# rely on every surviving subformula being recorded in a node, which bare
# true/false operands would dodge.


def _mk_and(a: Ltl, b: Ltl) -> Ltl:
    if isinstance(a, LtlFalse) or isinstance(b, LtlFalse):
        return FALSE
    if isinstance(a, LtlTrue):
        return b
    if isinstance(b, LtlTrue):
        return a
    return And(a, b)


def _mk_or(a: Ltl, b: Ltl) -> Ltl:
    if isinstance(a, LtlTrue) or isinstance(b, LtlTrue):
        return TRUE
    if isinstance(a, LtlFalse):
        return b
    if isinstance(b, LtlFalse):
        return a
    return Or(a, b)


def _mk_next(a: Ltl) -> Ltl:
    return a if isinstance(a, (LtlTrue, LtlFalse)) else Next(a)


def _mk_until(a: Ltl, b: Ltl) -> Ltl:
    if isinstance(b, (LtlTrue, LtlFalse)):
        return b
    if isinstance(a, LtlFalse):
        return b
    return Until(a, b)


def _mk_release(a: Ltl, b: Ltl) -> Ltl:
    if isinstance(b, (LtlTrue, LtlFalse)):
        return b
    if isinstance(a, LtlTrue):
        return b
    return Release(a, b)


def nnf(phi: Ltl) -> Ltl:
    """Push negations to the atoms; F/G become Until/Release."""
    if isinstance(phi, (LtlTrue, LtlFalse, Atom)):
        return phi
    if isinstance(phi, And):
        return _mk_and(nnf(phi.left), nnf(phi.right))
    if isinstance(phi, Or):
        return _mk_or(nnf(phi.left), nnf(phi.right))
    if isinstance(phi, Implies):
        return _mk_or(nnf(Not(phi.left)), nnf(phi.right))
    if isinstance(phi, Next):
        return _mk_next(nnf(phi.sub))
    if isinstance(phi, Until):
        return _mk_until(nnf(phi.left), nnf(phi.right))
    if isinstance(phi, Release):
        return _mk_release(nnf(phi.left), nnf(phi.right))
    if isinstance(phi, Eventually):
        return _mk_until(TRUE, nnf(phi.sub))
    if isinstance(phi, Globally):
        return _mk_release(FALSE, nnf(phi.sub))
    if isinstance(phi, Not):
        sub = phi.sub
        if isinstance(sub, LtlTrue):
            return FALSE
        if isinstance(sub, LtlFalse):
            return TRUE
        if isinstance(sub, Atom):
            return phi
        if isinstance(sub, Not):
            return nnf(sub.sub)
        if isinstance(sub, And):
            return _mk_or(nnf(Not(sub.left)), nnf(Not(sub.right)))
        if isinstance(sub, Or):
            return _mk_and(nnf(Not(sub.left)), nnf(Not(sub.right)))
        if isinstance(sub, Implies):
            return _mk_and(nnf(sub.left), nnf(Not(sub.right)))
        if isinstance(sub, Next):
            return _mk_next(nnf(Not(sub.sub)))
        if isinstance(sub, Until):
            return _mk_release(nnf(Not(sub.left)), nnf(Not(sub.right)))
        if isinstance(sub, Release):
            return _mk_until(nnf(Not(sub.left)), nnf(Not(sub.right)))
        if isinstance(sub, Eventually):
            return _mk_release(FALSE, nnf(Not(sub.sub)))
        if isinstance(sub, Globally):
            return _mk_until(TRUE, nnf(Not(sub.sub)))
    raise FormulaError(f"cannot normalize {phi!r}")


@dataclass
class Nba:
    """Nondeterministic Buchi automaton over transition-id letters."""

    num_states: int
    alphabet: tuple[str, ...]
    edges: dict[tuple[int, str], frozenset[int]]
    initial: frozenset[int]
    accepting: frozenset[int]

    def successors(self, state: int, letter: str) -> frozenset[int]:
        return self.edges.get((state, letter), frozenset())


@dataclass
class DeterministicRabinAutomaton:
    """Total deterministic automaton with Rabin pairs (F finite, G infinite)."""

    alphabet: tuple[str, ...]
    num_states: int
    initial: int
    table: tuple[tuple[int, ...], ...]  # table[state][letter index]
    pairs: tuple[tuple[frozenset[int], frozenset[int]], ...]

    def letter_index(self, letter: str) -> int:
        try:
            return self._letter_index[letter]
        except AttributeError:
            self._letter_index = {a: i for i, a in enumerate(self.alphabet)}
            return self._letter_index[letter]

    def step(self, state: int, letter: str) -> int:
        return self.table[state][self.letter_index(letter)]


# ---------------------------------------------------------------------------
# Tableau: NNF formula -> generalized Buchi -> NBA


def _untils_of(phi: Ltl) -> list[Until]:
    seen: list[Until] = []

    def walk(f):
        if isinstance(f, Until) and f not in seen:
            seen.append(f)
        if isinstance(f, (Not, Next, Eventually, Globally)):
            walk(f.sub)
        elif isinstance(f, (And, Or, Implies, Until, Release)):
            walk(f.left)
            walk(f.right)

    walk(phi)
    return sorted(seen, key=to_text)


def _tableau_nodes(phi_nnf: Ltl):
    """Classic new/old/next node expansion.

    Returns (nodes, incoming) where nodes are (old, next) frozenset pairs
    and incoming maps node id -> set of predecessor ids (-1 is the
    virtual initial marker).  Obligations are processed in a canonical
    text order so node numbering is reproducible across runs.
    """
    nodes: dict[tuple[frozenset, frozenset], int] = {}
    incoming: dict[int, set[int]] = {}
    jobs: list[tuple[set, int]] = [({phi_nnf}, -1)]  # (seed obligations, predecessor)

    def finish(old: frozenset, nxt: frozenset, pred: int) -> None:
        key = (old, nxt)
        if key in nodes:
            incoming[nodes[key]].add(pred)
            return
        nid = len(nodes)
        nodes[key] = nid
        incoming[nid] = {pred}
        jobs.append((set(nxt), nid))

    while jobs:
        seed, pred = jobs.pop(0)
        stack = [(seed, set(), set())]
        while stack:
            new, old, nxt = stack.pop()
            while new:
                eta = min(new, key=to_text)
                new.discard(eta)
                if isinstance(eta, LtlTrue):
                    continue
                if isinstance(eta, LtlFalse):
                    break
                if isinstance(eta, Atom) or (
                    isinstance(eta, Not) and isinstance(eta.sub, Atom)
                ):
                    neg = eta.sub if isinstance(eta, Not) else Not(eta)
                    if neg in old:
                        break
                    old.add(eta)
                    continue
                if eta in old:
                    continue
                if isinstance(eta, And):
                    old.add(eta)
                    new |= {eta.left, eta.right} - old
                    continue
                if isinstance(eta, Next):
                    old.add(eta)
                    nxt.add(eta.sub)
                    continue
                if isinstance(eta, Or):
                    old.add(eta)
                    stack.append((new | ({eta.left} - old), set(old), set(nxt)))
                    stack.append((new | ({eta.right} - old), set(old), set(nxt)))
                    break
                if isinstance(eta, Until):
                    old.add(eta)
                    stack.append((new | ({eta.left} - old), set(old), nxt | {eta}))
                    stack.append((new | ({eta.right} - old), set(old), set(nxt)))
                    break
                if isinstance(eta, Release):
                    old.add(eta)
                    stack.append((new | ({eta.right} - old), set(old), nxt | {eta}))
                    stack.append(
                        (new | ({eta.left, eta.right} - old), set(old), set(nxt))
                    )
                    break
                raise FormulaError(f"unexpected node {eta!r} in tableau")
            else:
                finish(frozenset(old), frozenset(nxt), pred)

    return nodes, incoming


def _node_letters(old: frozenset, alphabet: tuple[str, ...]) -> tuple[str, ...]:
    pos = {f.name for f in old if isinstance(f, Atom)}
    neg = {f.sub.name for f in old if isinstance(f, Not) and isinstance(f.sub, Atom)}
    if len(pos) >= 2:
        return ()
    if len(pos) == 1:
        (a,) = pos
        return (a,) if a not in neg and a in alphabet else ()
    return tuple(a for a in alphabet if a not in neg)


def ltl_to_nba(phi: Ltl, alphabet: tuple[str, ...]) -> Nba:
    """Tableau construction; counter-degeneralized, pruned to live states."""
    phi_n = nnf(phi)
    nodes, incoming = _tableau_nodes(phi_n)
    untils = _untils_of(phi_n)
    k = len(untils)

    node_old = {nid: key[0] for key, nid in nodes.items()}
    letters = {nid: _node_letters(node_old[nid], alphabet) for nid in node_old}
    succs: dict[int, list[int]] = {nid: [] for nid in node_old}
    initial_nodes = []
    for nid, preds in incoming.items():
        for p in preds:
            if p == -1:
                initial_nodes.append(nid)
            else:
                succs[p].append(nid)

    # Acceptance per until u: nodes with u unpromised or already satisfied.
    f_sets = []
    for u in untils:
        f_sets.append({nid for nid, old in node_old.items()
                       if u not in old or u.right in old})

    def advance(base: int, nid: int) -> int:
        j = base
        while j < k and nid in f_sets[j]:
            j += 1
        return j

    # States (node, counter); counter == k is the accepting flash.
    state_ids: dict[tuple[int, int], int] = {}
    edges: dict[tuple[int, str], set[int]] = {}
    initial = set()
    worklist = []

    def intern(node: int, ctr: int) -> int:
        key = (node, ctr)
        if key not in state_ids:
            state_ids[key] = len(state_ids)
            worklist.append(key)
        return state_ids[key]

    for nid in initial_nodes:
        initial.add(intern(nid, advance(0, nid) if k else 0))
    while worklist:
        node, ctr = worklist.pop()
        sid = state_ids[(node, ctr)]
        base = 0 if ctr == k else ctr
        for a in letters[node]:
            for nxt in succs[node]:
                tid = intern(nxt, advance(base, nxt) if k else 0)
                edges.setdefault((sid, a), set()).add(tid)

    if k:
        accepting = {sid for (node, ctr), sid in state_ids.items() if ctr == k}
    else:
        accepting = set(state_ids.values())

    nba = Nba(
        num_states=len(state_ids),
        alphabet=alphabet,
        edges={key: frozenset(v) for key, v in edges.items()},
        initial=frozenset(initial),
        accepting=frozenset(accepting),
    )
    return _prune_nba(nba)


def _prune_nba(nba: Nba) -> Nba:
    """Keep only states that can reach an accepting cycle (live states)."""
    preds: dict[int, set[int]] = {s: set() for s in range(nba.num_states)}
    succ_sets: dict[int, set[int]] = {s: set() for s in range(nba.num_states)}
    for (s, _a), targets in nba.edges.items():
        for t in targets:
            preds[t].add(s)
            succ_sets[s].add(t)

    sccs = _tarjan(range(nba.num_states), lambda s: succ_sets[s])
    recurrent = set()
    for comp in sccs:
        comp_set = set(comp)
        has_cycle = len(comp) > 1 or any(s in succ_sets[s] for s in comp)
        if has_cycle and any(s in nba.accepting for s in comp):
            recurrent |= comp_set
    live = set(recurrent)
    frontier = list(recurrent)
    while frontier:
        s = frontier.pop()
        for p in preds[s]:
            if p not in live:
                live.add(p)
                frontier.append(p)

    keep = sorted(live & _reachable_nba(nba))
    remap = {s: i for i, s in enumerate(keep)}
    edges = {}
    for (s, a), targets in nba.edges.items():
        if s in remap:
            tgts = frozenset(remap[t] for t in targets if t in remap)
            if tgts:
                edges[(remap[s], a)] = tgts
    return Nba(
        num_states=len(keep),
        alphabet=nba.alphabet,
        edges=edges,
        initial=frozenset(remap[s] for s in nba.initial if s in remap),
        accepting=frozenset(remap[s] for s in nba.accepting if s in remap),
    )


def _reachable_nba(nba: Nba) -> set[int]:
    seen = set(nba.initial)
    stack = list(nba.initial)
    while stack:
        s = stack.pop()
        for a in nba.alphabet:
            for t in nba.successors(s, a):
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
    return seen


def _tarjan(vertices, succ) -> list[list]:
    """Iterative Tarjan; returns SCCs in reverse topological order."""
    index: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    sccs: list[list] = []
    counter = [0]

    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                elif w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                lowlink[u] = min(lowlink[u], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


# ---------------------------------------------------------------------------
# Safra determinization

# A Safra tree is None (dead) or a node tuple
#   (name, frozenset(label), marked, children-tuple)
# with ordered children, oldest first.


def _tree_names(tree) -> set[int]:
    if tree is None:
        return set()
    out = {tree[0]}
    for c in tree[3]:
        out |= _tree_names(c)
    return out


def _tree_marked_names(tree) -> set[int]:
    if tree is None:
        return set()
    out = {tree[0]} if tree[2] else set()
    for c in tree[3]:
        out |= _tree_marked_names(c)
    return out


class _MutNode:
    __slots__ = ("name", "label", "children")

    def __init__(self, name, label, children):
        self.name = name
        self.label = label
        self.children = children


def _to_mut(tree) -> _MutNode:
    return _MutNode(tree[0], set(tree[1]), [_to_mut(c) for c in tree[3]])


def _preorder(node: _MutNode):
    yield node
    for c in node.children:
        yield from _preorder(c)


def _safra_step(tree, letter: str, nba: Nba, pool: int):
    if tree is None:
        return None
    root = _to_mut(tree)

    # 1-2. unmark (implicit) and branch accepting subsets into youngest children
    used = {n.name for n in _preorder(root)}
    free = iter(sorted(set(range(1, pool + 1)) - used))
    originals = list(_preorder(root))
    for node in originals:
        hit = node.label & nba.accepting
        if hit:
            try:
                fresh = next(free)
            except StopIteration:
                raise ResourceLimitError("Safra name pool exhausted")
            node.children.append(_MutNode(fresh, set(hit), []))

    # 3. powerset step
    for node in _preorder(root):
        nxt = set()
        for q in node.label:
            nxt |= nba.successors(q, letter)
        node.label = nxt

    # 4. horizontal merge: older siblings keep shared states
    def strip(node: _MutNode, taken: set):
        node.label -= taken
        for c in node.children:
            strip(c, taken)

    def hmerge(node: _MutNode):
        claimed: set = set()
        for c in node.children:
            strip(c, claimed)
            claimed |= c.label
            hmerge(c)

    hmerge(root)

    # 5. drop empty nodes
    if not root.label:
        return None

    def drop_empty(node: _MutNode):
        node.children = [c for c in node.children if c.label]
        for c in node.children:
            drop_empty(c)

    drop_empty(root)

    # 6. vertical merge: a node fully covered by its children gets marked
    def freeze(node: _MutNode):
        union = set()
        for c in node.children:
            union |= c.label
        if node.children and union == node.label:
            return (node.name, frozenset(node.label), True, ())
        return (
            node.name,
            frozenset(node.label),
            False,
            tuple(freeze(c) for c in node.children),
        )

    return freeze(root)


def nba_to_dra(nba: Nba, max_states: int = DEFAULT_STATE_CAP) -> DeterministicRabinAutomaton:
    """Safra-style determinization with an explicit state cap."""
    pool = 2 * max(nba.num_states, 1) + 2
    init_tree = (1, frozenset(nba.initial), False, ()) if nba.initial else None

    states: dict = {init_tree: 0}
    order = [init_tree]
    table: list[list[int]] = []
    i = 0
    while i < len(order):
        tree = order[i]
        row = []
        for a in nba.alphabet:
            nxt = _safra_step(tree, a, nba, pool)
            if nxt not in states:
                if len(states) >= max_states:
                    raise ResourceLimitError(
                        f"determinization exceeded {max_states} states"
                    )
                states[nxt] = len(order)
                order.append(nxt)
            row.append(states[nxt])
        table.append(row)
        i += 1

    names = set()
    for tree in order:
        names |= _tree_names(tree)
    pairs = []
    for name in sorted(names):
        f_set = frozenset(i for i, t in enumerate(order) if name not in _tree_names(t))
        g_set = frozenset(
            i for i, t in enumerate(order) if name in _tree_marked_names(t)
        )
        if g_set:
            pairs.append((f_set, g_set))

    return DeterministicRabinAutomaton(
        alphabet=nba.alphabet,
        num_states=len(order),
        initial=0,
        table=tuple(tuple(row) for row in table),
        pairs=tuple(pairs),
    )


# ---------------------------------------------------------------------------
# End-to-end translation and lasso acceptance


@lru_cache(maxsize=4096)
def ltl_to_dra(
    phi: Ltl, alphabet: tuple[str, ...], max_states: int = DEFAULT_STATE_CAP
) -> DeterministicRabinAutomaton:
    """Translate phi over the given letters; language-equal to phi.

    Results are cached; treat returned automata as immutable.
    """
    nba = ltl_to_nba(phi, tuple(alphabet))
    return nba_to_dra(nba, max_states=max_states)


def dra_accepts_lasso(dra: DeterministicRabinAutomaton, word: LassoWord) -> bool:
    """Run u, then pump v until the block-entry state repeats; check pairs."""
    for a in word.letters():
        if a not in dra.alphabet:
            raise FormulaError(f"unknown letter {a!r}")
    state = dra.initial
    for a in word.stem:
        state = dra.step(state, a)

    entries = {state: 0}
    blocks = []  # states visited inside each v block
    cur = state
    while True:
        visited = []
        for a in word.loop:
            cur = dra.step(cur, a)
            visited.append(cur)
        blocks.append(visited)
        if cur in entries:
            start = entries[cur]
            break
        entries[cur] = len(blocks)

    inf: set[int] = set()
    for block in blocks[start:]:
        inf.update(block)
    return any(not (inf & f) and (inf & g) for f, g in dra.pairs)


# ---------------------------------------------------------------------------
# HOA-subset serialization


def serialize_dra(dra: DeterministicRabinAutomaton) -> str:
    """Canonical HOA-subset text; `parse_dra` round-trips it bit-exactly."""
    lines = [
        "HOA: v1",
        f"States: {dra.num_states}",
        f"Start: {dra.initial}",
        "AP: {} {}".format(
            len(dra.alphabet), " ".join(f'"{a}"' for a in dra.alphabet)
        ).rstrip(),
        f"Acceptance: Rabin {len(dra.pairs)}",
        "--BODY--",
    ]
    for s in range(dra.num_states):
        sets = []
        for i, (f, g) in enumerate(dra.pairs):
            if s in f:
                sets.append(2 * i)
            if s in g:
                sets.append(2 * i + 1)
        brace = " {" + " ".join(map(str, sets)) + "}" if sets else ""
        lines.append(f"State: {s}{brace}")
        for j in range(len(dra.alphabet)):
            lines.append(f"[{j}] {dra.table[s][j]}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


def parse_dra(text: str) -> DeterministicRabinAutomaton:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "HOA: v1":
        raise FormulaError("missing 'HOA: v1' header")

    header: dict[str, str] = {}
    body_at = None
    for i, ln in enumerate(lines[1:], start=1):
        if ln == "--BODY--":
            body_at = i
            break
        if ":" not in ln:
            raise FormulaError(f"malformed header line {ln!r}")
        key, val = ln.split(":", 1)
        header[key.strip()] = val.strip()
    if body_at is None:
        raise FormulaError("missing --BODY-- marker")
    for req in ("States", "Start", "AP", "Acceptance"):
        if req not in header:
            raise FormulaError(f"missing {req}: header")

    num_states = int(header["States"])
    initial = int(header["Start"])
    ap_parts = header["AP"].split(None, 1)
    ap_count = int(ap_parts[0])
    alphabet = tuple(re.findall(r'"([^"]*)"', ap_parts[1] if len(ap_parts) > 1 else ""))
    if len(alphabet) != ap_count:
        raise FormulaError("AP count does not match the listed names")
    acc = header["Acceptance"].split()
    if len(acc) != 2 or acc[0] != "Rabin":
        raise FormulaError(f"unsupported acceptance {header['Acceptance']!r}")
    num_pairs = int(acc[1])

    table = [[None] * len(alphabet) for _ in range(num_states)]
    fin = [set() for _ in range(num_pairs)]
    inf = [set() for _ in range(num_pairs)]
    cur = None
    for ln in lines[body_at + 1:]:
        if ln == "--END--":
            break
        if ln.startswith("State:"):
            m = re.fullmatch(r"State:\s*(\d+)(?:\s*\{([\d\s]*)\})?", ln)
            if not m:
                raise FormulaError(f"malformed state line {ln!r}")
            cur = int(m.group(1))
            if cur >= num_states:
                raise FormulaError(f"state {cur} out of range")
            for idx in (m.group(2) or "").split():
                idx = int(idx)
                if idx >= 2 * num_pairs:
                    raise FormulaError(f"acceptance set {idx} out of range")
                (fin if idx % 2 == 0 else inf)[idx // 2].add(cur)
        else:
            m = re.fullmatch(r"\[(\d+)\]\s*(\d+)", ln)
            if not m or cur is None:
                raise FormulaError(f"malformed edge line {ln!r}")
            j, dst = int(m.group(1)), int(m.group(2))
            if j >= len(alphabet) or dst >= num_states:
                raise FormulaError(f"edge {ln!r} out of range")
            table[cur][j] = dst
    for s in range(num_states):
        if any(x is None for x in table[s]):
            raise FormulaError(f"state {s} is missing edges (table must be total)")

    return DeterministicRabinAutomaton(
        alphabet=alphabet,
        num_states=num_states,
        initial=initial,
        table=tuple(tuple(row) for row in table),
        pairs=tuple(
            (frozenset(fin[i]), frozenset(inf[i])) for i in range(num_pairs)
        ),
    )
