"""Transfer-flow abstraction for unbounded-population reachability.

A transfer flow (f, l, l') abstracts finite runs of a product system:
f(q,q') = n demands that at least n agents move from q to q' (any larger
number is allowed), while a sharp entry forbids movement along that pair.
Flows of single transitions compose with a product that is witnessed by a
three-index matrix; iterating the composition to a fixpoint of minimal
elements yields an antichain deciding reachability for every population
size at once.

Sharp arithmetic (`# + x = x`, `#` comparable only with `#`) is kept in
two tiny helpers because every argument downstream leans on it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

from .errors import ProtocolError, ResourceLimitError
from .model import Configuration, Protocol, Transition, enumerate_configs
from .product import ProdConfig, ProductSystem

DEFAULT_WORK_CAP = 2_000_000
DEFAULT_ROUND_CAP = 64


class Sharp:
    """The movement-forbidden marker; a singleton."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "#"


SHARP = Sharp()


def ext_le(a, b) -> bool:
    """Order on N-sharp: sharp is comparable only with itself."""
    if a is SHARP or b is SHARP:
        return a is SHARP and b is SHARP
    return a <= b


def ext_add(a, b):
    """Addition on N-sharp: sharp is the neutral element."""
    if a is SHARP:
        return b
    if b is SHARP:
        return a
    return a + b


Matrix = tuple  # m x m rows of int | Sharp


@dataclass(frozen=True)
class TransferFlow:
    f: Matrix
    src: int
    dst: int

    @cached_property
    def weight(self) -> int:
        return sum(x for row in self.f for x in row if x is not SHARP)

    @cached_property
    def sharp_pattern(self) -> tuple[tuple[bool, ...], ...]:
        return tuple(tuple(x is SHARP for x in row) for row in self.f)

    def sort_key(self):
        flat = tuple(-1 if x is SHARP else x for row in self.f for x in row)
        return (self.src, self.dst, self.weight, flat)

    def pretty(self) -> str:
        rows = [" ".join("#" if x is SHARP else str(x) for x in row) for row in self.f]
        return f"{self.src} -> {self.dst} : " + " | ".join(rows)


def tf_leq(a: TransferFlow, b: TransferFlow) -> bool:
    """a is below b: same control endpoints, same sharp pattern, pointwise <=.

    Smaller flows are the more powerful ones: they allow every movement
    the larger flow allows and more.
    """
    if a.src != b.src or a.dst != b.dst:
        return False
    return all(
        ext_le(x, y) for ra, rb in zip(a.f, b.f) for x, y in zip(ra, rb)
    )


def antichain_min(flows) -> list[TransferFlow]:
    """Minimal elements under tf_leq, canonically sorted."""
    flows = sorted(set(flows), key=TransferFlow.sort_key)
    out: list[TransferFlow] = []
    for tf in flows:  # ascending weight: earlier kept elements can dominate later
        if not any(tf_leq(kept, tf) for kept in out):
            out.append(tf)
    return out


def identity_flows(num_states: int, locs) -> list[TransferFlow]:
    """Minimal elements of the empty-sequence flow set: zero diagonals."""
    f = tuple(
        tuple(0 if i == j else SHARP for j in range(num_states))
        for i in range(num_states)
    )
    return [TransferFlow(f, loc, loc) for loc in locs]


def min_tr_of_transition(
    protocol: Protocol, t: Transition, dra
) -> list[TransferFlow]:
    """Minimal transition flows, one per control state.

    For t with observer o and mover s -> d: at least one agent stays on
    the observer's state and at least one moves from s to d; every other
    diagonal is free and every other off-diagonal is forbidden.
    """
    form = t.iopp_form
    if form is None:
        raise ProtocolError(f"transfer flows need IOPP rules, got {t.tid}")
    mover, obs, target = form
    m = protocol.num_states

    cells = [[SHARP] * m for _ in range(m)]
    for q in range(m):
        cells[q][q] = 0
    if mover == obs == target:
        cells[obs][obs] = 2
    else:
        # (mover, target) == (obs, obs) would force all three equal
        cells[obs][obs] = 1
        cells[mover][target] = 1
    f = tuple(tuple(row) for row in cells)
    return [TransferFlow(f, loc, dra.step(loc, t.tid)) for loc in range(dra.num_states)]


# ---------------------------------------------------------------------------
# Flow steps: can tf move configuration gamma1 to gamma2?


def _max_flow(capacity: list[list[int]], source: int, sink: int) -> int:
    """Edmonds-Karp on a dense capacity matrix; graphs here are tiny."""
    n = len(capacity)
    flow = 0
    while True:
        parent = [-1] * n
        parent[source] = source
        queue = [source]
        while queue and parent[sink] == -1:
            u = queue.pop(0)
            row = capacity[u]
            for v in range(n):
                if parent[v] == -1 and row[v] > 0:
                    parent[v] = u
                    queue.append(v)
        if parent[sink] == -1:
            return flow
        # bottleneck along the path
        bottleneck = None
        v = sink
        while v != source:
            u = parent[v]
            c = capacity[u][v]
            bottleneck = c if bottleneck is None else min(bottleneck, c)
            v = u
        v = sink
        while v != source:
            u = parent[v]
            capacity[u][v] -= bottleneck
            capacity[v][u] += bottleneck
            v = u
        flow += bottleneck


def flow_step_feasible(c1: ProdConfig, tf: TransferFlow, c2: ProdConfig):
    """Step witness g >= tf.f with row sums gamma1 and column sums gamma2.

    Lower bounds come from the flow; the residual slack is routed over the
    non-sharp cells as a transportation problem solved by maximum flow.
    Returns the witness matrix, or None when no witness exists.
    """
    g1, g2 = c1.config, c2.config
    if g1.size != g2.size:
        raise ProtocolError("flow steps preserve the population size")
    if c1.loc != tf.src or c2.loc != tf.dst:
        return None
    m = len(tf.f)

    supply = []
    for q in range(m):
        row_min = sum(x for x in tf.f[q] if x is not SHARP)
        open_row = any(x is not SHARP for x in tf.f[q])
        if not open_row or g1.counts[q] < row_min:
            return None  # a row stuck at sharp can never sum to a count
        supply.append(g1.counts[q] - row_min)
    demand = []
    for q in range(m):
        col = [tf.f[p][q] for p in range(m)]
        col_min = sum(x for x in col if x is not SHARP)
        open_col = any(x is not SHARP for x in col)
        if not open_col or g2.counts[q] < col_min:
            return None
        demand.append(g2.counts[q] - col_min)

    total = sum(supply)
    if total != sum(demand):
        return None

    # nodes: source, rows 1..m, columns m+1..2m, sink
    n = 2 * m + 2
    source, sink = 0, n - 1
    cap = [[0] * n for _ in range(n)]
    for q in range(m):
        cap[source][1 + q] = supply[q]
        cap[1 + m + q][sink] = demand[q]
    for p in range(m):
        for q in range(m):
            if tf.f[p][q] is not SHARP:
                cap[1 + p][1 + m + q] = total
    before = [row[:] for row in cap]
    if _max_flow(cap, source, sink) != total:
        return None

    g = [list(row) for row in tf.f]
    for p in range(m):
        for q in range(m):
            if tf.f[p][q] is not SHARP:
                routed = before[1 + p][1 + m + q] - cap[1 + p][1 + m + q]
                g[p][q] = tf.f[p][q] + routed
    return tuple(tuple(row) for row in g)


# ---------------------------------------------------------------------------
# The composition product and its minimal elements


def tf_product_member_bruteforce(
    a: TransferFlow, b: TransferFlow, candidate: TransferFlow,
    work_cap: int = DEFAULT_WORK_CAP,
) -> bool:
    """Exhaustive search for a product witness; independent oracle.

    Candidates with an allowed cell set to sharp are equivalent to the
    all-numeric filling, so the search only ranges over numeric values.
    """
    if a.dst != b.src or candidate.src != a.src or candidate.dst != b.dst:
        return False
    m = len(a.f)
    h = candidate.f

    groups = []  # per (q1,q3) with numeric h: available middles
    for q1 in range(m):
        for q3 in range(m):
            if h[q1][q3] is SHARP:
                continue
            mids = [
                q2
                for q2 in range(m)
                if a.f[q1][q2] is not SHARP and b.f[q2][q3] is not SHARP
            ]
            if not mids:
                return False
            groups.append((q1, q3, mids))
    # every numeric row of a / column of b needs at least one live cell
    for q1 in range(m):
        for q2 in range(m):
            if a.f[q1][q2] is not SHARP:
                if not any(
                    h[q1][q3] is not SHARP and b.f[q2][q3] is not SHARP
                    for q3 in range(m)
                ):
                    return False
    for q2 in range(m):
        for q3 in range(m):
            if b.f[q2][q3] is not SHARP:
                if not any(
                    h[q1][q3] is not SHARP and a.f[q1][q2] is not SHARP
                    for q1 in range(m)
                ):
                    return False

    row_need = [
        [a.f[q1][q2] for q2 in range(m)] for q1 in range(m)
    ]
    col_need = [
        [b.f[q2][q3] for q3 in range(m)] for q2 in range(m)
    ]
    row_sum = [[0] * m for _ in range(m)]  # over (q1,q2)
    col_sum = [[0] * m for _ in range(m)]  # over (q2,q3)
    work = [0]

    def compositions(total, k):
        if k == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, k - 1):
                yield (first,) + rest

    def dfs(gi: int) -> bool:
        work[0] += 1
        if work[0] > work_cap:
            raise ResourceLimitError("product membership search exceeded its work cap")
        if gi == len(groups):
            for q1 in range(m):
                for q2 in range(m):
                    need = row_need[q1][q2]
                    if need is not SHARP and row_sum[q1][q2] < need:
                        return False
            for q2 in range(m):
                for q3 in range(m):
                    need = col_need[q2][q3]
                    if need is not SHARP and col_sum[q2][q3] < need:
                        return False
            return True
        q1, q3, mids = groups[gi]
        for combo in compositions(h[q1][q3], len(mids)):
            for q2, v in zip(mids, combo):
                row_sum[q1][q2] += v
                col_sum[q2][q3] += v
            if dfs(gi + 1):
                return True
            for q2, v in zip(mids, combo):
                row_sum[q1][q2] -= v
                col_sum[q2][q3] -= v
        return False

    return dfs(0)


_ROW_OPTIONS_CACHE: dict = {}
_SLICE_CACHE: dict = {}


def _row_vector_options(rb: int, col_bounds: tuple) -> list[tuple]:
    """Candidate slice rows for a row with lower bound rb.

    Cells are sharp or a value; at least one cell is numeric.  In a
    minimal slice every positive cell is tight in its row or column, so a
    positive cell may exceed its column bound only when the row sum is
    exactly rb.  Everything else is filtered later.
    """
    key = (rb, col_bounds)
    hit = _ROW_OPTIONS_CACHE.get(key)
    if hit is not None:
        return hit
    options = []
    domains = [[SHARP] + list(range(max(rb, cb) + 1)) for cb in col_bounds]

    def rec(i, acc, total):
        if i == len(col_bounds):
            if total is SHARP:
                return
            if total < rb or total > max(rb, sum(col_bounds)):
                return
            if total != rb and any(
                v is not SHARP and v > 0 and v > cb
                for cb, v in zip(col_bounds, acc)
            ):
                return  # positive cell neither row- nor potentially col-tight
            options.append(tuple(acc))
            return
        for v in domains[i]:
            rec(i + 1, acc + [v], ext_add(total, v))

    rec(0, [], SHARP)
    _ROW_OPTIONS_CACHE[key] = options
    return options


def _enumerate_slices(row_bounds: tuple, col_bounds: tuple, work_cap: int):
    """All minimal slice fillings for a positional bound signature.

    A positive cell in a row whose sum exceeds its bound can only be
    excused by ending exactly column-tight, so any column carrying such a
    cell is pruned as soon as its sum overshoots.
    """
    per_row = [_row_vector_options(rb, col_bounds) for rb in row_bounds]
    out = []
    work = [0]
    ncols = len(col_bounds)

    def dfs(i: int, chosen: list, csum: list, floating: tuple):
        work[0] += 1
        if work[0] > work_cap:
            raise ResourceLimitError("slice enumeration exceeded its work cap")
        if i == len(row_bounds):
            for j in range(ncols):
                have = csum[j]
                if have is SHARP or have < col_bounds[j]:
                    return
                if floating[j] and have != col_bounds[j]:
                    return
            out.append(tuple(chosen))
            return
        # column shortfall the remaining rows cannot cover
        for j in range(ncols):
            best = sum(max(rb, col_bounds[j]) for rb in row_bounds[i:])
            have = 0 if csum[j] is SHARP else csum[j]
            if have + best < col_bounds[j]:
                return
        for vec in per_row[i]:
            nsum = [ext_add(a, b) for a, b in zip(csum, vec)]
            row_tight = sum(v for v in vec if v is not SHARP) == row_bounds[i]
            nfloat = list(floating)
            ok = True
            for j, v in enumerate(vec):
                if not row_tight and v is not SHARP and v > 0:
                    nfloat[j] = True
                if nfloat[j] and nsum[j] is not SHARP and nsum[j] > col_bounds[j]:
                    ok = False
                    break
            if ok:
                dfs(i + 1, chosen + [vec], nsum, tuple(nfloat))

    dfs(0, [], [SHARP] * ncols, (False,) * ncols)
    return out


def _minimal_slice_matrices(rows, row_bound, cols, col_bound, work_cap):
    """Minimal fillings of one witness slice (fixed middle state).

    A slice assigns, to each (active row, active column) cell, either
    sharp or a value; every active row and column needs at least one
    numeric cell and its sum must reach the bound.  Minimality means no
    positive cell can be decremented, i.e. each positive cell is tight in
    its row or in its column.  Enumeration is positional and cached by
    the bound signature.
    """
    key = (
        tuple(row_bound[r] for r in rows),
        tuple(col_bound[c] for c in cols),
    )
    cached = _SLICE_CACHE.get(key)
    if cached is None:
        cached = _enumerate_slices(key[0], key[1], work_cap)
        _SLICE_CACHE[key] = cached
    return [
        {
            (r, c): vec[j]
            for r, vec in zip(rows, mat)
            for j, c in enumerate(cols)
        }
        for mat in cached
    ]


def tf_product_min(
    a: TransferFlow, b: TransferFlow, work_cap: int = DEFAULT_WORK_CAP
) -> list[TransferFlow]:
    """All minimal elements of the composition a (x) b.

    The witness decomposes into independent slices, one per middle state;
    summing per-slice minimal fillings over all slice supports and taking
    the antichain yields exactly the minimal composed flows (the
    brute-force membership oracle pins this down in the tests).
    """
    if a.dst != b.src:
        return []
    m = len(a.f)

    slice_options = []
    for q2 in range(m):
        rows = [q1 for q1 in range(m) if a.f[q1][q2] is not SHARP]
        cols = [q3 for q3 in range(m) if b.f[q2][q3] is not SHARP]
        if bool(rows) != bool(cols):
            return []  # a dangling bound can never be met
        if not rows:
            slice_options.append([{}])
            continue
        row_bound = {q1: a.f[q1][q2] for q1 in rows}
        col_bound = {q3: b.f[q2][q3] for q3 in cols}
        mats = _minimal_slice_matrices(rows, row_bound, cols, col_bound, work_cap)
        if not mats:
            return []
        slice_options.append(mats)

    # Minkowski-combine slices; prune dominated partial sums per pattern.
    work = 0
    partials: list[tuple] = [tuple(tuple(SHARP for _ in range(m)) for _ in range(m))]
    for q2, mats in enumerate(slice_options):
        merged: dict = {}
        work += len(partials) * len(mats)
        if work > work_cap:
            raise ResourceLimitError("product combination exceeded its work cap")
        for base in partials:
            for mat in mats:
                acc = [list(row) for row in base]
                for (q1, q3), v in mat.items():
                    if v is not SHARP:
                        acc[q1][q3] = ext_add(acc[q1][q3], v)
                frozen = tuple(tuple(row) for row in acc)
                pattern = tuple(tuple(x is SHARP for x in row) for row in frozen)
                bucket = merged.setdefault(pattern, [])
                if any(_mat_leq(other, frozen) for other in bucket):
                    continue
                bucket[:] = [o for o in bucket if not _mat_leq(frozen, o)]
                bucket.append(frozen)
        partials = [mat for bucket in merged.values() for mat in bucket]
        if not partials:
            return []

    flows = [TransferFlow(mat, a.src, b.dst) for mat in partials]
    return antichain_min(flows)


def _mat_leq(x, y) -> bool:
    return all(ext_le(a, b) for rx, ry in zip(x, y) for a, b in zip(rx, ry))


# ---------------------------------------------------------------------------
# Saturation to min T[Delta*]


def saturate(
    ps: ProductSystem,
    max_rounds: int = DEFAULT_ROUND_CAP,
    work_cap: int = DEFAULT_WORK_CAP,
) -> tuple[list[TransferFlow], int]:
    """Fixpoint of minimal flows of all transition sequences.

    Starts from the empty-sequence and single-transition minima and keeps
    composing with single-transition minima until the antichain is stable.
    Returns (antichain, k) where the antichain covers all sequences of
    length <= k and is stable; elements then weigh at most 2k.
    """
    protocol, dra = ps.protocol, ps.dra
    if not protocol.is_iopp:
        raise ProtocolError("saturation is defined for IOPPs")
    tr_minima: list[TransferFlow] = []
    for t in protocol.transitions:
        tr_minima.extend(min_tr_of_transition(protocol, t, dra))

    current = antichain_min(
        identity_flows(protocol.num_states, range(dra.num_states)) + tr_minima
    )
    cache: dict[tuple[TransferFlow, TransferFlow], list[TransferFlow]] = {}

    k = 1  # `current` is min T[Delta^{<=1}]
    while True:
        candidates = list(current)
        for x in current:
            for t_min in tr_minima:
                if x.dst != t_min.src:
                    continue
                key = (x, t_min)
                if key not in cache:
                    cache[key] = tf_product_min(x, t_min, work_cap)
                candidates.extend(cache[key])
        nxt = antichain_min(candidates)
        if nxt == current:
            return current, k
        current = nxt
        k += 1
        if k > max_rounds:
            raise ResourceLimitError(f"saturation did not stabilize in {max_rounds} rounds")


def reachable_via_flows(
    c1: ProdConfig, c2: ProdConfig, saturated: list[TransferFlow]
) -> bool:
    """Product-system reachability via the saturated antichain."""
    if c1.config.size != c2.config.size:
        raise ProtocolError("reachability is defined between equal-size configurations")
    for tf in saturated:
        if tf.src != c1.loc or tf.dst != c2.loc:
            continue
        if flow_step_feasible(c1, tf, c2) is not None:
            return True
    return False


def antichain_to_text(flows) -> str:
    """One flow per line, canonical order; for golden-file tests."""
    return "\n".join(tf.pretty() for tf in sorted(flows, key=TransferFlow.sort_key)) + "\n"


# ---------------------------------------------------------------------------
# Empirical blindness of configuration sets


def empirical_blindness(
    pred, num_states: int, sizes, k_max: int, locs=(0,)
):
    """Least K <= k_max making pred insensitive to adding an agent to any
    state already holding K agents, over all tested sizes; None if no such K.

    pred takes (Configuration, loc); pass locs=(0,) for sets that ignore
    the control part.
    """
    sizes = sorted(sizes)
    worst = -1  # largest count at which a disagreement was observed
    for n in sizes:
        if n + 1 > sizes[-1]:
            break  # gamma + q must stay inside the tested window
        for gamma in enumerate_configs(n, list(range(num_states)), num_states):
            for loc in locs:
                base = pred(gamma, loc)
                for q in range(num_states):
                    if pred(gamma.add_agent(q), loc) != base:
                        worst = max(worst, gamma.counts[q])
    k = worst + 1
    return k if k <= k_max else None
