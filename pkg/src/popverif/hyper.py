"""Monadic HyperLTL decision procedures and theoretical cutoff bounds.

A monadic formula decomposes into per-variable temporal blocks.  Since
every variable quantifies over the same strongly fair runs, a quantifier
only interacts with the matrix through which block valuations some fair
run can realize; that set is computed per distinct block set via the
product engine and the prefix is then evaluated as a finite game.

The theoretical cutoff needed for full completeness is astronomically
large, so verdicts carry an explicit scope and the bounds are reported
separately instead of being silently ignored.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from decimal import Decimal, getcontext

from .errors import ModeGateError, ProtocolError
from .ltl import And, HyperFormula, Ltl, Not, contains_next, eval_matrix
from .model import MIN_AGENTS, Configuration, Protocol
from .product import (
    ACCELERATED,
    DEFAULT_NODE_CAP,
    PLAIN,
    make_product_system,
    sat_exists,
    sat_forall,
)
from . import rabin
from .rabin import ltl_to_dra

Valuation = tuple  # tuple[bool, ...] over one variable's blocks, in block order


def _pick_semantics(protocol: Protocol, semantics: str) -> str:
    if semantics == "auto":
        return ACCELERATED if protocol.is_iopp else PLAIN
    return semantics


def _gate_blocks(blocks) -> None:
    for f in blocks:
        if contains_next(f):
            raise ModeGateError("hyper evaluation requires X-free blocks")


def _ev_formula(blocks, valuation) -> Ltl:
    """Conjunction fixing every block's truth value."""
    phi = None
    for f, v in zip(blocks, valuation):
        lit = f if v else Not(f)
        phi = lit if phi is None else And(phi, lit)
    assert phi is not None
    return phi


def achievable_valuations(
    gamma0: Configuration,
    blocks: tuple[Ltl, ...],
    protocol: Protocol,
    semantics: str = "auto",
    max_nodes: int = DEFAULT_NODE_CAP,
    max_dra_states: int = rabin.DEFAULT_STATE_CAP,
) -> set[Valuation]:
    """Block valuations realizable by some strongly fair run from gamma0."""
    _gate_blocks(blocks)
    semantics = _pick_semantics(protocol, semantics)
    if not blocks:
        return {()}
    out = set()
    for valuation in itertools.product((False, True), repeat=len(blocks)):
        ev = _ev_formula(blocks, valuation)
        ps = make_product_system(protocol, ev, semantics, max_dra_states)
        if sat_exists(gamma0, ps, max_nodes):
            out.add(valuation)
    return out


def achievable_valuations_oracle(
    gamma0: Configuration,
    blocks: tuple[Ltl, ...],
    protocol: Protocol,
    semantics: str = "auto",
    max_nodes: int = DEFAULT_NODE_CAP,
    max_dra_states: int = rabin.DEFAULT_STATE_CAP,
) -> set[Valuation]:
    """Independent route: one joint product with all block automata.

    A strongly fair run settles in and fully covers a bottom SCC, so each
    reachable bottom SCC realizes exactly one valuation: block i is true
    iff its Rabin condition holds on the SCC's control projection.
    """
    _gate_blocks(blocks)
    semantics = _pick_semantics(protocol, semantics)
    if not blocks:
        return {()}
    if semantics == ACCELERATED and not protocol.is_iopp:
        raise ModeGateError("accelerated semantics requires an IOPP")
    if not protocol.is_total:
        raise ProtocolError("protocol is not total; run complete_totality() first")

    alphabet = protocol.transition_ids()
    dras = [ltl_to_dra(f, alphabet, max_dra_states) for f in blocks]

    from .model import accelerated_successors, enabled, step

    def successors(node):
        gamma, locs = node
        out = []
        for t in protocol.transitions:
            if not enabled(gamma, t):
                continue
            locs2 = tuple(d.step(l, t.tid) for d, l in zip(dras, locs))
            if semantics == PLAIN:
                out.append((step(gamma, t), locs2))
            else:
                seen = set()
                for _k, gamma2 in accelerated_successors(gamma, t):
                    if gamma2 not in seen:
                        seen.add(gamma2)
                        out.append((gamma2, locs2))
        return out

    root = (gamma0, tuple(d.initial for d in dras))
    nodes = [root]
    index = {root: 0}
    adj: list[list[int]] = []
    done = 0
    while done < len(nodes):
        node = nodes[done]
        adj.append([])
        for succ in successors(node):
            if succ not in index:
                index[succ] = len(nodes)
                nodes.append(succ)
            adj[done].append(index[succ])
        done += 1

    sccs = rabin._tarjan(range(len(nodes)), lambda i: adj[i])
    scc_of = [0] * len(nodes)
    for sid, comp in enumerate(sccs):
        for i in comp:
            scc_of[i] = sid
    bottom = [True] * len(sccs)
    for i in range(len(nodes)):
        for j in adj[i]:
            if scc_of[j] != scc_of[i]:
                bottom[scc_of[i]] = False

    out = set()
    for sid, comp in enumerate(sccs):
        if not bottom[sid]:
            continue
        valuation = []
        for bi, dra in enumerate(dras):
            locs = {nodes[i][1][bi] for i in comp}
            valuation.append(
                any(not (locs & f) and (locs & g) for f, g in dra.pairs)
            )
        out.add(tuple(valuation))
    return out


def check_config(
    gamma0: Configuration,
    psi: HyperFormula,
    protocol: Protocol,
    semantics: str = "auto",
    max_nodes: int = DEFAULT_NODE_CAP,
    max_dra_states: int = rabin.DEFAULT_STATE_CAP,
    _cache: dict | None = None,
) -> bool:
    """Decide gamma0 |= psi by the valuation game over the prefix.

    An existential variable picks an achievable valuation for its blocks,
    a universal one must survive all of them; leaves evaluate the matrix.
    """
    cache = _cache if _cache is not None else {}

    def achievable_for(var: str) -> tuple[list[int], set[Valuation]]:
        idxs = psi.blocks_of(var)
        formulas = tuple(psi.blocks[i][1] for i in idxs)
        key = (gamma0.counts, formulas)
        if key not in cache:
            cache[key] = achievable_valuations(
                gamma0, formulas, protocol, semantics, max_nodes, max_dra_states
            )
        return idxs, cache[key]

    def game(level: int, env: dict[int, bool]) -> bool:
        if level == len(psi.prefix):
            return eval_matrix(psi.matrix, env)
        quant, var = psi.prefix[level]
        idxs, achievable = achievable_for(var)
        outcomes = (
            game(level + 1, {**env, **dict(zip(idxs, valuation))})
            for valuation in sorted(achievable)
        )
        return any(outcomes) if quant == "exists" else all(outcomes)

    return game(0, {})


@dataclass
class Verdict:
    answer: str  # "holds" | "violated"
    scope: str  # "up-to-cutoff" | "complete"
    cutoff: int
    witness: Configuration | None
    stats: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.answer == "holds"

    def to_json(self, protocol: Protocol) -> dict:
        witness = None
        if self.witness is not None:
            witness = {
                protocol.state_name(i): c
                for i, c in enumerate(self.witness.counts)
                if c
            }
        return {
            "answer": self.answer,
            "scope": self.scope,
            "cutoff": self.cutoff,
            "witness": witness,
            "stats": self.stats,
        }


def initial_configs_upto(protocol: Protocol, cutoff: int):
    """Initial configurations with per-state count <= cutoff, ascending lex."""
    domains = [
        range(cutoff + 1) if q in protocol.initial else (0,)
        for q in range(protocol.num_states)
    ]
    for counts in itertools.product(*domains):
        if sum(counts) >= MIN_AGENTS:
            yield Configuration(counts)


_WORKER_CTX: dict = {}


def _worker_init(protocol, payload, kind, semantics, max_nodes, max_dra_states):
    _WORKER_CTX.clear()
    _WORKER_CTX.update(
        protocol=protocol,
        payload=payload,
        kind=kind,
        semantics=semantics,
        max_nodes=max_nodes,
        max_dra_states=max_dra_states,
        cache={},
    )


def _worker_check(counts) -> bool:
    ctx = _WORKER_CTX
    gamma0 = Configuration(counts)
    if ctx["kind"] == "hyper":
        return check_config(
            gamma0,
            ctx["payload"],
            ctx["protocol"],
            ctx["semantics"],
            ctx["max_nodes"],
            ctx["max_dra_states"],
            _cache=ctx["cache"],
        )
    ps = ctx["cache"].get("ps")
    if ps is None:
        ps = make_product_system(
            ctx["protocol"], ctx["payload"], ctx["semantics"], ctx["max_dra_states"]
        )
        ctx["cache"]["ps"] = ps
    return sat_forall(gamma0, ps, ctx["max_nodes"])


def _scan(protocol, cutoff, mode, check_one, jobs, init_args):
    """Shared cutoff scan; ascending lex order fixes the reported witness."""
    answer = "holds" if mode == "forall" else "violated"
    witness = None
    checked = 0
    vacuous = True
    configs = list(initial_configs_upto(protocol, cutoff))
    if jobs > 1 and configs:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=init_args
        ) as ex:
            results = ex.map(_worker_check, [g.counts for g in configs], chunksize=4)
            for gamma0, ok in zip(configs, results):
                vacuous = False
                checked += 1
                if mode == "forall" and not ok:
                    answer, witness = "violated", gamma0
                    ex.shutdown(cancel_futures=True)
                    break
                if mode == "exists" and ok:
                    answer, witness = "holds", gamma0
                    ex.shutdown(cancel_futures=True)
                    break
    else:
        for gamma0 in configs:
            vacuous = False
            checked += 1
            ok = check_one(gamma0)
            if mode == "forall" and not ok:
                answer, witness = "violated", gamma0
                break
            if mode == "exists" and ok:
                answer, witness = "holds", gamma0
                break
    return answer, witness, checked, vacuous


def check_protocol(
    protocol: Protocol,
    psi: HyperFormula,
    mode: str = "forall",
    cutoff: int = 3,
    semantics: str = "auto",
    max_nodes: int = DEFAULT_NODE_CAP,
    max_dra_states: int = rabin.DEFAULT_STATE_CAP,
    jobs: int = 1,
) -> Verdict:
    """Cutoff enumeration of initial configurations for a hyper property.

    mode=forall: every enumerated initial configuration must satisfy psi
    (first failure, in ascending lex order, is the counterexample).
    mode=exists: some configuration must satisfy it (witness returned).
    """
    if mode not in ("forall", "exists"):
        raise ValueError(f"mode must be forall or exists, got {mode!r}")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    if not protocol.is_iopp:
        raise ProtocolError("the hyper decision procedure needs an IOPP")
    _gate_blocks(f for _v, f in psi.blocks)

    t0 = time.monotonic()
    cache: dict = {}

    def check_one(gamma0):
        return check_config(
            gamma0, psi, protocol, semantics, max_nodes, max_dra_states, _cache=cache
        )

    answer, witness, checked, vacuous = _scan(
        protocol, cutoff, mode, check_one, jobs,
        (protocol, psi, "hyper", semantics, max_nodes, max_dra_states),
    )
    stats = {
        "configs_checked": checked,
        "elapsed_s": round(time.monotonic() - t0, 6),
    }
    if vacuous:
        stats["vacuous"] = True
        stats["warning"] = "no initial configuration within the cutoff"
    scope = _scope_for(protocol, psi, cutoff, max_dra_states)
    return Verdict(answer, scope, cutoff, witness, stats)


def check_protocol_ltl(
    protocol: Protocol,
    phi: Ltl,
    mode: str = "forall",
    cutoff: int = 3,
    semantics: str = "auto",
    max_nodes: int = DEFAULT_NODE_CAP,
    max_dra_states: int = rabin.DEFAULT_STATE_CAP,
    jobs: int = 1,
) -> Verdict:
    """Cutoff enumeration for plain LTL (all fair runs per configuration).

    Non-IOPP protocols and formulas with X fall back to plain semantics;
    fixed-size graphs stay finite, so this is a sound extension of the
    IOPP / X-free procedure.
    """
    if mode not in ("forall", "exists"):
        raise ValueError(f"mode must be forall or exists, got {mode!r}")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    if semantics == "auto":
        semantics = (
            ACCELERATED if protocol.is_iopp and not contains_next(phi) else PLAIN
        )
    ps = make_product_system(protocol, phi, semantics, max_dra_states)

    t0 = time.monotonic()
    answer, witness, checked, vacuous = _scan(
        protocol, cutoff, mode,
        lambda gamma0: sat_forall(gamma0, ps, max_nodes),
        jobs,
        (protocol, phi, "ltl", semantics, max_nodes, max_dra_states),
    )
    stats = {"configs_checked": checked, "elapsed_s": round(time.monotonic() - t0, 6)}
    if vacuous:
        stats["vacuous"] = True
        stats["warning"] = "no initial configuration within the cutoff"
    scope = _scope_for(protocol, None, cutoff, max_dra_states, dra_size=ps.dra.num_states)
    return Verdict(answer, scope, cutoff, witness, stats)


# ---------------------------------------------------------------------------
# Theoretical bounds (completeness cutoffs); log base 2 throughout.


def _log10(x: Decimal) -> Decimal:
    return x.ln() / Decimal(10).ln()


def _log2(x: Decimal) -> Decimal:
    return x.ln() / Decimal(2).ln()


def bound_exponents(m: int, control_size: int, k_prime: int = 1) -> dict:
    """log10 of the saturation bound B, the blindness cutoff K, and the
    descending-chain length bound, in extended precision."""
    getcontext().prec = 60
    M = control_size
    d = Decimal(m * m + 2)
    exponent = Decimal(3) ** int(d) * 2 * (_log2(d) + 1) * (m * m)
    log10_b = exponent * _log10(Decimal(M + 1))
    log10_b_alt = exponent * _log10(Decimal(M)) if M > 1 else Decimal(0)
    # K = m^2 * max(k_prime, 2B); B dwarfs any practical k_prime
    log10_2b = _log10(Decimal(2)) + log10_b
    log10_k = _log10(Decimal(m * m)) + max(_log10(Decimal(max(k_prime, 1))), log10_2b)
    n_ctrl = Decimal(M) ** 2 * Decimal(2) ** (m * m)
    log10_chain = Decimal(3) ** int(d) * (_log2(d) + 1) * _log10(n_ctrl + 1)
    return {
        "protocol_states": m,
        "control_size": M,
        "k_prime": k_prime,
        "log10_B": float(log10_b),
        "log10_B_base_M": float(log10_b_alt),
        "log10_K": float(log10_k),
        "log10_chain_bound": float(log10_chain),
    }


def theoretical_bounds(protocol: Protocol, dra_sizes, k_prime: int = 1) -> dict:
    """Completeness-cutoff report for each control size.

    These are upper bounds only; they are unreachable in practice, which
    is why verdicts carry an explicit up-to-cutoff scope.  Logarithms
    inside the exponent use base 2.
    """
    if protocol.num_states < 1:
        raise ProtocolError("protocol needs at least one state")
    rows = [bound_exponents(protocol.num_states, M, k_prime) for M in dra_sizes]
    return {
        "log_base": 2,
        "note": (
            "cutoffs guaranteeing completeness of the enumeration; "
            "values are log10 of the bounds"
        ),
        "rows": rows,
    }


def _scope_for(protocol, psi, cutoff, max_dra_states, dra_size=None) -> str:
    """Scope is complete only when the cutoff reaches the theoretical K."""
    try:
        m = protocol.num_states
        M = dra_size if dra_size is not None else max_dra_states
        log10_k = Decimal(bound_exponents(m, max(M, 1))["log10_K"])
        if cutoff >= 1 and _log10(Decimal(cutoff)) >= log10_k:
            return "complete"
    except Exception:
        pass
    return "up-to-cutoff"
