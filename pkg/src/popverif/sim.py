"""Stochastic-scheduler simulation.

A memoryless uniform scheduler yields a strongly fair run almost surely,
and such a run settles into a bottom SCC of the product graph and covers
it; a sampled run can therefore stop with a definitive verdict as soon as
it enters a bottom SCC.  Runs truncated before reaching one are reported
as undetermined, never silently classified.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ModeGateError
from .ltl import (
    And,
    Atom,
    Eventually,
    LassoWord,
    Next,
    Not,
    eval_on_lasso,
)
from .model import Configuration
from .product import PLAIN, ConfigGraph, ProdConfig, ProductSystem, build_graph, scc_winning

WINNING = "winning-SCC"
LOSING = "losing-SCC"
UNDETERMINED = "undetermined"


@dataclass
class SimRun:
    seed: object
    steps: list[tuple[str, Configuration]]
    verdict: str


def sample_run(
    gamma0: Configuration,
    ps: ProductSystem,
    max_steps: int = 10_000,
    seed: object = 0,
    graph: ConfigGraph | None = None,
) -> SimRun:
    """One scheduler run; stops with a verdict on entering a bottom SCC."""
    if ps.mode != PLAIN:
        raise ModeGateError("simulation samples plain steps; build the system as plain")
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    if graph is None:
        graph = build_graph(ps, [ProdConfig(gamma0, ps.dra.initial)])
    rng = random.Random(seed)

    node = ProdConfig(gamma0, ps.dra.initial)
    steps: list[tuple[str, Configuration]] = []
    for _ in range(max_steps):
        sid = graph.scc_of[graph.index[node]]
        if graph.bottom[sid]:
            comp = [graph.nodes[i] for i in graph.sccs[sid]]
            verdict = WINNING if scc_winning(comp, ps.dra.pairs) else LOSING
            return SimRun(seed, steps, verdict)
        choices = ps.successors(node)
        tid, node = choices[rng.randrange(len(choices))]
        steps.append((tid, node.config))
    sid = graph.scc_of[graph.index[node]]
    if graph.bottom[sid]:
        comp = [graph.nodes[i] for i in graph.sccs[sid]]
        verdict = WINNING if scc_winning(comp, ps.dra.pairs) else LOSING
        return SimRun(seed, steps, verdict)
    return SimRun(seed, steps, UNDETERMINED)


@dataclass
class ProbabilityEstimate:
    estimate: float
    wins: int
    losses: int
    undetermined: int
    trials: int

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "wins": self.wins,
            "losses": self.losses,
            "undetermined": self.undetermined,
            "trials": self.trials,
        }


def estimate_probability(
    gamma0: Configuration,
    ps: ProductSystem,
    trials: int = 200,
    seed: int = 0,
    max_steps: int = 10_000,
) -> ProbabilityEstimate:
    """Fraction of determined trials ending in a winning bottom SCC.

    Per-trial seeds are derived from (seed, index), so results are
    reproducible and trials could run concurrently.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    graph = build_graph(ps, [ProdConfig(gamma0, ps.dra.initial)])
    wins = losses = undet = 0
    for i in range(trials):
        run = sample_run(gamma0, ps, max_steps, seed=f"{seed}:{i}", graph=graph)
        if run.verdict == WINNING:
            wins += 1
        elif run.verdict == LOSING:
            losses += 1
        else:
            undet += 1
    determined = wins + losses
    estimate = wins / determined if determined else 0.0
    return ProbabilityEstimate(estimate, wins, losses, undet, trials)


def trials_csv(runs: list[SimRun]) -> str:
    lines = ["seed,steps,verdict"]
    for run in runs:
        lines.append(f"{run.seed},{len(run.steps)},{run.verdict}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Fair-but-not-strongly-fair demonstration on a tiny abstract system.
#
# Four moves over three anonymous configurations: a: 1->2, b: 2->1,
# c: 1->3, d: 3->1.  The run (abcd)^omega avoids the pattern abab forever
# and is fair in the weaker sense, yet a stochastic scheduler produces
# abab with probability one.  Not a population protocol; a labeled
# transition system is enough to make the point.

_DEMO_MOVES = {1: (("a", 2), ("c", 3)), 2: (("b", 1),), 3: (("d", 1),)}


def demo_formula():
    """No occurrence of the transition pattern a b a b."""
    a, b = Atom("a"), Atom("b")
    pattern = And(a, And(Next(b), And(Next(Next(a)), Next(Next(Next(b))))))
    return Not(Eventually(pattern))


def fairness_demo(trials: int = 1000, horizon: int = 400, seed: int = 0) -> dict:
    """Contrast the fair run (abcd)^omega with sampled scheduler runs."""
    phi = demo_formula()
    verdict_abab = eval_on_lasso(phi, LassoWord((), ("a", "b", "a", "b")))
    verdict_abcd = eval_on_lasso(phi, LassoWord((), ("a", "b", "c", "d")))

    satisfied = 0
    for i in range(trials):
        rng = random.Random(f"{seed}:{i}")
        node = 1
        letters = []
        for _ in range(horizon):
            move, node = _DEMO_MOVES[node][rng.randrange(len(_DEMO_MOVES[node]))]
            letters.append(move)
        word = "".join(letters)
        if "abab" not in word:
            satisfied += 1

    return {
        "formula": "!F(a & X b & X X a & X X X b)",
        "lasso_abab_satisfies": verdict_abab,
        "lasso_abcd_satisfies": verdict_abcd,
        "trials": trials,
        "horizon": horizon,
        "empirical_satisfaction": satisfied / trials,
    }
