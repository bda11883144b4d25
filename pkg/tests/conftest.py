"""Shared fixtures and seeded generators for the test corpus."""

import random

import pytest

from popverif.model import (
    Protocol,
    StateId,
    Transition,
    complete_totality,
    parse_protocol,
)
from popverif.ltl import (
    And,
    Atom,
    Eventually,
    FALSE,
    Globally,
    Implies,
    LassoWord,
    Next,
    Not,
    Or,
    TRUE,
    Until,
)
from popverif.rabin import DeterministicRabinAutomaton

CONVERGENCE_SOURCE = """
# two-state convergence: N flips to Y upon seeing Y
states N Y
initial N Y
opinion N=0 Y=1
trans n2y: N --Y--> Y
"""

# swap_up / swap_dn cycle forever through mixed-opinion targets
RIGGED_SOURCE = """
states X Y W
initial X Y W
opinion X=0 Y=1 W=0
trans swap_up: X --W--> Y
trans swap_dn: Y --W--> X
"""


@pytest.fixture
def conv_protocol():
    return complete_totality(parse_protocol(CONVERGENCE_SOURCE))


@pytest.fixture
def rigged_protocol():
    return complete_totality(parse_protocol(RIGGED_SOURCE))


def random_iopp(rng, num_states=3, num_trans=3, initial=None):
    states = tuple(StateId(i, f"q{i}") for i in range(num_states))
    trans = []
    for i in range(num_trans):
        mover, obs, target = (rng.randrange(num_states) for _ in range(3))
        trans.append(Transition(f"t{i}", (mover, obs), (target, obs)))
    if initial is None:
        initial = rng.sample(range(num_states), rng.randint(1, num_states))
    proto = Protocol(
        states=states, transitions=tuple(trans), initial=frozenset(initial)
    )
    return complete_totality(proto)


def random_formula(rng, alphabet, size, allow_next=True):
    if size <= 0:
        return rng.choice([Atom(rng.choice(alphabet)), TRUE, FALSE])
    ops = ["not", "and", "or", "implies", "until", "ev", "glob", "atom"]
    if allow_next:
        ops.append("next")
    op = rng.choice(ops)
    if op == "atom":
        return Atom(rng.choice(alphabet))
    if op in ("not", "next", "ev", "glob"):
        sub = random_formula(rng, alphabet, size - 1, allow_next)
        return {"not": Not, "next": Next, "ev": Eventually, "glob": Globally}[op](sub)
    budget = size - 1
    left = rng.randint(0, budget)
    a = random_formula(rng, alphabet, left, allow_next)
    b = random_formula(rng, alphabet, budget - left, allow_next)
    return {"and": And, "or": Or, "implies": Implies, "until": Until}[op](a, b)


def random_lasso(rng, alphabet, max_len=6):
    stem = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, max_len)))
    loop = tuple(rng.choice(alphabet) for _ in range(rng.randint(1, max_len)))
    return LassoWord(stem, loop)


def random_dra(rng, alphabet, num_locs, with_pairs=False):
    """Random total transition structure; pairs only if asked for."""
    table = tuple(
        tuple(rng.randrange(num_locs) for _ in alphabet) for _ in range(num_locs)
    )
    pairs = ()
    if with_pairs:
        f = frozenset(q for q in range(num_locs) if rng.random() < 0.3)
        g = frozenset(q for q in range(num_locs) if rng.random() < 0.5)
        pairs = ((f, g),)
    return DeterministicRabinAutomaton(
        alphabet=tuple(alphabet), num_states=num_locs, initial=0,
        table=table, pairs=pairs,
    )


def trivial_dra(alphabet):
    """Single-state automaton accepting everything."""
    return DeterministicRabinAutomaton(
        alphabet=tuple(alphabet),
        num_states=1,
        initial=0,
        table=(tuple(0 for _ in alphabet),),
        pairs=((frozenset(), frozenset({0})),),
    )


def seeded(seed):
    return random.Random(seed)
