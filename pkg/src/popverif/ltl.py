"""LTL and monadic HyperLTL over transition atoms.

Atoms are transition ids and are mutually exclusive: position i of a run
satisfies atom t exactly when the i-th fired transition is t.  The lasso
evaluator below is the ground-truth oracle for the automaton pipeline,
so it works by fixpoint iteration on ultimately periodic words and never
touches the rabin module.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import FormulaError, FormulaSyntaxError
from .model import Protocol

# ---------------------------------------------------------------------------
# LTL syntax


@dataclass(frozen=True)
class Ltl:
    pass


@dataclass(frozen=True)
class LtlTrue(Ltl):
    pass


@dataclass(frozen=True)
class LtlFalse(Ltl):
    pass


@dataclass(frozen=True)
class Atom(Ltl):
    name: str
    var: str | None = None  # run variable, only inside hyper bodies


@dataclass(frozen=True)
class Not(Ltl):
    sub: Ltl


@dataclass(frozen=True)
class And(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Or(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Implies(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Next(Ltl):
    sub: Ltl


@dataclass(frozen=True)
class Until(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Release(Ltl):
    """Dual of Until; internal normal form only, not in the surface grammar."""

    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Eventually(Ltl):
    sub: Ltl


@dataclass(frozen=True)
class Globally(Ltl):
    sub: Ltl


TRUE = LtlTrue()
FALSE = LtlFalse()


def atoms_of(phi: Ltl) -> set[str]:
    out: set[str] = set()

    def walk(f):
        if isinstance(f, Atom):
            out.add(f.name)
        elif isinstance(f, (Not, Next, Eventually, Globally)):
            walk(f.sub)
        elif isinstance(f, (And, Or, Implies, Until, Release)):
            walk(f.left)
            walk(f.right)

    walk(phi)
    return out


def vars_of(phi: Ltl) -> set[str]:
    out: set[str] = set()

    def walk(f):
        if isinstance(f, Atom):
            if f.var is not None:
                out.add(f.var)
        elif isinstance(f, (Not, Next, Eventually, Globally)):
            walk(f.sub)
        elif isinstance(f, (And, Or, Implies, Until, Release)):
            walk(f.left)
            walk(f.right)

    walk(phi)
    return out


def strip_vars(phi: Ltl) -> Ltl:
    if isinstance(phi, Atom):
        return Atom(phi.name)
    if isinstance(phi, Not):
        return Not(strip_vars(phi.sub))
    if isinstance(phi, Next):
        return Next(strip_vars(phi.sub))
    if isinstance(phi, Eventually):
        return Eventually(strip_vars(phi.sub))
    if isinstance(phi, Globally):
        return Globally(strip_vars(phi.sub))
    if isinstance(phi, (And, Or, Implies, Until, Release)):
        return type(phi)(strip_vars(phi.left), strip_vars(phi.right))
    return phi


def formula_size(phi: Ltl) -> int:
    """Number of Boolean and temporal operators."""
    if isinstance(phi, (LtlTrue, LtlFalse, Atom)):
        return 0
    if isinstance(phi, (Not, Next, Eventually, Globally)):
        return 1 + formula_size(phi.sub)
    return 1 + formula_size(phi.left) + formula_size(phi.right)


def contains_next(phi: Ltl) -> bool:
    if isinstance(phi, Next):
        return True
    if isinstance(phi, (Not, Eventually, Globally)):
        return contains_next(phi.sub)
    if isinstance(phi, (And, Or, Implies, Until, Release)):
        return contains_next(phi.left) or contains_next(phi.right)
    return False


def negate(phi: Ltl) -> Ltl:
    """Logical negation; folds double negations and constants."""
    if isinstance(phi, Not):
        return phi.sub
    if isinstance(phi, LtlTrue):
        return FALSE
    if isinstance(phi, LtlFalse):
        return TRUE
    return Not(phi)


def to_text(phi: Ltl) -> str:
    if isinstance(phi, LtlTrue):
        return "true"
    if isinstance(phi, LtlFalse):
        return "false"
    if isinstance(phi, Atom):
        return phi.name if phi.var is None else f"{phi.name}[{phi.var}]"
    if isinstance(phi, Not):
        return f"!{to_text(phi.sub)}" if _is_leafish(phi.sub) else f"!({to_text(phi.sub)})"
    if isinstance(phi, Next):
        return _unary("X", phi.sub)
    if isinstance(phi, Eventually):
        return _unary("F", phi.sub)
    if isinstance(phi, Globally):
        return _unary("G", phi.sub)
    if isinstance(phi, And):
        return f"({to_text(phi.left)} & {to_text(phi.right)})"
    if isinstance(phi, Or):
        return f"({to_text(phi.left)} | {to_text(phi.right)})"
    if isinstance(phi, Implies):
        return f"({to_text(phi.left)} -> {to_text(phi.right)})"
    if isinstance(phi, Until):
        return f"({to_text(phi.left)} U {to_text(phi.right)})"
    if isinstance(phi, Release):
        return f"({to_text(phi.left)} R {to_text(phi.right)})"
    raise FormulaError(f"unknown node {phi!r}")


def _is_leafish(phi: Ltl) -> bool:
    return isinstance(phi, (Atom, LtlTrue, LtlFalse))


def _unary(op: str, sub: Ltl) -> str:
    body = to_text(sub)
    return f"{op} {body}" if _is_leafish(sub) else f"{op} ({body})"


# ---------------------------------------------------------------------------
# Lasso words and the semantics oracle


@dataclass(frozen=True)
class LassoWord:
    """Finite presentation u . v^omega of an ultimately periodic word."""

    stem: tuple[str, ...]
    loop: tuple[str, ...]

    def __post_init__(self):
        if not self.loop:
            raise FormulaError("lasso loop must be nonempty")

    def letters(self) -> tuple[str, ...]:
        return self.stem + self.loop


def eval_on_lasso(phi: Ltl, word: LassoWord) -> bool:
    """Decide u.v^omega |= phi by fixpoint iteration over the lasso positions.

    Until/Eventually are least fixpoints and Globally/Release greatest
    fixpoints of their one-step unfoldings; Kleene iteration converges in
    at most |u|+|v| passes because the successor map is functional.
    """
    letters = word.letters()
    n = len(letters)
    loop_start = len(word.stem)

    def succ(i: int) -> int:
        return i + 1 if i + 1 < n else loop_start

    def fixpoint(update, start: bool) -> list[bool]:
        vals = [start] * n
        for _ in range(n + 1):
            changed = False
            for i in range(n - 1, -1, -1):
                v = update(i, vals)
                if v != vals[i]:
                    vals[i] = v
                    changed = True
            if not changed:
                break
        return vals

    def ev(f: Ltl) -> list[bool]:
        if isinstance(f, LtlTrue):
            return [True] * n
        if isinstance(f, LtlFalse):
            return [False] * n
        if isinstance(f, Atom):
            return [letter == f.name for letter in letters]
        if isinstance(f, Not):
            return [not v for v in ev(f.sub)]
        if isinstance(f, And):
            a, b = ev(f.left), ev(f.right)
            return [x and y for x, y in zip(a, b)]
        if isinstance(f, Or):
            a, b = ev(f.left), ev(f.right)
            return [x or y for x, y in zip(a, b)]
        if isinstance(f, Implies):
            a, b = ev(f.left), ev(f.right)
            return [(not x) or y for x, y in zip(a, b)]
        if isinstance(f, Next):
            a = ev(f.sub)
            return [a[succ(i)] for i in range(n)]
        if isinstance(f, Until):
            a, b = ev(f.left), ev(f.right)
            return fixpoint(lambda i, v: b[i] or (a[i] and v[succ(i)]), False)
        if isinstance(f, Release):
            a, b = ev(f.left), ev(f.right)
            return fixpoint(lambda i, v: b[i] and (a[i] or v[succ(i)]), True)
        if isinstance(f, Eventually):
            a = ev(f.sub)
            return fixpoint(lambda i, v: a[i] or v[succ(i)], False)
        if isinstance(f, Globally):
            a = ev(f.sub)
            return fixpoint(lambda i, v: a[i] and v[succ(i)], True)
        raise FormulaError(f"unknown node {f!r}")

    return ev(phi)[0]


# ---------------------------------------------------------------------------
# Matrix expressions of hyper formulas (Boolean combinations of block indices)


@dataclass(frozen=True)
class BoolExpr:
    pass


@dataclass(frozen=True)
class BTrue(BoolExpr):
    pass


@dataclass(frozen=True)
class BFalse(BoolExpr):
    pass


@dataclass(frozen=True)
class BRef(BoolExpr):
    block: int


@dataclass(frozen=True)
class BNot(BoolExpr):
    sub: BoolExpr


@dataclass(frozen=True)
class BAnd(BoolExpr):
    left: BoolExpr
    right: BoolExpr


@dataclass(frozen=True)
class BOr(BoolExpr):
    left: BoolExpr
    right: BoolExpr


@dataclass(frozen=True)
class BImplies(BoolExpr):
    left: BoolExpr
    right: BoolExpr


def eval_matrix(expr: BoolExpr, values: dict[int, bool]) -> bool:
    if isinstance(expr, BTrue):
        return True
    if isinstance(expr, BFalse):
        return False
    if isinstance(expr, BRef):
        return values[expr.block]
    if isinstance(expr, BNot):
        return not eval_matrix(expr.sub, values)
    if isinstance(expr, BAnd):
        return eval_matrix(expr.left, values) and eval_matrix(expr.right, values)
    if isinstance(expr, BOr):
        return eval_matrix(expr.left, values) or eval_matrix(expr.right, values)
    if isinstance(expr, BImplies):
        return (not eval_matrix(expr.left, values)) or eval_matrix(expr.right, values)
    raise FormulaError(f"unknown matrix node {expr!r}")


@dataclass(frozen=True)
class HyperFormula:
    """Quantifier prefix plus a monadic decomposition of the body.

    Each block is a plain LTL formula attached to exactly one run
    variable; the matrix combines block truth values.
    """

    prefix: tuple[tuple[str, str], ...]  # (quantifier 'forall'|'exists', variable)
    blocks: tuple[tuple[str, Ltl], ...]  # (variable, block formula)
    matrix: BoolExpr

    def blocks_of(self, var: str) -> list[int]:
        return [i for i, (v, _) in enumerate(self.blocks) if v == var]


def dualize_hyper(psi: HyperFormula) -> HyperFormula:
    """Flip every quantifier and negate the matrix."""
    prefix = tuple(
        ("exists" if q == "forall" else "forall", v) for q, v in psi.prefix
    )
    return HyperFormula(prefix=prefix, blocks=psi.blocks, matrix=BNot(psi.matrix))


def hyper_contains_next(psi: HyperFormula) -> bool:
    return any(contains_next(f) for _, f in psi.blocks)


# ---------------------------------------------------------------------------
# Parsing

_RESERVED = {"true", "false", "X", "F", "G", "U", "forall", "exists"}

_TOKEN_KINDS = (
    ("ARROW", "->"),
    ("NOT", "!"),
    ("AND", "&"),
    ("OR", "|"),
    ("LPAR", "("),
    ("RPAR", ")"),
    ("LBRACK", "["),
    ("RBRACK", "]"),
    ("DOT", "."),
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        for kind, lit in _TOKEN_KINDS:
            if text.startswith(lit, i):
                tokens.append((kind, lit))
                i += len(lit)
                break
        else:
            m = re.match(r"\w+", text[i:])
            if not m:
                raise FormulaSyntaxError(f"unexpected character {ch!r}", len(tokens))
            tokens.append(("IDENT", m.group(0)))
            i += m.end()
    tokens.append(("EOF", ""))
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: set[str], hyper: bool):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.alphabet = alphabet
        self.hyper = hyper

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise FormulaSyntaxError(f"expected {kind}, got {tok[1]!r}", self.pos)
        self.pos += 1
        return tok

    def error(self, msg):
        raise FormulaSyntaxError(msg, self.pos)

    # precedence, loosest first: ->, |, &, U, unary, primary
    def parse_formula(self) -> Ltl:
        left = self.parse_or()
        if self.peek()[0] == "ARROW":
            self.take()
            return Implies(left, self.parse_formula())
        return left

    def parse_or(self) -> Ltl:
        left = self.parse_and()
        while self.peek()[0] == "OR":
            self.take()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Ltl:
        left = self.parse_until()
        while self.peek()[0] == "AND":
            self.take()
            left = And(left, self.parse_until())
        return left

    def parse_until(self) -> Ltl:
        left = self.parse_unary()
        if self.peek() == ("IDENT", "U"):
            self.take()
            return Until(left, self.parse_until())
        return left

    def parse_unary(self) -> Ltl:
        kind, val = self.peek()
        if kind == "NOT":
            self.take()
            return Not(self.parse_unary())
        if kind == "IDENT" and val in ("X", "F", "G"):
            self.take()
            sub = self.parse_unary()
            return {"X": Next, "F": Eventually, "G": Globally}[val](sub)
        return self.parse_primary()

    def parse_primary(self) -> Ltl:
        kind, val = self.peek()
        if kind == "LPAR":
            self.take()
            inner = self.parse_formula()
            self.take("RPAR")
            return inner
        if kind != "IDENT":
            self.error(f"expected an atom or '(', got {val!r}")
        if val == "true":
            self.take()
            return TRUE
        if val == "false":
            self.take()
            return FALSE
        if val in _RESERVED:
            self.error(f"reserved word {val!r} cannot be an atom")
        self.take()
        var = None
        if self.peek()[0] == "LBRACK":
            if not self.hyper:
                self.error("run-variable suffix is only allowed in hyper formulas")
            self.take()
            var = self.take("IDENT")[1]
            self.take("RBRACK")
        elif self.hyper:
            self.error(f"atom {val!r} needs a [run-variable] suffix")
        if val not in self.alphabet:
            self.error(f"unknown transition atom {val!r}")
        return Atom(val, var)


def _alphabet_of(source) -> set[str]:
    if isinstance(source, Protocol):
        return set(source.transition_ids())
    return set(source)


def parse_ltl(text: str, protocol_or_alphabet) -> Ltl:
    """Parse an LTL formula whose atoms are transition ids."""
    p = _Parser(text, _alphabet_of(protocol_or_alphabet), hyper=False)
    phi = p.parse_formula()
    p.take("EOF")
    return phi


def parse_hyper(text: str, protocol_or_alphabet) -> HyperFormula:
    """Parse a monadic HyperLTL formula and return its decomposition.

    Every maximal temporal subformula of the body must mention exactly one
    run variable; Boolean structure above those subformulas becomes the
    matrix.  Non-monadic bodies are rejected.
    """
    alphabet = _alphabet_of(protocol_or_alphabet)
    p = _Parser(text, alphabet, hyper=True)

    prefix: list[tuple[str, str]] = []
    while p.peek()[1] in ("forall", "exists"):
        quant = p.take("IDENT")[1]
        var = p.take("IDENT")[1]
        p.take("DOT")
        if any(v == var for _, v in prefix):
            raise FormulaError(f"run variable {var!r} quantified twice")
        prefix.append((quant, var))
    if not prefix:
        p.error("hyper formula needs a quantifier prefix")

    body = p.parse_formula()
    p.take("EOF")

    bound = {v for _, v in prefix}
    blocks: list[tuple[str, Ltl]] = []
    index: dict[tuple[str, Ltl], int] = {}

    def block_of(f: Ltl) -> BoolExpr:
        fvars = vars_of(f)
        if len(fvars) > 1:
            raise FormulaError(
                f"non-monadic block {to_text(f)!r} mentions variables {sorted(fvars)}"
            )
        if not fvars:
            # No atoms: truth is run-independent, fold to a constant.
            dummy = LassoWord((), (next(iter(alphabet)),))
            return BTrue() if eval_on_lasso(strip_vars(f), dummy) else BFalse()
        var = next(iter(fvars))
        if var not in bound:
            raise FormulaError(f"unbound run variable {var!r}")
        key = (var, strip_vars(f))
        if key not in index:
            index[key] = len(blocks)
            blocks.append(key)
        return BRef(index[key])

    def decompose(f: Ltl) -> BoolExpr:
        if isinstance(f, LtlTrue):
            return BTrue()
        if isinstance(f, LtlFalse):
            return BFalse()
        if isinstance(f, Not):
            return BNot(decompose(f.sub))
        if isinstance(f, And):
            return BAnd(decompose(f.left), decompose(f.right))
        if isinstance(f, Or):
            return BOr(decompose(f.left), decompose(f.right))
        if isinstance(f, Implies):
            return BImplies(decompose(f.left), decompose(f.right))
        return block_of(f)

    matrix = decompose(body)
    return HyperFormula(prefix=tuple(prefix), blocks=tuple(blocks), matrix=matrix)


# ---------------------------------------------------------------------------
# Well-specification as a monadic hyper formula


def consensus_transitions(protocol: Protocol, b: int) -> list[str]:
    """Transitions whose both target states carry opinion b."""
    opinion = protocol.opinion_map
    if opinion is None:
        raise FormulaError("protocol declares no opinion map")
    out = []
    for t in protocol.transitions:
        q3, q4 = t.post
        if q3 not in opinion or q4 not in opinion:
            raise FormulaError(f"state {protocol.state_name(q3)!r} has no opinion")
        if opinion[q3] == b and opinion[q4] == b:
            out.append(t.tid)
    return out


def _or_atoms(tids: list[str]) -> Ltl:
    if not tids:
        return FALSE
    phi: Ltl = Atom(tids[0])
    for tid in tids[1:]:
        phi = Or(phi, Atom(tid))
    return phi


def wellspec_formula(protocol: Protocol) -> HyperFormula:
    """forall r1,r2. exists opinion b: both runs eventually fire only
    transitions targeting opinion-b states."""
    opinion = protocol.opinion_map
    if opinion is None:
        raise FormulaError("well-specification needs an opinion map")
    missing = [s.name for s in protocol.states if s.index not in opinion]
    if missing:
        raise FormulaError(f"states without opinion: {missing}")
    fg0 = Eventually(Globally(_or_atoms(consensus_transitions(protocol, 0))))
    fg1 = Eventually(Globally(_or_atoms(consensus_transitions(protocol, 1))))
    blocks = (("r1", fg0), ("r1", fg1), ("r2", fg0), ("r2", fg1))
    matrix = BOr(BAnd(BRef(0), BRef(2)), BAnd(BRef(1), BRef(3)))
    return HyperFormula(
        prefix=(("forall", "r1"), ("forall", "r2")), blocks=blocks, matrix=matrix
    )
