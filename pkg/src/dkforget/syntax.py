"""Formula language for multi-agent epistemic logic with distributed knowledge.

AST nodes for atoms, boolean connectives, per-agent knowledge ``K i``, group
knowledge ``D {i,..}`` (accessibility: intersection of the members'
relations), and common knowledge ``C`` over propositional arguments.  Comes
with a small recursive-descent parser, a printer that round-trips with the
parser, modal depth / vocabulary helpers, and literal elimination.

All values are immutable and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

MAX_AGENTS = 8

_KEYWORDS = {"true", "false"}


class Formula:
    """Base class for formula AST nodes."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({render_formula(self)!r})"


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    name: str


@dataclass(frozen=True, repr=False)
class Top(Formula):
    pass


@dataclass(frozen=True, repr=False)
class Bot(Formula):
    pass


@dataclass(frozen=True, repr=False)
class Not(Formula):
    body: Formula


@dataclass(frozen=True, repr=False)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, repr=False)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, repr=False)
class K(Formula):
    agent: int
    body: Formula


@dataclass(frozen=True, repr=False)
class D(Formula):
    agents: frozenset
    body: Formula


@dataclass(frozen=True, repr=False)
class C(Formula):
    body: Formula


TOP = Top()
BOT = Bot()


def agent_set(members: Iterable[int]) -> frozenset:
    """Validated nonempty agent group with set-based equality."""
    ms = frozenset(members)
    if not ms:
        raise ValueError("agent group must be nonempty")
    for i in ms:
        if not isinstance(i, int) or not 1 <= i <= MAX_AGENTS:
            raise ValueError(f"agent id out of range 1..{MAX_AGENTS}: {i!r}")
    return ms


def conj(parts: Iterable[Formula]) -> Formula:
    """Left-associated conjunction; empty sequence is true."""
    out = None
    for f in parts:
        out = f if out is None else And(out, f)
    return TOP if out is None else out


def disj(parts: Iterable[Formula]) -> Formula:
    """Left-associated disjunction; empty sequence is false."""
    out = None
    for f in parts:
        out = f if out is None else Or(out, f)
    return BOT if out is None else out


@dataclass(frozen=True)
class Minterm:
    """Total truth assignment over an ordered atom tuple."""

    atoms: tuple
    values: tuple

    def __post_init__(self):
        if len(self.atoms) != len(set(self.atoms)):
            raise ValueError("duplicate atom in minterm")
        if len(self.atoms) != len(self.values):
            raise ValueError("minterm assignment must cover every atom exactly once")

    @classmethod
    def from_map(cls, atoms: Iterable[str], assignment) -> "Minterm":
        ats = tuple(atoms)
        return cls(ats, tuple(bool(assignment[a]) for a in ats))

    def get(self, atom: str) -> bool:
        try:
            return self.values[self.atoms.index(atom)]
        except ValueError:
            raise KeyError(f"unknown atom {atom!r}") from None

    def true_atoms(self) -> frozenset:
        return frozenset(a for a, v in zip(self.atoms, self.values) if v)

    def drop(self, atom: str) -> "Minterm":
        if atom not in self.atoms:
            raise KeyError(f"unknown atom {atom!r}")
        pairs = [(a, v) for a, v in zip(self.atoms, self.values) if a != atom]
        return Minterm(tuple(a for a, _ in pairs), tuple(v for _, v in pairs))

    def restrict(self, atoms: Iterable[str]) -> "Minterm":
        ats = tuple(atoms)
        return Minterm(ats, tuple(self.get(a) for a in ats))

    def to_formula(self) -> Formula:
        lits = [Atom(a) if v else Not(Atom(a)) for a, v in zip(self.atoms, self.values)]
        return conj(lits)

    def sat_prop(self, f: Formula) -> bool:
        """Propositional satisfaction; modal operators are rejected."""
        if isinstance(f, Atom):
            return self.get(f.name)
        if isinstance(f, Top):
            return True
        if isinstance(f, Bot):
            return False
        if isinstance(f, Not):
            return not self.sat_prop(f.body)
        if isinstance(f, And):
            return self.sat_prop(f.left) and self.sat_prop(f.right)
        if isinstance(f, Or):
            return self.sat_prop(f.left) or self.sat_prop(f.right)
        raise ValueError("modal operator in propositional context")

    def render(self) -> str:
        return render_formula(self.to_formula())


def all_minterms(atoms: Iterable[str]) -> list:
    """Every minterm over the given ordered atoms, in binary-counter order."""
    ats = tuple(atoms)
    out = []
    for bits in range(1 << len(ats)):
        out.append(Minterm(ats, tuple(bool(bits >> i & 1) for i in range(len(ats)))))
    return out


class ParseError(ValueError):
    """Malformed formula or model text, with source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


_SYMBOLS = "~&|(){},"


def _tokens(text: str) -> Iterator[tuple]:
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch in _SYMBOLS:
            yield (ch, ch, line, start_col)
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            yield ("INT", text[i:j], line, start_col)
            col += j - i
            i = j
            continue
        if ch in "KDC":
            yield (ch, ch, line, start_col)
            i += 1
            col += 1
            continue
        if ch.islower():
            j = i
            while j < len(text) and (text[j].islower() or text[j].isdigit() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KW" if word in _KEYWORDS else "ATOM"
            yield (kind, word, line, start_col)
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, start_col)
    yield ("EOF", "", line, col)


class _Parser:
    def __init__(self, text: str):
        self.toks = list(_tokens(text))
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2], tok[3])
        return tok

    def agent(self) -> int:
        tok = self.expect("INT")
        n = int(tok[1])
        if n < 1:
            raise ParseError(f"agent id must be >= 1, found {n}", tok[2], tok[3])
        if n > MAX_AGENTS:
            raise ParseError(f"agent id exceeds the {MAX_AGENTS}-agent cap", tok[2], tok[3])
        return n

    def formula(self) -> Formula:
        f = self.conjunction()
        while self.peek()[0] == "|":
            self.next()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.peek()[0] == "&":
            self.next()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind, value, line, col = self.peek()
        if kind == "~":
            self.next()
            return Not(self.unary())
        if kind == "K":
            self.next()
            return K(self.agent(), self.unary())
        if kind == "D":
            self.next()
            self.expect("{")
            members = [self.agent()]
            while self.peek()[0] == ",":
                self.next()
                members.append(self.agent())
            self.expect("}")
            return D(agent_set(members), self.unary())
        if kind == "C":
            self.next()
            return C(self.unary())
        if kind == "(":
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if kind == "KW":
            self.next()
            return TOP if value == "true" else BOT
        if kind == "ATOM":
            self.next()
            return Atom(value)
        raise ParseError(f"expected a formula, found {value!r}", line, col)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    kind, value, line, col = p.peek()
    if kind != "EOF":
        raise ParseError(f"trailing input {value!r}", line, col)
    return f


def _render_unary(f: Formula) -> str:
    if isinstance(f, (And, Or)):
        return "(" + render_formula(f) + ")"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, Not):
        return "~" + _render_unary(f.body)
    if isinstance(f, K):
        return f"K {f.agent} " + _render_unary(f.body)
    if isinstance(f, D):
        return "D {" + ",".join(str(i) for i in sorted(f.agents)) + "} " + _render_unary(f.body)
    if isinstance(f, C):
        return "C " + _render_unary(f.body)
    raise TypeError(f"not a formula: {f!r}")


def _render_conj(f: Formula) -> str:
    if isinstance(f, And):
        return _render_conj(f.left) + " & " + _render_unary(f.right)
    return _render_unary(f)


def render_formula(f: Formula) -> str:
    """Text form; ``parse_formula(render_formula(f))`` equals ``f``."""
    if isinstance(f, Or):
        return render_formula(f.left) + " | " + _render_conj(f.right)
    return _render_conj(f)


def modal_depth(f: Formula) -> int:
    """Nesting depth of K and D; C itself contributes nothing."""
    if isinstance(f, (Atom, Top, Bot)):
        return 0
    if isinstance(f, Not):
        return modal_depth(f.body)
    if isinstance(f, (And, Or)):
        return max(modal_depth(f.left), modal_depth(f.right))
    if isinstance(f, (K, D)):
        return 1 + modal_depth(f.body)
    if isinstance(f, C):
        return modal_depth(f.body)
    raise TypeError(f"not a formula: {f!r}")


def atoms_of(f: Formula) -> frozenset:
    """The atoms occurring syntactically in the formula."""
    if isinstance(f, Atom):
        return frozenset((f.name,))
    if isinstance(f, (Top, Bot)):
        return frozenset()
    if isinstance(f, Not):
        return atoms_of(f.body)
    if isinstance(f, (And, Or)):
        return atoms_of(f.left) | atoms_of(f.right)
    if isinstance(f, (K, D, C)):
        return atoms_of(f.body)
    raise TypeError(f"not a formula: {f!r}")


def agents_of(f: Formula) -> frozenset:
    if isinstance(f, (Atom, Top, Bot)):
        return frozenset()
    if isinstance(f, (Not, C)):
        return agents_of(f.body)
    if isinstance(f, (And, Or)):
        return agents_of(f.left) | agents_of(f.right)
    if isinstance(f, K):
        return frozenset((f.agent,)) | agents_of(f.body)
    if isinstance(f, D):
        return f.agents | agents_of(f.body)
    raise TypeError(f"not a formula: {f!r}")


def eliminate_literal(f: Formula, p: str) -> Formula:
    """Substitute ~p by true and, subsequently, p by true.

    No boolean simplification is performed, so the result keeps the
    substituted constants in place.
    """
    if isinstance(f, Not) and f.body == Atom(p):
        return TOP
    if isinstance(f, Atom):
        return TOP if f.name == p else f
    if isinstance(f, (Top, Bot)):
        return f
    if isinstance(f, Not):
        return Not(eliminate_literal(f.body, p))
    if isinstance(f, And):
        return And(eliminate_literal(f.left, p), eliminate_literal(f.right, p))
    if isinstance(f, Or):
        return Or(eliminate_literal(f.left, p), eliminate_literal(f.right, p))
    if isinstance(f, K):
        return K(f.agent, eliminate_literal(f.body, p))
    if isinstance(f, D):
        return D(f.agents, eliminate_literal(f.body, p))
    if isinstance(f, C):
        return C(eliminate_literal(f.body, p))
    raise TypeError(f"not a formula: {f!r}")


def validate_pc(f: Formula) -> bool:
    """True when every C argument is free of modal operators."""
    if isinstance(f, C):
        return modal_depth(f.body) == 0 and _c_free(f.body)
    if isinstance(f, (Atom, Top, Bot)):
        return True
    if isinstance(f, Not):
        return validate_pc(f.body)
    if isinstance(f, (And, Or)):
        return validate_pc(f.left) and validate_pc(f.right)
    if isinstance(f, (K, D)):
        return validate_pc(f.body)
    raise TypeError(f"not a formula: {f!r}")


def _c_free(f: Formula) -> bool:
    if isinstance(f, C):
        return False
    if isinstance(f, (Atom, Top, Bot)):
        return True
    if isinstance(f, Not):
        return _c_free(f.body)
    if isinstance(f, (And, Or)):
        return _c_free(f.left) and _c_free(f.right)
    if isinstance(f, (K, D)):
        return _c_free(f.body)
    return True
