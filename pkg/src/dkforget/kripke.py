"""Finite Kripke models: relations, reachability, frame checking, satisfaction.

Models are immutable after construction; group relations and reachable sets
are materialized lazily and memoized, so concurrent readers observe
consistent results.
"""

from __future__ import annotations

import functools
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .syntax import (
    And, Atom, Bot, C, D, Formula, K, Minterm, Not, Or, ParseError, Top,
    agent_set, MAX_AGENTS,
)

BASES = ("K", "D", "T", "K45", "KD45", "S5")

# frame properties demanded of every accessibility relation, per system
REQUIREMENTS = {
    "K": (),
    "D": ("serial",),
    "T": ("serial", "reflexive"),
    "K45": ("transitive", "euclidean"),
    "KD45": ("serial", "transitive", "euclidean"),
    "S5": ("serial", "reflexive", "transitive", "euclidean"),
}


@dataclass(frozen=True)
class System:
    """A modal system: frame class plus language (d = distributed knowledge
    only, dpc = distributed plus propositional common knowledge)."""

    base: str
    lang: str = "d"

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown system base {self.base!r}")
        if self.lang not in ("d", "dpc"):
            raise ValueError(f"unknown language {self.lang!r}")

    @property
    def requires(self) -> tuple:
        return REQUIREMENTS[self.base]

    @property
    def serial(self) -> bool:
        return "serial" in self.requires

    @property
    def reflexive(self) -> bool:
        return "reflexive" in self.requires

    @property
    def trans_euclidean(self) -> bool:
        return "euclidean" in self.requires

    @property
    def dpc(self) -> bool:
        return self.lang == "dpc"

    def __str__(self) -> str:
        return self.base if self.lang == "d" else f"{self.base}-DPC"


@functools.lru_cache(maxsize=None)
def groups(n: int) -> tuple:
    """All nonempty agent groups for n agents, smallest first."""
    if not 1 <= n <= MAX_AGENTS:
        raise ValueError(f"agent count must be in 1..{MAX_AGENTS}")
    agents = range(1, n + 1)
    out = []
    for mask in range(1, 1 << n):
        out.append(frozenset(i for i in agents if mask >> (i - 1) & 1))
    out.sort(key=lambda b: (len(b), tuple(sorted(b))))
    return tuple(out)


class KripkeModel:
    """Worlds, one accessibility relation per agent, and a valuation that
    assigns every world a minterm over the model's atom tuple."""

    def __init__(self, atoms: Iterable[str], agent_count: int,
                 valuation: dict, relations: dict):
        self.atoms = tuple(atoms)
        if not 1 <= agent_count <= MAX_AGENTS:
            raise ValueError(f"agent count must be in 1..{MAX_AGENTS}")
        self.n = agent_count
        self.worlds = tuple(sorted(valuation))
        world_set = set(self.worlds)
        if not world_set:
            raise ValueError("a model needs at least one world")
        self.val = {}
        for w, mt in valuation.items():
            if isinstance(mt, Minterm):
                if mt.atoms != self.atoms:
                    mt = mt.restrict(self.atoms)
            else:
                mt = Minterm.from_map(self.atoms, mt)
            self.val[w] = mt
        self.rel = {}
        for i in range(1, agent_count + 1):
            pairs = frozenset(relations.get(i, ()))
            for a, b in pairs:
                if a not in world_set or b not in world_set:
                    raise ValueError(f"edge ({a!r}, {b!r}) references an unknown world")
            self.rel[i] = pairs
        self._succ = {
            i: {w: frozenset(b for a, b in self.rel[i] if a == w) for w in self.worlds}
            for i in self.rel
        }
        self._group_cache = {}
        self._group_succ = {}
        self._reach_cache = {}
        self._lock = threading.Lock()

    def agents(self) -> range:
        return range(1, self.n + 1)

    def successors(self, agent: int, world: str) -> frozenset:
        return self._succ[agent][world]

    def group_relation(self, group: frozenset) -> frozenset:
        """Intersection of the members' relations, memoized per group."""
        group = frozenset(group)
        if not group or any(i not in self.rel for i in group):
            raise ValueError(f"group {set(group)} outside agents 1..{self.n}")
        with self._lock:
            cached = self._group_cache.get(group)
        if cached is not None:
            return cached
        pairs = None
        for i in sorted(group):
            pairs = self.rel[i] if pairs is None else pairs & self.rel[i]
        with self._lock:
            self._group_cache[group] = pairs
        return pairs

    def group_successors(self, group: frozenset, world: str) -> frozenset:
        group = frozenset(group)
        with self._lock:
            table = self._group_succ.get(group)
        if table is None:
            table = {w: frozenset() for w in self.worlds}
            grouped = {}
            for a, b in self.group_relation(group):
                grouped.setdefault(a, []).append(b)
            for a, bs in grouped.items():
                table[a] = frozenset(bs)
            with self._lock:
                self._group_succ[group] = table
        return table[world]

    def reachable(self, world: str) -> frozenset:
        """Image of the world under the transitive closure of the union
        relation; the world itself is included only when it lies on a cycle."""
        with self._lock:
            cached = self._reach_cache.get(world)
        if cached is not None:
            return cached
        seen = set()
        frontier = set()
        for i in self.agents():
            frontier |= self.successors(i, world)
        while frontier:
            seen |= frontier
            nxt = set()
            for w in frontier:
                for i in self.agents():
                    nxt |= self.successors(i, w)
            frontier = nxt - seen
        out = frozenset(seen)
        with self._lock:
            self._reach_cache[world] = out
        return out

    def minterm(self, world: str) -> Minterm:
        return self.val[world]

    def serialize(self, actual: Optional[str] = None, scope=None, family=None) -> str:
        lines = [f"agents {self.n}"]
        if self.atoms:
            lines.append("atoms " + " ".join(self.atoms))
        else:
            lines.append("atoms")
        for w in self.worlds:
            mt = self.val[w]
            vals = " ".join(f"{a}={1 if mt.get(a) else 0}" for a in self.atoms)
            lines.append(f"world {w} {vals}".rstrip())
        for i in self.agents():
            for a, b in sorted(self.rel[i]):
                lines.append(f"edge {i} {a} {b}")
        if actual is not None:
            lines.append(f"actual {actual}")
        if family is not None:
            for b in sorted(family, key=lambda g: (len(g), tuple(sorted(g)))):
                names = " ".join(sorted(family[b]))
                spec = ",".join(str(i) for i in sorted(b))
                lines.append(f"point {{{spec}}} {names}".rstrip())
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"KripkeModel(worlds={len(self.worlds)}, agents={self.n}, atoms={self.atoms})"


@dataclass(frozen=True)
class PointedModel:
    model: KripkeModel
    actual: str

    def __post_init__(self):
        if self.actual not in self.model.val:
            raise ValueError(f"actual world {self.actual!r} not in the model")


@dataclass(frozen=True)
class MultiPointedModel:
    """Model plus a family of world sets indexed by the nonempty subsets of
    the scope group; missing subsets denote empty sets."""

    model: KripkeModel
    scope: frozenset
    family: dict = field(default_factory=dict)

    def __post_init__(self):
        scope = agent_set(self.scope)
        if max(scope) > self.model.n:
            raise ValueError("scope exceeds the model's agent count")
        object.__setattr__(self, "scope", scope)
        filled = {}
        for b in _subgroups(scope):
            ws = frozenset(self.family.get(b, ()))
            for w in ws:
                if w not in self.model.val:
                    raise ValueError(f"family world {w!r} not in the model")
            filled[b] = ws
        for b in self.family:
            if frozenset(b) not in filled:
                raise ValueError(f"family group {set(b)} outside the scope {set(scope)}")
        object.__setattr__(self, "family", filled)


def subgroups(scope: frozenset) -> list:
    """All nonempty subsets of an agent group, smallest first."""
    members = sorted(scope)
    out = []
    for mask in range(1, 1 << len(members)):
        out.append(frozenset(m for j, m in enumerate(members) if mask >> j & 1))
    out.sort(key=lambda b: (len(b), tuple(sorted(b))))
    return out


_subgroups = subgroups


def successors_family(pm: PointedModel, scope: frozenset) -> MultiPointedModel:
    """The multi-pointed view whose family holds the actual world's group
    successor sets, one per nonempty subset of the scope."""
    fam = {
        b: pm.model.group_successors(b, pm.actual)
        for b in _subgroups(frozenset(scope))
    }
    return MultiPointedModel(pm.model, frozenset(scope), fam)


def parse_model(text: str):
    """Parse the line-oriented model format.

    Returns a KripkeModel, a PointedModel when an ``actual`` line is present,
    or a MultiPointedModel when ``point`` lines are present.
    """
    n = None
    atoms = None
    valuation = {}
    relations = {}
    actual = None
    points = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head == "agents":
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError("agents line needs a single count", lineno, 1)
            n = int(parts[1])
            if not 1 <= n <= MAX_AGENTS:
                raise ParseError(f"agent count must be in 1..{MAX_AGENTS}", lineno, 1)
        elif head == "atoms":
            atoms = tuple(parts[1:])
            for a in atoms:
                if not (a[0].islower() and all(c.islower() or c.isdigit() or c == "_" for c in a)):
                    raise ParseError(f"bad atom name {a!r}", lineno, 1)
        elif head == "world":
            if n is None or atoms is None:
                raise ParseError("world line before agents/atoms", lineno, 1)
            if len(parts) < 2:
                raise ParseError("world line needs an id", lineno, 1)
            wid = parts[1]
            if wid in valuation:
                raise ParseError(f"duplicate world {wid!r}", lineno, 1)
            assignment = {}
            for item in parts[2:]:
                if "=" not in item:
                    raise ParseError(f"bad valuation entry {item!r}", lineno, 1)
                a, v = item.split("=", 1)
                if a not in atoms:
                    raise ParseError(f"undeclared atom {a!r}", lineno, 1)
                if v not in ("0", "1"):
                    raise ParseError(f"valuation must be 0 or 1, found {v!r}", lineno, 1)
                assignment[a] = v == "1"
            missing = [a for a in atoms if a not in assignment]
            if missing:
                raise ParseError(f"world {wid!r} missing valuation for {missing[0]!r}", lineno, 1)
            valuation[wid] = Minterm.from_map(atoms, assignment)
        elif head == "edge":
            if len(parts) != 4:
                raise ParseError("edge line needs: edge <agent> <from> <to>", lineno, 1)
            if n is None:
                raise ParseError("edge line before agents", lineno, 1)
            if not parts[1].isdigit():
                raise ParseError(f"bad agent id {parts[1]!r}", lineno, 1)
            i = int(parts[1])
            if not 1 <= i <= n:
                raise ParseError(f"undeclared agent {i}", lineno, 1)
            for w in parts[2:]:
                if w not in valuation:
                    raise ParseError(f"undeclared world {w!r}", lineno, 1)
            relations.setdefault(i, set()).add((parts[2], parts[3]))
        elif head == "actual":
            if len(parts) != 2:
                raise ParseError("actual line needs a single world", lineno, 1)
            if actual is not None:
                raise ParseError("duplicate actual line", lineno, 1)
            if parts[1] not in valuation:
                raise ParseError(f"undeclared world {parts[1]!r}", lineno, 1)
            actual = parts[1]
        elif head == "point":
            if len(parts) < 2 or not (parts[1].startswith("{") and parts[1].endswith("}")):
                raise ParseError("point line needs a {i,j,...} group", lineno, 1)
            body = parts[1][1:-1]
            try:
                members = agent_set(int(x) for x in body.split(",") if x)
            except ValueError as exc:
                raise ParseError(str(exc), lineno, 1) from None
            if n is None or max(members) > n:
                raise ParseError(f"undeclared agent in group {parts[1]}", lineno, 1)
            for w in parts[2:]:
                if w not in valuation:
                    raise ParseError(f"undeclared world {w!r}", lineno, 1)
            if members in points:
                raise ParseError(f"duplicate point line for {parts[1]}", lineno, 1)
            points[members] = frozenset(parts[2:])
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, 1)
    if n is None or atoms is None or not valuation:
        raise ParseError("model needs agents, atoms and at least one world", 1, 1)
    model = KripkeModel(atoms, n, valuation, relations)
    if points:
        scope = frozenset().union(*points)
        return MultiPointedModel(model, scope, points)
    if actual is not None:
        return PointedModel(model, actual)
    return model


@dataclass(frozen=True)
class FrameReport:
    """Per-property outcome with a violating witness where applicable."""

    serial: bool
    reflexive: bool
    transitive: bool
    euclidean: bool
    witnesses: dict
    required: tuple
    verdict: bool


def check_frame(model: KripkeModel, system: System) -> FrameReport:
    """Check Kripke frame properties of every agent relation against the
    system's requirements."""
    props = {"serial": True, "reflexive": True, "transitive": True, "euclidean": True}
    witnesses = {}
    for i in model.agents():
        succ = model._succ[i]
        for w in model.worlds:
            if props["serial"] and not succ[w]:
                props["serial"] = False
                witnesses["serial"] = (i, w)
            if props["reflexive"] and w not in succ[w]:
                props["reflexive"] = False
                witnesses["reflexive"] = (i, w)
        if props["transitive"] or props["euclidean"]:
            for a in model.worlds:
                for b in succ[a]:
                    if props["transitive"] and not succ[b] <= succ[a]:
                        props["transitive"] = False
                        bad = next(iter(succ[b] - succ[a]))
                        witnesses["transitive"] = (i, a, b, bad)
                    if props["euclidean"] and not succ[a] <= succ[b]:
                        props["euclidean"] = False
                        bad = next(iter(succ[a] - succ[b]))
                        witnesses["euclidean"] = (i, a, b, bad)
                    if not props["transitive"] and not props["euclidean"]:
                        break
                else:
                    continue
                break
    required = REQUIREMENTS[system.base]
    verdict = all(props[r] for r in required)
    return FrameReport(props["serial"], props["reflexive"], props["transitive"],
                       props["euclidean"], witnesses, required, verdict)


class Evaluator:
    """Satisfaction checker with a memo that persists across queries against
    one fixed model.  Keys use subformula identity, so shared subtrees pay
    once per world."""

    def __init__(self, model: KripkeModel):
        self.model = model
        self.memo = {}

    def holds(self, w: str, g: Formula) -> bool:
        m = self.model
        key = (w, id(g))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if isinstance(g, Atom):
            if g.name not in m.atoms:
                raise ValueError(f"unknown atom {g.name!r}")
            out = m.val[w].get(g.name)
        elif isinstance(g, Top):
            out = True
        elif isinstance(g, Bot):
            out = False
        elif isinstance(g, Not):
            out = not self.holds(w, g.body)
        elif isinstance(g, And):
            out = self.holds(w, g.left) and self.holds(w, g.right)
        elif isinstance(g, Or):
            out = self.holds(w, g.left) or self.holds(w, g.right)
        elif isinstance(g, K):
            if g.agent > m.n:
                raise ValueError(f"unknown agent {g.agent}")
            out = all(self.holds(t, g.body) for t in m.successors(g.agent, w))
        elif isinstance(g, D):
            if max(g.agents) > m.n:
                raise ValueError(f"unknown agent in group {set(g.agents)}")
            out = all(self.holds(t, g.body) for t in m.group_successors(g.agents, w))
        elif isinstance(g, C):
            out = all(self.holds(t, g.body) for t in m.reachable(w))
        else:
            raise TypeError(f"not a formula: {g!r}")
        self.memo[key] = out
        return out


def evaluate(pm: PointedModel, f: Formula) -> bool:
    """Satisfaction at the pointed model's actual world."""
    return Evaluator(pm.model).holds(pm.actual, f)


class ModelBuilder:
    """Mutable assembly buffer that freezes into a KripkeModel; relations
    are kept as forward and backward adjacency maps."""

    def __init__(self, atoms: Iterable[str], agent_count: int):
        self.atoms = tuple(atoms)
        self.n = agent_count
        self.valuation = {}
        self._succ = {i: {} for i in range(1, agent_count + 1)}
        self._pred = {i: {} for i in range(1, agent_count + 1)}

    @classmethod
    def from_model(cls, model: KripkeModel) -> "ModelBuilder":
        b = cls(model.atoms, model.n)
        for w in model.worlds:
            b.add_world(w, model.val[w])
        for i in model.agents():
            for x, y in model.rel[i]:
                b.add_edge(i, x, y)
        return b

    def add_world(self, wid: str, minterm: Minterm) -> str:
        if wid in self.valuation:
            raise ValueError(f"duplicate world {wid!r}")
        # atoms the minterm does not mention default to false
        values = tuple(minterm.get(a) if a in minterm.atoms else False
                       for a in self.atoms)
        self.valuation[wid] = Minterm(self.atoms, values)
        return wid

    def has_world(self, wid: str) -> bool:
        return wid in self.valuation

    def add_edge(self, agent: int, a: str, b: str):
        self._succ[agent].setdefault(a, set()).add(b)
        self._pred[agent].setdefault(b, set()).add(a)

    def has_edge(self, agent: int, a: str, b: str) -> bool:
        return b in self._succ[agent].get(a, ())

    def successors(self, agent: int, w: str) -> set:
        return self._succ[agent].get(w, set())

    def undirected_component(self, start: str, agent: int) -> frozenset:
        """Reflexive-transitive closure of the world under R_i and its
        inverse, within the current buffer."""
        seen = {start}
        frontier = [start]
        succ = self._succ[agent]
        pred = self._pred[agent]
        while frontier:
            w = frontier.pop()
            for b in succ.get(w, ()):
                if b not in seen:
                    seen.add(b)
                    frontier.append(b)
            for a in pred.get(w, ()):
                if a not in seen:
                    seen.add(a)
                    frontier.append(a)
        return frozenset(seen)

    def merge_with(self, sets: Iterable[frozenset], agent: int):
        """Merging: for all members t, u of the union, when u has a self
        loop, add the edge (t, u)."""
        union = set()
        for s in sets:
            union |= set(s)
        loops = [u for u in union if self.has_edge(agent, u, u)]
        for t in union:
            for u in loops:
                self.add_edge(agent, t, u)

    def freeze(self) -> KripkeModel:
        relations = {
            i: frozenset((a, b) for a, bs in self._succ[i].items() for b in bs)
            for i in self._succ
        }
        return KripkeModel(self.atoms, self.n, dict(self.valuation), relations)
