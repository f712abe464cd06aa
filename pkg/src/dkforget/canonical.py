"""Canonical normal-form trees for distributed knowledge, with optional
propositional common knowledge.

A node is either a bare minterm (depth 0) or a minterm together with one set
of successor nodes per nonempty agent group; the group set packages as
"exactly these successors": the group knows the disjunction, and each member
is considered possible.  Nodes carrying a ``reach`` set additionally package
the minterms realized by reachable worlds (the common-knowledge component).

Nodes are interned: structurally equal trees are the same object, so
equality is identity and pruning/elimination results can be compared in
O(1).  The intern store takes a lock on insertion and is safe to share
between threads.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import syntax
from .kripke import (
    KripkeModel, ModelBuilder, PointedModel, System, check_frame, evaluate,
    groups,
)
from .syntax import (
    And, Atom, Bot, C, D, Formula, K, Minterm, Not, Or, Top,
    all_minterms, conj, disj, modal_depth, atoms_of,
)


class CanonicalFormula:
    """Interned canonical tree node; build via :func:`leaf` / :func:`interior`
    or :func:`of_model`, never directly."""

    __slots__ = ("atoms", "n", "root", "children", "reach", "dep", "uid",
                 "_sort_key")

    def __init__(self, atoms, n, root, children, reach, dep, uid):
        self.atoms = atoms
        self.n = n
        self.root = root
        self.children = children
        self.reach = reach
        self.dep = dep
        self.uid = uid
        self._sort_key = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def is_dpc(self) -> bool:
        return self.reach is not None

    def child_groups(self):
        return groups(self.n)

    def __repr__(self):
        kind = "dpc" if self.is_dpc else "d"
        return f"<canonical {kind} depth={self.dep} uid={self.uid} {self.root.render()}>"


_STORE = {}
_LOCK = threading.Lock()
_PRUNE_UP = {}
_ELIM = {}
_FORMULA = {}
_SAT = {}


def _reach_key(reach):
    if reach is None:
        return None
    return tuple(sorted(mt.values for mt in reach))


def _intern(atoms, n, root, children, reach, dep):
    if children is None:
        key = ("L", atoms, root.values, _reach_key(reach))
    else:
        ckey = tuple(
            (tuple(sorted(b)), tuple(sorted(c.uid for c in children[b])))
            for b in groups(n)
        )
        key = ("I", atoms, n, root.values, ckey, _reach_key(reach))
    with _LOCK:
        node = _STORE.get(key)
        if node is None:
            node = CanonicalFormula(atoms, n, root, children, reach, dep, len(_STORE))
            _STORE[key] = node
    return node


def leaf(root: Minterm, reach=None) -> CanonicalFormula:
    """Depth-0 node: a bare minterm, plus the reachable-minterm set when the
    common-knowledge component is wanted."""
    reach = None if reach is None else frozenset(reach)
    return _intern(root.atoms, 0, root, None, reach, 0)


def interior(root: Minterm, n: int, children, reach=None) -> CanonicalFormula:
    """Node with one successor set per nonempty group of the n agents;
    missing groups mean empty sets."""
    kids = {}
    dep = 0
    for b in groups(n):
        cs = frozenset(children.get(b, ()))
        for c in cs:
            if c.atoms != root.atoms:
                raise ValueError("child atom tuple differs from the root's")
            if (c.reach is None) != (reach is None):
                raise ValueError("mixed plain and common-knowledge nodes")
            dep = max(dep, c.dep)
        kids[b] = cs
    for b in children:
        if frozenset(b) not in kids:
            raise ValueError(f"group {set(b)} outside agents 1..{n}")
    reach = None if reach is None else frozenset(reach)
    return _intern(root.atoms, n, root, kids, reach, dep + 1)


def sort_key(node: CanonicalFormula):
    """Structural total order, stable across runs."""
    if node._sort_key is not None:
        return node._sort_key
    rk = _reach_key(node.reach) or ()
    if node.is_leaf:
        key = (0, node.root.values, rk)
    else:
        ckey = tuple(
            tuple(sorted(sort_key(c) for c in node.children[b]))
            for b in groups(node.n)
        )
        key = (1, node.root.values, rk, ckey)
    node._sort_key = key
    return key


def ordered(nodes) -> list:
    return sorted(nodes, key=sort_key)


def is_level(node: CanonicalFormula, k: int) -> bool:
    """Whether the node belongs to the depth-k layer of the normal form."""
    if node.is_leaf:
        return k == 0
    if k < 1:
        return False
    return all(is_level(c, k - 1) for b in groups(node.n) for c in node.children[b])


def wholly_occurring(node: CanonicalFormula):
    """Every distinct subtree, the node itself included."""
    seen = set()
    stack = [node]
    while stack:
        nd = stack.pop()
        if nd.uid in seen:
            continue
        seen.add(nd.uid)
        yield nd
        if not nd.is_leaf:
            for b in groups(nd.n):
                stack.extend(nd.children[b])


def of_model(pm: PointedModel, atoms: Iterable[str], k: int) -> CanonicalFormula:
    """The unique depth-k canonical formula the pointed model satisfies."""
    return _of_model(pm, atoms, k, dpc=False)


def of_model_dpc(pm: PointedModel, atoms: Iterable[str], k: int) -> CanonicalFormula:
    """As :func:`of_model`, with the reachable-minterm set at every node."""
    return _of_model(pm, atoms, k, dpc=True)


def _of_model(pm, atoms, k, dpc):
    m = pm.model
    ats = tuple(atoms)
    for a in ats:
        if a not in m.atoms:
            raise ValueError(f"atom {a!r} not in the model")
    memo = {}

    def reach_of(w):
        return frozenset(m.val[t].restrict(ats) for t in m.reachable(w))

    def go(w, depth):
        key = (w, depth)
        hit = memo.get(key)
        if hit is not None:
            return hit
        root = m.val[w].restrict(ats)
        reach = reach_of(w) if dpc else None
        if depth == 0:
            node = leaf(root, reach)
        else:
            kids = {
                b: frozenset(go(t, depth - 1) for t in m.group_successors(b, w))
                for b in groups(m.n)
            }
            node = interior(root, m.n, kids, reach)
        memo[key] = node
        return node

    return go(pm.actual, k)


def _nabla(group, members) -> Formula:
    if not members:
        return D(group, syntax.BOT)
    fs = [to_formula(x) for x in ordered(members)]
    parts = [D(group, disj(fs))]
    parts.extend(Not(D(group, Not(f))) for f in fs)
    return conj(parts)


def _nabla_reach(reach) -> Formula:
    if not reach:
        return C(syntax.BOT)
    fs = [mt.to_formula() for mt in sorted(reach, key=lambda m: m.values)]
    parts = [C(disj(fs))]
    parts.extend(Not(C(Not(f))) for f in fs)
    return conj(parts)


def to_formula(node: CanonicalFormula) -> Formula:
    """Render as a formula: root minterm, then the common-knowledge package
    when present, then one group package per group in a fixed order."""
    hit = _FORMULA.get(node.uid)
    if hit is not None:
        return hit
    parts = [node.root.to_formula()]
    if node.reach is not None:
        parts.append(_nabla_reach(node.reach))
    if not node.is_leaf:
        for b in groups(node.n):
            parts.append(_nabla(b, node.children[b]))
    f = conj(parts)
    _FORMULA[node.uid] = f
    return f


def prune_up(node: CanonicalFormula, l: int) -> CanonicalFormula:
    """Keep the top l layers: identity when the modal depth is at most l,
    else recursively prune every successor one level shallower; level 0 is
    the root minterm (with its reach set, when present)."""
    if l == 0:
        return leaf(node.root, node.reach)
    if node.is_leaf or node.dep <= l:
        return node
    key = (node.uid, l)
    hit = _PRUNE_UP.get(key)
    if hit is not None:
        return hit
    kids = {b: frozenset(prune_up(c, l - 1) for c in node.children[b])
            for b in groups(node.n)}
    out = interior(node.root, node.n, kids, node.reach)
    _PRUNE_UP[key] = out
    return out


def prune_down(node: CanonicalFormula, l: int, level: Optional[int] = None) -> CanonicalFormula:
    """Remove the l deepest layers, counted from the formula's layer
    ``level`` (defaults to the modal depth)."""
    lev = node.dep if level is None else level
    if l > lev:
        raise ValueError(f"cannot prune {l} layers from a depth-{lev} formula")
    out = node
    for _ in range(l):
        out = _prune_once(out, lev)
        lev -= 1
    return out


def _prune_once(node, level):
    if level == 0:
        return node
    if level == 1:
        return leaf(node.root, node.reach)
    kids = {b: frozenset(_prune_once(c, level - 1) for c in node.children[b])
            for b in groups(node.n)}
    return interior(node.root, node.n, kids, node.reach)


def eliminate(node: CanonicalFormula, p: str) -> CanonicalFormula:
    """Drop the atom from every minterm; successor sets collapse under
    interning.  The result is canonical-shaped over the smaller vocabulary,
    not necessarily a member of the normal form there."""
    if p not in node.atoms:
        raise ValueError(f"atom {p!r} not in the vocabulary")
    key = (node.uid, p)
    hit = _ELIM.get(key)
    if hit is not None:
        return hit
    root = node.root.drop(p)
    reach = None if node.reach is None else frozenset(mt.drop(p) for mt in node.reach)
    if node.is_leaf:
        out = leaf(root, reach)
    else:
        kids = {b: frozenset(eliminate(c, p) for c in node.children[b])
                for b in groups(node.n)}
        out = interior(root, node.n, kids, reach)
    _ELIM[key] = out
    return out


def entails(node: CanonicalFormula, phi: Formula) -> bool:
    """Dichotomy evaluation: a satisfiable canonical formula either entails
    the given formula or entails its negation; this reads the verdict off
    the tree.  Only meaningful when the node is satisfiable in the ambient
    system and the formula fits the node's vocabulary and depth."""
    bad = atoms_of(phi) - set(node.atoms)
    if bad:
        raise ValueError(f"formula mentions atoms outside the vocabulary: {sorted(bad)}")
    memo = {}

    def go(nd, g):
        key = (nd.uid, id(g))
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(g, Atom):
            out = nd.root.get(g.name)
        elif isinstance(g, Top):
            out = True
        elif isinstance(g, Bot):
            out = False
        elif isinstance(g, Not):
            out = not go(nd, g.body)
        elif isinstance(g, And):
            out = go(nd, g.left) and go(nd, g.right)
        elif isinstance(g, Or):
            out = go(nd, g.left) or go(nd, g.right)
        elif isinstance(g, (K, D)):
            grp = frozenset((g.agent,)) if isinstance(g, K) else g.agents
            if nd.is_leaf:
                raise ValueError("formula is deeper than the canonical tree")
            if max(grp) > nd.n:
                raise ValueError(f"unknown agent in group {set(grp)}")
            out = all(go(c, g.body) for c in nd.children[grp])
        elif isinstance(g, C):
            if nd.reach is None:
                raise ValueError("common knowledge needs a reach-carrying node")
            out = all(mt.sat_prop(g.body) for mt in nd.reach)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = out
        return out

    return go(node, phi)


@dataclass(frozen=True)
class Budget:
    """Resource limits for enumeration and bounded search."""

    max_nodes: int = 10 ** 6
    max_worlds: int = 4
    max_candidates: int = 10 ** 6

    def __post_init__(self):
        if min(self.max_nodes, self.max_worlds, self.max_candidates) <= 0:
            raise ValueError("budget limits must be positive")


class BudgetExhausted(Exception):
    pass


class _Counter:
    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0

    def tick(self, k: int = 1):
        self.used += k
        if self.used > self.cap:
            raise BudgetExhausted(f"enumeration budget of {self.cap} exhausted")


@dataclass(frozen=True)
class SatVerdict:
    kind: str  # "sat" | "unsat" | "unknown"
    witness: Optional[PointedModel] = None
    reason: Optional[str] = None

    @property
    def is_sat(self):
        return self.kind == "sat"

    @property
    def is_unsat(self):
        return self.kind == "unsat"


@dataclass(frozen=True)
class StructuralReport:
    ok: bool
    condition: Optional[str] = None
    path: Optional[str] = None


def _node_violation(nd: CanonicalFormula, system: System) -> Optional[str]:
    """Node-local necessary conditions for satisfiability in the system."""
    if system.dpc != nd.is_dpc:
        return "language-shape" if system.dpc else "unexpected-common-part"
    if nd.is_dpc:
        if system.reflexive and nd.root not in nd.reach:
            return "reach-missing-root"
        if system.serial and not nd.reach:
            return "reach-empty"
    if nd.is_leaf:
        return None
    gs = groups(nd.n)
    for b in gs:
        for c in nd.children[b]:
            if not is_level(c, nd.dep - 1):
                return "uneven-levels"
    for b in gs:
        for c in gs:
            if b < c and not nd.children[c] <= nd.children[b]:
                return "monotonicity"
    if system.serial:
        for i in range(1, nd.n + 1):
            if not nd.children[frozenset((i,))]:
                return "serial-successors"
    if system.reflexive:
        pruned = prune_up(nd, nd.dep - 1)
        for b in gs:
            if pruned not in nd.children[b]:
                return "reflexive-member"
    if system.trans_euclidean and nd.dep >= 2:
        for b in gs:
            kids = nd.children[b]
            if not kids:
                continue
            target = frozenset(prune_up(x, nd.dep - 2) for x in kids)
            for eta in kids:
                if eta.children[b] != target:
                    return "identical-successors"
        full = frozenset(range(1, nd.n + 1))
        for b in gs:
            comp = full - b
            for cgrp in gs:
                c1 = cgrp & b
                c2 = cgrp & comp
                if not c1 or not c2:
                    continue
                for eta in nd.children[b]:
                    for chi in eta.children[cgrp]:
                        if not any(
                            prune_up(e0, nd.dep - 2) is chi
                            and all(e0.children[dsub] == eta.children[dsub]
                                    for dsub in gs if dsub <= c2)
                            for e0 in nd.children[c1]
                        ):
                            return "sibling-closure"
    if nd.is_dpc:
        split = set()
        for b in gs:
            for eta in nd.children[b]:
                split.add(eta.root)
                split |= eta.reach
        if frozenset(split) != nd.reach:
            return "reach-split"
        if system.base == "S5":
            for b in gs:
                for eta in nd.children[b]:
                    if eta.reach != nd.reach:
                        return "reach-not-shared"
    return None


def check_structural(node: CanonicalFormula, system: System) -> StructuralReport:
    """Necessary satisfiability conditions, checked at every subtree; the
    first violation is reported with the path that reaches it."""
    seen = set()

    def visit(nd, path):
        if nd.uid in seen:
            return None
        seen.add(nd.uid)
        bad = _node_violation(nd, system)
        if bad is not None:
            return StructuralReport(False, bad, path)
        if nd.is_leaf:
            return None
        for b in groups(nd.n):
            for idx, c in enumerate(ordered(nd.children[b])):
                label = ",".join(str(i) for i in sorted(b))
                rep = visit(c, f"{path}/{{{label}}}:{idx}")
                if rep is not None:
                    return rep
        return None

    rep = visit(node, "root")
    return rep if rep is not None else StructuralReport(True)


def _tree_witness(node: CanonicalFormula, system: System,
                  world_guard: int = 20000) -> Optional[PointedModel]:
    """Tree-shaped witness attempt for the non-transitive systems: one child
    world per (group, successor), edges for exactly the group's agents,
    reflexive closure when required, reachable-minterm clouds for nodes that
    carry a reach set."""
    n = max(node.n, 1)
    builder = ModelBuilder(node.atoms, n)
    count = itertools.count()

    def build(nd, wid):
        if len(builder.valuation) > world_guard:
            raise BudgetExhausted("witness construction exceeded the world guard")
        builder.add_world(wid, nd.root)
        if not nd.is_leaf:
            for b in groups(nd.n):
                for c in ordered(nd.children[b]):
                    cid = f"{wid}.{next(count)}"
                    build(c, cid)
                    for i in b:
                        builder.add_edge(i, wid, cid)
        elif nd.reach:
            cloud = []
            for mt in sorted(nd.reach, key=lambda m: m.values):
                cid = f"{wid}.r{next(count)}"
                builder.add_world(cid, mt)
                cloud.append(cid)
            for cid in cloud:
                for i in range(1, n + 1):
                    builder.add_edge(i, wid, cid)
                    for other in cloud:
                        builder.add_edge(i, cid, other)

    try:
        build(node, "s")
    except BudgetExhausted:
        return None
    if system.reflexive:
        for w in list(builder.valuation):
            for i in range(1, n + 1):
                builder.add_edge(i, w, w)
    elif system.serial:
        for w in list(builder.valuation):
            for i in range(1, n + 1):
                if not builder.successors(i, w):
                    builder.add_edge(i, w, w)
    return PointedModel(builder.freeze(), "s")


def satisfiable(node: CanonicalFormula, system: System, budget: Budget) -> SatVerdict:
    """Layered decision: structural filters, then a constructive witness
    attempt, then bounded model search; honest Unknown when all are
    inconclusive."""
    memo_key = (node.uid, system)
    hit = _SAT.get(memo_key)
    if hit is not None:
        return hit
    rep = check_structural(node, system)
    if not rep.ok:
        out = SatVerdict("unsat", reason=f"{rep.condition} at {rep.path}")
        _SAT[memo_key] = out
        return out
    target = to_formula(node)
    if system.trans_euclidean:
        from . import construct
        pm = construct.clique_witness(node, system)
    else:
        pm = _tree_witness(node, system)
    if pm is not None and check_frame(pm.model, system).verdict and evaluate(pm, target):
        out = SatVerdict("sat", witness=pm)
        _SAT[memo_key] = out
        return out
    n = max(node.n, 1)
    if len(node.atoms) <= 3 and n <= 3:
        from . import oracle
        verdict = oracle.brute_sat(target, system, min(budget.max_worlds, 5),
                                   agents=n, max_models=budget.max_nodes)
        if verdict.kind == "true":
            out = SatVerdict("sat", witness=verdict.witness)
            _SAT[memo_key] = out
            return out
    return SatVerdict("unknown", reason="witness attempt and bounded search inconclusive")


def _reach_choices(atoms, system, root, counter):
    universe = all_minterms(atoms)
    out = []
    for bits in range(1 << len(universe)):
        counter.tick()
        reach = frozenset(mt for j, mt in enumerate(universe) if bits >> j & 1)
        if system.reflexive and root not in reach:
            continue
        if system.serial and not reach:
            continue
        out.append(reach)
    return out


def _nonempty_subsets(options, counter):
    for bits in range(1, 1 << len(options)):
        counter.tick()
        yield frozenset(options[j] for j in range(len(options)) if bits >> j & 1)


def enumerate_level(atoms, n, k, system: System, counter: _Counter,
                    root: Optional[Minterm] = None, reach=None,
                    reach_fixed: bool = False) -> list:
    """All depth-k candidates over the vocabulary that pass the node-local
    filters, optionally with a fixed root minterm (and, for the
    common-knowledge form, a fixed reach set)."""
    ats = tuple(atoms)
    roots = [root] if root is not None else all_minterms(ats)
    dpc = system.dpc
    out = []
    if k == 0:
        for w in roots:
            if not dpc:
                counter.tick()
                out.append(leaf(w))
                continue
            reaches = [reach] if reach_fixed else _reach_choices(ats, system, w, counter)
            for r in reaches:
                counter.tick()
                nd = leaf(w, r)
                if _node_violation(nd, system) is None:
                    out.append(nd)
        return ordered(out)
    child_fixed = reach_fixed and system.base == "S5"
    if child_fixed:
        pool = enumerate_level(ats, n, k - 1, system, counter,
                               reach=reach, reach_fixed=True)
    else:
        pool = enumerate_level(ats, n, k - 1, system, counter)
    gs = groups(n)
    for w in roots:
        reaches = [None]
        if dpc:
            reaches = [reach] if reach_fixed else _reach_choices(ats, system, w, counter)
        for r in reaches:
            epool = pool
            if dpc and not child_fixed and system.base == "S5":
                epool = [c for c in pool if c.reach == r]
            for combo in _group_assignments(gs, epool, counter):
                counter.tick()
                nd = interior(w, n, dict(zip(gs, combo)), r)
                if _node_violation(nd, system) is None:
                    out.append(nd)
    return ordered(out)


def _group_assignments(gs, pool, counter):
    """All per-group subset assignments over a shared candidate pool, with
    the monotonicity constraint applied as groups are filled in."""

    def rec(idx, chosen):
        if idx == len(gs):
            yield tuple(chosen)
            return
        b = gs[idx]
        smaller = [(j, gs[j]) for j in range(idx) if gs[j] < b]
        for bits in range(1 << len(pool)):
            counter.tick()
            sel = frozenset(pool[j] for j in range(len(pool)) if bits >> j & 1)
            if any(not sel <= chosen[j] for j, _ in smaller):
                continue
            chosen.append(sel)
            yield from rec(idx + 1, chosen)
            chosen.pop()

    yield from rec(0, [])


@dataclass(frozen=True)
class DecomposeResult:
    formulas: tuple
    complete: bool


def decompose(phi: Formula, system: System, k: int, budget: Budget,
              atoms=None, agents: Optional[int] = None) -> DecomposeResult:
    """The satisfiable depth-k canonical formulas entailing the given
    formula: enumerate candidates, filter by the structural conditions and a
    satisfiability verdict, and confirm by the dichotomy evaluator."""
    if k < modal_depth(phi):
        raise ValueError("decomposition depth below the formula's modal depth")
    ats = tuple(sorted(atoms_of(phi))) if atoms is None else tuple(atoms)
    if agents is None:
        found = syntax.agents_of(phi)
        agents = max(found) if found else 1
    counter = _Counter(budget.max_nodes)
    complete = True
    try:
        cands = enumerate_level(ats, agents, k, system, counter)
    except BudgetExhausted:
        return DecomposeResult((), False)
    out = []
    for nd in cands:
        verdict = satisfiable(nd, system, budget)
        if verdict.is_unsat:
            continue
        if verdict.kind == "unknown":
            complete = False
            continue
        if entails(nd, phi):
            out.append(nd)
            if len(out) > budget.max_candidates:
                complete = False
                break
    return DecomposeResult(tuple(ordered(out)), complete)


@dataclass(frozen=True)
class ExtensionsResult:
    formulas: tuple
    complete: bool


def extensions(delta: CanonicalFormula, target_depth: int, system: System,
               budget: Budget) -> ExtensionsResult:
    """Satisfiable depth-``target_depth`` canonical formulas that prune back
    to the given one.

    Search expands every depth-0 node into a deeper subtree with the same
    root, propagating the shared-successor and sibling constraints of the
    transitive Euclidean systems eagerly; emitted candidates are confirmed
    satisfiable.  Deterministic order; the flag reports whether the space
    was exhausted with every verdict decided.
    """
    k = delta.dep
    if target_depth < k:
        raise ValueError("target depth below the formula's depth")
    if target_depth == k:
        return ExtensionsResult((delta,), True)
    e = target_depth - k
    n = max(delta.n, 1)
    counter = _Counter(budget.max_nodes)
    pool_memo = {}
    # with one extra layer in the transitive Euclidean systems, the shared
    # successor law pins a candidate's slot-group children to the original
    # unexpanded successors, which collapses the search space
    pin_mode = system.trans_euclidean and e == 1

    def pin_key(pinned):
        return tuple(sorted((tuple(sorted(b)), tuple(sorted(x.uid for x in xs)))
                            for b, xs in pinned.items()))

    def slot_options(nd, pinned):
        """One entry per (free group, successor): the valid expansions of the
        successor, plus a member the choice must include when the reflexive
        conditions force one."""
        gs = groups(nd.n)
        slots = []
        for b in gs:
            if b in pinned:
                continue
            for c in ordered(nd.children[b]):
                child_pin = {b: nd.children[b]} if pin_mode else {}
                opts = expansions(c, child_pin)
                forced = None
                if system.reflexive and e == 1 and prune_up(nd, nd.dep - 1) is c:
                    forced = nd
                slots.append((b, c, opts, forced))
        return slots

    def assemble(nd, pinned, slots):
        def rec(idx, acc):
            if idx == len(slots):
                kids = dict(pinned)
                for (b, _, _, _), sel in zip(slots, acc):
                    kids[b] = kids.get(b, frozenset()) | sel
                counter.tick()
                cand = interior(nd.root, nd.n, kids, nd.reach)
                if _node_violation(cand, system) is None:
                    yield cand
                return
            b, c, opts, forced = slots[idx]
            for sel in _nonempty_subsets(opts, counter):
                if forced is not None and forced not in sel:
                    continue
                acc.append(sel)
                yield from rec(idx + 1, acc)
                acc.pop()

        yield from rec(0, [])

    def expansions(nd, pinned):
        """Complete expansion pool for one successor under the given pinned
        group sets; all-or-nothing under the budget so parents never see a
        silently truncated pool."""
        key = (nd.uid, pin_key(pinned))
        hit = pool_memo.get(key)
        if hit is not None:
            return hit
        if nd.is_leaf:
            out = enumerate_level(nd.atoms, n, e, system, counter,
                                  root=nd.root, reach=nd.reach, reach_fixed=True)
            out = [x for x in out
                   if all(x.children[b] == xs for b, xs in pinned.items())]
        else:
            out = list(assemble(nd, pinned, slot_options(nd, pinned)))
        out = ordered(out)
        pool_memo[key] = out
        return out

    complete = True
    emitted = []
    try:
        if delta.is_leaf:
            stream = iter(enumerate_level(delta.atoms, n, e, system, counter,
                                          root=delta.root, reach=delta.reach,
                                          reach_fixed=True))
        else:
            stream = assemble(delta, {}, slot_options(delta, {}))
        for cand in stream:
            if len(emitted) >= budget.max_candidates:
                complete = False
                break
            if prune_up(cand, k) is not delta:
                continue
            verdict = satisfiable(cand, system, budget)
            if verdict.is_unsat:
                continue
            if verdict.kind == "unknown":
                complete = False
                continue
            emitted.append(cand)
    except BudgetExhausted:
        complete = False
    return ExtensionsResult(tuple(emitted), complete)
