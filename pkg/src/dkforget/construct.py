"""Bisimulation-based model constructions.

Given a canonical formula and a model of its literal-eliminated remainder,
these builders produce a frame-conformant model of the original formula
together with the witnessing collective p-bisimulation.  The transitive
Euclidean systems go through a multi-pointed construction that builds one
equivalence clique per agent group and merges cliques bottom-up; the
non-transitive systems use a straightforward tree concatenation.

Also hosts the formula-only witness builders used by satisfiability
checking, which run the same clique machinery without a reference model.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .bisim import BisimRelation
from .canonical import (
    CanonicalFormula, eliminate, ordered, prune_up, to_formula,
)
from .kripke import (
    Evaluator, KripkeModel, ModelBuilder, MultiPointedModel, PointedModel,
    System, check_frame, evaluate, groups, subgroups,
)
from .syntax import Minterm, render_formula

DEFAULT_WORLD_GUARD = 20000


class ConstructionFailure(Exception):
    """A construction step could not proceed; the message names the first
    obstruction."""


@dataclass(frozen=True)
class ConstructionResult:
    model: object  # PointedModel or MultiPointedModel
    rho: BisimRelation
    trace: tuple


def _combined_atoms(node: CanonicalFormula, model: KripkeModel) -> tuple:
    return tuple(sorted(set(node.atoms) | set(model.atoms)))


def _remainder(node: CanonicalFormula, p: str):
    return to_formula(eliminate(node, p))


def _check_remainder(delta: CanonicalFormula, p: str, mp: PointedModel):
    """Precondition: the reference model satisfies the eliminated formula;
    on failure report the first failing conjunct."""
    ev = Evaluator(mp.model)
    if ev.holds(mp.actual, _remainder(delta, p)):
        return ev
    target = _remainder(delta, p)
    conjuncts = []

    def flatten(f):
        from .syntax import And
        if isinstance(f, And):
            flatten(f.left)
            flatten(f.right)
        else:
            conjuncts.append(f)

    flatten(target)
    for g in conjuncts:
        if not ev.holds(mp.actual, g):
            raise ConstructionFailure(
                f"reference model fails the eliminated formula at conjunct: "
                f"{render_formula(g)}")
    raise ConstructionFailure("reference model fails the eliminated formula")


def build_model_basic(delta: CanonicalFormula, p: str, mp: PointedModel,
                      system: System,
                      world_guard: int = DEFAULT_WORLD_GUARD) -> ConstructionResult:
    """Tree concatenation for the systems without frame conditions beyond
    seriality: copy the reference model at depth 0, recursively attach a
    submodel per (group, reference successor, successor formula) triple."""
    if system.base not in ("K", "D"):
        raise ValueError("basic construction covers the K and D systems")
    if delta.is_dpc:
        raise ValueError("use the dpc variant for reach-carrying formulas")
    ev = _check_remainder(delta, p, mp)
    m = mp.model
    builder = ModelBuilder(_combined_atoms(delta, m), max(m.n, delta.n, 1))
    rho = set()
    trace = []
    counter = itertools.count()

    def build(node, src, prefix):
        if len(builder.valuation) > world_guard:
            raise ConstructionFailure("world guard exceeded")
        sid = builder.add_world(f"{prefix}s", node.root)
        rho.add((sid, src))
        trace.append(f"{sid} realizes {node.root.render()} against {src}")
        if node.is_leaf:
            copies = {}
            for w in m.worlds:
                copies[w] = builder.add_world(f"{prefix}c:{w}", m.val[w])
                rho.add((copies[w], w))
            for i in m.agents():
                for a, b in m.rel[i]:
                    builder.add_edge(i, copies[a], copies[b])
                for t in m.successors(i, src):
                    builder.add_edge(i, sid, copies[t])
            return sid
        for b in groups(node.n):
            for tprime in sorted(m.group_successors(b, src)):
                for eta in ordered(node.children[b]):
                    if ev.holds(tprime, _remainder(eta, p)):
                        tid = build(eta, tprime, f"{prefix}{next(counter)}.")
                        for j in b:
                            builder.add_edge(j, sid, tid)
        return sid

    root = build(delta, mp.actual, "")
    model = builder.freeze()
    return ConstructionResult(PointedModel(model, root),
                              BisimRelation(frozenset(rho), p), tuple(trace))


def build_model_reflexive(delta: CanonicalFormula, p: str, mp: PointedModel,
                          system: Optional[System] = None,
                          world_guard: int = DEFAULT_WORLD_GUARD) -> ConstructionResult:
    """Basic construction followed by reflexive closure; the bisimulation is
    unchanged because the reference model is reflexive."""
    base = build_model_basic(delta, p, mp, System("K"), world_guard)
    closed = _reflexive_closure(base.model.model)
    return ConstructionResult(PointedModel(closed, base.model.actual),
                              base.rho, base.trace + ("reflexive closure",))


def _reflexive_closure(model: KripkeModel) -> KripkeModel:
    builder = ModelBuilder.from_model(model)
    for w in model.worlds:
        for i in model.agents():
            builder.add_edge(i, w, w)
    return builder.freeze()


def quasi_equivalence_check(model: KripkeModel, worlds, scope) -> str:
    """Classify a world set as "full" (equivalence clique), "quasi"
    (clique sharing successors, loops not required) or "neither"; the empty
    set counts as full."""
    ws = frozenset(worlds)
    if not ws:
        return "full"
    if isinstance(scope, int):
        grp = frozenset((scope,))
    else:
        grp = frozenset(scope)
    pairs = model.group_relation(grp)
    adj = {}
    for a, b in pairs:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    start = next(iter(ws))
    seen = {start}
    frontier = [start]
    while frontier:
        w = frontier.pop()
        for x in adj.get(w, ()):
            if x not in seen:
                seen.add(x)
                frontier.append(x)
    # undirected components partition the worlds, so one closure decides all
    if frozenset(seen) != ws:
        return "neither"
    images = {model.group_successors(grp, t) for t in ws}
    if len(images) > 1:
        return "neither"
    if all((t, t) in pairs for t in ws):
        return "full"
    return "quasi"


def merge_equivalent(model: KripkeModel, sets, agent: int) -> KripkeModel:
    """Merging along one agent relation: everyone in the union gains an edge
    to every member that carries a self loop."""
    for s in sets:
        if quasi_equivalence_check(model, s, agent) == "neither":
            raise ValueError(f"set {sorted(s)} is not quasi-equivalent for agent {agent}")
    builder = ModelBuilder.from_model(model)
    builder.merge_with([frozenset(s) for s in sets], agent)
    return builder.freeze()


class _TEBuilder:
    """Shared state for one run of the multi-pointed construction."""

    def __init__(self, atoms, n, p, system, mp, world_guard):
        self.builder = ModelBuilder(atoms, n)
        self.n = n
        self.p = p
        self.system = system
        self.mp = mp
        self.ev = Evaluator(mp.model) if mp is not None else None
        self.rho = set()
        self.trace = []
        self.counter = itertools.count()
        self.world_guard = world_guard
        self.full = frozenset(range(1, n + 1))
        self.promises = []
        self.leaf_worlds = []

    def new_world(self, prefix, minterm):
        if len(self.builder.valuation) > self.world_guard:
            raise ConstructionFailure("world guard exceeded")
        return self.builder.add_world(f"{prefix}t{next(self.counter)}", minterm)

    def holds_p(self, world, node):
        return self.ev.holds(world, _remainder(node, self.p))


def _elim_prune(node, l, p):
    return eliminate(prune_up(node, l), p)


@dataclass
class _Entry:
    tid: str
    eta: CanonicalFormula
    zeta: Optional[CanonicalFormula]
    src: Optional[str]
    from_step1: bool


def _te_family(st: _TEBuilder, gamma, xi, k, d, sprime, scope, prefix, dpc: bool):
    """Steps 1 to 6 for one level of the reference-model-driven
    construction; returns the family of group sets."""
    b_ = st.builder
    m = st.mp.model
    gs_scope = subgroups(scope)
    gs_all = groups(st.n)
    star = {b: [] for b in gs_scope}

    # Step 1: one world per qualifying (group, source, formula) combination.
    for b in gs_scope:
        etas = ordered(gamma.children[b])
        zetas = ordered(xi.children[b])
        for tprime in sorted(m.group_successors(b, sprime)):
            for eta in etas:
                for zeta in zetas:
                    if _elim_prune(eta, k + d, st.p) is _elim_prune(zeta, k + d, st.p) \
                            and st.holds_p(tprime, zeta):
                        tid = st.new_world(prefix, eta.root)
                        st.rho.add((tid, tprime))
                        star[b].append(_Entry(tid, eta, zeta, tprime, True))
                        if dpc:
                            st.promises.append((tid, eta))

    if k == 0:
        # Step 2: copy sibling edges of the sources, outside both groups.
        for b1 in gs_scope:
            for e1 in star[b1]:
                for b2 in gs_scope:
                    for e2 in star[b2]:
                        for i in (st.full - b1) & (st.full - b2):
                            if (e1.src, e2.src) in m.rel[i]:
                                b_.add_edge(i, e1.tid, e2.tid)
    else:
        # Step 2-1: straddling groups reach sibling-level worlds; the shared
        # successor and sibling conditions pick the formula to realize.
        for b in gs_scope:
            for ent in [e for e in star[b] if e.from_step1]:
                if ent.eta.is_leaf:
                    continue
                comp = st.full - b
                for cgrp in gs_all:
                    c1 = cgrp & b
                    c2 = cgrp & comp
                    if not c1 or not c2:
                        continue
                    level = ent.eta.dep
                    for target in sorted(m.group_successors(cgrp, ent.src)):
                        picked = None
                        for eta0 in ordered(gamma.children[c1]):
                            if not all(eta0.children[dsub] == ent.eta.children[dsub]
                                       for dsub in gs_all if dsub <= c2):
                                continue
                            if prune_up(eta0, level - 1) not in ent.eta.children[cgrp]:
                                continue
                            for zeta0 in ordered(xi.children[c1]):
                                if _elim_prune(eta0, k + d - 1, st.p) is \
                                        _elim_prune(zeta0, k + d - 1, st.p) \
                                        and st.holds_p(target, zeta0):
                                    picked = (eta0, zeta0)
                                    break
                            if picked:
                                break
                        if picked is None:
                            raise ConstructionFailure(
                                "no sibling successor formula matches "
                                f"{target} for group {sorted(cgrp)}; the inputs "
                                "violate the construction preconditions")
                        eta0, zeta0 = picked
                        uid = st.new_world(prefix, eta0.root)
                        star[c1].append(_Entry(uid, eta0, zeta0, target, False))
                        st.rho.add((uid, target))
                        if dpc:
                            st.promises.append((uid, eta0))
                        for i in c2:
                            b_.add_edge(i, ent.tid, uid)
                            b_.add_edge(i, uid, uid)
        # Step 2-2: Euclidean completion below each world; the reflexive
        # systems first give every world its loops.
        if st.system.reflexive:
            for b in gs_scope:
                for ent in star[b]:
                    for j in st.full:
                        b_.add_edge(j, ent.tid, ent.tid)
        for b in gs_scope:
            for ent in star[b]:
                for i in st.full - b:
                    succ = sorted(b_.successors(i, ent.tid))
                    for u1 in succ:
                        for u2 in succ:
                            b_.add_edge(i, u1, u2)

    # Step 3: clique edges for shared group agents, self loops included.
    for b1 in gs_scope:
        for e1 in star[b1]:
            for b2 in gs_scope:
                for e2 in star[b2]:
                    for i in b1 & b2:
                        b_.add_edge(i, e1.tid, e2.tid)

    # Step 4: the family unions exact sets upward.
    family = {
        b: frozenset(e.tid for c in gs_scope if b <= c for e in star[c])
        for b in gs_scope
    }
    level_ids = frozenset(e.tid for b in gs_scope for e in star[b])

    # Step 5: a submodel below every world that has outside successors.
    subfam = {}
    for b in gs_scope:
        comp = st.full - b
        for ent in star[b]:
            if not comp:
                continue
            if not any(m.successors(i, ent.src) for i in comp):
                continue
            if k == 0:
                if dpc:
                    subfam[ent.tid] = _dpc_cloud(st, ent, comp, prefix)
                else:
                    subfam[ent.tid] = _copy_fragment(st, ent, comp, prefix)
            else:
                d2 = d if ent.from_step1 else d - 1
                subfam[ent.tid] = _te_family(
                    st, ent.eta, ent.zeta, k - 1, d2, ent.src, comp,
                    f"{ent.tid}/", dpc)

    # Step 6: merge the level cliques with the sub-family cliques, using a
    # snapshot of the relations as they stood after step 4.
    merge_jobs = []
    for b in gs_scope:
        comp = st.full - b
        for ent in star[b]:
            for i in sorted(comp):
                if k == 0:
                    region = _undirected_within(b_, ent.tid, i, level_ids)
                else:
                    region = frozenset(
                        t for t in b_.successors(i, ent.tid) if t in level_ids
                    ) | {ent.tid}
                merge_jobs.append((ent.tid, i, region))
    for tid, i, region in merge_jobs:
        sets = [region]
        for u in sorted(region):
            fam_u = subfam.get(u)
            if fam_u and frozenset((i,)) in fam_u:
                cluster = fam_u[frozenset((i,))]
                if cluster:
                    sets.append(cluster)
        b_.merge_with(sets, i)
    return family


class _Club:
    """One clique-in-the-making for a single agent: a founder plus partner
    worlds that must share the founder's relation for that agent."""

    __slots__ = ("agent", "founder", "members")

    def __init__(self, agent, founder_tid, founder_eta):
        self.agent = agent
        self.founder = founder_tid
        self.members = {}  # eta -> tid (partners only)

    def world_ids(self):
        return frozenset(self.members.values()) | {self.founder}


def _witness_family(st: _TEBuilder, phi, scope, prefix, dpc: bool):
    """Formula-driven analogue of the level construction, used when no
    reference model is available.

    Worlds realize their formulas at full depth, so straddle partners are
    closed transitively: each world keeps one club per outside agent, a
    partner joins the spawner's clubs, and lookups reuse a club member that
    already realizes the wanted formula.
    """
    b_ = st.builder
    gs_scope = subgroups(scope)
    gs_all = groups(st.n)
    star = {b: [] for b in gs_scope}
    clubs = {}  # (tid, agent) -> _Club
    eta_of = {}
    group_of = {}
    queue = []

    def club(tid, agent):
        key = (tid, agent)
        c = clubs.get(key)
        if c is None:
            c = _Club(agent, tid, eta_of[tid])
            clubs[key] = c
        return c

    def new_level_world(grp, eta):
        tid = st.new_world(prefix, eta.root)
        star[grp].append(_Entry(tid, eta, None, None, False))
        eta_of[tid] = eta
        group_of[tid] = grp
        if eta.is_leaf:
            st.leaf_worlds.append(tid)
        queue.append(tid)
        return tid

    for b in gs_scope:
        for eta in ordered(phi.children[b]):
            new_level_world(b, eta)

    # straddle closure with partner reuse inside clubs
    while queue:
        tid = queue.pop(0)
        eta = eta_of[tid]
        b = group_of[tid]
        if eta.is_leaf:
            continue
        comp = st.full - b
        for cgrp in gs_all:
            c1 = cgrp & b
            c2 = cgrp & comp
            if not c1 or not c2:
                continue
            level = eta.dep
            for chi in ordered(eta.children[cgrp]):
                eta0 = None
                for cand in ordered(phi.children[c1]):
                    if prune_up(cand, level - 1) is not chi:
                        continue
                    if all(cand.children[dsub] == eta.children[dsub]
                           for dsub in gs_all if dsub <= c2):
                        eta0 = cand
                        break
                if eta0 is None:
                    raise ConstructionFailure(
                        "sibling closure fails at "
                        f"{chi.root.render()} for group {sorted(cgrp)}")
                my_clubs = [club(tid, j) for j in sorted(c2)]
                shared = None
                pool = my_clubs[0].world_ids()
                for c in my_clubs[1:]:
                    pool &= c.world_ids()
                for cand_tid in sorted(pool):
                    if eta_of[cand_tid] is eta0:
                        shared = cand_tid
                        break
                if shared is None:
                    shared = new_level_world(c1, eta0)
                    for c in my_clubs:
                        c.members[eta0] = shared
                        clubs[(shared, c.agent)] = c

    # clique edges inside every club
    for (tid, agent), c in list(clubs.items()):
        if tid != c.founder:
            continue
        partners = sorted(set(c.members.values()))
        for u in partners:
            b_.add_edge(agent, c.founder, u)
            b_.add_edge(agent, u, u)
            for v in partners:
                b_.add_edge(agent, u, v)
            if st.system.reflexive:
                b_.add_edge(agent, u, c.founder)
    if st.system.reflexive:
        for b in gs_scope:
            for ent in star[b]:
                for j in st.full:
                    b_.add_edge(j, ent.tid, ent.tid)

    # level cliques for shared group agents
    for b1 in gs_scope:
        for e1 in star[b1]:
            for b2 in gs_scope:
                for e2 in star[b2]:
                    for i in b1 & b2:
                        b_.add_edge(i, e1.tid, e2.tid)

    family = {
        b: frozenset(e.tid for c in gs_scope if b <= c for e in star[c])
        for b in gs_scope
    }

    # submodels below every level world
    subfam = {}
    for b in gs_scope:
        comp = st.full - b
        for ent in star[b]:
            eta = eta_of[ent.tid]
            if not comp or eta.is_leaf:
                continue
            if not any(eta.children[g] for g in subgroups(comp)):
                continue
            subfam[ent.tid] = _witness_family(st, eta, comp, f"{ent.tid}/", dpc)

    # merge each world's outside cliques with the sub-family cliques
    for b in gs_scope:
        comp = st.full - b
        for ent in star[b]:
            for i in sorted(comp):
                c = clubs.get((ent.tid, i))
                region = (c.world_ids() if c is not None else frozenset()) | {ent.tid}
                sets = [region]
                for u in sorted(region):
                    fam_u = subfam.get(u)
                    if fam_u and frozenset((i,)) in fam_u:
                        cluster = fam_u[frozenset((i,))]
                        if cluster:
                            sets.append(cluster)
                b_.merge_with(sets, i)
    return family


def _undirected_within(builder: ModelBuilder, start: str, agent: int, allowed) -> frozenset:
    seen = {start}
    frontier = [start]
    while frontier:
        w = frontier.pop()
        for b in builder._succ[agent].get(w, ()):
            if b in allowed and b not in seen:
                seen.add(b)
                frontier.append(b)
        for a in builder._pred[agent].get(w, ()):
            if a in allowed and a not in seen:
                seen.add(a)
                frontier.append(a)
    return frozenset(seen)


def _copy_fragment(st: _TEBuilder, ent: _Entry, comp, prefix):
    """Base-case step 5: copy the part of the reference model closed under
    all relations from the source's outside successor sets."""
    m = st.mp.model
    seeds = set()
    for i in comp:
        seeds |= m.successors(i, ent.src)
    worlds = set(seeds)
    frontier = list(seeds)
    while frontier:
        w = frontier.pop()
        for i in m.agents():
            for t in m.successors(i, w):
                if t not in worlds:
                    worlds.add(t)
                    frontier.append(t)
    copies = {}
    for w in sorted(worlds):
        copies[w] = st.builder.add_world(f"{ent.tid}/c:{w}", m.val[w])
        st.rho.add((copies[w], w))
    for i in m.agents():
        for a, b in m.rel[i]:
            if a in worlds and b in worlds:
                st.builder.add_edge(i, copies[a], copies[b])
    fam = {}
    for dgrp in subgroups(comp):
        members = m.group_successors(dgrp, ent.src)
        fam[dgrp] = frozenset(copies[w] for w in members)
    # the merge step wants the whole quasi-equivalent class around each
    # outside successor set, which the closed copy preserves
    for i in comp:
        direct = m.successors(i, ent.src)
        if direct:
            seed = copies[sorted(direct)[0]]
            fam[frozenset((i,))] = _undirected_within(
                st.builder, seed, i, frozenset(copies.values()))
    return fam


def _dpc_cloud(st: _TEBuilder, ent: _Entry, comp, prefix):
    """Base-case step 5 for the common-knowledge construction: realize the
    reachable minterms of the successor formula from the reachable worlds of
    the source, then copy the source-unreachable part verbatim."""
    m = st.mp.model
    members = {}
    cloud = []
    for uprime in sorted(m.reachable(ent.src)):
        for chi in sorted(ent.eta.reach, key=lambda mt: mt.values):
            if st.ev.holds(uprime, chi.drop(st.p).to_formula() if st.p in chi.atoms
                           else chi.to_formula()):
                uid = st.builder.add_world(
                    f"{ent.tid}/r{len(cloud)}", chi)
                st.rho.add((uid, uprime))
                cloud.append((uid, uprime))
                members.setdefault(uprime, []).append(uid)
    for (u1, s1) in cloud:
        for (u2, s2) in cloud:
            for i in m.agents():
                if (s1, s2) in m.rel[i]:
                    st.builder.add_edge(i, u1, u2)
    reach_set = m.reachable(ent.src) | {ent.src}
    outside = [w for w in m.worlds if w not in reach_set]
    copies = {}
    for w in outside:
        copies[w] = st.builder.add_world(f"{ent.tid}/o:{w}", m.val[w])
        st.rho.add((copies[w], w))
    for i in m.agents():
        for a, b in m.rel[i]:
            if a in copies and b in copies:
                st.builder.add_edge(i, copies[a], copies[b])
    fam = {}
    star = {}
    for dgrp in subgroups(comp):
        star[dgrp] = frozenset(
            uid for uprime in m.group_successors(dgrp, ent.src)
            for uid in members.get(uprime, ()))
    for dgrp in subgroups(comp):
        fam[dgrp] = frozenset(
            uid for d0 in subgroups(comp) if dgrp <= d0 for uid in star[d0])
    return fam


def construct_transitive_euclidean(gamma, xi, k: int, d: int, h: int, scope,
                                   mp: PointedModel, system: System, p: str,
                                   world_guard: int = DEFAULT_WORLD_GUARD
                                   ) -> ConstructionResult:
    """Multi-pointed construction for the transitive Euclidean systems: the
    output family is group-equivalent, collectively p-bisimilar to the
    reference model's successor family, and realizes the pruned successor
    formulas of gamma."""
    if system.base not in ("K45", "KD45", "S5"):
        raise ValueError("the multi-pointed construction covers K45, KD45 and S5")
    if not 0 <= k <= d <= h:
        raise ValueError("parameters must satisfy 0 <= k <= d <= h")
    scope = frozenset(scope)
    m = mp.model
    if gamma.is_leaf or xi.is_leaf:
        raise ValueError("construction needs successor structure, not minterms")
    if _elim_prune(gamma, k + d + 1, p) is not _elim_prune(xi, k + d + 1, p):
        raise ConstructionFailure(
            "the two formulas disagree after pruning and elimination")
    if not evaluate(mp, _remainder(xi, p)):
        raise ConstructionFailure("reference model fails the eliminated formula")
    st = _TEBuilder(_combined_atoms(gamma, m), max(m.n, gamma.n), p, system,
                    mp, world_guard)
    fam = _te_family(st, gamma, xi, k, d, mp.actual, scope, "", gamma.is_dpc)
    model = st.builder.freeze()
    if gamma.is_dpc:
        _validate_reach(st, model)
    result = MultiPointedModel(model, scope, fam)
    return ConstructionResult(result, BisimRelation(frozenset(st.rho), p),
                              tuple(st.trace))


def attach_root(delta: CanonicalFormula, cr: ConstructionResult,
                mp: PointedModel, system: System, p: str) -> ConstructionResult:
    """Add the actual world on top of a multi-pointed construction: edges to
    every family world for the group's agents, plus loops and symmetric
    edges for the reflexive system."""
    mpm = cr.model
    builder = ModelBuilder.from_model(mpm.model)
    sid = "s*"
    builder.add_world(sid, delta.root)
    for b, members in mpm.family.items():
        for t in sorted(members):
            for i in b:
                builder.add_edge(i, sid, t)
                if system.reflexive:
                    builder.add_edge(i, t, sid)
    if system.reflexive:
        for i in range(1, mpm.model.n + 1):
            builder.add_edge(i, sid, sid)
    rho = set(cr.rho.pairs)
    rho.add((sid, mp.actual))
    return ConstructionResult(PointedModel(builder.freeze(), sid),
                              BisimRelation(frozenset(rho), p),
                              cr.trace + (f"attached root {sid}",))


def _validate_reach(st: _TEBuilder, model: KripkeModel):
    """Every constructed family world must reach exactly the minterms its
    formula promises; this is the condition that breaks down without
    seriality of the outside groups."""
    for tid, eta in st.promises:
        reached = model.reachable(tid)
        realized = {model.val[w].restrict(eta.root.atoms) for w in reached}
        missing = set(eta.reach) - realized
        if missing:
            mt = sorted(missing, key=lambda m_: m_.values)[0]
            raise ConstructionFailure(
                f"model construction fails: no world realizes {mt.render()}")
        stray = realized - set(eta.reach)
        if stray:
            mt = sorted(stray, key=lambda m_: m_.values)[0]
            raise ConstructionFailure(
                f"model construction fails: stray reachable minterm {mt.render()}")


def construct_s5_dpc(gamma, xi, k: int, d: int, h: int, scope,
                     mp: PointedModel, system: System, p: str,
                     world_guard: int = DEFAULT_WORLD_GUARD) -> ConstructionResult:
    """Common-knowledge variant of the multi-pointed construction: the base
    case realizes reachable-minterm clouds instead of verbatim copies.

    Intended for the reflexive Euclidean system; running it with a
    non-serial base is an attempt that fails fast with a diagnostic when a
    promised reachable minterm ends up realized by no world.
    """
    if not gamma.is_dpc or not xi.is_dpc:
        raise ValueError("the dpc construction needs reach-carrying formulas")
    return construct_transitive_euclidean(gamma, xi, k, d, h, scope, mp,
                                          system, p, world_guard)


def build_model_basic_dpc(delta: CanonicalFormula, p: str, mp: PointedModel,
                          system: System,
                          world_guard: int = DEFAULT_WORLD_GUARD) -> ConstructionResult:
    """Tree concatenation with common knowledge: the base case realizes the
    reachable-minterm set from the reference model's reachable worlds."""
    if system.base not in ("K", "D"):
        raise ValueError("basic construction covers the K and D systems")
    if not delta.is_dpc:
        raise ValueError("plain formulas go through the non-dpc builder")
    ev = _check_remainder(delta, p, mp)
    m = mp.model
    builder = ModelBuilder(_combined_atoms(delta, m), max(m.n, delta.n, 1))
    rho = set()
    trace = []
    counter = itertools.count()

    def build(node, src, prefix):
        if len(builder.valuation) > world_guard:
            raise ConstructionFailure("world guard exceeded")
        sid = builder.add_world(f"{prefix}s", node.root)
        rho.add((sid, src))
        trace.append(f"{sid} realizes {node.root.render()} against {src}")
        if node.is_leaf:
            made = [(sid, src)]
            idx = 0
            for tprime in sorted(m.reachable(src)):
                for chi in sorted(node.reach, key=lambda mt: mt.values):
                    rem = chi.drop(p) if p in chi.atoms else chi
                    if ev.holds(tprime, rem.to_formula()):
                        uid = builder.add_world(f"{prefix}r{idx}", chi)
                        idx += 1
                        rho.add((uid, tprime))
                        made.append((uid, tprime))
            for (u1, s1) in made:
                for (u2, s2) in made:
                    for i in m.agents():
                        if (s1, s2) in m.rel[i]:
                            builder.add_edge(i, u1, u2)
            return sid
        for b in groups(node.n):
            for tprime in sorted(m.group_successors(b, src)):
                for eta in ordered(node.children[b]):
                    if ev.holds(tprime, _remainder(eta, p)):
                        tid = build(eta, tprime, f"{prefix}{next(counter)}.")
                        for j in b:
                            builder.add_edge(j, sid, tid)
        return sid

    root = build(delta, mp.actual, "")
    model = builder.freeze()
    return ConstructionResult(PointedModel(model, root),
                              BisimRelation(frozenset(rho), p), tuple(trace))


def build_model_reflexive_dpc(delta: CanonicalFormula, p: str, mp: PointedModel,
                              system: Optional[System] = None,
                              world_guard: int = DEFAULT_WORLD_GUARD) -> ConstructionResult:
    base = build_model_basic_dpc(delta, p, mp, System("K", "dpc"), world_guard)
    closed = _reflexive_closure(base.model.model)
    return ConstructionResult(PointedModel(closed, base.model.actual),
                              base.rho, base.trace + ("reflexive closure",))


def clique_witness(delta: CanonicalFormula, system: System,
                   world_guard: int = DEFAULT_WORLD_GUARD) -> Optional[PointedModel]:
    """Formula-only witness attempt for the transitive Euclidean systems:
    run the clique construction without a reference model, attach the actual
    world, and patch up seriality and unrealized reachable minterms.

    Returns None when a step cannot proceed; callers treat that as
    inconclusive and fall back to bounded search.
    """
    if delta.is_dpc and system.base != "S5":
        return None
    n = max(delta.n, 1)
    st = _TEBuilder(delta.atoms, n, None, system, None, world_guard)
    b_ = st.builder
    try:
        sid = b_.add_world("s", delta.root)
        fam = {}
        if not delta.is_leaf:
            fam = _witness_family(st, delta, st.full, "", delta.is_dpc)
        for grp, members in fam.items():
            for t in sorted(members):
                for i in grp:
                    b_.add_edge(i, sid, t)
                    if system.reflexive:
                        b_.add_edge(i, t, sid)
        if system.reflexive:
            for i in range(1, n + 1):
                b_.add_edge(i, sid, sid)
        if delta.is_dpc:
            hosts = list(st.leaf_worlds)
            if delta.is_leaf:
                hosts.append(sid)
            _attach_missing_reach(st, delta, hosts)
        if system.serial and not system.reflexive:
            for w in sorted(b_.valuation):
                for i in range(1, n + 1):
                    if not b_.successors(i, w):
                        b_.add_edge(i, w, w)
        return PointedModel(b_.freeze(), sid)
    except ConstructionFailure:
        return None


def _attach_missing_reach(st: _TEBuilder, delta: CanonicalFormula, hosts):
    """Reachable minterms no constructed world realizes are added as a
    clique hanging off a world that realizes a depth-0 formula, via an agent
    whose clique there is still trivial."""
    b_ = st.builder
    realized = {mt.restrict(delta.atoms) for mt in
                (b_.valuation[w] for w in b_.valuation)}
    missing = sorted(set(delta.reach) - realized, key=lambda mt: mt.values)
    if not missing:
        return
    for host in hosts:
        for j in range(1, st.n + 1):
            if b_.undirected_component(host, j) == {host}:
                cloud = []
                for idx, chi in enumerate(missing):
                    cid = b_.add_world(f"{host}/x{idx}", chi)
                    cloud.append(cid)
                    for i in range(1, st.n + 1):
                        b_.add_edge(i, cid, cid)
                ring = cloud + ([host] if st.system.reflexive else [])
                for u in ring:
                    for v in ring:
                        b_.add_edge(j, u, v)
                for c in cloud:
                    b_.add_edge(j, host, c)
                return
    raise ConstructionFailure(
        f"model construction fails: no world realizes {missing[0].render()}")
