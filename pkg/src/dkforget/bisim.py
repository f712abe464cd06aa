"""Collective p-bisimulation: verification and greatest-fixpoint computation.

The relations compare two models while ignoring the valuation of one
distinguished atom; the Forth and Back conditions are checked for every
nonempty agent group, which is strictly stronger than checking single agents
only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .kripke import KripkeModel, MultiPointedModel, PointedModel, groups


@dataclass(frozen=True)
class BisimRelation:
    """A set of world pairs between two models, with the omitted atom."""

    pairs: frozenset
    omitted_atom: Optional[str] = None

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def left_matches(self, w: str) -> frozenset:
        return frozenset(b for a, b in self.pairs if a == w)

    def right_matches(self, w: str) -> frozenset:
        return frozenset(a for a, b in self.pairs if b == w)


def _shared_atoms(ma: KripkeModel, mb: KripkeModel, p: Optional[str]) -> tuple:
    aa = set(ma.atoms) - {p}
    bb = set(mb.atoms) - {p}
    if aa != bb:
        raise ValueError(
            f"atom vocabularies differ beyond {p!r}: {sorted(aa)} vs {sorted(bb)}")
    return tuple(sorted(aa))


def _atoms_compatible(ma, wa, mb, wb, shared) -> bool:
    va, vb = ma.val[wa], mb.val[wb]
    return all(va.get(q) == vb.get(q) for q in shared)


def _index(pairs):
    left = {}
    right = {}
    for a, b in pairs:
        left.setdefault(a, set()).add(b)
        right.setdefault(b, set()).add(a)
    return left, right


def _pair_ok(ma, mb, wa, wb, left, right, all_groups) -> bool:
    """Forth and Back for one pair against the current pair set."""
    for grp in all_groups:
        succ_a = ma.group_successors(grp, wa)
        succ_b = mb.group_successors(grp, wb)
        for va in succ_a:
            partners = left.get(va)
            if not partners or partners.isdisjoint(succ_b):
                return False
        for vb in succ_b:
            partners = right.get(vb)
            if not partners or partners.isdisjoint(succ_a):
                return False
    return True


def verify_bisimulation(rho: BisimRelation, a: PointedModel, b: PointedModel,
                        require_root: bool = True) -> bool:
    """Check the Atoms, Forth and Back conditions of every pair, for every
    nonempty agent group; with ``require_root`` the actual worlds must be
    paired."""
    ma, mb = a.model, b.model
    if ma.n != mb.n:
        raise ValueError("agent counts differ")
    shared = _shared_atoms(ma, mb, rho.omitted_atom)
    if require_root and (a.actual, b.actual) not in rho.pairs:
        return False
    all_groups = groups(ma.n)
    left, right = _index(rho.pairs)
    for wa, wb in rho.pairs:
        if not _atoms_compatible(ma, wa, mb, wb, shared):
            return False
        if not _pair_ok(ma, mb, wa, wb, left, right, all_groups):
            return False
    return True


def maximal_collective_p_bisim(ma: KripkeModel, mb: KripkeModel,
                               p: Optional[str] = None) -> BisimRelation:
    """Greatest fixpoint: start from all Atoms-compatible pairs and delete
    violating pairs, in lexicographic order, until stable.

    The result is the union of all collective p-bisimulations between the
    two models (ignoring the root-pair requirement).
    """
    if ma.n != mb.n:
        raise ValueError("agent counts differ")
    shared = _shared_atoms(ma, mb, p)
    pairs = {
        (wa, wb)
        for wa in ma.worlds for wb in mb.worlds
        if _atoms_compatible(ma, wa, mb, wb, shared)
    }
    all_groups = groups(ma.n)
    changed = True
    while changed:
        changed = False
        left, right = _index(pairs)
        for pair in sorted(pairs):
            if not _pair_ok(ma, mb, pair[0], pair[1], left, right, all_groups):
                pairs.discard(pair)
                left[pair[0]].discard(pair[1])
                right[pair[1]].discard(pair[0])
                changed = True
    return BisimRelation(frozenset(pairs), p)


def are_p_bisimilar(a: PointedModel, b: PointedModel, p: Optional[str] = None) -> bool:
    rho = maximal_collective_p_bisim(a.model, b.model, p)
    return (a.actual, b.actual) in rho.pairs


def verify_multipointed_bisimulation(rho: BisimRelation, a: MultiPointedModel,
                                     b: MultiPointedModel) -> bool:
    """Family coverage in both directions for every group in the scope, plus
    Atoms/Forth/Back for every pair."""
    if a.scope != b.scope:
        raise ValueError(f"scopes differ: {set(a.scope)} vs {set(b.scope)}")
    ma, mb = a.model, b.model
    if ma.n != mb.n:
        raise ValueError("agent counts differ")
    shared = _shared_atoms(ma, mb, rho.omitted_atom)
    left, right = _index(rho.pairs)
    for grp, ta in a.family.items():
        tb = b.family[grp]
        for w in ta:
            partners = left.get(w)
            if not partners or partners.isdisjoint(tb):
                return False
        for w2 in tb:
            partners = right.get(w2)
            if not partners or partners.isdisjoint(ta):
                return False
    all_groups = groups(ma.n)
    for wa, wb in rho.pairs:
        if not _atoms_compatible(ma, wa, mb, wb, shared):
            return False
        if not _pair_ok(ma, mb, wa, wb, left, right, all_groups):
            return False
    return True
