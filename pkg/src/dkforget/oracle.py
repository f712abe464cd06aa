"""Brute-force bounded-model semantics used as independent ground truth.

The evaluator here is deliberately naive (direct recursion over raw relation
sets, no sharing, no memoization) so it can serve as a second opinion
against the optimized evaluator.  Enumeration is deterministic; searches
report Unknown when the bound or the model cap is exhausted, never a
refutation they did not find.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .kripke import KripkeModel, PointedModel, System
from .syntax import And, Atom, Bot, C, D, Formula, K, Minterm, Not, Or, Top, all_minterms

DEFAULT_MAX_MODELS = 200_000


@dataclass(frozen=True)
class OracleVerdict:
    kind: str  # "true" | "false" | "unknown"
    witness: Optional[PointedModel] = None
    counter: Optional[PointedModel] = None
    detail: str = ""


def naive_eval(model: KripkeModel, world: str, f: Formula) -> bool:
    """Direct recursive satisfaction over raw relation pairs."""
    if isinstance(f, Atom):
        return model.val[world].get(f.name)
    if isinstance(f, Top):
        return True
    if isinstance(f, Bot):
        return False
    if isinstance(f, Not):
        return not naive_eval(model, world, f.body)
    if isinstance(f, And):
        return naive_eval(model, world, f.left) and naive_eval(model, world, f.right)
    if isinstance(f, Or):
        return naive_eval(model, world, f.left) or naive_eval(model, world, f.right)
    if isinstance(f, K):
        return all(naive_eval(model, b, f.body)
                   for a, b in model.rel[f.agent] if a == world)
    if isinstance(f, D):
        succ = None
        for i in sorted(f.agents):
            s = {b for a, b in model.rel[i] if a == world}
            succ = s if succ is None else succ & s
        return all(naive_eval(model, t, f.body) for t in succ)
    if isinstance(f, C):
        seen = set()
        frontier = {b for i in model.agents() for a, b in model.rel[i] if a == world}
        while frontier:
            seen |= frontier
            frontier = {b for i in model.agents() for a, b in model.rel[i]
                        if a in frontier} - seen
        return all(naive_eval(model, t, f.body) for t in seen)
    raise TypeError(f"not a formula: {f!r}")


def _guard(atoms, agents, max_worlds):
    if len(atoms) > 3:
        raise ValueError("oracle guard: at most 3 atoms")
    if agents > 3:
        raise ValueError("oracle guard: at most 3 agents")
    if max_worlds > 5:
        raise ValueError("oracle guard: at most 5 worlds")


def _serial_relations(worlds) -> Iterator[frozenset]:
    options = []
    for w in worlds:
        rows = []
        for bits in range(1, 1 << len(worlds)):
            rows.append(frozenset((w, worlds[j]) for j in range(len(worlds)) if bits >> j & 1))
        options.append(rows)
    for combo in itertools.product(*options):
        yield frozenset().union(*combo)


def _all_relations(worlds) -> Iterator[frozenset]:
    options = []
    for w in worlds:
        rows = []
        for bits in range(1 << len(worlds)):
            rows.append(frozenset((w, worlds[j]) for j in range(len(worlds)) if bits >> j & 1))
        options.append(rows)
    for combo in itertools.product(*options):
        yield frozenset().union(*combo)


def _reflexive_relations(worlds) -> Iterator[frozenset]:
    diag = frozenset((w, w) for w in worlds)
    off = [(a, b) for a in worlds for b in worlds if a != b]
    for bits in range(1 << len(off)):
        yield diag | frozenset(off[j] for j in range(len(off)) if bits >> j & 1)


def _partitions(items: tuple) -> Iterator[tuple]:
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for sub in _partitions(rest):
        for j in range(len(sub)):
            yield sub[:j] + (sub[j] + (first,),) + sub[j + 1:]
        yield sub + ((first,),)


def _equivalence_relations(worlds) -> Iterator[frozenset]:
    for part in sorted(_partitions(tuple(worlds))):
        yield frozenset((a, b) for block in part for a in block for b in block)


def _trans_euclidean_relations(worlds, serial: bool) -> Iterator[frozenset]:
    """Structure: the image is partitioned into cliques and every world
    either points to exactly one whole clique or nowhere."""
    ws = tuple(worlds)
    for core_bits in range(1 << len(ws)):
        core = tuple(ws[j] for j in range(len(ws)) if core_bits >> j & 1)
        if serial and not core:
            continue
        rest = tuple(w for w in ws if w not in core)
        for part in sorted(_partitions(core)):
            blocks = tuple(tuple(sorted(b)) for b in part)
            # every core world sees its own block; the rest pick a block or none
            choices = []
            for w in rest:
                opts = list(range(len(blocks))) if serial else [-1] + list(range(len(blocks)))
                choices.append(opts)
            if core and not blocks:
                continue
            for combo in itertools.product(*choices) if choices else [()]:
                if not core and all(c == -1 for c in combo):
                    pairs = frozenset()
                    if serial:
                        continue
                    yield pairs
                    continue
                block_of = {}
                for b_idx, block in enumerate(blocks):
                    for w in block:
                        block_of[w] = b_idx
                pairs = set()
                ok = True
                for w in core:
                    for u in blocks[block_of[w]]:
                        pairs.add((w, u))
                for w, c in zip(rest, combo):
                    if c == -1:
                        continue
                    for u in blocks[c]:
                        pairs.add((w, u))
                if ok:
                    yield frozenset(pairs)


def _relation_stream(system: System, worlds) -> Iterator[frozenset]:
    base = system.base
    if base == "K":
        return _all_relations(worlds)
    if base == "D":
        return _serial_relations(worlds)
    if base == "T":
        return _reflexive_relations(worlds)
    if base == "S5":
        return _equivalence_relations(worlds)
    if base == "K45":
        return _trans_euclidean_relations(worlds, serial=False)
    if base == "KD45":
        return _trans_euclidean_relations(worlds, serial=True)
    raise ValueError(base)


_MATERIALIZE_CAP = 4096


def _relation_combos(system: System, worlds, agents: int) -> Iterator[tuple]:
    """Tuples of one relation per agent; the single-agent stream is
    materialized when small, otherwise re-iterated lazily."""
    probe = list(itertools.islice(_relation_stream(system, worlds), _MATERIALIZE_CAP + 1))
    if len(probe) <= _MATERIALIZE_CAP:
        yield from itertools.product(probe, repeat=agents)
        return

    def rec(i):
        if i == agents:
            yield ()
            return
        for r in _relation_stream(system, worlds):
            for rest in rec(i + 1):
                yield (r,) + rest

    yield from rec(0)


def enumerate_models(atoms: Iterable[str], agents: int, system: System,
                     max_worlds: int) -> Iterator[PointedModel]:
    """Every frame-conformant pointed model up to the world bound, in a
    deterministic order; valuations are emitted in sorted multisets as a
    cheap cut on isomorphic duplicates."""
    ats = tuple(atoms)
    _guard(ats, agents, max_worlds)
    minterms = all_minterms(ats)
    for w in range(1, max_worlds + 1):
        worlds = tuple(f"w{j}" for j in range(w))
        for val_idx in itertools.combinations_with_replacement(range(len(minterms)), w):
            valuation = {worlds[j]: minterms[val_idx[j]] for j in range(w)}
            for combo in _relation_combos(system, worlds, agents):
                relations = {i + 1: combo[i] for i in range(agents)}
                model = KripkeModel(ats, agents, valuation, relations)
                for root in worlds:
                    yield PointedModel(model, root)


def brute_sat(phi: Formula, system: System, max_worlds: int,
              agents: Optional[int] = None, atoms: Optional[tuple] = None,
              max_models: int = DEFAULT_MAX_MODELS) -> OracleVerdict:
    """Search for a model of the formula; True with a witness on success,
    Unknown when the bounded stream is exhausted or capped."""
    from .syntax import agents_of, atoms_of
    ats = tuple(sorted(atoms_of(phi))) if atoms is None else tuple(atoms)
    if agents is None:
        found = agents_of(phi)
        agents = max(found) if found else 1
    seen = 0
    for pm in enumerate_models(ats, agents, system, max_worlds):
        seen += 1
        if seen > max_models:
            return OracleVerdict("unknown", detail=f"model cap {max_models} reached")
        if naive_eval(pm.model, pm.actual, phi):
            return OracleVerdict("true", witness=pm)
    return OracleVerdict("unknown", detail=f"no model up to {max_worlds} worlds")


def brute_entails(phi: Formula, psi: Formula, system: System, max_worlds: int,
                  agents: Optional[int] = None, atoms: Optional[tuple] = None,
                  max_models: int = DEFAULT_MAX_MODELS) -> OracleVerdict:
    """Search for a counter-model satisfying the antecedent but not the
    consequent; False with the counter-model, else Unknown ("no
    counter-model up to the bound")."""
    from .syntax import agents_of, atoms_of
    ats = tuple(sorted(atoms_of(phi) | atoms_of(psi))) if atoms is None else tuple(atoms)
    if agents is None:
        found = agents_of(phi) | agents_of(psi)
        agents = max(found) if found else 1
    seen = 0
    capped = False
    for pm in enumerate_models(ats, agents, system, max_worlds):
        seen += 1
        if seen > max_models:
            capped = True
            break
        if naive_eval(pm.model, pm.actual, phi) and not naive_eval(pm.model, pm.actual, psi):
            return OracleVerdict("false", counter=pm)
    detail = (f"model cap {max_models} reached" if capped
              else f"no counter-model up to {max_worlds} worlds")
    return OracleVerdict("unknown", detail=detail)
