"""Uniform interpolants computed as results of forgetting one atom.

For the non-transitive systems the interpolant of a canonical formula is its
literal-eliminated remainder; for the transitive Euclidean systems at depth
two or more it is the disjunction of the remainders of the deeper canonical
formulas that prune back to it.  Arbitrary formulas decompose into canonical
disjuncts first.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from . import canonical, construct, oracle
from .bisim import are_p_bisimilar, verify_bisimulation
from .canonical import Budget, decompose, eliminate, entails, extensions, to_formula
from .kripke import Evaluator, PointedModel, System, check_frame, evaluate
from .syntax import Formula, atoms_of, disj, modal_depth, render_formula
from .syntax import agents_of as _agents_of


class UnsupportedForgetting(ValueError):
    """Requested a system/language combination with no known construction."""


@dataclass(frozen=True)
class ForgetResult:
    interpolant: Formula
    path: str
    complete: bool
    disjuncts: tuple  # canonical-shaped remainders, deduplicated

    def __post_init__(self):
        pass


def _guard_supported(system: System):
    if system.dpc and system.base in ("K45", "KD45"):
        raise UnsupportedForgetting(
            f"forgetting in {system} is unsupported: no interpolant "
            "construction is known for common knowledge over transitive "
            "Euclidean non-reflexive frames; the question is open")


def forget_canonical(delta, p: str, system: System, budget: Budget,
                     target_depth: Optional[int] = None,
                     force_extension: bool = False) -> ForgetResult:
    """Interpolant of one canonical formula.

    Dispatch: remainder directly for K/D/T and for the transitive Euclidean
    systems at two agents or depth at most one; otherwise the disjunction of
    remainders of the depth 2k+1 extensions.
    """
    _guard_supported(system)
    if p not in delta.atoms:
        return ForgetResult(to_formula(delta), "no-op", True, (delta,))
    verdict = canonical.satisfiable(delta, system, budget)
    if verdict.is_unsat:
        raise ValueError(f"input formula is unsatisfiable: {verdict.reason}")
    complete = verdict.is_sat
    remainder = eliminate(delta, p)
    depth = delta.dep
    if system.base in ("K", "D", "T"):
        return ForgetResult(to_formula(remainder), "KDT-direct", complete,
                            (remainder,))
    if not force_extension:
        if system.dpc and depth == 0:
            return ForgetResult(to_formula(remainder), "dpc-direct", complete,
                                (remainder,))
        if not system.dpc and delta.n == 2:
            return ForgetResult(to_formula(remainder), "two-agent-direct",
                                complete, (remainder,))
        if not system.dpc and depth <= 1:
            return ForgetResult(to_formula(remainder), "depth1-direct",
                                complete, (remainder,))
    if target_depth is None:
        target_depth = 2 * (depth - 1) + 1 if depth >= 1 else 0
    ext = extensions(delta, target_depth, system, budget)
    shapes = canonical.ordered({eliminate(g, p) for g in ext.formulas})
    interp = disj([to_formula(s) for s in shapes])
    path = "dpc-extension" if system.dpc else "extension-enumeration"
    return ForgetResult(interp, path, complete and ext.complete, tuple(shapes))


def forget(phi: Formula, p: str, system: System, budget: Budget,
           target_depth: Optional[int] = None,
           agents: Optional[int] = None,
           force_extension: bool = False) -> ForgetResult:
    """Forget one atom in an arbitrary formula: decompose into canonical
    disjuncts, forget in each, and disjoin."""
    _guard_supported(system)
    if p not in atoms_of(phi):
        return ForgetResult(phi, "no-op", True, ())
    dec = decompose(phi, system, modal_depth(phi), budget,
                    atoms=tuple(sorted(atoms_of(phi))), agents=agents)
    if not dec.formulas:
        if dec.complete:
            raise ValueError("input formula is unsatisfiable")
        raise ValueError("could not decompose the input within budget")
    shapes = []
    paths = []
    complete = dec.complete
    for delta in dec.formulas:
        res = forget_canonical(delta, p, system, budget,
                               target_depth=target_depth,
                               force_extension=force_extension)
        complete = complete and res.complete
        paths.append(res.path)
        shapes.extend(res.disjuncts)
    shapes = canonical.ordered(set(shapes))
    interp = disj([to_formula(s) for s in shapes])
    path = "+".join(sorted(set(paths)))
    return ForgetResult(interp, path, complete, tuple(shapes))


@dataclass(frozen=True)
class CheckOutcome:
    status: str  # "pass" | "fail" | "unknown"
    detail: str = ""


@dataclass(frozen=True)
class InterpolantReport:
    entailment: CheckOutcome
    consequence_equivalence: CheckOutcome
    back_condition: CheckOutcome

    @property
    def ok(self) -> bool:
        return all(c.status == "pass" for c in
                   (self.entailment, self.consequence_equivalence, self.back_condition))


def _lift(deltas, depth, system, budget):
    """Re-express a canonical set at a greater depth via extensions; returns
    None when some extension enumeration is incomplete."""
    out = set()
    for d in deltas:
        ext = extensions(d, depth, system, budget)
        if not ext.complete:
            return None
        out |= set(ext.formulas)
    return canonical.ordered(out)


def _sample_chi(atoms, agents, system, budget, rng) -> list:
    """A bounded but systematic family of test consequences: every depth-1
    canonical shape over the reduced vocabulary plus random boolean
    combinations."""
    from .syntax import And, Not, Or
    counter = canonical._Counter(min(budget.max_nodes, 50000))
    shapes = []
    try:
        shapes = canonical.enumerate_level(tuple(atoms), agents, 1,
                                           System("K", system.lang), counter)
    except canonical.BudgetExhausted:
        shapes = shapes[:32]
    from .syntax import all_minterms
    pool = [to_formula(s) for s in shapes[:24]]
    pool.extend(mt.to_formula() for mt in all_minterms(tuple(atoms)))
    chis = list(pool)
    for _ in range(12):
        if len(pool) < 2:
            break
        a, b = rng.sample(pool, 2)
        chis.append(rng.choice([And(a, b), Or(a, b), Not(a)]))
    return chis


def verify_uniform_interpolant(phi: Formula, psi: Formula, p: str,
                               system: System, budget: Budget,
                               phi_canonicals=None) -> InterpolantReport:
    """Three bounded checks: the entailment of the candidate, sampled
    consequence equivalence over the reduced vocabulary, and the existence
    of a bisimilar model of the original for every enumerated model of the
    candidate."""
    if p in atoms_of(psi):
        raise ValueError("candidate interpolant still mentions the atom")
    atoms_all = tuple(sorted(atoms_of(phi) | atoms_of(psi) | {p}))
    atoms_red = tuple(a for a in atoms_all if a != p)
    found = _agents_of(phi) | _agents_of(psi)
    agents = max(found) if found else 1
    dep_phi = modal_depth(phi)
    dep_psi = modal_depth(psi)

    if phi_canonicals is None:
        dec = decompose(phi, system, dep_phi, budget, atoms=atoms_all, agents=agents)
        base_set = list(dec.formulas)
        base_complete = dec.complete
    else:
        base_set = list(phi_canonicals)
        base_complete = True

    # (1) entailment of the candidate by the original
    entailment = None
    if dep_psi <= dep_phi and base_complete:
        try:
            okay = all(entails(d, psi) for d in base_set)
            entailment = (CheckOutcome("pass", "decided by dichotomy")
                          if okay else CheckOutcome("fail", "some disjunct refutes the candidate"))
        except ValueError:
            entailment = None
    if entailment is None and base_complete:
        lifted = _lift(base_set, max(dep_phi, dep_psi), system, budget)
        if lifted is not None:
            okay = all(entails(g, psi) for g in lifted)
            entailment = (CheckOutcome("pass", "decided by dichotomy at lifted depth")
                          if okay else CheckOutcome("fail", "some lifted disjunct refutes the candidate"))
    if entailment is None:
        if len(atoms_all) <= 3 and agents <= 3:
            v = oracle.brute_entails(phi, psi, system, min(budget.max_worlds, 5),
                                     agents=agents, atoms=atoms_all,
                                     max_models=budget.max_nodes)
            entailment = (CheckOutcome("fail", "oracle counter-model found")
                          if v.kind == "false" else CheckOutcome("pass", f"bounded: {v.detail}"))
        else:
            entailment = CheckOutcome("unknown", "outside oracle guards")

    # (2) consequence equivalence over sampled reduced-vocabulary formulas
    rng = random.Random(20240)
    conseq = _check_consequences(phi, psi, base_set, base_complete, atoms_red,
                                 atoms_all, agents, system, budget, rng)

    # (3) every bounded model of the candidate has a bisimilar counterpart
    back = _check_back(phi, psi, p, base_set, atoms_red, agents, system, budget)
    return InterpolantReport(entailment, conseq, back)


def _decide_entails_canon(deltas, chi, depth_needed, system, budget):
    """Entailment of chi by the disjunction of the canonical set, decided by
    lifting when necessary; None when lifting is out of budget."""
    try:
        return all(entails(d, chi) for d in deltas)
    except ValueError:
        lifted = _lift(deltas, depth_needed, system, budget)
        if lifted is None:
            return None
        return all(entails(g, chi) for g in lifted)


def _check_consequences(phi, psi, base_set, base_complete, atoms_red,
                        atoms_all, agents, system, budget, rng) -> CheckOutcome:
    if not base_complete:
        return CheckOutcome("unknown", "no complete decomposition of the original")
    chis = _sample_chi(atoms_red, agents, system, budget, rng)
    psi_set = None
    dep_psi = modal_depth(psi)
    sub_budget = Budget(max_nodes=min(budget.max_nodes, 200000),
                        max_worlds=budget.max_worlds)
    if len(atoms_red) <= 1 and dep_psi <= 2:
        dec = decompose(psi, system, dep_psi, sub_budget,
                        atoms=atoms_red, agents=agents)
        if dec.complete:
            psi_set = list(dec.formulas)
    unresolved = 0
    for chi in chis:
        a = _decide_entails_canon(base_set, chi, max(modal_depth(chi), modal_depth(phi)),
                                  system, budget)
        if a is None:
            unresolved += 1
            continue
        if psi_set is not None:
            b = _decide_entails_canon(psi_set, chi,
                                      max(modal_depth(chi), dep_psi), system, budget)
        else:
            b = None
        if b is None:
            if len(atoms_red) <= 3 and agents <= 3:
                v = oracle.brute_entails(psi, chi, system, min(budget.max_worlds, 5),
                                         agents=agents, atoms=atoms_all,
                                         max_models=budget.max_nodes)
                if v.kind == "false":
                    b = False
                elif a:
                    continue  # bounded agreement: no counter-model found
                else:
                    unresolved += 1
                    continue
            else:
                unresolved += 1
                continue
        if a != b:
            return CheckOutcome(
                "fail", f"consequence disagreement at {render_formula(chi)}")
    detail = f"{len(chis)} sampled consequences"
    if unresolved:
        detail += f", {unresolved} unresolved"
    return CheckOutcome("pass", detail)


def _back_witness(delta, p, mprime: PointedModel, system: System,
                  budget: Budget) -> bool:
    """Build (or find) a model of the canonical formula collectively
    p-bisimilar to the given model, and verify everything."""
    target = to_formula(delta)
    if system.base in ("K", "D", "T"):
        if not evaluate(mprime, to_formula(eliminate(delta, p))):
            return False
        if delta.is_dpc:
            builder = (construct.build_model_reflexive_dpc if system.base == "T"
                       else construct.build_model_basic_dpc)
        else:
            builder = (construct.build_model_reflexive if system.base == "T"
                       else construct.build_model_basic)
        try:
            cr = builder(delta, p, mprime, system)
        except construct.ConstructionFailure:
            return False
        return (check_frame(cr.model.model, system).verdict
                and evaluate(cr.model, target)
                and verify_bisimulation(cr.rho, cr.model, mprime))
    # transitive Euclidean systems: go through the pruning extensions
    depth = delta.dep
    k = depth - 1 if depth >= 1 else 0
    target_depth = 2 * k + 1 if depth >= 1 else 0
    ext = extensions(delta, max(target_depth, depth), system, budget)
    scope = frozenset(range(1, max(delta.n, mprime.model.n, 1) + 1))
    for gamma in ext.formulas:
        if not evaluate(mprime, to_formula(eliminate(gamma, p))):
            continue
        try:
            builder_fn = (construct.construct_s5_dpc if gamma.is_dpc
                          else construct.construct_transitive_euclidean)
            cr = builder_fn(gamma, gamma, k, k, k, scope, mprime, system, p)
            rooted = construct.attach_root(delta, cr, mprime, system, p)
        except construct.ConstructionFailure:
            continue
        if (check_frame(rooted.model.model, system).verdict
                and evaluate(rooted.model, target)
                and verify_bisimulation(rooted.rho, rooted.model, mprime)):
            return True
    return False


def _check_back(phi, psi, p, base_set, atoms_red, agents, system,
                budget) -> CheckOutcome:
    if len(atoms_red) > 3 or agents > 3:
        return CheckOutcome("unknown", "outside oracle guards")
    cap = min(budget.max_nodes, 20000)
    checked = 0
    matched = 0
    seen = 0
    exhausted = True
    for pm in oracle.enumerate_models(atoms_red, agents, system,
                                      min(budget.max_worlds, 5)):
        seen += 1
        if seen > cap:
            exhausted = False
            break
        if not evaluate(pm, psi):
            continue
        matched += 1
        ok = any(_back_witness(d, p, pm, system, budget) for d in base_set)
        if not ok and len(atoms_red) <= 2:
            for cand in oracle.enumerate_models(
                    tuple(sorted(set(atoms_red) | {p})), agents, system,
                    min(budget.max_worlds, 4)):
                checked += 1
                if checked > cap:
                    break
                if evaluate(cand, phi) and are_p_bisimilar(cand, pm, p):
                    ok = True
                    break
        if not ok:
            return CheckOutcome(
                "fail",
                "no bisimilar counterpart for the candidate's model:\n"
                + pm.model.serialize(actual=pm.actual))
    detail = f"{matched} candidate models handled"
    if not exhausted:
        detail += f" (enumeration capped at {cap})"
    return CheckOutcome("pass", detail)
