"""Built-in worked examples: the seven-world counterexample pair, its
depth-2 canonical formula, and the two-world common-knowledge failure case.
"""

from __future__ import annotations

from . import canonical
from .kripke import KripkeModel, PointedModel, parse_model
from .syntax import Minterm, all_minterms, render_formula

_FIVE = ("s2", "t1", "t2", "t3", "t4")
_ALL = ("s2", "t1", "t2", "t3", "t4", "v", "w")

_VALUES = {
    "s2": (False, False),
    "t1": (False, False),
    "t2": (True, False),
    "t3": (False, True),
    "t4": (True, True),
    "v": (False, False),
    "w": (False, True),
}


def _pairs(*couples):
    out = set()
    for a, b in couples:
        out.add((a, b))
        out.add((b, a))
    return out


def fig3_left() -> PointedModel:
    """Three-agent equivalence model on seven worlds: agent 1 links the five
    core worlds, agent 2 pairs t1/t3 and t2/t4, agent 3 hangs w off t1 and v
    off t4; every relation is reflexive."""
    atoms = ("p", "q")
    valuation = {w: Minterm(atoms, _VALUES[w]) for w in _ALL}
    r1 = {(a, b) for a in _FIVE for b in _FIVE} | {(w, w) for w in _ALL}
    r2 = _pairs(("t1", "t3"), ("t2", "t4")) | {(w, w) for w in _ALL}
    r3 = _pairs(("t1", "w"), ("t4", "v")) | {(w, w) for w in _ALL}
    model = KripkeModel(atoms, 3, valuation, {1: r1, 2: r2, 3: r3})
    return PointedModel(model, "s2")


def fig3_right() -> PointedModel:
    """The same frame with agent 2's pairs swapped to t1/t4 and t2/t3, and
    the first atom's values dropped."""
    atoms = ("q",)
    valuation = {w: Minterm(atoms, (_VALUES[w][1],)) for w in _ALL}
    r1 = {(a, b) for a in _FIVE for b in _FIVE} | {(w, w) for w in _ALL}
    r2 = _pairs(("t1", "t4"), ("t2", "t3")) | {(w, w) for w in _ALL}
    r3 = _pairs(("t1", "w"), ("t4", "v")) | {(w, w) for w in _ALL}
    model = KripkeModel(atoms, 3, valuation, {1: r1, 2: r2, 3: r3})
    return PointedModel(model, "s2")


def delta2cou() -> canonical.CanonicalFormula:
    """The unique depth-2 canonical formula of the left model over p, q."""
    return canonical.of_model(fig3_left(), ("p", "q"), 2)


def k45dpc_gamma() -> canonical.CanonicalFormula:
    """Depth-1 common-knowledge canonical formula whose model construction
    fails under the non-serial transitive Euclidean frames."""
    atoms = ("p", "q")
    pq = Minterm(atoms, (True, True))
    npq = Minterm(atoms, (False, True))
    pnq = Minterm(atoms, (True, False))
    reach = frozenset((pq, npq))
    eta = canonical.leaf(pq, reach)
    children = {frozenset((1,)): frozenset((eta,))}
    return canonical.interior(pnq, 2, children, reach)


def k45dpc_model() -> PointedModel:
    """Two worlds: the actual one refutes q, its agent-1 successor loops and
    satisfies q; every other relation is empty."""
    text = """\
agents 2
atoms q
world sx q=0
world tx q=1
edge 1 sx tx
edge 1 tx tx
actual sx
"""
    return parse_model(text)


FIXTURES = ("fig3-left", "fig3-right", "delta2cou", "k45dpc-fail")


def fixture_files(name: str) -> dict:
    """File name to content for one fixture."""
    if name == "fig3-left":
        pm = fig3_left()
        return {"fig3_left.km": pm.model.serialize(actual=pm.actual)}
    if name == "fig3-right":
        pm = fig3_right()
        return {"fig3_right.km": pm.model.serialize(actual=pm.actual)}
    if name == "delta2cou":
        text = render_formula(canonical.to_formula(delta2cou()))
        return {"delta2cou.fml": text + "\n"}
    if name == "k45dpc-fail":
        pm = k45dpc_model()
        text = render_formula(canonical.to_formula(k45dpc_gamma()))
        return {
            "k45dpc_fail.fml": text + "\n",
            "k45dpc_fail.km": pm.model.serialize(actual=pm.actual),
        }
    raise ValueError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
