"""Uniform interpolation for epistemic logics with distributed knowledge.

Library plus the ``dkforget`` command line front end: formulas and finite
Kripke models, collective p-bisimulation, canonical-formula machinery,
bisimulation-based model constructions, forgetting, and a brute-force
bounded oracle for verification.
"""

from .syntax import (
    And, Atom, Bot, C, D, Formula, K, Minterm, Not, Or, ParseError, Top,
    atoms_of, eliminate_literal, modal_depth, parse_formula, render_formula,
)
from .kripke import (
    KripkeModel, MultiPointedModel, PointedModel, System, check_frame,
    evaluate, parse_model,
)
from .bisim import (
    BisimRelation, are_p_bisimilar, maximal_collective_p_bisim,
    verify_bisimulation, verify_multipointed_bisimulation,
)
from .canonical import (
    Budget, CanonicalFormula, SatVerdict, check_structural, decompose,
    eliminate, entails, extensions, of_model, of_model_dpc, prune_down,
    prune_up, satisfiable, to_formula,
)
from .forget import (
    ForgetResult, InterpolantReport, UnsupportedForgetting, forget,
    forget_canonical, verify_uniform_interpolant,
)
from .construct import (
    ConstructionFailure, ConstructionResult, attach_root, build_model_basic,
    build_model_basic_dpc, build_model_reflexive, build_model_reflexive_dpc,
    construct_s5_dpc, construct_transitive_euclidean, merge_equivalent,
    quasi_equivalence_check,
)
from .oracle import OracleVerdict, brute_entails, brute_sat, enumerate_models

__version__ = "0.1.0"
