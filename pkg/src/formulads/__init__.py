"""Dynamic maintenance of matrix formulas through one block-matrix inverse.

A formula built from +, -, *, and inv over matrix inputs compiles into a
single block matrix N with index sets I, J such that the formula's value is
the (I, J) block of N^-1.  Entry updates to the inputs are rank-1 updates to
N, so inverse-maintenance engines keep the value, the determinant, and the
rank of the formula current without re-evaluating anything from scratch.
"""

from .construct import (Construction, HatConstruction, NormBudget, build,
                        build_hat, norm_budget)
from .dyndet import (DetTracker, SignedLogDet, det_tracker_init,
                     det_tracker_revert, det_tracker_update, signed_logdet_qr)
from .dyninv import (LazyState, TwoLevelState, WoodburyState, approx_inverse,
                     certified_bits, default_eps_step)
from .errors import (ConfigError, DimensionMismatch, EmptyUndoLog,
                     FormulaSyntaxError, InvalidVertex, NonSquareInversion,
                     NonSquareOutput, SingularInversion, SingularMatrix,
                     SingularUpdate, TooLarge, UndeclaredInput, UnknownLeaf,
                     ZeroDeterminant)
from .formula import (Add, Formula, Input, Inv, Mul, Sub, as_formula,
                      check_dims, children, enumerate_leaves, parse, pretty,
                      random_formula)
from .matching import (TutteState, apply_graph_update, matching_new,
                       parse_update)
from .oracle import (Graph, det_bareiss, det_cofactor, det_perturbation_bounds,
                     eval_exact, inv_exact, max_matching_bruteforce,
                     rank_elimination_mod_p)
from .rank import (FieldDetState, RankState, rank_tracker_init,
                   rank_tracker_update)
from .scalars import (DEFAULT_PRIME, FieldElem, FixedPointRing, Float64Ring,
                      PrimeFieldRing, RationalRing)

__version__ = "0.1.0"

__all__ = [
    "Add", "ConfigError", "Construction", "DEFAULT_PRIME", "DetTracker",
    "DimensionMismatch", "EmptyUndoLog", "FieldDetState", "FieldElem",
    "FixedPointRing", "Float64Ring", "Formula", "FormulaSyntaxError", "Graph",
    "HatConstruction", "Input", "InvalidVertex", "Inv", "LazyState", "Mul",
    "NonSquareInversion", "NonSquareOutput", "NormBudget", "PrimeFieldRing",
    "RankState", "RationalRing", "SignedLogDet", "SingularInversion", "SingularMatrix",
    "SingularUpdate", "Sub", "TooLarge", "TutteState", "TwoLevelState",
    "UndeclaredInput", "UnknownLeaf", "WoodburyState", "ZeroDeterminant",
    "apply_graph_update",
    "approx_inverse", "as_formula", "build", "build_hat", "certified_bits",
    "check_dims", "children", "default_eps_step", "det_bareiss",
    "det_cofactor", "det_perturbation_bounds", "det_tracker_init",
    "det_tracker_revert", "det_tracker_update", "enumerate_leaves",
    "eval_exact", "inv_exact", "matching_new", "max_matching_bruteforce",
    "norm_budget", "parse", "parse_update", "pretty", "rank_elimination_mod_p",
    "rank_tracker_init", "rank_tracker_update", "random_formula",
    "signed_logdet_qr", "__version__",
]
