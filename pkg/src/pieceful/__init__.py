"""Chase-based reasoning over existential rules and their compilation into
one-step ("parallelised") rule sets."""

from .analysis import (StabilityViolation, boundedness_probe, check_stability, piece_size_bound, pieceful_verdict,
                       syntactic_class, witness_instances)
from .chase import chase, chase_step, derive, enumerate_triggers, monitor_pieceful
from .composition import (PrefixFormula, SkolemRule, check_swap_condition, compose_compact, compose_existential,
                          compose_skolem, is_stable, saturate, skolemize)
from .homomorphism import find_homomorphisms, maps_to
from .logic import Atom, Constant, Null, NullKey, Rule, Variable, atom, decompose_pieces, freeze, split_single_piece
from .parallelizer import parallelise, project_mapping, verify_parallelisation
from .syntax import ParseError, Program, parse_program, serialize
from .unification import PieceUnifier, direct_rewrite, piece_unifiers, rewrite_closure
from .verdict import Status, Verdict

__version__ = "0.1.0"
