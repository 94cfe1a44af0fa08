"""Executable forcing poset for cofinitary permutation groups.

The package builds finite approximations to a generic permutation that
codes prescribed bit strings along word orbits, agrees with prescribed
targets, and avoids attached almost disjoint graphs, with every
construction step replayable and machine-checkable.
"""

from .words import Letter, Word, parse, render
from .perms import (
    GroundPermutation,
    GroundRepresentation,
    PartialInjection,
    build_ground_representation,
    eval_word,
    fixed_points,
    single_zshift,
)
from .coding import TargetBits, code_step, codes, decode_bits, exactly_codes, shape
from .families import ADPermFamily, ConstraintTable, Pairing, build_family, cantor_pairing
from .forcing import (
    Condition,
    EMPTY_CONDITION,
    HitTarget,
    PosetContext,
    add_constraint,
    extend_coding,
    extend_domain,
    extend_range,
    hit,
    leq,
    merge,
    register_coding,
    register_word,
    validate,
)
from .generic import (
    ConstraintTask,
    GenericApproximation,
    HitTask,
    TaskList,
    run_builder,
    verify_generic,
)
from .tower import build_zw, next_stage, run_tower

__all__ = [name for name in dir() if not name.startswith("_")]
