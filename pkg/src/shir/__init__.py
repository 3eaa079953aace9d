"""Static heap analyzer over storage shape graphs.

Submodules: ir (object language + parser), concrete (interpreter,
ground-truth predicates, lift and membership), heap (abstract heap
values), normalform (congruence closure + summarization), domain_ops
(equality and upper approximation), transfer (abstract semantics),
fixpoint (dataflow driver), precision (runtime-baseline scoring),
corpus (bundled programs), cli (command-line front end).
"""

from .ir import Program, parse_program, print_program, validate, field_labels, recursive_types
from .heap import AbstractHeap, Shape, shape_join, to_dot, canonical_text
from .normalform import normalize, is_normal_form, congruence_closure
from .domain_ops import abs_equal, find_isomorphism, upper_approx
from .concrete import (
    interpret,
    abstract_lift,
    iso_lift,
    gamma_member,
    pointers_between,
    check_injective,
    check_array_injective,
    shape_of,
)
from .fixpoint import AnalysisConfig, analyze_method, analyze_program, initial_heap

__all__ = [
    "Program",
    "parse_program",
    "print_program",
    "validate",
    "field_labels",
    "recursive_types",
    "AbstractHeap",
    "Shape",
    "shape_join",
    "to_dot",
    "canonical_text",
    "normalize",
    "is_normal_form",
    "congruence_closure",
    "abs_equal",
    "find_isomorphism",
    "upper_approx",
    "interpret",
    "abstract_lift",
    "iso_lift",
    "gamma_member",
    "pointers_between",
    "check_injective",
    "check_array_injective",
    "shape_of",
    "AnalysisConfig",
    "analyze_method",
    "analyze_program",
    "initial_heap",
]
