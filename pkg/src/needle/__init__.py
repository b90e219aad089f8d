"""Finite symbolic representations of possibly infinite first-order models:
model checking by translation to integer arithmetic, template-based search,
and a bounded decision procedure for an order-extended propositional-style
fragment."""

from importlib import resources

from .fol import Problem, Sort, Vocabulary
from .finder import (
    EnumerationCaps,
    FinderOptions,
    Found,
    NoneInFamily,
    Template,
    Undetermined,
    enumerate_find,
    find,
    heuristic_template,
)
from .modelcheck import Truth, eval_finite, model_check, symbolize, trans
from .osc import OscBounds, OscReport, check_membership, compute_bounds, decide, ordered_bell
from .parse import ParseError, parse_problem
from .solver import SolverConfig, SolverError, default_config
from .structure import (
    ExplicitElement,
    FiniteStructure,
    Node,
    SymbolicStructure,
    eval_ground_term,
    explicate_finite,
    explication_window,
    from_json,
    to_dot,
    to_json,
    validate,
)

__all__ = [
    "EnumerationCaps",
    "ExplicitElement",
    "FiniteStructure",
    "FinderOptions",
    "Found",
    "NoneInFamily",
    "Node",
    "OscBounds",
    "OscReport",
    "ParseError",
    "Problem",
    "SolverConfig",
    "SolverError",
    "Sort",
    "SymbolicStructure",
    "Template",
    "Truth",
    "Undetermined",
    "Vocabulary",
    "check_membership",
    "compute_bounds",
    "corpus_path",
    "decide",
    "default_config",
    "enumerate_find",
    "eval_finite",
    "eval_ground_term",
    "explicate_finite",
    "explication_window",
    "find",
    "from_json",
    "heuristic_template",
    "model_check",
    "ordered_bell",
    "parse_problem",
    "symbolize",
    "to_dot",
    "to_json",
    "trans",
    "validate",
]


def corpus_path(name: str) -> str:
    """Absolute path of a shipped example input or structure file."""
    return str(resources.files(__package__).joinpath("corpus", name))
