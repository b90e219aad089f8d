"""Structure model: validation, evaluation, explication, serialization."""

import random

import pytest

from conftest import load_problem, load_text, random_finite_structure, random_vocabulary
from needle import lia
from needle.fol import App, Const, Sort, Vocabulary
from needle.lia import Cmp, IntLit, IntVar, Sub
from needle.structure import (
    BOUND_VAR,
    REGULAR,
    SUMMARY,
    ExplicitElement,
    Node,
    REGULAR_BOUND,
    SymbolicStructure,
    encode_finite,
    eval_ground_term,
    explicate_finite,
    explication_window,
    from_json,
    to_dot,
    to_json,
    validate,
)

ROUND = Sort("round")
VALUE = Sort("value")


@pytest.fixture(scope="module")
def echo():
    problem = load_problem("echo.smt2")
    structure = from_json(load_text("echo-structure.json"))
    return problem, structure


def test_echo_structure_is_well_formed(echo, quick_solver):
    problem, s = echo
    report = validate(s, problem.vocabulary, quick_solver)
    assert report.ok, report.issues


def test_regular_bound_must_be_zero_equation(echo, quick_solver):
    problem, s = echo
    bad = SymbolicStructure(
        s.domain,
        {**s.bounds, "alpha": Cmp("<=", IntVar(BOUND_VAR), IntLit(0))},
        s.constants,
        s.functions,
        s.relations,
    )
    report = validate(bad, problem.vocabulary, quick_solver)
    assert any("regular bound" in i.message for i in report.violations)


def test_entailment_failure_is_reported(echo, quick_solver):
    # image term x1 - 1 escapes a bound of x >= 0 (witness x1 = 0)
    problem, s = echo
    bad = SymbolicStructure(
        s.domain,
        {**s.bounds, "beta": Cmp(">=", IntVar(BOUND_VAR), IntLit(0))},
        s.constants,
        s.functions,
        s.relations,
    )
    report = validate(bad, problem.vocabulary, quick_solver)
    assert any(
        "image term" in i.message and "prev" in i.where for i in report.violations
    )


def test_unsatisfiable_bound_is_reported(echo, quick_solver):
    problem, s = echo
    bad_bound = lia.LAnd((Cmp("<", IntVar(BOUND_VAR), IntLit(0)), Cmp(">", IntVar(BOUND_VAR), IntLit(0))))
    bad = SymbolicStructure(
        s.domain,
        {**s.bounds, "beta": bad_bound},
        s.constants,
        s.functions,
        s.relations,
    )
    report = validate(bad, problem.vocabulary, quick_solver)
    assert any("unsatisfiable" in i.message for i in report.violations)


def test_validate_without_solver_is_undetermined_not_silent(echo):
    problem, s = echo
    report = validate(s, problem.vocabulary, solver=None)
    assert not report.ok
    assert report.issues and all(i.severity == "undetermined" for i in report.issues)


def test_missing_table_entry_is_reported(echo, quick_solver):
    problem, s = echo
    functions = dict(s.functions)
    functions.pop(("prev", ("beta",)))
    bad = SymbolicStructure(s.domain, s.bounds, s.constants, functions, s.relations)
    report = validate(bad, problem.vocabulary, quick_solver)
    assert any("missing function table entry" in i.message for i in report.violations)


# --- ground-term evaluation ---------------------------------------------------


def test_eval_ground_term_constant(echo):
    _, s = echo
    elem = eval_ground_term(s, Const("start"))
    assert elem == ExplicitElement(s.node_by_id("alpha"), 0)


def test_eval_ground_term_function_chain(echo):
    _, s = echo
    # prev(start) stays on the start node at index 0
    assert eval_ground_term(s, App("prev", (Const("start"),))).index == 0


def test_eval_ground_term_matches_finite_evaluation():
    rng = random.Random(5)
    for _ in range(25):
        voc = random_vocabulary(rng)
        m = random_finite_structure(rng, voc, max_elems=3)
        s = encode_finite(m)
        for sym in voc.constants:
            elem = eval_ground_term(s, Const(sym))
            assert elem.node.id == m.constants[sym]
            assert elem.index == 0


# --- explication ----------------------------------------------------------------


def test_explication_window_summary(echo):
    _, s = echo
    beta = s.node_by_id("beta")
    got = explication_window(s, beta, -2, 2)
    assert got == [ExplicitElement(beta, z) for z in (-2, -1, 0)]


def test_explication_window_regular(echo):
    _, s = echo
    alpha = s.node_by_id("alpha")
    assert explication_window(s, alpha, -5, 5) == [ExplicitElement(alpha, 0)]


def test_explication_window_disjoint():
    n = Node("n", ROUND, SUMMARY)
    s = SymbolicStructure(
        {ROUND: (n,)},
        {"n": Cmp(">=", IntVar(BOUND_VAR), IntLit(3))},
        {},
        {},
        {},
    )
    assert explication_window(s, n, 0, 2) == []


def test_explicate_finite_round_trip():
    rng = random.Random(9)
    for _ in range(25):
        voc = random_vocabulary(rng)
        m = random_finite_structure(rng, voc, max_elems=2)
        back = explicate_finite(encode_finite(m))
        assert set(back.constants.items()) == set(m.constants.items())
        assert back.functions == m.functions
        assert {k for k, v in back.relations.items() if v} == {
            k for k, v in m.relations.items() if v
        }


def test_explicate_finite_rejects_summary(echo):
    _, s = echo
    with pytest.raises(Exception, match="summary"):
        explicate_finite(s)


# --- serialization ----------------------------------------------------------------


def test_json_round_trip(echo):
    _, s = echo
    assert from_json(to_json(s)) == s


def test_json_round_trip_minimal():
    n = Node("only", ROUND, REGULAR)
    s = SymbolicStructure({ROUND: (n,)}, {"only": REGULAR_BOUND}, {}, {}, {})
    assert from_json(to_json(s)) == s


def test_dot_conventions(echo):
    _, s = echo
    dot = to_dot(s)
    assert "doublecircle" in dot  # summary nodes are double-circled
    # bot-valued relation entries produce no edge
    assert '"alpha" -> "alpha" [label="prec' not in dot
    assert '"beta" -> "beta" [label="prec: (< x1 x2)"' in dot
    assert "prev: (- x1 1)" in dot
