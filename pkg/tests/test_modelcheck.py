"""Translation to integer arithmetic and the finite differential oracle."""

import random

import pytest

from conftest import (
    load_problem,
    load_text,
    random_finite_structure,
    random_formula,
    random_vocabulary,
)
from needle import lia
from needle.fol import (
    And,
    App,
    Const,
    Eq,
    Exists,
    Forall,
    Not,
    Or,
    Relation,
    Sort,
    Var,
    free_vars,
)
from needle.lia import Cmp, ExistsInt, ForallInt, IntLit, IntVar, LAnd, LImplies, LNot
from needle.modelcheck import (
    Truth,
    eval_finite,
    lia_var,
    model_check,
    symbolize,
    trans,
)
from needle.structure import ExplicitElement, encode_finite, from_json

ROUND = Sort("round")


@pytest.fixture(scope="module")
def echo():
    return load_problem("echo.smt2"), from_json(load_text("echo-structure.json"))


# --- symbolization ---------------------------------------------------------


def test_symbolize_replaces_indices_with_variables(echo):
    _, s = echo
    beta = s.node_by_id("beta")
    v_s, residual = symbolize({"x1": ExplicitElement(beta, -7)})
    assert v_s == {"x1": (beta, "x1!lia")}
    assert residual == {"x1!lia": -7}


def test_symbolize_empty():
    assert symbolize({}) == ({}, {})


def test_symbolize_regular_forces_zero(echo):
    _, s = echo
    alpha = s.node_by_id("alpha")
    v_s, residual = symbolize({"y": ExplicitElement(alpha, 0)})
    assert v_s == {"y": (alpha, "y!lia")}
    assert residual == {"y!lia": 0}


# --- the translation --------------------------------------------------------


def test_trans_antireflexivity_shape(echo):
    _, s = echo
    x = Var("x", ROUND)
    f = Forall("x", ROUND, Not(Relation("prec", (x, x))))
    got = trans(s, {}, f)
    xl = IntVar(lia_var("x"))
    expected = ForallInt(
        lia_var("x"),
        LAnd(
            (
                LImplies(Cmp("=", xl, IntLit(0)), LNot(lia.FALSE)),
                LImplies(Cmp("<=", xl, IntLit(0)), LNot(Cmp("<", xl, xl))),
            )
        ),
    )
    assert got == expected


def test_trans_nested_function_example(echo):
    _, s = echo
    beta = s.node_by_id("beta")
    x1, x2 = Var("x1", ROUND), Var("x2", ROUND)
    f = Forall("x2", ROUND, Not(Relation("prec", (App("prev", (App("prev", (x1,)),)), x2))))
    v_s = {"x1": (beta, lia_var("x1"))}
    got = trans(s, v_s, f)
    x1l, x2l = IntVar(lia_var("x1")), IntVar(lia_var("x2"))
    shifted = lia.Sub(lia.Sub(x1l, IntLit(1)), IntLit(1))
    expected = ForallInt(
        lia_var("x2"),
        LAnd(
            (
                LImplies(Cmp("=", x2l, IntLit(0)), LNot(lia.FALSE)),
                LImplies(Cmp("<=", x2l, IntLit(0)), LNot(Cmp("<", shifted, x2l))),
            )
        ),
    )
    assert got == expected


def test_trans_equality_across_nodes_is_false(echo):
    _, s = echo
    f = Eq(Const("start"), App("prev", (Const("start"),)))
    assert trans(s, {}, f) == Cmp("=", IntLit(0), IntLit(0))
    beta = s.node_by_id("beta")
    g = Eq(Const("start"), Var("w", ROUND))
    assert trans(s, {"w": (beta, lia_var("w"))}, g) == lia.FALSE


def test_trans_quantifier_shape_preserved(echo):
    # along every path the quantifier prefix mirrors the input: same depth,
    # same kind, one integer variable per logic variable
    _, s = echo

    def depth(f):
        if isinstance(f, Forall):
            return ("A", depth(f.body))
        if isinstance(f, Exists):
            return ("E", depth(f.body))
        if isinstance(f, Not):
            return depth(f.body)
        if isinstance(f, (And, Or)):
            shapes = {depth(p) for p in f.parts}
            return shapes.pop() if len(shapes) == 1 else tuple(sorted(map(str, shapes)))
        return ()

    def int_depths(f):
        if isinstance(f, ForallInt):
            return {("A", d) for d in int_depths(f.body)}
        if isinstance(f, ExistsInt):
            return {("E", d) for d in int_depths(f.body)}
        if isinstance(f, LNot):
            return int_depths(f.body)
        if isinstance(f, (lia.LAnd, lia.LOr)):
            out = set()
            for p in f.parts:
                out |= int_depths(p)
            return out
        if isinstance(f, lia.LImplies):
            return int_depths(f.lhs) | int_depths(f.rhs)
        return {()}

    x = Var("v", ROUND)
    f = Forall(
        "v",
        ROUND,
        Or((Exists("w", ROUND, Relation("prec", (x, Var("w", ROUND)))), Not(Relation("prec", (x, x))))),
    )
    out = trans(s, {}, f)
    # every path through the output carries a prefix of the input shape
    want = {(), ("A", ()), ("A", ("E", ()))}
    assert int_depths(out) <= want
    assert ("A", ("E", ())) in int_depths(out)

    def quantified_names(f):
        if isinstance(f, (ForallInt, ExistsInt)):
            return {f.var} | quantified_names(f.body)
        if isinstance(f, LNot):
            return quantified_names(f.body)
        if isinstance(f, (lia.LAnd, lia.LOr)):
            out = set()
            for p in f.parts:
                out |= quantified_names(p)
            return out
        if isinstance(f, lia.LImplies):
            return quantified_names(f.lhs) | quantified_names(f.rhs)
        return set()

    assert quantified_names(out) == {lia_var("v"), lia_var("w")}


def test_trans_free_variable_discipline(echo):
    _, s = echo
    beta = s.node_by_id("beta")
    x1 = Var("x1", ROUND)
    f = Exists("y", ROUND, Relation("prec", (x1, Var("y", ROUND))))
    out = trans(s, {"x1": (beta, lia_var("x1"))}, f)
    assert lia.free_int_vars(out) <= {lia_var("x1")}


def test_trans_closed_formula_ignores_assignment(echo):
    _, s = echo
    alpha, beta = s.node_by_id("alpha"), s.node_by_id("beta")
    f = Forall("x", ROUND, Not(Relation("prec", (Var("x", ROUND), Var("x", ROUND)))))
    a = trans(s, {"unused": (alpha, lia_var("unused"))}, f)
    b = trans(s, {"unused": (beta, lia_var("unused"))}, f)
    assert a == b


def test_trans_regular_simplification_agrees(echo, quick_solver):
    problem, s = echo
    f = problem.assertion
    plain = model_check(s, f, solver=quick_solver)
    simplified = model_check(s, f, solver=quick_solver, simplify_regular=True)
    assert plain == simplified == Truth.TRUE


# --- model checking ----------------------------------------------------------


def test_echo_structure_satisfies_vc(echo, solver):
    problem, s = echo
    assert model_check(s, problem.assertion, solver=solver) is Truth.TRUE


def test_reflexive_equality_always_true(echo, quick_solver):
    _, s = echo
    f = Forall("x", ROUND, Eq(Var("x", ROUND), Var("x", ROUND)))
    assert model_check(s, f, solver=quick_solver) is Truth.TRUE


def test_example_formula_false_under_assignment(echo, quick_solver):
    _, s = echo
    beta = s.node_by_id("beta")
    x1 = Var("x1", ROUND)
    f = Forall("x2", ROUND, Not(Relation("prec", (App("prev", (App("prev", (x1,)),)), Var("x2", ROUND)))))
    verdict = model_check(
        s, f, v={"x1": ExplicitElement(beta, -7)}, solver=quick_solver
    )
    assert verdict is Truth.FALSE


def test_monotone_consistency(echo, quick_solver):
    _, s = echo
    rng = random.Random(13)
    problem, _ = echo
    voc = problem.vocabulary
    for _ in range(10):
        f = random_formula(rng, voc, qdepth=2)
        if free_vars(f):
            continue
        pos = model_check(s, f, solver=quick_solver)
        neg = model_check(s, Not(f), solver=quick_solver)
        assert not (pos is Truth.TRUE and neg is Truth.TRUE)


def test_timeout_yields_undetermined(echo):
    problem, s = echo
    from needle.solver import default_config

    tiny = default_config(timeout_ms=1)
    verdict = model_check(s, problem.assertion, solver=tiny)
    assert verdict is Truth.UNDETERMINED


# --- finite evaluator ---------------------------------------------------------


def test_eval_finite_empty_relation():
    from needle.structure import FiniteStructure

    s = Sort("s")
    m = FiniteStructure({s: ("e0",)}, {}, {}, {("r", ("e0",)): False})
    f = Exists("x", s, Relation("r", (Var("x", s),)))
    assert eval_finite(m, f) is False


def test_eval_finite_involution():
    from needle.structure import FiniteStructure

    s = Sort("s")
    m = FiniteStructure(
        {s: ("a", "b")},
        {},
        {("f", ("a",)): "b", ("f", ("b",)): "a"},
        {},
    )
    x = Var("x", s)
    f = Forall("x", s, Eq(App("f", (App("f", (x,)),)), x))
    assert eval_finite(m, f) is True


def test_differential_oracle_small(quick_solver):
    # all-regular encodings agree with brute-force evaluation
    rng = random.Random(42)
    agree = 0
    for _ in range(60):
        voc = random_vocabulary(rng, sorts=rng.randint(1, 2))
        m = random_finite_structure(rng, voc, max_elems=3)
        f = random_formula(rng, voc, qdepth=3)
        if free_vars(f):
            continue
        expected = eval_finite(m, f)
        got = model_check(encode_finite(m), f, solver=quick_solver)
        assert got is (Truth.TRUE if expected else Truth.FALSE), f"{f!r}"
        agree += 1
    assert agree >= 30
