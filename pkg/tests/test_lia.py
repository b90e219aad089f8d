"""Arithmetic layer: substitution, evaluation, emission, round-trips."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from needle import lia
from needle.lia import (
    Add,
    Cmp,
    Congruent,
    Div,
    ExistsInt,
    ForallInt,
    IntLit,
    IntVar,
    LAnd,
    LImplies,
    LNot,
    LOr,
    Mul,
    NeedsSolver,
    Sub,
)
from needle.solver import check


def x(name="x"):
    return IntVar(name)


def test_substitute_nested_offsets():
    # x1 - 1 with x1 := (y - 1) gives (y - 1) - 1
    t = Sub(x("x1"), IntLit(1))
    out = lia.substitute(t, {"x1": Sub(x("y"), IntLit(1))})
    assert out == Sub(Sub(x("y"), IntLit(1)), IntLit(1))
    assert lia.eval_lia(out, {"y": -7}) == -9


def test_substitute_true_is_identity():
    assert lia.substitute(lia.TRUE, {"x": IntLit(3)}) == lia.TRUE


def test_substitute_direct_replacement():
    f = Cmp("<", x("x1"), x("x2"))
    out = lia.substitute(f, {"x1": IntLit(3), "x2": x("y")})
    assert out == Cmp("<", IntLit(3), x("y"))


def test_substitute_capture_avoidance():
    f = ExistsInt("y", Cmp("=", x("x"), x("y")))
    out = lia.substitute(f, {"x": x("y")})
    assert isinstance(out, ExistsInt)
    assert out.var != "y"
    assert lia.free_int_vars(out) == {"y"}


def test_eval_examples():
    assert lia.eval_lia(IntLit(0), {}) == 0
    assert lia.eval_lia(Cmp("<", x(), x()), {"x": 5}) is False
    assert lia.eval_lia(Sub(Sub(x("a"), IntLit(1)), IntLit(1)), {"a": -7}) == -9


def test_eval_quantifier_delegates():
    with pytest.raises(NeedsSolver):
        lia.eval_lia(ForallInt("x", Cmp("=", x(), IntLit(0))), {})


def test_eval_flooring_division_matches_solver_semantics(quick_solver):
    # div by positive literals floors toward negative infinity in both places
    for value in (-7, -1, 0, 1, 7):
        local = lia.eval_lia(Div(IntLit(value), 2), {})
        assert local == value // 2
        probe = Cmp("=", Div(IntLit(value), 2), IntLit(local))
        assert check(quick_solver, lia.emit_smtlib(probe)).status == "sat"


def test_division_by_nonpositive_rejected():
    with pytest.raises(lia.LiaError):
        Div(IntLit(1), 0)
    with pytest.raises(lia.LiaError):
        Div(IntLit(1), -2)


@given(
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=1, max_value=7),
)
def test_congruence_matches_residues(a, b, k):
    got = lia.eval_lia(Congruent(IntLit(a), IntLit(b), k), {})
    assert got == (a % k == b % k)


@settings(max_examples=200)
@given(
    st.integers(min_value=-20, max_value=20),
    st.integers(min_value=-20, max_value=20),
)
def test_substitute_then_eval_composes(v, w):
    # eval(t[x := s], a) == eval(t, a[x := eval(s, a)])
    t = Add(Mul(2, x("x")), x("y"))
    s = Sub(x("y"), IntLit(3))
    substituted = lia.substitute(t, {"x": s})
    a = {"y": w, "x": v}
    assert lia.eval_lia(substituted, a) == lia.eval_lia(
        t, {"x": lia.eval_lia(s, a), "y": w}
    )


def test_emit_deterministic_and_round_trips():
    f = ForallInt(
        "q",
        LAnd(
            (
                LImplies(Cmp("=", x("q"), IntLit(0)), LNot(lia.FALSE)),
                LImplies(Cmp("<=", x("q"), IntLit(0)), LNot(Cmp("<", x("q"), x("q")))),
            )
        ),
    )
    one = lia.emit_smtlib(f, free_ints=["pin"], free_bools=["g"])
    two = lia.emit_smtlib(f, free_ints=["pin"], free_bools=["g"])
    assert one == two
    assert lia.parse_script_assertion(one) == f


def test_emit_declares_free_constants():
    f = LAnd((lia.BoolVar("g"), Cmp(">", x("d"), IntLit(0))))
    script = lia.emit_smtlib(f, free_ints=["d"], free_bools=["g"])
    assert "(declare-const g Bool)" in script
    assert "(declare-const d Int)" in script


def test_emitted_antireflexivity_is_sat(quick_solver):
    f = ForallInt(
        "x",
        LAnd(
            (
                LImplies(Cmp("=", x(), IntLit(0)), LNot(lia.FALSE)),
                LImplies(Cmp("<=", x(), IntLit(0)), LNot(Cmp("<", x(), x()))),
            )
        ),
    )
    assert check(quick_solver, lia.emit_smtlib(f)).status == "sat"


def test_emitted_false_is_unsat(quick_solver):
    assert check(quick_solver, lia.emit_smtlib(lia.FALSE)).status == "unsat"


@settings(max_examples=100)
@given(st.integers(min_value=-9, max_value=9))
def test_parse_round_trip_on_terms(k):
    t = Add(Mul(3, x("x1")), IntLit(k))
    assert lia.parse_term(lia.term_to_sexpr(t)) == t


def test_parse_negative_literal_forms():
    assert lia.parse_term("(- 7)") == IntLit(-7)
    assert lia.parse_term("-7") == IntLit(-7)


def test_simplify_folds_and_flattens():
    nested = LAnd((LAnd((lia.TRUE, Cmp("<", x(), IntLit(1)))), lia.TRUE))
    assert lia.simplify(nested) == Cmp("<", x(), IntLit(1))
    assert lia.simplify(Cmp("<", IntLit(0), IntLit(1))) == lia.TRUE
    assert lia.simplify(LNot(Cmp("<", x(), x("y")))) == Cmp(">=", x(), x("y"))
    assert lia.simplify(Add(x(), IntLit(0))) == x()
    assert lia.simplify(LOr((lia.FALSE, lia.FALSE))) == lia.FALSE


def test_free_vars():
    f = ExistsInt("a", Cmp("=", Add(x("a"), x("b")), x("c")))
    assert lia.free_int_vars(f) == {"b", "c"}
    g = LImplies(lia.BoolVar("g1"), f)
    assert lia.free_bool_vars(g) == {"g1"}
