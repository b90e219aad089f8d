"""Vocabulary, parsing, normal forms, alternation graph, ground terms."""

import itertools
import random

import pytest

from conftest import all_finite_structures, load_problem, load_text, random_formula
from needle.fol import (
    And,
    App,
    Const,
    Eq,
    Exists,
    Forall,
    Iff,
    Implies,
    Not,
    Or,
    Relation,
    Sort,
    SortError,
    Var,
    Vocabulary,
    ensure_unique_bound_names,
    free_vars,
    order_axioms,
)
from needle.modelcheck import eval_finite
from needle.parse import ParseError, parse_problem
from needle.transforms import (
    ground_terms,
    qa_graph,
    skolemize,
    to_nnf,
)

S = Sort("s")


def tiny_voc(**kw) -> Vocabulary:
    base = dict(
        sorts=frozenset({S}),
        constants={"c": S},
        functions={"f": ((S,), S)},
        relations={"p": (S,), "q": (S, S)},
    )
    base.update(kw)
    return Vocabulary(**base)


# --- parsing ---------------------------------------------------------------


def test_parse_echo_problem():
    p = load_problem("echo.smt2")
    assert {s.name for s in p.vocabulary.sorts} == {"round", "value"}
    assert p.vocabulary.order_relation == "prec"
    assert p.vocabulary.relations["prec"] == (Sort("round"), Sort("round"))
    assert p.infinite_sorts == frozenset({Sort("round")})
    assert p.vocabulary.functions["prev"] == ((Sort("round"),), Sort("round"))


def test_parse_no_assertion_is_an_error():
    with pytest.raises(ParseError, match="no assertion"):
        parse_problem("(declare-sort s 0)")


def test_parse_undeclared_symbol_names_it():
    text = "(declare-sort s 0)(declare-const c s)(assert (q c))"
    with pytest.raises(ParseError, match="q"):
        parse_problem(text)


def test_parse_duplicate_declaration():
    text = "(declare-sort s 0)(declare-const c s)(declare-const c s)(assert true)"
    with pytest.raises(ParseError, match="duplicate"):
        parse_problem(text)


def test_parse_rejects_reserved_prefix():
    text = "(declare-sort s 0)(declare-const |sk!0| s)(assert true)"
    with pytest.raises(ParseError, match="reserved"):
        parse_problem(text)


def test_parse_reports_position():
    try:
        parse_problem("(declare-sort s 0)\n(assert (and foo))")
    except ParseError as exc:
        assert exc.line == 2
    else:
        pytest.fail("expected a parse error")


def test_parse_keeps_biconditionals():
    p = parse_problem(
        "(declare-sort s 0)(declare-fun p (s) Bool)"
        "(assert (forall ((x s)) (= (p x) (p x))))"
    )
    f = p.assertion
    assert isinstance(f, Forall) and isinstance(f.body, Iff)


def test_parse_alpha_renames_shadowing():
    p = parse_problem(
        "(declare-sort s 0)(declare-fun p (s) Bool)"
        "(assert (forall ((x s)) (and (p x) (exists ((x s)) (p x)))))"
    )
    names = set()

    def collect(f):
        if isinstance(f, (Forall, Exists)):
            names.add(f.var)
            collect(f.body)
        elif isinstance(f, And):
            for part in f.parts:
                collect(part)

    collect(p.assertion)
    assert len(names) == 2


def test_infinite_sort_defaults_to_cycle_sorts():
    p = load_problem("list-segment.smt2")
    assert p.infinite_sorts == frozenset({Sort("node")})
    # a problem with no cycles has no infinite sorts
    q = parse_problem(
        "(declare-sort a 0)(declare-sort b 0)(declare-fun f (a) b)"
        "(declare-const c a)(assert (forall ((x a)) (= (f x) (f c))))"
    )
    assert q.infinite_sorts == frozenset()


def test_auto_order_conjoins_axioms(quick_solver):
    text = (
        "(set-info :needle-order lt)(set-info :needle-auto-order true)"
        "(declare-sort s 0)(declare-const c s)(declare-fun lt (s s) Bool)"
        "(assert (exists ((x s)) (lt c x)))"
    )
    p = parse_problem(text)
    from needle.osc import has_order_axioms

    assert has_order_axioms(p.assertion, "lt")


# --- negation normal form ---------------------------------------------------


def rel(name, *args):
    return Relation(name, tuple(args))


def test_nnf_de_morgan():
    a, b = rel("p", Const("c")), rel("p", App("f", (Const("c"),)))
    assert to_nnf(Not(And((a, b)))) == Or((Not(a), Not(b)))


def test_nnf_quantifier_duality():
    x = Var("x", S)
    f = Not(Forall("x", S, rel("p", x)))
    assert to_nnf(f) == Exists("x", S, Not(rel("p", x)))


def test_nnf_biconditional_expansion():
    a, b = rel("p", Const("c")), rel("p", App("f", (Const("c"),)))
    assert to_nnf(Iff(a, b)) == And((Or((Not(a), b)), Or((Not(b), a))))


def test_nnf_idempotent_on_random_formulas():
    rng = random.Random(7)
    voc = tiny_voc()
    for _ in range(200):
        f = random_formula(rng, voc, qdepth=3)
        once = to_nnf(f)
        assert to_nnf(once) == once


def test_nnf_preserves_truth_on_finite_models():
    rng = random.Random(11)
    voc = tiny_voc()
    from conftest import random_finite_structure

    for _ in range(150):
        f = random_formula(rng, voc, qdepth=2)
        if free_vars(f):
            continue
        m = random_finite_structure(rng, voc, max_elems=3)
        assert eval_finite(m, f) == eval_finite(m, to_nnf(f))


# --- Skolemization -----------------------------------------------------------


def test_skolemize_closed_existential_becomes_constant():
    voc = tiny_voc()
    f = Exists("y", S, rel("p", Var("y", S)))
    out, voc2 = skolemize(f, voc)
    assert out == rel("p", Const("sk!0"))
    assert voc2.constants["sk!0"] == S


def test_skolemize_under_other_sort_universal_becomes_function():
    r, v = Sort("r"), Sort("v")
    voc = Vocabulary(
        sorts=frozenset({r, v}),
        relations={"echo": (r, v)},
    )
    # forall V:v. exists T:r. echo(T, V)
    f = Forall("V", v, Exists("T", r, rel("echo", Var("T", r), Var("V", v))))
    out, voc2 = skolemize(to_nnf(f), voc)
    assert voc2.functions["sk!0"] == ((v,), r)
    assert out == Forall("V", v, rel("echo", App("sk!0", (Var("V", v),)), Var("V", v)))


def test_skolemize_ignores_unused_universals():
    # the witness depends only on universals free in the body
    f = Forall("x", S, Exists("y", S, rel("p", Var("y", S))))
    out, voc2 = skolemize(to_nnf(f), tiny_voc())
    assert out == Forall("x", S, rel("p", Const("sk!0")))


def test_skolemize_preserves_finite_satisfiability():
    rng = random.Random(23)
    voc = Vocabulary(
        sorts=frozenset({S}),
        constants={"c": S},
        functions={"f": ((S,), S)},
        relations={"p": (S,)},
    )
    for trial in range(40):
        f = random_formula(rng, voc, qdepth=2)
        if free_vars(f):
            continue
        g = to_nnf(f)
        g_sk, voc2 = skolemize(g, voc)
        sat_before = any(
            eval_finite(m, f) for m in all_finite_structures(voc, 2)
        )
        sat_after = any(
            eval_finite(m, g_sk) for m in all_finite_structures(voc2, 2)
        )
        assert sat_before == sat_after, f"trial {trial}: {f!r}"


# --- quantifier-alternation graph ---------------------------------------------


def test_qa_graph_alternation_edge():
    s1, s2 = Sort("s1"), Sort("s2")
    voc = Vocabulary(sorts=frozenset({s1, s2}), relations={"r": (s1, s2)})
    f = Forall("x", s1, Exists("y", s2, rel("r", Var("x", s1), Var("y", s2))))
    g = qa_graph(f, voc)
    assert (s1, s2) in g.edge_pairs()
    assert any(e.provenance == "quantifier" for e in g.edges)


def test_qa_graph_function_edge():
    s1, s2 = Sort("s1"), Sort("s2")
    voc = Vocabulary(
        sorts=frozenset({s1, s2}),
        constants={"c": s1},
        functions={"g": ((s1,), s2)},
        relations={"p": (s2,)},
    )
    f = rel("p", App("g", (Const("c"),)))
    g = qa_graph(f, voc)
    assert g.edge_pairs() == {(s1, s2)}
    assert all(e.provenance == "function" for e in g.edges)


def test_qa_graph_ground_formula_has_no_edges():
    voc = Vocabulary(sorts=frozenset({S}), constants={"c": S}, relations={"p": (S,)})
    assert qa_graph(rel("p", Const("c")), voc).edges == frozenset()


def test_qa_graph_no_alternation_no_functions_no_edges():
    voc = tiny_voc(functions={})
    f = Forall("x", S, Forall("y", S, rel("q", Var("x", S), Var("y", S))))
    assert qa_graph(f, voc).edges == frozenset()


# --- ground terms ---------------------------------------------------------------


def test_ground_terms_of_single_sort_formula():
    voc = tiny_voc()
    f = And((Not(rel("p", Const("c"))), rel("p", App("f", (Const("c"),)))))
    terms = ground_terms(f, voc, S)
    assert terms == {Const("c"), App("f", (Const("c"),))}


def test_ground_terms_empty_when_sort_unused():
    voc = tiny_voc(sorts=frozenset({S, Sort("t")}))
    f = rel("p", Const("c"))
    assert ground_terms(f, voc, Sort("t")) == set()


def test_ground_terms_step_two_closure():
    sp, sinf = Sort("sp"), Sort("sinf")
    voc = Vocabulary(
        sorts=frozenset({sp, sinf}),
        constants={"gp": sp},
        functions={"h": ((sp,), sinf)},
        relations={"p": (sinf,)},
        infinite_sorts=frozenset({sinf}),
    )
    f = Forall("x", sinf, rel("p", Var("x", sinf)))
    got = ground_terms(And((f, Eq(Const("gp"), Const("gp")))), voc, sinf)
    assert got == {App("h", (Const("gp"),))}


def test_ground_terms_are_ground_and_well_sorted():
    rng = random.Random(3)
    voc = tiny_voc()
    for _ in range(50):
        f = random_formula(rng, voc, qdepth=2)
        for t in ground_terms(f, voc, S):
            assert not free_vars(Eq(t, t))


# --- misc -----------------------------------------------------------------------


def test_order_axioms_shape():
    voc = tiny_voc(relations={"lt": (S, S)}, order_relation="lt")
    ax = order_axioms(voc)
    from needle.osc import has_order_axioms

    assert has_order_axioms(ax, "lt")


def test_vocabulary_rejects_misdeclared_order():
    with pytest.raises(SortError):
        tiny_voc(order_relation="p")  # unary
    with pytest.raises(SortError):
        tiny_voc(order_relation="missing")


def test_ensure_unique_bound_names_keeps_free_vars():
    x = Var("x", S)
    f = And((rel("p", x), Exists("x", S, rel("p", Var("x", S)))))
    g = ensure_unique_bound_names(f)
    assert free_vars(g) == {"x": S}
    assert isinstance(g, And) and isinstance(g.parts[1], Exists)
    assert g.parts[1].var != "x"
