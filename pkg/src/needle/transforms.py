"""Formula transformations: NNF, Skolemization, alternation graph, ground terms."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .fol import (
    FALSE,
    TRUE,
    And,
    App,
    Const,
    Eq,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Problem,
    Relation,
    Sort,
    Term,
    Var,
    Vocabulary,
    atoms,
    free_vars,
    substitute,
    term_free_vars,
    terms_of,
)

SKOLEM_PREFIX = "sk!"


def eliminate_iff(f: Formula) -> Formula:
    """Rewrite every biconditional as (lhs -> rhs) & (rhs -> lhs)."""
    if isinstance(f, (Relation, Eq)):
        return f
    if isinstance(f, Not):
        return Not(eliminate_iff(f.body))
    if isinstance(f, And):
        return And(tuple(eliminate_iff(p) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(eliminate_iff(p) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(eliminate_iff(f.lhs), eliminate_iff(f.rhs))
    if isinstance(f, Iff):
        a, b = eliminate_iff(f.lhs), eliminate_iff(f.rhs)
        return And((Implies(a, b), Implies(b, a)))
    ctor = Forall if isinstance(f, Forall) else Exists
    return ctor(f.var, f.sort, eliminate_iff(f.body))


def to_nnf(f: Formula) -> Formula:
    """Negation normal form: negations on atoms only, no -> or <->."""

    def pos(g: Formula) -> Formula:
        if isinstance(g, (Relation, Eq)):
            return g
        if isinstance(g, Not):
            return neg(g.body)
        if isinstance(g, And):
            return And(tuple(pos(p) for p in g.parts))
        if isinstance(g, Or):
            return Or(tuple(pos(p) for p in g.parts))
        if isinstance(g, Implies):
            return Or((neg(g.lhs), pos(g.rhs)))
        if isinstance(g, Iff):
            return And((Or((neg(g.lhs), pos(g.rhs))), Or((neg(g.rhs), pos(g.lhs)))))
        ctor = Forall if isinstance(g, Forall) else Exists
        return ctor(g.var, g.sort, pos(g.body))

    def neg(g: Formula) -> Formula:
        if isinstance(g, (Relation, Eq)):
            return Not(g)
        if isinstance(g, Not):
            return pos(g.body)
        if isinstance(g, And):
            return Or(tuple(neg(p) for p in g.parts))
        if isinstance(g, Or):
            return And(tuple(neg(p) for p in g.parts))
        if isinstance(g, Implies):
            return And((pos(g.lhs), neg(g.rhs)))
        if isinstance(g, Iff):
            return Or((And((pos(g.lhs), neg(g.rhs))), And((pos(g.rhs), neg(g.lhs)))))
        ctor = Exists if isinstance(g, Forall) else Forall
        return ctor(g.var, g.sort, neg(g.body))

    return pos(f)


def skolemize(f: Formula, voc: Vocabulary) -> tuple[Formula, Vocabulary]:
    """Replace existentials by fresh witnesses; returns the extended vocabulary.

    The witness for an existential takes as arguments exactly the in-scope
    universal variables that occur free in its body, so closed existentials
    and existentials whose body ignores the surrounding universals become
    constants.  Expects ``f`` in NNF.
    """
    counter = itertools.count()
    new_voc = voc

    def fresh(base: str) -> str:
        while True:
            name = f"{SKOLEM_PREFIX}{next(counter)}"
            if not new_voc.has_symbol(name):
                return name
        raise AssertionError  # pragma: no cover

    def go(g: Formula, universals: tuple[tuple[str, Sort], ...]) -> Formula:
        nonlocal new_voc
        if isinstance(g, (Relation, Eq, Not)):
            return g
        if isinstance(g, And):
            return And(tuple(go(p, universals) for p in g.parts))
        if isinstance(g, Or):
            return Or(tuple(go(p, universals) for p in g.parts))
        if isinstance(g, Implies):  # not produced by NNF, handled for safety
            return Implies(go(g.lhs, universals), go(g.rhs, universals))
        if isinstance(g, Forall):
            return Forall(g.var, g.sort, go(g.body, universals + ((g.var, g.sort),)))
        if isinstance(g, Exists):
            fv = free_vars(g.body)
            deps = [(v, s) for v, s in universals if v in fv and v != g.var]
            name = fresh(g.var)
            if deps:
                new_voc = new_voc.with_function(name, tuple(s for _, s in deps), g.sort)
                witness: Term = App(name, tuple(Var(v, s) for v, s in deps))
            else:
                new_voc = new_voc.with_constant(name, g.sort)
                witness = Const(name)
            return go(substitute(g.body, {g.var: witness}), universals)
        if isinstance(g, Iff):
            raise ValueError("skolemize expects NNF input (no biconditionals)")
        raise AssertionError(type(g))

    return go(f, ()), new_voc


# --- Quantifier-alternation graph ----------------------------------------


@dataclass(frozen=True)
class QaEdge:
    src: Sort
    dst: Sort
    provenance: str  # "function" | "quantifier"
    detail: str


@dataclass(frozen=True)
class QaGraph:
    vertices: frozenset[Sort]
    edges: frozenset[QaEdge]

    def successors(self, s: Sort) -> set[Sort]:
        return {e.dst for e in self.edges if e.src == s}

    def edge_pairs(self) -> set[tuple[Sort, Sort]]:
        return {(e.src, e.dst) for e in self.edges}


def qa_graph(f: Formula, voc: Vocabulary) -> QaGraph:
    """Sorts as vertices; function-signature and alternation edges.

    Alternation edges are computed on the NNF of ``f``; pass an NNF formula
    to see exactly the edges used (other forms are normalized first).
    """
    g = to_nnf(f)
    edges: set[QaEdge] = set()

    used_functions = {t.func for t in terms_of(g) if isinstance(t, App)}
    for func in sorted(used_functions):
        arg_sorts, ret = voc.functions[func]
        for a in arg_sorts:
            edges.add(QaEdge(a, ret, "function", func))

    def walk(h: Formula, universals: tuple[Sort, ...]) -> None:
        if isinstance(h, (Relation, Eq, Not)):
            return
        if isinstance(h, (And, Or)):
            for p in h.parts:
                walk(p, universals)
        elif isinstance(h, Implies):
            walk(h.lhs, universals)
            walk(h.rhs, universals)
        elif isinstance(h, Forall):
            walk(h.body, universals + (h.sort,))
        elif isinstance(h, Exists):
            for s in set(universals):
                edges.add(QaEdge(s, h.sort, "quantifier", h.var))
            walk(h.body, universals)

    walk(g, ())
    return QaGraph(frozenset(voc.sorts), frozenset(edges))


def cycle_sorts(graph: QaGraph) -> set[Sort]:
    """Sorts lying on some cycle (reachable from themselves)."""
    pairs = graph.edge_pairs()
    out = set()
    for s in graph.vertices:
        seen: set[Sort] = set()
        frontier = {d for (a, d) in pairs if a == s}
        while frontier:
            nxt = frontier.pop()
            if nxt == s:
                out.add(s)
                break
            if nxt in seen:
                continue
            seen.add(nxt)
            frontier |= {d for (a, d) in pairs if a == nxt}
    return out


# --- Ground terms ---------------------------------------------------------


def ground_terms(f: Formula, voc: Vocabulary, sort: Sort) -> set[Term]:
    """Ground terms of ``sort`` occurring in ``f``, with instantiation closure.

    For the infinite-sort analysis, functions ranging into an infinite sort
    with no infinite-sort argument are applied to the collected ground terms
    of their argument sorts and the results are added as ground terms.
    """
    by_sort: dict[Sort, set[Term]] = {s: set() for s in voc.sorts}
    for t in terms_of(f):
        if not term_free_vars(t):
            by_sort[_sort_of_ground(t, voc)].add(t)

    infinite = voc.infinite_sorts
    changed = True
    while changed:
        changed = False
        for func, (arg_sorts, ret) in sorted(voc.functions.items()):
            if ret not in infinite or any(a in infinite for a in arg_sorts):
                continue
            pools = [sorted(by_sort[a], key=repr) for a in arg_sorts]
            if any(not p for p in pools):
                continue
            for combo in itertools.product(*pools):
                t = App(func, tuple(combo))
                if t not in by_sort[ret]:
                    by_sort[ret].add(t)
                    changed = True
    return by_sort.get(sort, set())


def _sort_of_ground(t: Term, voc: Vocabulary) -> Sort:
    if isinstance(t, Const):
        return voc.constants[t.name]
    if isinstance(t, App):
        return voc.functions[t.func][1]
    raise ValueError("not ground")
