"""The decidable fragment: membership checking and a bounded decision procedure.

A member formula pairs strict-linear-order axioms for a designated relation
with a body whose use of the designated "infinite" sort is restricted: one
variable in scope at a time, only self-cycles in the alternation graph, at
most one infinite-sort argument per symbol, and no nesting of infinite-sort
functions.  Satisfiable members always have a structure within a computable
restricted template family of bounded size.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence, Union

from . import lia
from .fol import (
    And,
    App,
    Const,
    Eq,
    Exists,
    Forall,
    Formula,
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
    term_free_vars,
    terms_of,
)
from .finder import (
    EnumerationCaps,
    FinderOptions,
    Found,
    NoneInFamily,
    SearchEntry,
    SearchLog,
    Template,
    Undetermined,
    build_domain,
    find,
)
from .lia import Cmp, IntLit, IntVar
from .solver import SolverConfig, default_config
from .structure import BOUND_VAR, SymbolicStructure, arg_var
from .transforms import ground_terms, qa_graph, skolemize, to_nnf


class OscError(Exception):
    pass


@dataclass(frozen=True)
class Violation:
    condition: int  # 1..5
    where: str
    explanation: str

    def to_json(self) -> dict:
        return {
            "condition": self.condition,
            "where": self.where,
            "explanation": self.explanation,
        }


@dataclass(frozen=True)
class OscReport:
    member: bool
    violations: tuple[Violation, ...]
    infinite_sort: Optional[str]
    order_relation: Optional[str]
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "member": self.member,
            "violations": [v.to_json() for v in self.violations],
            "infinite_sort": self.infinite_sort,
            "order_relation": self.order_relation,
            "notes": list(self.notes),
        }


# --- Order-axiom detection --------------------------------------------------


def _match_antireflexivity(f: Formula, rel: str) -> bool:
    if not isinstance(f, Forall):
        return False
    body = f.body
    return (
        isinstance(body, Not)
        and isinstance(body.body, Relation)
        and body.body.name == rel
        and body.body.args == (Var(f.var, f.sort), Var(f.var, f.sort))
    )


def _match_transitivity(f: Formula, rel: str) -> bool:
    names = []
    g = f
    while isinstance(g, Forall) and len(names) < 3:
        names.append(Var(g.var, g.sort))
        g = g.body
    if len(names) != 3 or not isinstance(g, Implies):
        return False
    x, y, z = names
    if not (isinstance(g.lhs, And) and len(g.lhs.parts) == 2):
        return False
    a, b = g.lhs.parts
    want = {Relation(rel, (x, y)), Relation(rel, (y, z))}
    return {a, b} == want and g.rhs == Relation(rel, (x, z))


def _match_linearity(f: Formula, rel: str) -> bool:
    names = []
    g = f
    while isinstance(g, Forall) and len(names) < 2:
        names.append(Var(g.var, g.sort))
        g = g.body
    if len(names) != 2 or not isinstance(g, Or) or len(g.parts) != 3:
        return False
    x, y = names
    want = {Relation(rel, (x, y)), Relation(rel, (y, x)), Eq(x, y), Eq(y, x)}
    return all(p in want for p in g.parts) and len(set(g.parts)) == 3


def split_order_axioms(assertion: Formula, rel: str) -> tuple[list[Formula], list[Formula]]:
    """Partition top-level conjuncts into order axioms and the rest."""
    conjuncts = list(assertion.parts) if isinstance(assertion, And) else [assertion]
    flat: list[Formula] = []
    for c in conjuncts:
        if isinstance(c, And):
            flat.extend(c.parts)
        else:
            flat.append(c)
    axioms, rest = [], []
    for c in flat:
        if _match_antireflexivity(c, rel) or _match_transitivity(c, rel) or _match_linearity(c, rel):
            axioms.append(c)
        else:
            rest.append(c)
    return axioms, rest


def has_order_axioms(assertion: Formula, rel: str) -> bool:
    axioms, _ = split_order_axioms(assertion, rel)
    kinds = {
        "anti" if _match_antireflexivity(a, rel) else "trans" if _match_transitivity(a, rel) else "lin"
        for a in axioms
    }
    return kinds == {"anti", "trans", "lin"}


# --- Membership --------------------------------------------------------------


def _psi_of(problem: Problem) -> Formula:
    """The assertion with the detected order axioms stripped."""
    rel = problem.vocabulary.order_relation
    if rel is None:
        return problem.assertion
    _, rest = split_order_axioms(problem.assertion, rel)
    return And(tuple(rest))


def _designations(problem: Problem) -> tuple[Optional[Sort], Optional[str], list[Violation]]:
    voc = problem.vocabulary
    order = voc.order_relation
    if order is not None:
        return voc.relations[order][0], order, []
    candidates = sorted(voc.infinite_sorts, key=lambda s: s.name)
    if not candidates:
        return None, None, []
    if len(candidates) > 1:
        return (
            candidates[0],
            None,
            [
                Violation(
                    3,
                    ", ".join(s.name for s in candidates),
                    "more than one sort lies on an alternation cycle; only one infinite sort is allowed",
                )
            ],
        )
    return candidates[0], None, []


def check_membership(problem: Problem) -> OscReport:
    """Classify a problem, reporting each violated condition with its location.

    Conditions on the body are checked after normalization and
    Skolemization, so existentials that reduce to constants or to functions
    of non-infinite universals do not count against the one-variable rule.
    """
    voc = problem.vocabulary
    sinf, order, violations = _designations(problem)
    violations = list(violations)
    notes: list[str] = []

    if sinf is None:
        # No infinite sort in play: plain many-sorted fragment, no order needed.
        notes.append("no infinite sort designated or detected; checked as plain EPR")
        psi1, voc1 = skolemize(to_nnf(problem.assertion), voc)
        violations += _graph_violations(psi1, voc1, None)
        member = not violations
        return OscReport(member, tuple(violations), None, None, tuple(notes))

    if order is not None:
        if not problem.auto_order and not has_order_axioms(problem.assertion, order):
            violations.append(
                Violation(
                    1,
                    order,
                    "strict-linear-order axioms (anti-reflexivity, transitivity, linearity) not found",
                )
            )
    else:
        notes.append(
            f"no order relation designated; {sinf.name} treated as the infinite sort without order axioms"
        )

    psi, voc1 = skolemize(to_nnf(_psi_of(problem)), voc)

    violations += _scope_violations(psi, sinf)
    violations += _graph_violations(psi, voc1, sinf)
    violations += _arity_violations(psi, voc1, sinf, order)
    violations += _nesting_violations(psi, voc1, sinf)

    if not any(v.condition == 2 for v in violations):
        names = {
            v for v, s in _universals(psi) if s == sinf
        }
        if len(names) > 1:
            notes.append(
                "scope-based one-variable reading holds, but the literal single-name "
                f"reading would fail ({', '.join(sorted(names))})"
            )

    member = not violations
    return OscReport(member, tuple(violations), sinf.name, order, tuple(notes))


def _universals(f: Formula) -> Iterator[tuple[str, Sort]]:
    if isinstance(f, Forall):
        yield (f.var, f.sort)
        yield from _universals(f.body)
    elif isinstance(f, Exists):
        yield from _universals(f.body)
    elif isinstance(f, Not):
        yield from _universals(f.body)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from _universals(p)
    elif isinstance(f, Implies):
        yield from _universals(f.lhs)
        yield from _universals(f.rhs)


def _scope_violations(f: Formula, sinf: Sort) -> list[Violation]:
    out: list[Violation] = []

    def walk(g: Formula, in_scope: tuple[str, ...]) -> None:
        if isinstance(g, (Relation, Eq)):
            return
        if isinstance(g, Not):
            walk(g.body, in_scope)
        elif isinstance(g, (And, Or)):
            for p in g.parts:
                walk(p, in_scope)
        elif isinstance(g, Implies):
            walk(g.lhs, in_scope)
            walk(g.rhs, in_scope)
        elif isinstance(g, (Forall, Exists)):
            scope = in_scope
            if g.sort == sinf:
                if in_scope:
                    out.append(
                        Violation(
                            2,
                            f"{g.var} under {', '.join(in_scope)}",
                            f"two variables of sort {sinf.name} are in scope simultaneously",
                        )
                    )
                scope = in_scope + (g.var,)
            walk(g.body, scope)

    walk(f, ())
    return out


def _graph_violations(f: Formula, voc: Vocabulary, sinf: Optional[Sort]) -> list[Violation]:
    out: list[Violation] = []
    graph = qa_graph(f, voc)
    for edge in sorted(graph.edges, key=lambda e: (e.src.name, e.dst.name, e.detail)):
        if sinf is not None and edge.src == sinf and edge.dst != sinf:
            out.append(
                Violation(
                    3,
                    edge.detail,
                    f"edge from {edge.src.name} to {edge.dst.name} leaves the infinite sort",
                )
            )
    # cycles other than the self-loop at the infinite sort
    pairs = {(e.src, e.dst) for e in graph.edges}
    for start in sorted(graph.vertices, key=lambda s: s.name):
        if sinf is not None and start == sinf:
            continue
        seen: set[Sort] = set()
        frontier = {d for (a, d) in pairs if a == start}
        while frontier:
            nxt = frontier.pop()
            if nxt == start:
                out.append(
                    Violation(
                        3,
                        start.name,
                        f"sort {start.name} lies on an alternation cycle but is not the infinite sort",
                    )
                )
                break
            if nxt in seen:
                continue
            seen.add(nxt)
            frontier |= {d for (a, d) in pairs if a == nxt}
    return out


def _used_symbols(f: Formula) -> tuple[set[str], set[str]]:
    funcs = {t.func for t in terms_of(f) if isinstance(t, App)}
    rels = {a.name for a in atoms(f) if isinstance(a, Relation)}
    return funcs, rels


def _arity_violations(
    f: Formula, voc: Vocabulary, sinf: Sort, order: Optional[str]
) -> list[Violation]:
    out = []
    funcs, rels = _used_symbols(f)
    for sym in sorted(funcs):
        arg_sorts, _ = voc.functions[sym]
        if sum(1 for s in arg_sorts if s == sinf) > 1:
            out.append(
                Violation(4, sym, f"function {sym} takes more than one {sinf.name} argument")
            )
    for sym in sorted(rels):
        if sym == order:
            continue
        if sum(1 for s in voc.relations[sym] if s == sinf) > 1:
            out.append(
                Violation(4, sym, f"relation {sym} takes more than one {sinf.name} argument")
            )
    return out


def _nesting_violations(f: Formula, voc: Vocabulary, sinf: Sort) -> list[Violation]:
    out = []
    seen: set[str] = set()
    for t in terms_of(f):
        if not isinstance(t, App):
            continue
        arg_sorts, _ = voc.functions[t.func]
        for sort, arg in zip(arg_sorts, t.args):
            if sort != sinf or isinstance(arg, Var):
                continue
            if term_free_vars(arg):
                key = repr(t)
                if key not in seen:
                    seen.add(key)
                    out.append(
                        Violation(
                            5,
                            key,
                            f"non-ground {sinf.name} term {arg!r} nested under function {t.func}",
                        )
                    )
    return out


# --- Bounds -------------------------------------------------------------------


def ordered_bell(n: int) -> int:
    """Number of weak orderings of an n-element set."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    b = [1]
    for m in range(1, n + 1):
        b.append(sum(math.comb(m, k) * b[m - k] for k in range(1, m + 1)))
    return b[n]


@dataclass(frozen=True)
class OscBounds:
    infinite_sort: Optional[str]
    ground_counts: Mapping[str, int]  # per sort, before the >=1 floor
    ell: int
    m: int
    regular_caps: Mapping[str, int]
    summary_cap: int
    k_range: tuple[int, int]
    factors: tuple[int, int, int]  # (bell, relation, segment) parts of the cap

    def to_json(self) -> dict:
        return {
            "infinite_sort": self.infinite_sort,
            "ground_counts": dict(self.ground_counts),
            "ell": self.ell,
            "m": self.m,
            "regular_caps": dict(self.regular_caps),
            "summary_cap": self.summary_cap,
            "k_range": list(self.k_range),
            "factors": list(self.factors),
        }


def compute_bounds(problem: Problem) -> OscBounds:
    """Size caps for the restricted search space of a member problem."""
    report = check_membership(problem)
    if not report.member:
        raise OscError("bounds are only defined for member problems")
    voc = problem.vocabulary
    sinf = next((s for s in voc.sorts if s.name == report.infinite_sort), None)

    psi, voc1 = skolemize(to_nnf(_psi_of(problem)), voc)
    counts = {
        s.name: len(ground_terms(psi, voc1, s)) for s in sorted(voc1.sorts, key=lambda x: x.name)
    }

    if sinf is None:
        caps = {name: max(1, c) for name, c in counts.items()}
        return OscBounds(None, counts, 0, 0, caps, 0, (0, 0), (0, 0, 0))

    def views(arg_sorts: Sequence[Sort]) -> int:
        total = 1
        for s in arg_sorts:
            if s != sinf:
                total *= max(1, counts[s.name])
        return total

    funcs, rels = _used_symbols(psi)
    ell = sum(
        views(voc1.functions[sym][0])
        for sym in funcs
        if voc1.functions[sym][1] == sinf and sinf in voc1.functions[sym][0]
    )
    m = sum(
        views(voc1.relations[sym])
        for sym in rels
        if sym != voc1.order_relation and sinf in voc1.relations[sym]
    )

    g = counts[sinf.name]
    bell = ordered_bell(ell + 1)
    rel_factor = 2 ** (m * (ell + 1))
    seg_factor = (g + 1) ** (ell + 1)
    caps = {name: max(1, c) for name, c in counts.items()}
    caps[sinf.name] = g
    return OscBounds(
        sinf.name,
        counts,
        ell,
        m,
        caps,
        bell * rel_factor * seg_factor,
        (-ell, ell),
        (bell, rel_factor, seg_factor),
    )


# --- The restricted template family -------------------------------------------


def restricted_function_terms(k_range: tuple[int, int]) -> tuple[lia.LiaTerm, ...]:
    x1 = IntVar(arg_var(1))
    out: list[lia.LiaTerm] = [IntLit(0)]
    lo, hi = k_range
    for k in range(lo, hi + 1):
        if k == 0:
            out.append(x1)
        elif k > 0:
            out.append(lia.Add(x1, IntLit(k)))
        else:
            out.append(lia.Sub(x1, IntLit(-k)))
    return tuple(out)


RESTRICTED_ORDER_FORMULAS: tuple[lia.LiaFormula, ...] = (
    lia.TRUE,
    lia.FALSE,
    Cmp("<", IntVar(arg_var(1)), IntVar(arg_var(2))),
    Cmp("<=", IntVar(arg_var(1)), IntVar(arg_var(2))),
)


def restricted_template(
    problem: Problem, bounds: OscBounds, sizes: Mapping[Sort, tuple[int, int]]
) -> Template:
    voc = problem.vocabulary
    domain = build_domain(voc, sizes)
    functions = {
        sym: restricted_function_terms(bounds.k_range) for sym in voc.functions
    }
    relations = {
        sym: (RESTRICTED_ORDER_FORMULAS if sym == voc.order_relation else (lia.TRUE, lia.FALSE))
        for sym in voc.relations
    }
    return Template(voc, domain, (lia.TRUE,), functions, relations)


def osc_templates(
    problem: Problem, bounds: OscBounds, max_total_nodes: int
) -> Iterator[tuple[Template, bool]]:
    """The restricted family in search order, capped by ``max_total_nodes``.

    Yields (template, within_theoretical_caps); completeness of an
    exhausted enumeration also needs every capped vector to have been
    tried, which :func:`decide` tracks.
    """
    voc = problem.vocabulary
    sinf = bounds.infinite_sort
    names = sorted(voc.sorts, key=lambda s: s.name)

    def per_sort_options(sort: Sort, total: int) -> list[tuple[int, int]]:
        if sort.name != sinf:
            return [(total, 0)] if total <= bounds.regular_caps.get(sort.name, total) else []
        out = []
        for summary in range(0, total + 1):
            regular = total - summary
            if regular <= bounds.regular_caps.get(sort.name, 0) and summary <= bounds.summary_cap:
                out.append((regular, summary))
        return out

    from .finder import _compositions

    vectors = []
    for split in _compositions(max_total_nodes, len(names)):
        for combo in itertools.product(
            *[per_sort_options(s, t) for s, t in zip(names, split)]
        ):
            vectors.append(dict(zip(names, combo)))

    def sort_key(v):
        totals = [r + s for r, s in v.values()]
        lex = tuple(v[s] for s in names)
        penalty = sum(
            1 for s in v if s.name == sinf and v[s][1] == 0
        )
        return (sum(totals), max(totals) - min(totals), penalty, lex)

    seen = set()
    for v in sorted(vectors, key=sort_key):
        key = tuple(sorted((s.name, rs) for s, rs in v.items()))
        if key in seen:
            continue
        seen.add(key)
        yield restricted_template(problem, bounds, v), True


def _total_vector_count(problem: Problem, bounds: OscBounds) -> int:
    """Size of the full restricted family (number of size vectors)."""
    total = 1
    for sort in problem.vocabulary.sorts:
        if sort.name == bounds.infinite_sort:
            regular = bounds.regular_caps.get(sort.name, 0)
            options = (regular + 1) * (bounds.summary_cap + 1) - 1  # minus all-zero
        else:
            options = bounds.regular_caps.get(sort.name, 1)
        total *= options
    return total


# --- Decision procedure --------------------------------------------------------


RESTRICTED_SHAPES_NOTE = "structure uses only restricted candidate shapes"


def uses_restricted_shapes(s: SymbolicStructure) -> bool:
    """Post-decode sanity: interpretation shapes stay in the restricted family."""
    x = IntVar(BOUND_VAR)
    for node in s.nodes():
        b = s.bounds[node.id]
        if node.is_summary and b != lia.TRUE:
            return False
    for image, term in s.functions.values():
        if not _is_offset_term(term):
            return False
    for psi in s.relations.values():
        if psi in (lia.TRUE, lia.FALSE):
            continue
        if isinstance(psi, Cmp) and isinstance(psi.lhs, IntVar) and isinstance(psi.rhs, IntVar):
            continue
        return False
    return True


def _is_offset_term(term: lia.LiaTerm) -> bool:
    if isinstance(term, (IntLit, IntVar)):
        return True
    if isinstance(term, (lia.Add, lia.Sub)):
        return isinstance(term.lhs, (IntVar, IntLit)) and isinstance(term.rhs, IntLit)
    return False


@dataclass(frozen=True)
class Sat:
    structure: SymbolicStructure


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class ResourceExhausted:
    progress: str


DecideOutcome = Union[Sat, Unsat, ResourceExhausted]


def decide(
    problem: Problem,
    caps: EnumerationCaps = EnumerationCaps(),
    solver: Optional[SolverConfig] = None,
    opts: FinderOptions = FinderOptions(),
) -> tuple[DecideOutcome, SearchLog]:
    """Bounded satisfiability decision for member problems.

    Sat as soon as a verified structure is found.  Unsat only when the full
    restricted family was exhausted within the caps; if the caps bind first,
    the honest answer is ResourceExhausted.
    """
    report = check_membership(problem)
    if not report.member:
        raise OscError("decide requires a member problem; run check_membership first")
    bounds = compute_bounds(problem)
    cfg = solver or default_config()
    log = SearchLog()
    deadline = time.monotonic() + caps.time_budget_s if caps.time_budget_s else None
    tried = 0
    undetermined = 0
    for template, _ in osc_templates(problem, bounds, caps.max_total_nodes):
        sizes = template.sizes()
        if deadline is not None and time.monotonic() > deadline:
            return (
                ResourceExhausted(f"time budget exhausted after {tried} templates"),
                log,
            )
        start = time.monotonic()
        outcome = find(problem.assertion, template, cfg, opts)
        elapsed = time.monotonic() - start
        tried += 1
        if isinstance(outcome, Found):
            if not uses_restricted_shapes(outcome.structure):
                raise OscError("decoded structure leaves the restricted shape family")
            log.entries.append(SearchEntry(sizes, "found", elapsed, outcome.stderr))
            return Sat(outcome.structure), log
        if isinstance(outcome, Undetermined):
            undetermined += 1
            log.entries.append(SearchEntry(sizes, f"undetermined: {outcome.reason}", elapsed, outcome.stderr))
        else:
            log.entries.append(SearchEntry(sizes, "none-in-family", elapsed, outcome.stderr))
    full = _total_vector_count(problem, bounds)
    if undetermined == 0 and tried >= full:
        return Unsat(), log
    return (
        ResourceExhausted(
            f"tried {tried} of {full} size vectors within caps"
            + (f"; {undetermined} undetermined" if undetermined else "")
        ),
        log,
    )
