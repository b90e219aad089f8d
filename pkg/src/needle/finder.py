"""Searching a template family of symbolic structures with one solver query.

A template fixes the nodes and finite candidate sets for bounds, function
terms and relation formulas.  The whole family is encoded as a single
quantified arithmetic formula over Boolean choice guards and integer
parameters; a satisfying assignment induces a structure, which is decoded
and re-verified.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from . import lia
from .fol import (
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
    ensure_unique_bound_names,
    free_vars,
)
from .lia import Cmp, IntLit, IntVar, BoolVar, LiaFormula, LiaTerm
from .modelcheck import Truth, lia_var, model_check
from .solver import SolverConfig, Value, check, default_config
from .structure import (
    BOUND_VAR,
    REGULAR,
    REGULAR_BOUND,
    SUMMARY,
    ExplicitElement,
    Node,
    SymbolicStructure,
    TableKey,
    arg_var,
    validate,
)
from .transforms import eliminate_iff, qa_graph, to_nnf


class FinderError(Exception):
    pass


class EncoderMismatch(FinderError):
    """A decoded structure failed re-verification or internal consistency."""


# --- Templates -------------------------------------------------------------


@dataclass(frozen=True)
class Template:
    """A structure domain plus finite candidate sets.

    Candidate formulas/terms use the structure variables x (bounds) and
    x1..xk (interpretations); any other free integer variable is a template
    free variable, instantiated per context by the search.
    """

    vocabulary: Vocabulary
    domain: Mapping[Sort, tuple[Node, ...]]
    bound_candidates: tuple[LiaFormula, ...]
    function_candidates: Mapping[str, tuple[LiaTerm, ...]]
    relation_candidates: Mapping[str, tuple[LiaFormula, ...]]

    def nodes(self, sort: Sort) -> tuple[Node, ...]:
        return self.domain.get(sort, ())

    def sizes(self) -> dict[str, tuple[int, int]]:
        return {
            sort.name: (
                sum(1 for n in nodes if not n.is_summary),
                sum(1 for n in nodes if n.is_summary),
            )
            for sort, nodes in self.domain.items()
        }


def build_domain(voc: Vocabulary, sizes: Mapping[Sort, tuple[int, int]]) -> dict[Sort, tuple[Node, ...]]:
    """Nodes for a size vector: regular nodes first, stable ids."""
    domain: dict[Sort, tuple[Node, ...]] = {}
    for sort in sorted(voc.sorts, key=lambda s: s.name):
        regular, summary = sizes.get(sort, (0, 0))
        if regular + summary <= 0:
            raise FinderError(f"sort {sort.name} needs at least one node")
        if summary > 0 and sort not in voc.infinite_sorts:
            raise FinderError(f"sort {sort.name} is not infinite; summary nodes not allowed")
        nodes = [Node(f"{sort.name}.r{i}", sort, REGULAR) for i in range(regular)]
        nodes += [Node(f"{sort.name}.s{i}", sort, SUMMARY) for i in range(summary)]
        domain[sort] = tuple(nodes)
    return domain


_D = IntVar("d")
_X1, _X2, _X3 = IntVar(arg_var(1)), IntVar(arg_var(2)), IntVar(arg_var(3))

HEURISTIC_BOUNDS: tuple[LiaFormula, ...] = (
    lia.TRUE,
    Cmp(">=", IntVar(BOUND_VAR), _D),
    Cmp("<=", IntVar(BOUND_VAR), _D),
)

HEURISTIC_FUNCTION_TERMS: tuple[LiaTerm, ...] = (
    IntLit(0),
    _X1,
    lia.Add(_X1, IntLit(1)),
    lia.Sub(_X1, IntLit(1)),
)

HEURISTIC_RELATION_FORMULAS: tuple[LiaFormula, ...] = (
    lia.TRUE,
    lia.FALSE,
    Cmp("<", _X1, _X2),
    Cmp("<=", _X1, _X2),
    Cmp(">=", _X1, _X2),
    Cmp(">", _X1, _X2),
    Cmp("=", _X1, IntLit(0)),
    Cmp("=", _X1, _X2),
    Cmp("=", _X1, lia.Add(_X2, IntLit(1))),
    Cmp("=", _X1, lia.Sub(_X2, IntLit(1))),
    lia.LAnd((Cmp("<=", _X1, _X2), Cmp("<", _X2, _X3))),
    lia.LAnd((Cmp("<=", _X3, _X2), Cmp("<", _X2, _X1))),
    lia.LAnd((Cmp("=", _X1, _X2), Cmp("=", _X2, _X3))),
)


def _max_arg_index(x: lia.Lia) -> int:
    out = 0
    for name in lia.free_int_vars(x):
        if name.startswith("x") and name[1:].isdigit():
            out = max(out, int(name[1:]))
    return out


def heuristic_template(
    voc: Vocabulary,
    sizes: Mapping[Sort, tuple[int, int]],
    extra_function_terms: Mapping[str, Sequence[LiaTerm]] = {},
) -> Template:
    """The built-in candidate family over a given size vector.

    Candidates whose argument indices exceed a symbol's arity are excluded;
    per-tuple filtering against regular argument nodes happens at encode
    time.
    """
    domain = build_domain(voc, sizes)
    functions: dict[str, tuple[LiaTerm, ...]] = {}
    for sym, (arg_sorts, _) in voc.functions.items():
        cands = [t for t in HEURISTIC_FUNCTION_TERMS if _max_arg_index(t) <= len(arg_sorts)]
        for extra in extra_function_terms.get(sym, ()):
            if _max_arg_index(extra) > len(arg_sorts):
                raise FinderError(f"extra term for {sym} uses too many argument indices")
            if extra not in cands:
                cands.append(extra)
        functions[sym] = tuple(cands)
    relations = {
        sym: tuple(f for f in HEURISTIC_RELATION_FORMULAS if _max_arg_index(f) <= len(arg_sorts))
        for sym, arg_sorts in voc.relations.items()
    }
    return Template(voc, domain, HEURISTIC_BOUNDS, functions, relations)


def template_free_vars(x: lia.Lia, structure_vars: set[str]) -> list[str]:
    return sorted(lia.free_int_vars(x) - structure_vars)


def filter_candidates(
    candidates: Sequence[lia.Lia], arg_nodes: Sequence[Node]
) -> list[lia.Lia]:
    """Specialize candidates to an argument tuple.

    Regular argument positions have index 0, so x_i is substituted by 0
    there; the simplified results are deduplicated preserving order.
    """
    binding = {
        arg_var(i + 1): IntLit(0) for i, n in enumerate(arg_nodes) if not n.is_summary
    }
    out: list[lia.Lia] = []
    for cand in candidates:
        reduced = lia.simplify(lia.substitute(cand, binding)) if binding else cand
        if reduced not in out:
            out.append(reduced)
    return out


# --- Guard registry --------------------------------------------------------


@dataclass
class GuardRegistry:
    """Auxiliary-variable bookkeeping linking the encoding to structure parts.

    Candidate terms/formulas are stored with template free variables already
    replaced by their context-indexed integer parameters.
    """

    template: Template
    bound_guards: dict[str, list[tuple[str, LiaFormula]]] = field(default_factory=dict)
    const_guards: dict[str, list[tuple[str, Node]]] = field(default_factory=dict)
    func_guards: dict[TableKey, list[tuple[str, Node, LiaTerm]]] = field(default_factory=dict)
    rel_guards: dict[TableKey, list[tuple[str, LiaFormula]]] = field(default_factory=dict)
    order_reversed: dict[TableKey, TableKey] = field(default_factory=dict)
    assignment_guards: list[tuple[str, dict[str, Node]]] = field(default_factory=list)
    int_params: list[str] = field(default_factory=list)
    free_var_names: list[str] = field(default_factory=list)

    def bool_names(self) -> list[str]:
        names = [g for group in self.bound_guards.values() for g, _ in group]
        names += [g for group in self.const_guards.values() for g, _ in group]
        names += [g for group in self.func_guards.values() for g, _, _ in group]
        names += [g for group in self.rel_guards.values() for g, _ in group]
        names += [g for g, _ in self.assignment_guards]
        return names

    def int_names(self) -> list[str]:
        return list(self.int_params) + [lia_var(v) for v in self.free_var_names]


@dataclass(frozen=True)
class FinderOptions:
    symmetry_breaking: bool = True
    order_optimization: bool = True
    simplify_regular: bool = False  # passed through to re-verification


def _param_subst(
    reg: GuardRegistry, x: lia.Lia, structure_vars: set[str], context: str
) -> lia.Lia:
    """Replace template free variables with context-indexed parameters."""
    binding = {}
    for d in template_free_vars(x, structure_vars):
        name = f"d!{context}!{d}"
        if name not in reg.int_params:
            reg.int_params.append(name)
        binding[d] = IntVar(name)
    return lia.substitute(x, binding) if binding else x


def _build_registry(
    f: Formula, template: Template, opts: FinderOptions
) -> GuardRegistry:
    voc = template.vocabulary
    reg = GuardRegistry(template)

    for sort in sorted(template.domain, key=lambda s: s.name):
        for node in template.domain[sort]:
            if not node.is_summary:
                continue
            group = []
            for i, cand in enumerate(template.bound_candidates):
                inst = _param_subst(reg, cand, {BOUND_VAR}, f"n!{node.id}")
                group.append((f"g!b!{node.id}!{i}", inst))
            reg.bound_guards[node.id] = group

    for sym in sorted(voc.constants):
        sort = voc.constants[sym]
        reg.const_guards[sym] = [
            (f"g!c!{sym}!{node.id}", node)
            for node in template.domain.get(sort, ())
            if not node.is_summary
        ]

    for sym in sorted(voc.functions):
        arg_sorts, ret = voc.functions[sym]
        for arg_nodes in _tuples(template, arg_sorts):
            key = (sym, tuple(n.id for n in arg_nodes))
            cands = filter_candidates(template.function_candidates.get(sym, (IntLit(0),)), arg_nodes)
            svars = {arg_var(i + 1) for i in range(len(arg_nodes))}
            group = []
            args_tag = ",".join(key[1])
            for image in template.domain.get(ret, ()):
                for i, cand in enumerate(cands):
                    inst = _param_subst(reg, cand, svars, f"f!{sym}({args_tag})")
                    group.append((f"g!f!{sym}!{args_tag}!{image.id}!{i}", image, inst))
            reg.func_guards[key] = group

    order = voc.order_relation if opts.order_optimization else None
    infinite_bounds = _bounds_always_infinite(template)
    for sym in sorted(voc.relations):
        arg_sorts = voc.relations[sym]
        for arg_nodes in _tuples(template, arg_sorts):
            key = (sym, tuple(n.id for n in arg_nodes))
            if sym == order:
                nodes = template.domain[arg_sorts[0]]
                index = {n.id: i for i, n in enumerate(nodes)}
                if index[key[1][0]] > index[key[1][1]]:
                    reg.order_reversed[key] = (sym, (key[1][1], key[1][0]))
                    continue
            cands = filter_candidates(template.relation_candidates.get(sym, (lia.TRUE, lia.FALSE)), arg_nodes)
            if sym == order and key[1][0] == key[1][1]:
                cands = _order_diagonal_candidates(cands, arg_nodes[0], infinite_bounds)
            svars = {arg_var(i + 1) for i in range(len(arg_nodes))}
            args_tag = ",".join(key[1])
            group = []
            for i, cand in enumerate(cands):
                inst = _param_subst(reg, cand, svars, f"r!{sym}({args_tag})")
                group.append((f"g!r!{sym}!{args_tag}!{i}", inst))
            reg.rel_guards[key] = group

    fv = free_vars(f)
    reg.free_var_names = sorted(fv)
    if fv:
        names = reg.free_var_names
        pools = [template.domain.get(fv[name], ()) for name in names]
        if any(not p for p in pools):
            raise FinderError("template lacks nodes for the sort of a free variable")
        for j, combo in enumerate(itertools.product(*pools)):
            reg.assignment_guards.append((f"g!v!{j}", dict(zip(names, combo))))
    return reg


def _tuples(template: Template, arg_sorts: Sequence[Sort]) -> Iterator[tuple[Node, ...]]:
    return itertools.product(*[template.domain.get(s, ()) for s in arg_sorts])


def _bounds_always_infinite(template: Template) -> bool:
    """True when every bound candidate denotes an infinite set of indices."""
    for cand in template.bound_candidates:
        if cand == lia.TRUE:
            continue
        if (
            isinstance(cand, Cmp)
            and cand.op in ("<", "<=", ">=", ">")
            and (cand.lhs == IntVar(BOUND_VAR) or cand.rhs == IntVar(BOUND_VAR))
        ):
            continue
        return False
    return True


_STRICT_DIAGONALS = (
    Cmp("<", IntVar(arg_var(1)), IntVar(arg_var(2))),
    Cmp(">", IntVar(arg_var(1)), IntVar(arg_var(2))),
)


def _order_diagonal_candidates(
    cands: Sequence[lia.Lia], node: Node, infinite_bounds: bool
) -> list[lia.Lia]:
    """Prune diagonal cells of the designated (strict, linear) order.

    A regular node holds one element, so its diagonal must be false.  A
    summary node with an infinite bound needs a strict total order on
    infinitely many indices, which among comparison shapes only the strict
    comparisons provide.  Applies only when every bound candidate is known
    infinite; arbitrary user bounds keep the full candidate list.
    """
    if not node.is_summary:
        forced = [c for c in cands if c == lia.FALSE]
        return forced or list(cands)
    if not infinite_bounds:
        return list(cands)
    strict = [c for c in cands if c in _STRICT_DIAGONALS]
    return strict or list(cands)


# --- The guarded translation ------------------------------------------------

_GuardedTriple = tuple[LiaFormula, Node, LiaTerm]


def _guarded_terms(
    reg: GuardRegistry, env: Mapping[str, tuple[Node, LiaTerm]], t: Term
) -> list[_GuardedTriple]:
    if isinstance(t, Var):
        node, term = env[t.name]
        return [(lia.TRUE, node, term)]
    if isinstance(t, Const):
        return [(BoolVar(g), node, IntLit(0)) for g, node in reg.const_guards[t.name]]
    combos = itertools.product(*[_guarded_terms(reg, env, a) for a in t.args])
    out: list[_GuardedTriple] = []
    for combo in combos:
        key = (t.func, tuple(n.id for _, n, _ in combo))
        binding = {arg_var(i + 1): s for i, (_, _, s) in enumerate(combo)}
        premises = [p for p, _, _ in combo if p != lia.TRUE]
        for g, image, term in reg.func_guards[key]:
            guard = lia.land([*premises, BoolVar(g)])
            out.append((guard, image, lia.substitute(term, binding)))
    return out


def _node_bound(reg: GuardRegistry, node: Node, at: LiaTerm) -> LiaFormula:
    """The (guarded) bound formula of ``node`` evaluated at index ``at``."""
    if not node.is_summary:
        return Cmp("=", at, IntLit(0))
    clauses = [
        lia.LImplies(BoolVar(g), lia.substitute(psi, {BOUND_VAR: at}))
        for g, psi in reg.bound_guards[node.id]
    ]
    return lia.land(clauses)


def _rel_clauses(
    reg: GuardRegistry, key: TableKey, args: Sequence[LiaTerm]
) -> Iterator[tuple[LiaFormula, LiaFormula]]:
    """(guard, instantiated formula) pairs for a relation cell.

    Reversed order-relation cells derive the complement of the canonical
    orientation with the argument indices swapped.
    """
    if key in reg.order_reversed:
        canon = reg.order_reversed[key]
        swapped = {arg_var(1): args[1], arg_var(2): args[0]}
        for g, psi in reg.rel_guards[canon]:
            derived = lia.simplify(lia.LNot(psi))
            yield BoolVar(g), lia.substitute(derived, swapped)
        return
    binding = {arg_var(i + 1): s for i, s in enumerate(args)}
    for g, psi in reg.rel_guards[key]:
        yield BoolVar(g), lia.substitute(psi, binding)


def _transf(
    reg: GuardRegistry, env: Mapping[str, tuple[Node, LiaTerm]], f: Formula
) -> LiaFormula:
    if isinstance(f, Relation):
        clauses = []
        for combo in itertools.product(*[_guarded_terms(reg, env, a) for a in f.args]):
            key = (f.name, tuple(n.id for _, n, _ in combo))
            premises = [p for p, _, _ in combo if p != lia.TRUE]
            for g, inst in _rel_clauses(reg, key, [s for _, _, s in combo]):
                clauses.append(lia.LImplies(lia.land([*premises, g]), inst))
        return lia.land(clauses)
    if isinstance(f, Eq):
        clauses = []
        for (p1, n1, s1), (p2, n2, s2) in itertools.product(
            _guarded_terms(reg, env, f.lhs), _guarded_terms(reg, env, f.rhs)
        ):
            if n1 != n2:
                eq: LiaFormula = lia.FALSE
            elif not n1.is_summary:
                eq = lia.TRUE
            else:
                eq = Cmp("=", s1, s2)
            premises = [p for p in (p1, p2) if p != lia.TRUE]
            clauses.append(lia.LImplies(lia.land(premises), eq))
        return lia.land(clauses)
    if isinstance(f, Not):
        return lia.LNot(_transf(reg, env, f.body))
    if isinstance(f, And):
        return lia.LAnd(tuple(_transf(reg, env, p) for p in f.parts))
    if isinstance(f, Or):
        return lia.LOr(tuple(_transf(reg, env, p) for p in f.parts))
    if isinstance(f, Implies):
        return lia.LImplies(_transf(reg, env, f.lhs), _transf(reg, env, f.rhs))
    if isinstance(f, Iff):
        raise FinderError("biconditionals must be eliminated before encoding")
    if isinstance(f, (Forall, Exists)):
        is_forall = isinstance(f, Forall)
        nodes = reg.template.domain.get(f.sort, ())
        if not nodes:
            raise FinderError(f"template has no nodes of sort {f.sort.name}")
        xl = lia_var(f.var)
        # Regular nodes have index 0, so their case never mentions the
        # quantified integer; hoisting it keeps the solver query small.
        pieces: list[LiaFormula] = []
        quantified: list[LiaFormula] = []
        for n in nodes:
            if not n.is_summary:
                pieces.append(_transf(reg, {**env, f.var: (n, IntLit(0))}, f.body))
                continue
            bound = _node_bound(reg, n, IntVar(xl))
            body = _transf(reg, {**env, f.var: (n, IntVar(xl))}, f.body)
            quantified.append(lia.LImplies(bound, body) if is_forall else lia.LAnd((bound, body)))
        if quantified:
            inner = lia.land(quantified) if is_forall else lia.lor(quantified)
            pieces.append(lia.ForallInt(xl, inner) if is_forall else lia.ExistsInt(xl, inner))
        return lia.land(pieces) if is_forall else lia.lor(pieces)
    raise FinderError(f"unknown formula node {type(f).__name__}")


def _exactly_one(guards: Sequence[str]) -> LiaFormula:
    at_least = lia.lor([BoolVar(g) for g in guards])
    at_most = [
        lia.LNot(lia.LAnd((BoolVar(a), BoolVar(b))))
        for a, b in itertools.combinations(guards, 2)
    ]
    return lia.land([at_least, *at_most])


def _aux_constraints(reg: GuardRegistry, opts: FinderOptions) -> LiaFormula:
    template = reg.template
    voc = template.vocabulary
    parts: list[LiaFormula] = []

    for node_id in sorted(reg.bound_guards):
        parts.append(_exactly_one([g for g, _ in reg.bound_guards[node_id]]))
    for sym in sorted(reg.const_guards):
        parts.append(_exactly_one([g for g, _ in reg.const_guards[sym]]))
    for key in sorted(reg.func_guards):
        parts.append(_exactly_one([g for g, _, _ in reg.func_guards[key]]))
    for key in sorted(reg.rel_guards):
        parts.append(_exactly_one([g for g, _ in reg.rel_guards[key]]))

    # In-bounds entailment for every guarded function choice.
    for (sym, arg_ids) in sorted(reg.func_guards):
        nodes = [_find_node(template, i) for i in arg_ids]
        for g, image, term in reg.func_guards[(sym, arg_ids)]:
            premise = [
                _node_bound(reg, n, IntVar(arg_var(i + 1)))
                for i, n in enumerate(nodes)
                if n.is_summary
            ]
            conclusion = _node_bound(reg, image, term)
            clause: LiaFormula = lia.LImplies(lia.land(premise), conclusion)
            for i, n in reversed(list(enumerate(nodes))):
                if n.is_summary:
                    clause = lia.ForallInt(arg_var(i + 1), clause)
            parts.append(lia.LImplies(BoolVar(g), clause))

    if opts.symmetry_breaking:
        for sort in sorted(voc.sorts, key=lambda s: s.name):
            regulars = [n for n in template.domain.get(sort, ()) if not n.is_summary]
            consts = sorted(sym for sym, s in voc.constants.items() if s == sort)
            if regulars and consts:
                parts.append(BoolVar(f"g!c!{consts[0]}!{regulars[0].id}"))
            # Same-sort summary nodes are interchangeable; keep only the
            # representative ordered by (bound candidate, first parameter).
            summaries = [n for n in template.domain.get(sort, ()) if n.is_summary]
            for left, right in zip(summaries, summaries[1:]):
                lg, rg = reg.bound_guards[left.id], reg.bound_guards[right.id]
                for i, (gi, _) in enumerate(lg):
                    for j, (gj, _) in enumerate(rg):
                        if i > j:
                            parts.append(lia.LNot(lia.LAnd((BoolVar(gi), BoolVar(gj)))))
                for (gi, psi_i), (gj, psi_j) in zip(lg, rg):
                    dl = sorted(v for v in lia.free_int_vars(psi_i) if v.startswith("d!"))
                    dr = sorted(v for v in lia.free_int_vars(psi_j) if v.startswith("d!"))
                    if dl and dr:
                        parts.append(
                            lia.LImplies(
                                lia.LAnd((BoolVar(gi), BoolVar(gj))),
                                Cmp("<=", IntVar(dl[0]), IntVar(dr[0])),
                            )
                        )

    return lia.land(parts) if parts else lia.TRUE


def _find_node(template: Template, node_id: str) -> Node:
    for nodes in template.domain.values():
        for n in nodes:
            if n.id == node_id:
                return n
    raise FinderError(f"no node {node_id}")


def encode(
    f: Formula, template: Template, opts: FinderOptions = FinderOptions()
) -> tuple[LiaFormula, GuardRegistry]:
    """Build the single search formula: guarded translation plus constraints.

    A satisfying assignment to the registry's variables induces a structure
    in the template (and an assignment for the formula's free variables).
    """
    f = ensure_unique_bound_names(eliminate_iff(f))
    reg = _build_registry(f, template, opts)
    if reg.assignment_guards:
        disjuncts = []
        for g, node_map in reg.assignment_guards:
            env = {
                x: (n, IntVar(lia_var(x)) if n.is_summary else IntLit(0))
                for x, n in node_map.items()
            }
            disjuncts.append(lia.LAnd((BoolVar(g), _transf(reg, env, f))))
        finder = lia.lor(disjuncts)
    else:
        finder = _transf(reg, {}, f)
    encoded = lia.miniscope(lia.simplify(lia.LAnd((finder, _aux_constraints(reg, opts)))))
    return encoded, reg


# --- Decoding ---------------------------------------------------------------


def decode(
    reg: GuardRegistry, model: Mapping[str, Value]
) -> tuple[SymbolicStructure, Optional[dict[str, ExplicitElement]]]:
    """Assemble the structure selected by a satisfying assignment."""
    template = reg.template

    def chosen(group: Iterable[tuple], what: str):
        hits = [entry for entry in group if model.get(entry[0]) is True]
        if len(hits) != 1:
            raise EncoderMismatch(
                f"{what}: expected exactly one true guard, found {len(hits)}"
            )
        return hits[0]

    params = {
        name: IntLit(int(model[name])) for name in reg.int_params if name in model
    }

    def resolve(x: lia.Lia) -> lia.Lia:
        missing = [v for v in lia.free_int_vars(x) if v.startswith("d!") and v not in model]
        if missing:
            raise EncoderMismatch(f"model missing parameters {missing}")
        return lia.simplify(lia.substitute(x, params))

    bounds: dict[str, LiaFormula] = {}
    for sort, nodes in template.domain.items():
        for n in nodes:
            if n.is_summary:
                _, psi = chosen(reg.bound_guards[n.id], f"bound of {n.id}")
                bounds[n.id] = resolve(psi)
            else:
                bounds[n.id] = REGULAR_BOUND

    constants = {}
    for sym, group in reg.const_guards.items():
        _, node = chosen(group, f"constant {sym}")
        constants[sym] = ExplicitElement(node, 0)

    functions: dict[TableKey, tuple[Node, LiaTerm]] = {}
    for key, group in reg.func_guards.items():
        _, image, term = chosen(group, f"function cell {key}")
        functions[key] = (image, resolve(term))

    relations: dict[TableKey, LiaFormula] = {}
    for key, group in reg.rel_guards.items():
        _, psi = chosen(group, f"relation cell {key}")
        relations[key] = resolve(psi)
    for key, canon in reg.order_reversed.items():
        swapped = lia.substitute(
            lia.simplify(lia.LNot(relations[canon])),
            {arg_var(1): IntVar(arg_var(2)), arg_var(2): IntVar(arg_var(1))},
        )
        relations[key] = lia.simplify(swapped)

    structure = SymbolicStructure(template.domain, bounds, constants, functions, relations)

    assignment: Optional[dict[str, ExplicitElement]] = None
    if reg.assignment_guards:
        hits = [(g, m) for g, m in reg.assignment_guards if model.get(g) is True]
        if not hits:
            raise EncoderMismatch("no assignment guard is true")
        _, node_map = hits[0]
        assignment = {}
        for x, node in node_map.items():
            index = int(model.get(lia_var(x), 0)) if node.is_summary else 0
            assignment[x] = ExplicitElement(node, index)
    return structure, assignment


# --- Finding ----------------------------------------------------------------


@dataclass(frozen=True)
class Found:
    structure: SymbolicStructure
    assignment: Optional[dict[str, ExplicitElement]] = None
    stderr: str = ""


@dataclass(frozen=True)
class NoneInFamily:
    stderr: str = ""


@dataclass(frozen=True)
class Undetermined:
    reason: str
    stderr: str = ""


FinderOutcome = Union[Found, NoneInFamily, Undetermined]


def find(
    f: Formula,
    template: Template,
    solver: Optional[SolverConfig] = None,
    opts: FinderOptions = FinderOptions(),
    verify: bool = True,
) -> FinderOutcome:
    """One search over the template; found structures are re-verified."""
    cfg = solver or default_config()
    formula, reg = encode(f, template, opts)
    wanted = reg.bool_names() + reg.int_names()
    script = lia.emit_smtlib(
        formula,
        free_ints=reg.int_names(),
        free_bools=reg.bool_names(),
        logic=cfg.logic,
    )
    result = check(cfg, script, wanted)
    if result.status == "unsat":
        return NoneInFamily(stderr=result.stderr)
    if result.status in ("unknown", "timeout"):
        return Undetermined(reason=result.status, stderr=result.stderr)
    structure, assignment = decode(reg, result.values)
    if verify:
        report = validate(structure, template.vocabulary, cfg)
        if report.violations:
            raise EncoderMismatch(
                "decoded structure is ill-formed: " + "; ".join(map(repr, report.violations))
            )
        verdict = model_check(
            structure, f, assignment, cfg, simplify_regular=opts.simplify_regular
        )
        if verdict is Truth.FALSE:
            raise EncoderMismatch("decoded structure fails re-verification")
        if verdict is Truth.UNDETERMINED:
            return Undetermined(reason="re-verification undetermined", stderr=result.stderr)
    return Found(structure, assignment, stderr=result.stderr)


# --- Enumeration ------------------------------------------------------------


@dataclass(frozen=True)
class EnumerationCaps:
    max_total_nodes: int = 6
    time_budget_s: Optional[float] = None

    def __post_init__(self) -> None:
        if self.max_total_nodes <= 0:
            raise ValueError("node cap must be positive")


@dataclass
class SearchEntry:
    sizes: dict[str, tuple[int, int]]
    outcome: str
    seconds: float
    stderr: str = ""

    def to_json(self) -> dict:
        return {
            "sizes": {s: list(rs) for s, rs in self.sizes.items()},
            "outcome": self.outcome,
            "seconds": round(self.seconds, 3),
            "stderr": self.stderr,
        }


@dataclass
class SearchLog:
    entries: list[SearchEntry] = field(default_factory=list)

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.entries]


def size_vectors(
    sorts: Sequence[Sort],
    infinite: frozenset[Sort],
    self_loops: set[Sort],
    max_total: int,
) -> Iterator[dict[Sort, tuple[int, int]]]:
    """Size vectors ordered by total, spread, summary preference, then lex.

    Every sort gets at least one node; only infinite sorts may have summary
    nodes; sorts whose alternation graph shows a self-loop prefer vectors
    with at least one summary node.
    """
    names = sorted(sorts, key=lambda s: s.name)

    def options(sort: Sort, total: int) -> list[tuple[int, int]]:
        if sort not in infinite:
            return [(total, 0)]
        return [(total - k, k) for k in range(total + 1)]

    vectors = []
    for split in _compositions(max_total, len(names)):
        for combo in itertools.product(
            *[options(s, t) for s, t in zip(names, split)]
        ):
            vectors.append(dict(zip(names, combo)))
    seen = set()
    unique = []
    for v in vectors:
        key = tuple(sorted((s.name, rs) for s, rs in v.items()))
        if key not in seen:
            seen.add(key)
            unique.append(v)

    def sort_key(v: dict[Sort, tuple[int, int]]):
        totals = [r + s for r, s in v.values()]
        penalty = sum(1 for s in v if s in self_loops and v[s][1] == 0)
        lex = tuple(v[s] for s in names)
        return (sum(totals), max(totals) - min(totals), penalty, lex)

    yield from sorted(unique, key=sort_key)


def _compositions(max_total: int, k: int) -> Iterator[tuple[int, ...]]:
    """All ways to give each of k sorts >= 1 node with total <= max_total."""
    for total in range(k, max_total + 1):
        for cuts in itertools.combinations(range(1, total), k - 1):
            parts = []
            prev = 0
            for c in (*cuts, total):
                parts.append(c - prev)
                prev = c
            yield tuple(parts)


def enumerate_find(
    problem: Problem,
    caps: EnumerationCaps = EnumerationCaps(),
    solver: Optional[SolverConfig] = None,
    opts: FinderOptions = FinderOptions(),
    extra_function_terms: Mapping[str, Sequence[LiaTerm]] = {},
) -> tuple[FinderOutcome, SearchLog]:
    """Try heuristic templates over increasing size vectors; first found wins."""
    cfg = solver or default_config()
    voc = problem.vocabulary
    graph = qa_graph(to_nnf(problem.assertion), voc)
    self_loops = {s for (s, t) in graph.edge_pairs() if s == t}
    log = SearchLog()
    deadline = time.monotonic() + caps.time_budget_s if caps.time_budget_s else None
    saw_undetermined = False
    for sizes in size_vectors(
        sorted(voc.sorts, key=lambda s: s.name),
        voc.infinite_sorts,
        self_loops,
        caps.max_total_nodes,
    ):
        if deadline is not None and time.monotonic() > deadline:
            log.entries.append(SearchEntry({s.name: rs for s, rs in sizes.items()}, "skipped: budget", 0.0))
            return Undetermined(reason="time budget exhausted"), log
        template = heuristic_template(voc, sizes, extra_function_terms)
        start = time.monotonic()
        outcome = find(problem.assertion, template, cfg, opts)
        elapsed = time.monotonic() - start
        name_sizes = {s.name: rs for s, rs in sizes.items()}
        if isinstance(outcome, Found):
            log.entries.append(SearchEntry(name_sizes, "found", elapsed, outcome.stderr))
            return outcome, log
        if isinstance(outcome, Undetermined):
            saw_undetermined = True
            log.entries.append(SearchEntry(name_sizes, f"undetermined: {outcome.reason}", elapsed, outcome.stderr))
        else:
            log.entries.append(SearchEntry(name_sizes, "none-in-family", elapsed, outcome.stderr))
    if saw_undetermined:
        return Undetermined(reason="some size vectors undetermined"), log
    return NoneInFamily(), log
