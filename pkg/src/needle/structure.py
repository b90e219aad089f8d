"""Symbolic structures: finite descriptions of possibly infinite models.

A structure assigns each sort a finite set of nodes; summary nodes carry a
one-variable arithmetic bound formula selecting a set of integer indices,
regular nodes stand for the single index 0.  Constants pick an explicit
(node, index) element, functions map argument-node tuples to an image node
plus an index term over x1..xk, and relations map argument-node tuples to
an index formula.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from . import lia
from .fol import App, Const, Sort, Term, Vocabulary
from .lia import Cmp, IntLit, IntVar, LiaFormula, LiaTerm
from .solver import SolverConfig, check

REGULAR = "regular"
SUMMARY = "summary"

BOUND_VAR = "x"
REGULAR_BOUND: LiaFormula = Cmp("=", IntVar(BOUND_VAR), IntLit(0))


def arg_var(i: int) -> str:
    """Index variable for the i-th argument position (1-based)."""
    return f"x{i}"


class StructureError(Exception):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    sort: Sort
    kind: str  # REGULAR | SUMMARY

    def __post_init__(self) -> None:
        if self.kind not in (REGULAR, SUMMARY):
            raise StructureError(f"unknown node kind {self.kind}")

    @property
    def is_summary(self) -> bool:
        return self.kind == SUMMARY

    def __repr__(self) -> str:
        return self.id


@dataclass(frozen=True)
class ExplicitElement:
    node: Node
    index: int

    def __repr__(self) -> str:
        return f"<{self.node.id},{self.index}>"


TableKey = tuple[str, tuple[str, ...]]  # (symbol, argument node ids)


@dataclass(frozen=True)
class SymbolicStructure:
    domain: Mapping[Sort, tuple[Node, ...]]
    bounds: Mapping[str, LiaFormula]  # node id -> formula over {x}
    constants: Mapping[str, ExplicitElement]
    functions: Mapping[TableKey, tuple[Node, LiaTerm]]
    relations: Mapping[TableKey, LiaFormula]

    def nodes(self) -> list[Node]:
        return [n for s in sorted(self.domain, key=lambda s: s.name) for n in self.domain[s]]

    def node_by_id(self, node_id: str) -> Node:
        for n in self.nodes():
            if n.id == node_id:
                return n
        raise StructureError(f"no node {node_id}")

    def bound(self, node: Node) -> LiaFormula:
        return self.bounds[node.id]

    def all_regular(self) -> bool:
        return all(not n.is_summary for n in self.nodes())


# --- Well-formedness ------------------------------------------------------

OK = "ok"
VIOLATION = "violation"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class Issue:
    severity: str  # VIOLATION | UNDETERMINED
    where: str
    message: str

    def __repr__(self) -> str:
        return f"[{self.severity}] {self.where}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    @property
    def violations(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == VIOLATION]

    def add(self, severity: str, where: str, message: str) -> None:
        self.issues.append(Issue(severity, where, message))

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "issues": [
                {"severity": i.severity, "where": i.where, "message": i.message}
                for i in self.issues
            ],
        }


class _EntailmentChecker:
    """Solver-backed checks, cached per emitted script."""

    def __init__(self, cfg: Optional[SolverConfig]):
        self.cfg = cfg
        self.cache: dict[str, str] = {}

    def status(self, formula: LiaFormula) -> str:
        """sat/unsat/unknown/timeout for a quantifier-free satisfiability query."""
        if self.cfg is None:
            return "unknown"
        script = lia.emit_smtlib(formula, free_ints=sorted(lia.free_int_vars(formula)),
                                 logic=self.cfg.logic)
        if script not in self.cache:
            self.cache[script] = check(self.cfg, script).status
        return self.cache[script]


def validate(
    s: SymbolicStructure,
    voc: Vocabulary,
    solver: Optional[SolverConfig] = None,
) -> ValidationReport:
    """Check every well-formedness side condition, reporting all failures.

    Bound satisfiability and the function in-bounds entailments are solver
    queries; with no solver configured they are reported as undetermined
    rather than silently accepted.
    """
    report = ValidationReport()
    checker = _EntailmentChecker(solver)

    # Domain shape.
    ids: set[str] = set()
    for sort in voc.sorts:
        nodes = s.domain.get(sort, ())
        if not nodes:
            report.add(VIOLATION, sort.name, "every sort needs at least one node")
        for n in nodes:
            if n.sort != sort:
                report.add(VIOLATION, n.id, f"node listed under {sort.name} has sort {n.sort.name}")
            if n.id in ids:
                report.add(VIOLATION, n.id, "duplicate node id")
            ids.add(n.id)
    for sort in s.domain:
        if sort not in voc.sorts:
            report.add(VIOLATION, sort.name, "domain sort not in vocabulary")

    # Bounds.
    for n in s.nodes():
        b = s.bounds.get(n.id)
        if b is None:
            report.add(VIOLATION, n.id, "missing bound formula")
            continue
        if not lia.is_quantifier_free(b):
            report.add(VIOLATION, n.id, "bound formula must be quantifier-free")
            continue
        extra = lia.free_int_vars(b) - {BOUND_VAR}
        if extra or lia.free_bool_vars(b):
            report.add(VIOLATION, n.id, f"bound may only use {BOUND_VAR}")
            continue
        if not n.is_summary:
            if not _is_regular_bound(b):
                report.add(VIOLATION, n.id, "regular bound must be x = 0")
            continue
        status = checker.status(b)
        if status == "unsat":
            report.add(VIOLATION, n.id, "bound formula is unsatisfiable")
        elif status != "sat":
            report.add(UNDETERMINED, n.id, f"bound satisfiability undetermined ({status})")

    # Constants.
    for sym, sort in sorted(voc.constants.items()):
        elem = s.constants.get(sym)
        if elem is None:
            report.add(VIOLATION, sym, "constant has no interpretation")
            continue
        if elem.node.sort != sort:
            report.add(VIOLATION, sym, f"constant of sort {sort.name} mapped to node of sort {elem.node.sort.name}")
        bound = s.bounds.get(elem.node.id)
        if bound is not None and not lia.eval_lia(bound, {BOUND_VAR: elem.index}):
            report.add(VIOLATION, sym, f"index {elem.index} violates the bound of {elem.node.id}")
    for sym in s.constants:
        if sym not in voc.constants:
            report.add(VIOLATION, sym, "interpretation for undeclared constant")

    # Function tables: totality, typing, free variables, in-bounds entailment.
    for sym, (arg_sorts, ret) in sorted(voc.functions.items()):
        for arg_nodes in _node_tuples(s, arg_sorts):
            key = (sym, tuple(n.id for n in arg_nodes))
            where = _cell_name(sym, key[1])
            entry = s.functions.get(key)
            if entry is None:
                report.add(VIOLATION, where, "missing function table entry")
                continue
            image, term = entry
            if image.sort != ret:
                report.add(VIOLATION, where, f"image node has sort {image.sort.name}, expected {ret.name}")
                continue
            allowed = {arg_var(i + 1) for i in range(len(arg_nodes))}
            if lia.free_int_vars(term) - allowed:
                report.add(VIOLATION, where, "image term uses variables beyond the argument indices")
                continue
            antecedent = [
                lia.substitute(s.bounds[n.id], {BOUND_VAR: IntVar(arg_var(i + 1))})
                for i, n in enumerate(arg_nodes)
                if n.id in s.bounds
            ]
            consequent = lia.substitute(s.bounds.get(image.id, REGULAR_BOUND), {BOUND_VAR: term})
            query = lia.land([*antecedent, lia.LNot(consequent)])
            status = checker.status(query)
            if status == "sat":
                report.add(VIOLATION, where, "image term can leave the bound of the image node")
            elif status != "unsat":
                report.add(UNDETERMINED, where, f"in-bounds entailment undetermined ({status})")
    for (sym, arg_ids) in s.functions:
        if sym not in voc.functions:
            report.add(VIOLATION, sym, "table for undeclared function")

    # Relation tables.
    for sym, arg_sorts in sorted(voc.relations.items()):
        for arg_nodes in _node_tuples(s, arg_sorts):
            key = (sym, tuple(n.id for n in arg_nodes))
            where = _cell_name(sym, key[1])
            formula = s.relations.get(key)
            if formula is None:
                report.add(VIOLATION, where, "missing relation table entry")
                continue
            if not lia.is_quantifier_free(formula):
                report.add(VIOLATION, where, "relation formula must be quantifier-free")
                continue
            allowed = {arg_var(i + 1) for i in range(len(arg_nodes))}
            if lia.free_int_vars(formula) - allowed or lia.free_bool_vars(formula):
                report.add(VIOLATION, where, "relation formula uses variables beyond the argument indices")
    for (sym, arg_ids) in s.relations:
        if sym not in voc.relations:
            report.add(VIOLATION, sym, "table for undeclared relation")

    return report


def _is_regular_bound(b: LiaFormula) -> bool:
    return b in (
        Cmp("=", IntVar(BOUND_VAR), IntLit(0)),
        Cmp("=", IntLit(0), IntVar(BOUND_VAR)),
    )


def _node_tuples(s: SymbolicStructure, arg_sorts: Sequence[Sort]):
    import itertools

    pools = [s.domain.get(sort, ()) for sort in arg_sorts]
    return itertools.product(*pools)


def _cell_name(sym: str, arg_ids: tuple[str, ...]) -> str:
    return f"{sym}({', '.join(arg_ids)})" if arg_ids else sym


# --- Ground-term evaluation and explication -------------------------------


def eval_ground_term(s: SymbolicStructure, t: Term) -> ExplicitElement:
    """Fold the structure's tables over a ground term."""
    node, term = _eval_ground(s, t)
    value = lia.eval_lia(term, {})
    assert isinstance(value, int)
    return ExplicitElement(node, value)


def _eval_ground(s: SymbolicStructure, t: Term) -> tuple[Node, LiaTerm]:
    if isinstance(t, Const):
        elem = s.constants[t.name]
        return elem.node, IntLit(elem.index)
    if isinstance(t, App):
        parts = [_eval_ground(s, a) for a in t.args]
        key = (t.func, tuple(n.id for n, _ in parts))
        if key not in s.functions:
            raise StructureError(f"no table entry for {_cell_name(t.func, key[1])}")
        image, term = s.functions[key]
        binding = {arg_var(i + 1): sub for i, (_, sub) in enumerate(parts)}
        return image, lia.substitute(term, binding)
    raise StructureError("term is not ground")


def explication_window(s: SymbolicStructure, node: Node, lo: int, hi: int) -> list[ExplicitElement]:
    """The node's explicit elements with index in [lo, hi], ascending."""
    if lo > hi:
        raise StructureError("window is empty (lo > hi)")
    bound = s.bounds[node.id]
    return [
        ExplicitElement(node, z)
        for z in range(lo, hi + 1)
        if lia.eval_lia(bound, {BOUND_VAR: z})
    ]


@dataclass(frozen=True)
class FiniteStructure:
    """Explicit finite first-order structure; the brute-force oracle's domain."""

    domain: Mapping[Sort, tuple[str, ...]]
    constants: Mapping[str, str]
    functions: Mapping[tuple[str, tuple[str, ...]], str]
    relations: Mapping[tuple[str, tuple[str, ...]], bool]


def explicate_finite(s: SymbolicStructure) -> FiniteStructure:
    """Materialize an all-regular structure as a finite structure."""
    for n in s.nodes():
        if n.is_summary:
            raise StructureError(f"cannot explicate: {n.id} is a summary node")
    domain = {sort: tuple(n.id for n in nodes) for sort, nodes in s.domain.items()}
    constants = {sym: e.node.id for sym, e in s.constants.items()}
    functions = {}
    for (sym, arg_ids), (image, term) in s.functions.items():
        value = lia.eval_lia(term, {arg_var(i + 1): 0 for i in range(len(arg_ids))})
        if value != 0:
            raise StructureError(f"{_cell_name(sym, arg_ids)} selects a nonzero regular index")
        functions[(sym, arg_ids)] = image.id
    relations = {}
    for (sym, arg_ids), formula in s.relations.items():
        result = lia.eval_lia(formula, {arg_var(i + 1): 0 for i in range(len(arg_ids))})
        relations[(sym, arg_ids)] = bool(result)
    return FiniteStructure(domain, constants, functions, relations)


def encode_finite(m: FiniteStructure) -> SymbolicStructure:
    """The all-regular symbolic encoding of a finite structure."""
    domain: dict[Sort, tuple[Node, ...]] = {}
    node_of: dict[str, Node] = {}
    for sort, elems in m.domain.items():
        nodes = tuple(Node(e, sort, REGULAR) for e in elems)
        domain[sort] = nodes
        node_of.update({e: n for e, n in zip(elems, nodes)})
    bounds = {n.id: REGULAR_BOUND for nodes in domain.values() for n in nodes}
    constants = {sym: ExplicitElement(node_of[e], 0) for sym, e in m.constants.items()}
    functions = {
        key: (node_of[image], IntLit(0)) for key, image in m.functions.items()
    }
    relations = {
        key: (lia.TRUE if held else lia.FALSE) for key, held in m.relations.items()
    }
    return SymbolicStructure(domain, bounds, constants, functions, relations)


# --- Serialization ---------------------------------------------------------


def to_json(s: SymbolicStructure) -> str:
    doc = {
        "sorts": [sort.name for sort in sorted(s.domain, key=lambda x: x.name)],
        "nodes": [
            {
                "id": n.id,
                "sort": n.sort.name,
                "kind": n.kind,
                "bound": lia.formula_to_sexpr(s.bounds[n.id]),
            }
            for n in s.nodes()
        ],
        "constants": {
            sym: {"node": e.node.id, "index": e.index}
            for sym, e in sorted(s.constants.items())
        },
        "functions": {
            sym: [
                {
                    "args": list(arg_ids),
                    "node": s.functions[(sym, arg_ids)][0].id,
                    "term": lia.term_to_sexpr(s.functions[(sym, arg_ids)][1]),
                }
                for (s2, arg_ids) in sorted(s.functions)
                if s2 == sym
            ]
            for sym in sorted({k[0] for k in s.functions})
        },
        "relations": {
            sym: [
                {
                    "args": list(arg_ids),
                    "formula": lia.formula_to_sexpr(s.relations[(sym, arg_ids)]),
                }
                for (s2, arg_ids) in sorted(s.relations)
                if s2 == sym
            ]
            for sym in sorted({k[0] for k in s.relations})
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def from_json(text: str) -> SymbolicStructure:
    doc = json.loads(text)
    sorts = {name: Sort(name) for name in doc["sorts"]}
    nodes: dict[str, Node] = {}
    domain: dict[Sort, list[Node]] = {s: [] for s in sorts.values()}
    bounds: dict[str, LiaFormula] = {}
    for nd in doc["nodes"]:
        sort = sorts[nd["sort"]]
        node = Node(nd["id"], sort, nd["kind"])
        if node.id in nodes:
            raise StructureError(f"duplicate node id {node.id}")
        nodes[node.id] = node
        domain[sort].append(node)
        bounds[node.id] = lia.parse_formula(nd["bound"])
    constants = {
        sym: ExplicitElement(nodes[spec["node"]], int(spec["index"]))
        for sym, spec in doc.get("constants", {}).items()
    }
    functions: dict[TableKey, tuple[Node, LiaTerm]] = {}
    for sym, entries in doc.get("functions", {}).items():
        for entry in entries:
            key = (sym, tuple(entry["args"]))
            functions[key] = (nodes[entry["node"]], lia.parse_term(entry["term"]))
    relations: dict[TableKey, LiaFormula] = {}
    for sym, entries in doc.get("relations", {}).items():
        for entry in entries:
            relations[(sym, tuple(entry["args"]))] = lia.parse_formula(entry["formula"])
    return SymbolicStructure(
        {s: tuple(ns) for s, ns in domain.items()}, bounds, constants, functions, relations
    )


def to_dot(s: SymbolicStructure) -> str:
    """Graphviz rendering: summary nodes double-circled, bot edges omitted.

    Lossy on purpose: relations of arity three or more are listed as graph
    comments instead of edges.
    """
    lines = ["digraph structure {", "  rankdir=LR;"]
    const_of: dict[str, list[str]] = {}
    for sym, e in sorted(s.constants.items()):
        const_of.setdefault(e.node.id, []).append(f"{sym}={e.index}")
    for n in s.nodes():
        label_parts = [n.id]
        if n.id in const_of:
            label_parts.append(", ".join(const_of[n.id]))
        if n.is_summary:
            label_parts.append(lia.formula_to_sexpr(s.bounds[n.id]))
        shape = "doublecircle" if n.is_summary else "circle"
        label = "\\n".join(label_parts)
        lines.append(f'  "{n.id}" [shape={shape}, label="{label}"];')
    for (sym, arg_ids), (image, term) in sorted(s.functions.items()):
        src = arg_ids[0] if arg_ids else image.id
        extra = f"({', '.join(arg_ids)})" if len(arg_ids) > 1 else ""
        lines.append(
            f'  "{src}" -> "{image.id}" [label="{sym}{extra}: {lia.term_to_sexpr(term)}"];'
        )
    for (sym, arg_ids), formula in sorted(s.relations.items()):
        if formula == lia.FALSE:
            continue  # omitted edge
        label = sym if formula == lia.TRUE else f"{sym}: {lia.formula_to_sexpr(formula)}"
        if len(arg_ids) == 2:
            lines.append(f'  "{arg_ids[0]}" -> "{arg_ids[1]}" [label="{label}", style=dashed];')
        elif len(arg_ids) == 1:
            lines.append(f'  "{arg_ids[0]}" -> "{arg_ids[0]}" [label="{label}", style=dotted];')
        else:
            lines.append(f"  // {_cell_name(sym, arg_ids)} = {lia.formula_to_sexpr(formula)}")
    lines.append("}")
    return "\n".join(lines) + "\n"
