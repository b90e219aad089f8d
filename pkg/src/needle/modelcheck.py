"""Model checking a symbolic structure against a first-order formula.

The structure and an assignment are baked into the formula, yielding a
quantified arithmetic sentence that holds in the integers exactly when the
structure's explication satisfies the input.  An independent brute-force
evaluator over finite structures serves as a differential oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Union

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
    Relation,
    Term,
    Var,
)
from .lia import Cmp, IntLit, IntVar, LiaFormula, LiaTerm
from .solver import SolverConfig, check, default_config
from .structure import (
    BOUND_VAR,
    ExplicitElement,
    FiniteStructure,
    Node,
    SymbolicStructure,
    arg_var,
)


class Truth(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNDETERMINED = "undetermined"


def lia_var(fol_name: str) -> str:
    """The integer variable symbolically corresponding to a logic variable."""
    return f"{fol_name}!lia"


# An assignment entry fixes the node and leaves the index symbolic.
SymbolicAssignment = Mapping[str, tuple[Node, str]]
ExplicitAssignment = Mapping[str, ExplicitElement]
IntAssignment = Mapping[str, int]


def symbolize(v: ExplicitAssignment) -> tuple[dict[str, tuple[Node, str]], dict[str, int]]:
    """Split an explicit assignment into its symbolic part and residual."""
    symbolic = {x: (e.node, lia_var(x)) for x, e in v.items()}
    residual = {lia_var(x): e.index for x, e in v.items()}
    return symbolic, residual


class TransError(Exception):
    pass


def _extend_term(
    s: SymbolicStructure, env: Mapping[str, tuple[Node, LiaTerm]], t: Term
) -> tuple[Node, LiaTerm]:
    """The extension of a symbolic assignment to arbitrary terms."""
    if isinstance(t, Var):
        if t.name not in env:
            raise TransError(f"assignment does not cover variable {t.name}")
        return env[t.name]
    if isinstance(t, Const):
        elem = s.constants[t.name]
        return elem.node, IntLit(elem.index)
    parts = [_extend_term(s, env, a) for a in t.args]
    key = (t.func, tuple(n.id for n, _ in parts))
    if key not in s.functions:
        raise TransError(f"structure has no entry for {t.func} at {key[1]}")
    image, term = s.functions[key]
    binding = {arg_var(i + 1): sub for i, (_, sub) in enumerate(parts)}
    return image, lia.substitute(term, binding)


def trans(
    s: SymbolicStructure,
    v_s: SymbolicAssignment,
    f: Formula,
    simplify_regular: bool = False,
) -> LiaFormula:
    """Translate ``f`` under structure ``s`` and symbolic assignment ``v_s``.

    Requires the biconditional-free connective fragment.  Output quantifier
    structure mirrors the input: each quantifier becomes one integer
    quantifier (unless ``simplify_regular`` drops it for all-regular sorts).
    """
    env: dict[str, tuple[Node, LiaTerm]] = {
        x: (node, IntVar(name)) for x, (node, name) in v_s.items()
    }
    return _trans(s, env, f, simplify_regular)


def _trans(
    s: SymbolicStructure,
    env: Mapping[str, tuple[Node, LiaTerm]],
    f: Formula,
    simp: bool,
) -> LiaFormula:
    if isinstance(f, Relation):
        parts = [_extend_term(s, env, a) for a in f.args]
        key = (f.name, tuple(n.id for n, _ in parts))
        if key not in s.relations:
            raise TransError(f"structure has no entry for {f.name} at {key[1]}")
        body = s.relations[key]
        binding = {arg_var(i + 1): sub for i, (_, sub) in enumerate(parts)}
        return lia.substitute(body, binding)
    if isinstance(f, Eq):
        n1, s1 = _extend_term(s, env, f.lhs)
        n2, s2 = _extend_term(s, env, f.rhs)
        if n1 != n2:
            return lia.FALSE
        return Cmp("=", s1, s2)
    if isinstance(f, Not):
        return lia.LNot(_trans(s, env, f.body, simp))
    if isinstance(f, And):
        return lia.LAnd(tuple(_trans(s, env, p, simp) for p in f.parts))
    if isinstance(f, Or):
        return lia.LOr(tuple(_trans(s, env, p, simp) for p in f.parts))
    if isinstance(f, Implies):
        return lia.LImplies(_trans(s, env, f.lhs, simp), _trans(s, env, f.rhs, simp))
    if isinstance(f, Iff):
        raise TransError("biconditionals must be eliminated before translation")
    if isinstance(f, (Forall, Exists)):
        is_forall = isinstance(f, Forall)
        nodes = s.domain.get(f.sort, ())
        if not nodes:
            raise TransError(f"structure has no nodes of sort {f.sort.name}")
        xl = lia_var(f.var)
        quantified: list[LiaFormula] = []
        outside: list[LiaFormula] = []
        for n in nodes:
            if simp and not n.is_summary:
                body = _trans(s, {**env, f.var: (n, IntLit(0))}, f.body, simp)
                outside.append(body)
                continue
            guard = lia.substitute(s.bounds[n.id], {BOUND_VAR: IntVar(xl)})
            body = _trans(s, {**env, f.var: (n, IntVar(xl))}, f.body, simp)
            quantified.append(
                lia.LImplies(guard, body) if is_forall else lia.LAnd((guard, body))
            )
        pieces = list(outside)
        if quantified:
            inner = lia.land(quantified) if is_forall else lia.lor(quantified)
            pieces.append(lia.ForallInt(xl, inner) if is_forall else lia.ExistsInt(xl, inner))
        if not simp:
            return pieces[0]
        if len(pieces) == 1:
            return pieces[0]
        return lia.LAnd(tuple(pieces)) if is_forall else lia.LOr(tuple(pieces))
    raise TransError(f"unknown formula node {type(f).__name__}")


def model_check(
    s: SymbolicStructure,
    f: Formula,
    v: Optional[ExplicitAssignment] = None,
    solver: Optional[SolverConfig] = None,
    simplify_regular: bool = False,
) -> Truth:
    """Does the explication of ``s`` satisfy ``f`` (under ``v`` if open)?

    A closed translation is decided with a single check-sat: the sentence
    has a fixed truth value in the integers, so satisfiable means true.
    Free variables are pinned to their residual values instead.  Timeouts
    surface as UNDETERMINED, never as false.
    """
    from .transforms import eliminate_iff

    f = eliminate_iff(f)
    v_s, residual = symbolize(v or {})
    translated = trans(s, v_s, f, simplify_regular)
    pins = [Cmp("=", IntVar(name), IntLit(val)) for name, val in sorted(residual.items())]
    query = lia.land([translated, *pins]) if pins else translated
    cfg = solver or default_config()
    free = sorted(lia.free_int_vars(query))
    result = check(cfg, lia.emit_smtlib(query, free_ints=free, logic=cfg.logic))
    if result.status == "sat":
        return Truth.TRUE
    if result.status == "unsat":
        return Truth.FALSE
    return Truth.UNDETERMINED


# --- Brute-force oracle over finite structures -----------------------------


def eval_finite(
    m: FiniteStructure,
    f: Formula,
    assignment: Mapping[str, str] = {},
) -> bool:
    """Tarskian truth by exhaustive quantifier expansion."""

    def eval_term(t: Term, env: Mapping[str, str]) -> str:
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Const):
            return m.constants[t.name]
        args = tuple(eval_term(a, env) for a in t.args)
        return m.functions[(t.func, args)]

    def go(g: Formula, env: Mapping[str, str]) -> bool:
        if isinstance(g, Relation):
            args = tuple(eval_term(a, env) for a in g.args)
            return m.relations.get((g.name, args), False)
        if isinstance(g, Eq):
            return eval_term(g.lhs, env) == eval_term(g.rhs, env)
        if isinstance(g, Not):
            return not go(g.body, env)
        if isinstance(g, And):
            return all(go(p, env) for p in g.parts)
        if isinstance(g, Or):
            return any(go(p, env) for p in g.parts)
        if isinstance(g, Implies):
            return (not go(g.lhs, env)) or go(g.rhs, env)
        if isinstance(g, Iff):
            return go(g.lhs, env) == go(g.rhs, env)
        elems = m.domain[g.sort]
        if isinstance(g, Forall):
            return all(go(g.body, {**env, g.var: e}) for e in elems)
        if isinstance(g, Exists):
            return any(go(g.body, {**env, g.var: e}) for e in elems)
        raise TransError(f"unknown formula node {type(g).__name__}")

    return go(f, dict(assignment))
