"""Linear integer arithmetic terms and formulas.

These are the interpreted building blocks inside symbolic structures and
solver encodings: construction, substitution, evaluation over integer
assignments, simplification, and bit-exact SMT-LIB2 emission/parsing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .sexpr import Atom, SList, Sexpr, SexprError, parse_one, quote_symbol


class LiaError(Exception):
    pass


class NeedsSolver(LiaError):
    """Raised when local evaluation meets a quantifier; delegate to a solver."""


# --- Terms ---------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class IntVar:
    name: str


@dataclass(frozen=True)
class Add:
    lhs: "LiaTerm"
    rhs: "LiaTerm"


@dataclass(frozen=True)
class Sub:
    lhs: "LiaTerm"
    rhs: "LiaTerm"


@dataclass(frozen=True)
class Mul:
    """Multiplication by a literal coefficient, keeping terms linear."""

    coeff: int
    term: "LiaTerm"


@dataclass(frozen=True)
class Div:
    """Flooring division by a positive literal (matches SMT-LIB div there)."""

    term: "LiaTerm"
    divisor: int

    def __post_init__(self) -> None:
        if self.divisor <= 0:
            raise LiaError("division only by positive literals")


LiaTerm = Union[IntLit, IntVar, Add, Sub, Mul, Div]


# --- Formulas ------------------------------------------------------------

CMP_OPS = ("<", "<=", "=", ">=", ">")


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: LiaTerm
    rhs: LiaTerm

    def __post_init__(self) -> None:
        if self.op not in CMP_OPS:
            raise LiaError(f"unknown comparison {self.op}")


@dataclass(frozen=True)
class Congruent:
    """lhs = rhs modulo a nonzero literal."""

    lhs: LiaTerm
    rhs: LiaTerm
    modulus: int

    def __post_init__(self) -> None:
        if self.modulus == 0:
            raise LiaError("congruence modulus must be nonzero")


@dataclass(frozen=True)
class BoolVar:
    name: str


@dataclass(frozen=True)
class LNot:
    body: "LiaFormula"


@dataclass(frozen=True)
class LAnd:
    parts: tuple["LiaFormula", ...]


@dataclass(frozen=True)
class LOr:
    parts: tuple["LiaFormula", ...]


@dataclass(frozen=True)
class LImplies:
    lhs: "LiaFormula"
    rhs: "LiaFormula"


@dataclass(frozen=True)
class ForallInt:
    var: str
    body: "LiaFormula"


@dataclass(frozen=True)
class ExistsInt:
    var: str
    body: "LiaFormula"


LiaFormula = Union[Cmp, Congruent, BoolVar, LNot, LAnd, LOr, LImplies, ForallInt, ExistsInt]

TRUE = LAnd(())
FALSE = LOr(())

Lia = Union[LiaTerm, LiaFormula]


def land(parts: Iterable[LiaFormula]) -> LiaFormula:
    ps = tuple(parts)
    return ps[0] if len(ps) == 1 else LAnd(ps)


def lor(parts: Iterable[LiaFormula]) -> LiaFormula:
    ps = tuple(parts)
    return ps[0] if len(ps) == 1 else LOr(ps)


def is_term(x: Lia) -> bool:
    return isinstance(x, (IntLit, IntVar, Add, Sub, Mul, Div))


# --- Free variables ------------------------------------------------------


def free_int_vars(x: Lia) -> set[str]:
    if isinstance(x, IntVar):
        return {x.name}
    if isinstance(x, IntLit):
        return set()
    if isinstance(x, (Add, Sub)):
        return free_int_vars(x.lhs) | free_int_vars(x.rhs)
    if isinstance(x, Mul):
        return free_int_vars(x.term)
    if isinstance(x, Div):
        return free_int_vars(x.term)
    if isinstance(x, (Cmp, Congruent)):
        return free_int_vars(x.lhs) | free_int_vars(x.rhs)
    if isinstance(x, BoolVar):
        return set()
    if isinstance(x, LNot):
        return free_int_vars(x.body)
    if isinstance(x, (LAnd, LOr)):
        out: set[str] = set()
        for p in x.parts:
            out |= free_int_vars(p)
        return out
    if isinstance(x, LImplies):
        return free_int_vars(x.lhs) | free_int_vars(x.rhs)
    if isinstance(x, (ForallInt, ExistsInt)):
        return free_int_vars(x.body) - {x.var}
    raise LiaError(f"unknown node {type(x).__name__}")


def free_bool_vars(f: LiaFormula) -> set[str]:
    if isinstance(f, BoolVar):
        return {f.name}
    if isinstance(f, (Cmp, Congruent)):
        return set()
    if isinstance(f, LNot):
        return free_bool_vars(f.body)
    if isinstance(f, (LAnd, LOr)):
        out: set[str] = set()
        for p in f.parts:
            out |= free_bool_vars(p)
        return out
    if isinstance(f, LImplies):
        return free_bool_vars(f.lhs) | free_bool_vars(f.rhs)
    if isinstance(f, (ForallInt, ExistsInt)):
        return free_bool_vars(f.body)
    raise LiaError(f"unknown node {type(f).__name__}")


def is_quantifier_free(f: LiaFormula) -> bool:
    if isinstance(f, (ForallInt, ExistsInt)):
        return False
    if isinstance(f, LNot):
        return is_quantifier_free(f.body)
    if isinstance(f, (LAnd, LOr)):
        return all(is_quantifier_free(p) for p in f.parts)
    if isinstance(f, LImplies):
        return is_quantifier_free(f.lhs) and is_quantifier_free(f.rhs)
    return True


# --- Substitution --------------------------------------------------------


def substitute(x: Lia, binding: Mapping[str, LiaTerm]) -> Lia:
    """Simultaneous capture-avoiding substitution of terms for variables."""
    if isinstance(x, IntVar):
        return binding.get(x.name, x)
    if isinstance(x, IntLit):
        return x
    if isinstance(x, Add):
        return Add(substitute(x.lhs, binding), substitute(x.rhs, binding))
    if isinstance(x, Sub):
        return Sub(substitute(x.lhs, binding), substitute(x.rhs, binding))
    if isinstance(x, Mul):
        return Mul(x.coeff, substitute(x.term, binding))
    if isinstance(x, Div):
        return Div(substitute(x.term, binding), x.divisor)
    if isinstance(x, Cmp):
        return Cmp(x.op, substitute(x.lhs, binding), substitute(x.rhs, binding))
    if isinstance(x, Congruent):
        return Congruent(substitute(x.lhs, binding), substitute(x.rhs, binding), x.modulus)
    if isinstance(x, BoolVar):
        return x
    if isinstance(x, LNot):
        return LNot(substitute(x.body, binding))
    if isinstance(x, LAnd):
        return LAnd(tuple(substitute(p, binding) for p in x.parts))
    if isinstance(x, LOr):
        return LOr(tuple(substitute(p, binding) for p in x.parts))
    if isinstance(x, LImplies):
        return LImplies(substitute(x.lhs, binding), substitute(x.rhs, binding))
    if isinstance(x, (ForallInt, ExistsInt)):
        inner = {k: v for k, v in binding.items() if k != x.var}
        captured = set().union(*(free_int_vars(v) for v in inner.values())) if inner else set()
        var = x.var
        body = x.body
        if var in captured:
            for k in itertools.count():
                fresh = f"{var}!r{k}"
                if fresh not in captured and fresh not in free_int_vars(body):
                    break
            body = substitute(body, {var: IntVar(fresh)})
            var = fresh
        ctor = ForallInt if isinstance(x, ForallInt) else ExistsInt
        return ctor(var, substitute(body, inner))
    raise LiaError(f"unknown node {type(x).__name__}")


# --- Evaluation ----------------------------------------------------------


def eval_lia(x: Lia, assignment: Mapping[str, int]) -> Union[int, bool]:
    """Evaluate in the standard model of the integers.

    Boolean variables and quantifiers are not handled locally; quantified
    input raises :class:`NeedsSolver` so callers route it to a solver.
    """
    if isinstance(x, IntLit):
        return x.value
    if isinstance(x, IntVar):
        if x.name not in assignment:
            raise LiaError(f"unassigned variable {x.name}")
        return assignment[x.name]
    if isinstance(x, Add):
        return eval_lia(x.lhs, assignment) + eval_lia(x.rhs, assignment)
    if isinstance(x, Sub):
        return eval_lia(x.lhs, assignment) - eval_lia(x.rhs, assignment)
    if isinstance(x, Mul):
        return x.coeff * eval_lia(x.term, assignment)
    if isinstance(x, Div):
        return eval_lia(x.term, assignment) // x.divisor
    if isinstance(x, Cmp):
        a, b = eval_lia(x.lhs, assignment), eval_lia(x.rhs, assignment)
        return {"<": a < b, "<=": a <= b, "=": a == b, ">=": a >= b, ">": a > b}[x.op]
    if isinstance(x, Congruent):
        a, b = eval_lia(x.lhs, assignment), eval_lia(x.rhs, assignment)
        return (a - b) % x.modulus == 0
    if isinstance(x, BoolVar):
        raise LiaError(f"cannot evaluate free Boolean variable {x.name}")
    if isinstance(x, LNot):
        return not eval_lia(x.body, assignment)
    if isinstance(x, LAnd):
        return all(eval_lia(p, assignment) for p in x.parts)
    if isinstance(x, LOr):
        return any(eval_lia(p, assignment) for p in x.parts)
    if isinstance(x, LImplies):
        return (not eval_lia(x.lhs, assignment)) or eval_lia(x.rhs, assignment)
    if isinstance(x, (ForallInt, ExistsInt)):
        raise NeedsSolver("quantified formula requires solver evaluation")
    raise LiaError(f"unknown node {type(x).__name__}")


# --- Simplification ------------------------------------------------------

_CMP_NEG = {"<": ">=", "<=": ">", ">=": "<", ">": "<="}


def simplify(x: Lia) -> Lia:
    """Constant folding and trivial Boolean absorption.

    Used to normalize template candidates after substituting fixed indices;
    negations of comparisons fold to the complement comparison so shapes
    stay within candidate families.
    """
    if isinstance(x, (IntLit, IntVar, BoolVar)):
        return x
    if isinstance(x, Add):
        a, b = simplify(x.lhs), simplify(x.rhs)
        if isinstance(a, IntLit) and isinstance(b, IntLit):
            return IntLit(a.value + b.value)
        if isinstance(b, IntLit) and b.value == 0:
            return a
        if isinstance(a, IntLit) and a.value == 0:
            return b
        return Add(a, b)
    if isinstance(x, Sub):
        a, b = simplify(x.lhs), simplify(x.rhs)
        if isinstance(a, IntLit) and isinstance(b, IntLit):
            return IntLit(a.value - b.value)
        if isinstance(b, IntLit) and b.value == 0:
            return a
        return Sub(a, b)
    if isinstance(x, Mul):
        t = simplify(x.term)
        if isinstance(t, IntLit):
            return IntLit(x.coeff * t.value)
        if x.coeff == 1:
            return t
        return Mul(x.coeff, t)
    if isinstance(x, Div):
        t = simplify(x.term)
        if isinstance(t, IntLit):
            return IntLit(t.value // x.divisor)
        if x.divisor == 1:
            return t
        return Div(t, x.divisor)
    if isinstance(x, Cmp):
        a, b = simplify(x.lhs), simplify(x.rhs)
        if isinstance(a, IntLit) and isinstance(b, IntLit):
            return TRUE if eval_lia(Cmp(x.op, a, b), {}) else FALSE
        return Cmp(x.op, a, b)
    if isinstance(x, Congruent):
        a, b = simplify(x.lhs), simplify(x.rhs)
        if isinstance(a, IntLit) and isinstance(b, IntLit):
            return TRUE if (a.value - b.value) % x.modulus == 0 else FALSE
        return Congruent(a, b, x.modulus)
    if isinstance(x, LNot):
        body = simplify(x.body)
        if body == TRUE:
            return FALSE
        if body == FALSE:
            return TRUE
        if isinstance(body, Cmp) and body.op in _CMP_NEG:
            return Cmp(_CMP_NEG[body.op], body.lhs, body.rhs)
        if isinstance(body, LNot):
            return body.body
        return LNot(body)
    if isinstance(x, (LAnd, LOr)):
        is_and = isinstance(x, LAnd)
        unit, absorber = (TRUE, FALSE) if is_and else (FALSE, TRUE)
        parts = []
        for p in x.parts:
            q = simplify(p)
            if q == absorber:
                return absorber
            if q == unit:
                continue
            if isinstance(q, LAnd if is_and else LOr):
                parts.extend(q.parts)
            else:
                parts.append(q)
        seen: set = set()
        deduped = []
        for p in parts:
            if p not in seen:
                seen.add(p)
                deduped.append(p)
        if not deduped:
            return unit
        if len(deduped) == 1:
            return deduped[0]
        return LAnd(tuple(deduped)) if is_and else LOr(tuple(deduped))
    if isinstance(x, LImplies):
        a, b = simplify(x.lhs), simplify(x.rhs)
        if a == FALSE or b == TRUE:
            return TRUE
        if a == TRUE:
            return b
        if b == FALSE:
            return simplify(LNot(a))
        return LImplies(a, b)
    if isinstance(x, (ForallInt, ExistsInt)):
        ctor = ForallInt if isinstance(x, ForallInt) else ExistsInt
        body = simplify(x.body)
        if body in (TRUE, FALSE):
            return body
        return ctor(x.var, body)
    raise LiaError(f"unknown node {type(x).__name__}")


def miniscope(f: LiaFormula) -> LiaFormula:
    """Push quantifiers toward the atoms that use their variable.

    Equivalence-preserving; shrinking quantifier scopes makes both
    model-based instantiation and quantifier elimination far cheaper on the
    generated encodings, whose quantified bodies are mostly independent
    guard clauses.
    """
    if isinstance(f, (Cmp, Congruent, BoolVar)) or f in (TRUE, FALSE):
        return f
    if isinstance(f, LNot):
        return LNot(miniscope(f.body))
    if isinstance(f, LAnd):
        return simplify(LAnd(tuple(miniscope(p) for p in f.parts)))
    if isinstance(f, LOr):
        return simplify(LOr(tuple(miniscope(p) for p in f.parts)))
    if isinstance(f, LImplies):
        return LImplies(miniscope(f.lhs), miniscope(f.rhs))
    assert isinstance(f, (ForallInt, ExistsInt))
    is_forall = isinstance(f, ForallInt)
    var, body = f.var, miniscope(f.body)
    if var not in free_int_vars(body):
        return body
    if isinstance(body, LNot):
        dual = ExistsInt if is_forall else ForallInt
        return LNot(miniscope(dual(var, body.body)))
    if isinstance(body, LImplies):
        if var not in free_int_vars(body.lhs):
            return LImplies(body.lhs, miniscope((ForallInt if is_forall else ExistsInt)(var, body.rhs)))
        if var not in free_int_vars(body.rhs):
            dual = ExistsInt if is_forall else ForallInt
            return LImplies(miniscope(dual(var, body.lhs)), body.rhs)
    distributive = LAnd if is_forall else LOr
    factoring = LOr if is_forall else LAnd
    if isinstance(body, distributive):
        return simplify(
            distributive(tuple(miniscope((ForallInt if is_forall else ExistsInt)(var, p)) for p in body.parts))
        )
    if isinstance(body, factoring):
        free = [p for p in body.parts if var not in free_int_vars(p)]
        used = [p for p in body.parts if var in free_int_vars(p)]
        if free:
            ctor = ForallInt if is_forall else ExistsInt
            inner = used[0] if len(used) == 1 else factoring(tuple(used))
            return simplify(factoring((*free, miniscope(ctor(var, inner)))))
    return (ForallInt if is_forall else ExistsInt)(var, body)


# --- SMT-LIB emission ----------------------------------------------------


def term_to_sexpr(t: LiaTerm) -> str:
    if isinstance(t, IntLit):
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    if isinstance(t, IntVar):
        return quote_symbol(t.name)
    if isinstance(t, Add):
        return f"(+ {term_to_sexpr(t.lhs)} {term_to_sexpr(t.rhs)})"
    if isinstance(t, Sub):
        return f"(- {term_to_sexpr(t.lhs)} {term_to_sexpr(t.rhs)})"
    if isinstance(t, Mul):
        return f"(* {term_to_sexpr(IntLit(t.coeff))} {term_to_sexpr(t.term)})"
    if isinstance(t, Div):
        return f"(div {term_to_sexpr(t.term)} {t.divisor})"
    raise LiaError(f"not a term: {type(t).__name__}")


def formula_to_sexpr(f: LiaFormula) -> str:
    if f == TRUE:
        return "true"
    if f == FALSE:
        return "false"
    if isinstance(f, Cmp):
        return f"({f.op} {term_to_sexpr(f.lhs)} {term_to_sexpr(f.rhs)})"
    if isinstance(f, Congruent):
        diff = f"(- {term_to_sexpr(f.lhs)} {term_to_sexpr(f.rhs)})"
        return f"(= (mod {diff} {abs(f.modulus)}) 0)"
    if isinstance(f, BoolVar):
        return quote_symbol(f.name)
    if isinstance(f, LNot):
        return f"(not {formula_to_sexpr(f.body)})"
    if isinstance(f, LAnd):
        return f"(and {' '.join(formula_to_sexpr(p) for p in f.parts)})"
    if isinstance(f, LOr):
        return f"(or {' '.join(formula_to_sexpr(p) for p in f.parts)})"
    if isinstance(f, LImplies):
        return f"(=> {formula_to_sexpr(f.lhs)} {formula_to_sexpr(f.rhs)})"
    if isinstance(f, ForallInt):
        return f"(forall (({quote_symbol(f.var)} Int)) {formula_to_sexpr(f.body)})"
    if isinstance(f, ExistsInt):
        return f"(exists (({quote_symbol(f.var)} Int)) {formula_to_sexpr(f.body)})"
    raise LiaError(f"not a formula: {type(f).__name__}")


def to_sexpr(x: Lia) -> str:
    return term_to_sexpr(x) if is_term(x) else formula_to_sexpr(x)


def emit_smtlib(
    f: LiaFormula,
    free_ints: Iterable[str] = (),
    free_bools: Iterable[str] = (),
    logic: str = "ALL",
) -> str:
    """Deterministic self-contained script asserting ``f``.

    Identical inputs produce byte-identical scripts; declarations are
    sorted by name.
    """
    lines = [f"(set-logic {logic})"]
    for name in sorted(set(free_bools)):
        lines.append(f"(declare-const {quote_symbol(name)} Bool)")
    for name in sorted(set(free_ints)):
        lines.append(f"(declare-const {quote_symbol(name)} Int)")
    lines.append(f"(assert {formula_to_sexpr(f)})")
    return "\n".join(lines) + "\n"


# --- SMT-LIB parsing (round-trip of the emitted forms) -------------------


def _sexpr_to_term(e: Sexpr) -> LiaTerm:
    if isinstance(e, Atom):
        if e.text.lstrip("-").isdigit():
            return IntLit(int(e.text))
        return IntVar(e.text)
    if not e.items:
        raise SexprError("empty term", e.line, e.column)
    head = e.items[0]
    if not isinstance(head, Atom):
        raise SexprError("expected operator", e.line, e.column)
    op, args = head.text, e.items[1:]
    if op == "-" and len(args) == 1:
        inner = _sexpr_to_term(args[0])
        if isinstance(inner, IntLit):
            return IntLit(-inner.value)
        return Sub(IntLit(0), inner)
    if op in ("+", "-"):
        ctor = Add if op == "+" else Sub
        out = _sexpr_to_term(args[0])
        for a in args[1:]:
            out = ctor(out, _sexpr_to_term(a))
        return out
    if op == "*":
        if len(args) != 2:
            raise SexprError("* expects two arguments", e.line, e.column)
        a, b = _sexpr_to_term(args[0]), _sexpr_to_term(args[1])
        if isinstance(a, IntLit):
            return Mul(a.value, b)
        if isinstance(b, IntLit):
            return Mul(b.value, a)
        raise SexprError("nonlinear multiplication", e.line, e.column)
    if op == "div":
        if len(args) != 2:
            raise SexprError("div expects two arguments", e.line, e.column)
        d = _sexpr_to_term(args[1])
        if not isinstance(d, IntLit):
            raise SexprError("division only by literals", e.line, e.column)
        return Div(_sexpr_to_term(args[0]), d.value)
    raise SexprError(f"unknown term operator {op}", e.line, e.column)


def _sexpr_to_formula(e: Sexpr) -> LiaFormula:
    if isinstance(e, Atom):
        if e.text == "true":
            return TRUE
        if e.text == "false":
            return FALSE
        return BoolVar(e.text)
    if not e.items:
        raise SexprError("empty formula", e.line, e.column)
    head = e.items[0]
    if not isinstance(head, Atom):
        raise SexprError("expected operator", e.line, e.column)
    op, args = head.text, e.items[1:]
    if op in ("<", "<=", ">=", ">"):
        return Cmp(op, _sexpr_to_term(args[0]), _sexpr_to_term(args[1]))
    if op == "=":
        # recognize the emitted congruence shape (= (mod (- a b) k) 0)
        lhs = args[0]
        if (
            isinstance(lhs, SList)
            and lhs.items
            and isinstance(lhs.items[0], Atom)
            and lhs.items[0].text == "mod"
        ):
            diff, k = lhs.items[1], lhs.items[2]
            if (
                isinstance(diff, SList)
                and diff.items
                and isinstance(diff.items[0], Atom)
                and diff.items[0].text == "-"
                and len(diff.items) == 3
            ):
                return Congruent(
                    _sexpr_to_term(diff.items[1]),
                    _sexpr_to_term(diff.items[2]),
                    int(_as_atom_text(k)),
                )
        return Cmp("=", _sexpr_to_term(args[0]), _sexpr_to_term(args[1]))
    if op == "not":
        return LNot(_sexpr_to_formula(args[0]))
    if op == "and":
        return LAnd(tuple(_sexpr_to_formula(a) for a in args))
    if op == "or":
        return LOr(tuple(_sexpr_to_formula(a) for a in args))
    if op == "=>":
        out = _sexpr_to_formula(args[-1])
        for a in reversed(args[:-1]):
            out = LImplies(_sexpr_to_formula(a), out)
        return out
    if op in ("forall", "exists"):
        binders = args[0]
        if not isinstance(binders, SList):
            raise SexprError("expected binder list", e.line, e.column)
        body = _sexpr_to_formula(args[1])
        ctor = ForallInt if op == "forall" else ExistsInt
        for binder in reversed(binders.items):
            assert isinstance(binder, SList)
            body = ctor(_as_atom_text(binder.items[0]), body)
        return body
    raise SexprError(f"unknown formula operator {op}", e.line, e.column)


def _as_atom_text(e: Sexpr) -> str:
    if not isinstance(e, Atom):
        raise SexprError("expected atom", e.line, e.column)
    return e.text


def parse_term(text: str) -> LiaTerm:
    return _sexpr_to_term(parse_one(text))


def parse_formula(text: str) -> LiaFormula:
    return _sexpr_to_formula(parse_one(text))


def parse_script_assertion(script: str) -> LiaFormula:
    """Extract and parse the single asserted formula of an emitted script."""
    from .sexpr import parse_all

    asserted = [
        e
        for e in parse_all(script)
        if isinstance(e, SList) and e.items and isinstance(e.items[0], Atom) and e.items[0].text == "assert"
    ]
    if len(asserted) != 1:
        raise LiaError(f"expected one assert, found {len(asserted)}")
    return _sexpr_to_formula(asserted[0].items[1])
