"""Many-sorted first-order logic: vocabularies, terms, formulas."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Optional, Union


class SortError(Exception):
    """A term or formula is not well-sorted over its vocabulary."""


@dataclass(frozen=True, order=True)
class Sort:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Vocabulary:
    """Signature: sorts plus constant, function and relation symbols.

    Symbol names are disjoint across the three kinds.  ``order_relation``
    designates the binary relation axiomatized as a strict linear order on
    the designated infinite sort, when there is one.
    """

    sorts: frozenset[Sort]
    constants: Mapping[str, Sort] = field(default_factory=dict)
    functions: Mapping[str, tuple[tuple[Sort, ...], Sort]] = field(default_factory=dict)
    relations: Mapping[str, tuple[Sort, ...]] = field(default_factory=dict)
    order_relation: Optional[str] = None
    infinite_sorts: frozenset[Sort] = frozenset()

    def __post_init__(self) -> None:
        names = list(self.constants) + list(self.functions) + list(self.relations)
        if len(names) != len(set(names)):
            dup = sorted(n for n in set(names) if names.count(n) > 1)
            raise SortError(f"symbol declared more than once: {', '.join(dup)}")
        for sym, sort in self.constants.items():
            self._check_sort(sym, sort)
        for sym, (args, ret) in self.functions.items():
            for s in (*args, ret):
                self._check_sort(sym, s)
        for sym, args in self.relations.items():
            for s in args:
                self._check_sort(sym, s)
        if self.order_relation is not None:
            sig = self.relations.get(self.order_relation)
            if sig is None:
                raise SortError(f"order relation {self.order_relation} is not declared")
            if len(sig) != 2 or sig[0] != sig[1]:
                raise SortError(
                    f"order relation {self.order_relation} must be binary over one sort"
                )

    def _check_sort(self, sym: str, sort: Sort) -> None:
        if sort not in self.sorts:
            raise SortError(f"symbol {sym} uses undeclared sort {sort.name}")

    def has_symbol(self, name: str) -> bool:
        return name in self.constants or name in self.functions or name in self.relations

    def with_constant(self, name: str, sort: Sort) -> "Vocabulary":
        if self.has_symbol(name):
            raise SortError(f"duplicate declaration of {name}")
        return replace(self, constants={**self.constants, name: sort})

    def with_function(self, name: str, args: tuple[Sort, ...], ret: Sort) -> "Vocabulary":
        if self.has_symbol(name):
            raise SortError(f"duplicate declaration of {name}")
        return replace(self, functions={**self.functions, name: (args, ret)})

    def order_sort(self) -> Optional[Sort]:
        if self.order_relation is None:
            return None
        return self.relations[self.order_relation][0]


# --- Terms ---------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    func: str
    args: tuple["Term", ...]

    def __repr__(self) -> str:
        return f"{self.func}({', '.join(map(repr, self.args))})"


Term = Union[Var, Const, App]


# --- Formulas ------------------------------------------------------------


@dataclass(frozen=True)
class Relation:
    name: str
    args: tuple[Term, ...]

    def __repr__(self) -> str:
        return f"{self.name}({', '.join(map(repr, self.args))})"


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term

    def __repr__(self) -> str:
        return f"({self.lhs!r} = {self.rhs!r})"


@dataclass(frozen=True)
class Not:
    body: "Formula"

    def __repr__(self) -> str:
        return f"~{self.body!r}"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]

    def __repr__(self) -> str:
        return "true" if not self.parts else "(" + " & ".join(map(repr, self.parts)) + ")"


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]

    def __repr__(self) -> str:
        return "false" if not self.parts else "(" + " | ".join(map(repr, self.parts)) + ")"


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"

    def __repr__(self) -> str:
        return f"({self.lhs!r} -> {self.rhs!r})"


@dataclass(frozen=True)
class Iff:
    lhs: "Formula"
    rhs: "Formula"

    def __repr__(self) -> str:
        return f"({self.lhs!r} <-> {self.rhs!r})"


@dataclass(frozen=True)
class Forall:
    var: str
    sort: Sort
    body: "Formula"

    def __repr__(self) -> str:
        return f"(forall {self.var}:{self.sort.name}. {self.body!r})"


@dataclass(frozen=True)
class Exists:
    var: str
    sort: Sort
    body: "Formula"

    def __repr__(self) -> str:
        return f"(exists {self.var}:{self.sort.name}. {self.body!r})"


Formula = Union[Relation, Eq, Not, And, Or, Implies, Iff, Forall, Exists]

TRUE = And(())
FALSE = Or(())


def conj(parts: list[Formula]) -> Formula:
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def disj(parts: list[Formula]) -> Formula:
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


@dataclass(frozen=True)
class Problem:
    """One satisfiability query: a vocabulary, a closed assertion, metadata."""

    vocabulary: Vocabulary
    assertion: Formula
    auto_order: bool = False
    source: Optional[str] = None

    @property
    def infinite_sorts(self) -> frozenset[Sort]:
        return self.vocabulary.infinite_sorts


# --- Traversals ----------------------------------------------------------


def term_sort(t: Term, voc: Vocabulary) -> Sort:
    if isinstance(t, Var):
        return t.sort
    if isinstance(t, Const):
        if t.name not in voc.constants:
            raise SortError(f"undeclared constant {t.name}")
        return voc.constants[t.name]
    if t.func not in voc.functions:
        raise SortError(f"undeclared function {t.func}")
    args, ret = voc.functions[t.func]
    if len(args) != len(t.args):
        raise SortError(f"{t.func} expects {len(args)} arguments, got {len(t.args)}")
    for expected, sub in zip(args, t.args):
        actual = term_sort(sub, voc)
        if actual != expected:
            raise SortError(
                f"argument of {t.func} has sort {actual.name}, expected {expected.name}"
            )
    return ret


def check_well_sorted(f: Formula, voc: Vocabulary, scope: Mapping[str, Sort] = {}) -> None:
    """Raise :class:`SortError` unless ``f`` is well-sorted over ``voc``."""

    def check_term(t: Term) -> Sort:
        if isinstance(t, Var):
            if t.name not in scope_vars:
                raise SortError(f"unbound variable {t.name}")
            if scope_vars[t.name] != t.sort:
                raise SortError(f"variable {t.name} used at the wrong sort")
            return t.sort
        if isinstance(t, Const):
            return term_sort(t, voc)
        args_ret = voc.functions.get(t.func)
        if args_ret is None:
            raise SortError(f"undeclared function {t.func}")
        args, ret = args_ret
        if len(args) != len(t.args):
            raise SortError(f"{t.func} expects {len(args)} arguments, got {len(t.args)}")
        for expected, sub in zip(args, t.args):
            if check_term(sub) != expected:
                raise SortError(f"ill-sorted argument of {t.func}")
        return ret

    scope_vars = dict(scope)
    if isinstance(f, Relation):
        sig = voc.relations.get(f.name)
        if sig is None:
            raise SortError(f"undeclared relation {f.name}")
        if len(sig) != len(f.args):
            raise SortError(f"{f.name} expects {len(sig)} arguments, got {len(f.args)}")
        for expected, sub in zip(sig, f.args):
            if check_term(sub) != expected:
                raise SortError(f"ill-sorted argument of {f.name}")
    elif isinstance(f, Eq):
        if check_term(f.lhs) != check_term(f.rhs):
            raise SortError("equality between different sorts")
    elif isinstance(f, Not):
        check_well_sorted(f.body, voc, scope_vars)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            check_well_sorted(p, voc, scope_vars)
    elif isinstance(f, (Implies, Iff)):
        check_well_sorted(f.lhs, voc, scope_vars)
        check_well_sorted(f.rhs, voc, scope_vars)
    elif isinstance(f, (Forall, Exists)):
        if f.sort not in voc.sorts:
            raise SortError(f"quantifier over undeclared sort {f.sort.name}")
        check_well_sorted(f.body, voc, {**scope_vars, f.var: f.sort})
    else:
        raise SortError(f"unknown formula node {type(f).__name__}")


def term_free_vars(t: Term) -> dict[str, Sort]:
    if isinstance(t, Var):
        return {t.name: t.sort}
    if isinstance(t, Const):
        return {}
    out: dict[str, Sort] = {}
    for a in t.args:
        out.update(term_free_vars(a))
    return out


def free_vars(f: Formula) -> dict[str, Sort]:
    if isinstance(f, Relation):
        out: dict[str, Sort] = {}
        for a in f.args:
            out.update(term_free_vars(a))
        return out
    if isinstance(f, Eq):
        return {**term_free_vars(f.lhs), **term_free_vars(f.rhs)}
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or)):
        out = {}
        for p in f.parts:
            out.update(free_vars(p))
        return out
    if isinstance(f, (Implies, Iff)):
        return {**free_vars(f.lhs), **free_vars(f.rhs)}
    out = free_vars(f.body)
    out.pop(f.var, None)
    return out


def subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not):
        yield from subformulas(f.body)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from subformulas(p)
    elif isinstance(f, (Implies, Iff)):
        yield from subformulas(f.lhs)
        yield from subformulas(f.rhs)
    elif isinstance(f, (Forall, Exists)):
        yield from subformulas(f.body)


def atoms(f: Formula) -> Iterator[Union[Relation, Eq]]:
    for sub in subformulas(f):
        if isinstance(sub, (Relation, Eq)):
            yield sub


def terms_of(f: Formula) -> Iterator[Term]:
    """All terms (including subterms) occurring in atoms of ``f``."""

    def walk(t: Term) -> Iterator[Term]:
        yield t
        if isinstance(t, App):
            for a in t.args:
                yield from walk(a)

    for atom in atoms(f):
        roots = atom.args if isinstance(atom, Relation) else (atom.lhs, atom.rhs)
        for r in roots:
            yield from walk(r)


def substitute_term(t: Term, binding: Mapping[str, Term]) -> Term:
    if isinstance(t, Var):
        return binding.get(t.name, t)
    if isinstance(t, Const):
        return t
    return App(t.func, tuple(substitute_term(a, binding) for a in t.args))


def substitute(f: Formula, binding: Mapping[str, Term]) -> Formula:
    """Substitute terms for free variables.

    Assumes bound names never collide with binding keys or with free
    variables of the replacement terms; the parser's alpha-renaming
    guarantees this for parsed formulas.
    """
    if isinstance(f, Relation):
        return Relation(f.name, tuple(substitute_term(a, binding) for a in f.args))
    if isinstance(f, Eq):
        return Eq(substitute_term(f.lhs, binding), substitute_term(f.rhs, binding))
    if isinstance(f, Not):
        return Not(substitute(f.body, binding))
    if isinstance(f, And):
        return And(tuple(substitute(p, binding) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(substitute(p, binding) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(substitute(f.lhs, binding), substitute(f.rhs, binding))
    if isinstance(f, Iff):
        return Iff(substitute(f.lhs, binding), substitute(f.rhs, binding))
    inner = {k: v for k, v in binding.items() if k != f.var}
    ctor = Forall if isinstance(f, Forall) else Exists
    return ctor(f.var, f.sort, substitute(f.body, inner))


class _Renamer:
    def __init__(self, taken: set[str]):
        self.taken = taken

    def fresh(self, base: str) -> str:
        if base not in self.taken:
            self.taken.add(base)
            return base
        for k in itertools.count(1):
            cand = f"{base}!{k}"
            if cand not in self.taken:
                self.taken.add(cand)
                return cand
        raise AssertionError


def ensure_unique_bound_names(f: Formula, reserved: set[str] = set()) -> Formula:
    """Alpha-rename so every quantifier binds a globally unique name.

    The LIA translation keys integer variables by bound-variable name, so
    shadowing must be eliminated before translating.
    """
    renamer = _Renamer(set(free_vars(f)) | set(reserved))

    def go(g: Formula, env: Mapping[str, str]) -> Formula:
        if isinstance(g, Relation):
            return Relation(g.name, tuple(rename_term(a, env) for a in g.args))
        if isinstance(g, Eq):
            return Eq(rename_term(g.lhs, env), rename_term(g.rhs, env))
        if isinstance(g, Not):
            return Not(go(g.body, env))
        if isinstance(g, And):
            return And(tuple(go(p, env) for p in g.parts))
        if isinstance(g, Or):
            return Or(tuple(go(p, env) for p in g.parts))
        if isinstance(g, Implies):
            return Implies(go(g.lhs, env), go(g.rhs, env))
        if isinstance(g, Iff):
            return Iff(go(g.lhs, env), go(g.rhs, env))
        fresh = renamer.fresh(g.var)
        ctor = Forall if isinstance(g, Forall) else Exists
        return ctor(fresh, g.sort, go(g.body, {**env, g.var: fresh}))

    def rename_term(t: Term, env: Mapping[str, str]) -> Term:
        if isinstance(t, Var):
            return Var(env.get(t.name, t.name), t.sort)
        if isinstance(t, Const):
            return t
        return App(t.func, tuple(rename_term(a, env) for a in t.args))

    return go(f, {})


def order_axioms(voc: Vocabulary) -> Formula:
    """Strict-linear-order axioms for the designated order relation."""
    rel = voc.order_relation
    if rel is None:
        raise SortError("no order relation designated")
    s = voc.relations[rel][0]
    x, y, z = (Var(n, s) for n in ("ax!x", "ax!y", "ax!z"))
    anti = Forall("ax!x", s, Not(Relation(rel, (x, x))))
    trans = Forall(
        "ax!x",
        s,
        Forall(
            "ax!y",
            s,
            Forall(
                "ax!z",
                s,
                Implies(And((Relation(rel, (x, y)), Relation(rel, (y, z)))), Relation(rel, (x, z))),
            ),
        ),
    )
    linear = Forall(
        "ax!x",
        s,
        Forall("ax!y", s, Or((Relation(rel, (x, y)), Relation(rel, (y, x)), Eq(x, y)))),
    )
    return And((anti, trans, linear))
