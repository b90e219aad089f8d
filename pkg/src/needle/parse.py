"""Problem files: an SMT-LIB2 subset with metadata directives.

Supported commands: ``declare-sort`` (arity 0), ``declare-const``,
``declare-fun``, ``assert``, ``set-info``, plus ignored ``set-logic`` /
``check-sat`` / ``exit``.  Multiple asserts are conjoined.  Metadata:

  (set-info :needle-order <relation>)
  (set-info :needle-infinite-sort <sort>)
  (set-info :needle-auto-order true|false)
"""

from __future__ import annotations

from typing import Optional

from . import fol
from .fol import Formula, Problem, Sort, SortError, Term, Vocabulary
from .sexpr import Atom, SList, Sexpr, SexprError, parse_all

SKOLEM_PREFIX = "sk!"


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.message = message
        self.line = line
        self.column = column


def _err(msg: str, e: Sexpr) -> ParseError:
    return ParseError(msg, e.line, e.column)


def _atom(e: Sexpr, what: str) -> str:
    if not isinstance(e, Atom):
        raise _err(f"expected {what}", e)
    return e.text


class _ProblemBuilder:
    def __init__(self) -> None:
        self.sorts: dict[str, Sort] = {}
        self.constants: dict[str, Sort] = {}
        self.functions: dict[str, tuple[tuple[Sort, ...], Sort]] = {}
        self.relations: dict[str, tuple[Sort, ...]] = {}
        self.assertions: list[Formula] = []
        self.order_relation: Optional[str] = None
        self.declared_infinite: set[str] = set()
        self.auto_order = False

    # -- declarations --

    def check_fresh(self, name: str, e: Sexpr) -> None:
        if name.startswith(SKOLEM_PREFIX):
            raise _err(f"symbol {name} uses the reserved prefix {SKOLEM_PREFIX!r}", e)
        if name in self.constants or name in self.functions or name in self.relations:
            raise _err(f"duplicate declaration of {name}", e)

    def sort(self, name: str, e: Sexpr) -> Sort:
        if name not in self.sorts:
            raise _err(f"undeclared sort {name}", e)
        return self.sorts[name]

    def declare_sort(self, args: tuple[Sexpr, ...], e: Sexpr) -> None:
        if not 1 <= len(args) <= 2:
            raise _err("declare-sort expects a name and optional arity", e)
        name = _atom(args[0], "sort name")
        if len(args) == 2 and _atom(args[1], "arity") != "0":
            raise _err("only arity-0 sorts are supported", args[1])
        if name in self.sorts:
            raise _err(f"duplicate sort {name}", e)
        self.sorts[name] = Sort(name)

    def declare_const(self, args: tuple[Sexpr, ...], e: Sexpr) -> None:
        if len(args) != 2:
            raise _err("declare-const expects a name and a sort", e)
        name = _atom(args[0], "constant name")
        self.check_fresh(name, args[0])
        self.constants[name] = self.sort(_atom(args[1], "sort"), args[1])

    def declare_fun(self, args: tuple[Sexpr, ...], e: Sexpr) -> None:
        if len(args) != 3:
            raise _err("declare-fun expects a name, argument sorts, and a range", e)
        name = _atom(args[0], "function name")
        self.check_fresh(name, args[0])
        if not isinstance(args[1], SList):
            raise _err("expected argument sort list", args[1])
        arg_sorts = tuple(self.sort(_atom(a, "sort"), a) for a in args[1].items)
        range_name = _atom(args[2], "range sort")
        if range_name == "Bool":
            self.relations[name] = arg_sorts
        elif not arg_sorts:
            self.constants[name] = self.sort(range_name, args[2])
        else:
            self.functions[name] = (arg_sorts, self.sort(range_name, args[2]))

    def set_info(self, args: tuple[Sexpr, ...], e: Sexpr) -> None:
        if len(args) != 2:
            return
        key = _atom(args[0], "info keyword")
        if key == ":needle-order":
            self.order_relation = _atom(args[1], "relation symbol")
        elif key == ":needle-infinite-sort":
            self.declared_infinite.add(_atom(args[1], "sort name"))
        elif key == ":needle-auto-order":
            self.auto_order = _atom(args[1], "boolean") == "true"

    # -- terms and formulas --

    def parse_formula(self, e: Sexpr, scope: dict[str, Sort]) -> Formula:
        if isinstance(e, Atom):
            if e.text == "true":
                return fol.TRUE
            if e.text == "false":
                return fol.FALSE
            if e.text in self.relations:
                if self.relations[e.text]:
                    raise _err(f"relation {e.text} expects arguments", e)
                return fol.Relation(e.text, ())
            raise _err(f"expected a formula, found {e.text}", e)
        if not e.items:
            raise _err("empty formula", e)
        head = _atom(e.items[0], "operator")
        args = e.items[1:]
        if head in ("and", "or"):
            parts = tuple(self.parse_formula(a, scope) for a in args)
            return fol.And(parts) if head == "and" else fol.Or(parts)
        if head == "not":
            if len(args) != 1:
                raise _err("not expects one argument", e)
            return fol.Not(self.parse_formula(args[0], scope))
        if head == "=>":
            if len(args) < 2:
                raise _err("=> expects at least two arguments", e)
            out = self.parse_formula(args[-1], scope)
            for a in reversed(args[:-1]):
                out = fol.Implies(self.parse_formula(a, scope), out)
            return out
        if head in ("forall", "exists"):
            if len(args) != 2 or not isinstance(args[0], SList):
                raise _err(f"{head} expects a binder list and a body", e)
            binders: list[tuple[str, Sort]] = []
            for b in args[0].items:
                if not isinstance(b, SList) or len(b.items) != 2:
                    raise _err("expected (name sort) binder", b)
                vname = _atom(b.items[0], "variable")
                binders.append((vname, self.sort(_atom(b.items[1], "sort"), b.items[1])))
            inner = dict(scope)
            inner.update(binders)
            body = self.parse_formula(args[1], inner)
            ctor = fol.Forall if head == "forall" else fol.Exists
            for vname, vsort in reversed(binders):
                body = ctor(vname, vsort, body)
            return body
        if head == "=":
            if len(args) < 2:
                raise _err("= expects at least two arguments", e)
            if self._is_formula(args[0], scope):
                parts = [self.parse_formula(a, scope) for a in args]
                out: Formula = fol.Iff(parts[0], parts[1])
                for p in parts[2:]:
                    out = fol.And((out, fol.Iff(parts[0], p)))
                return out
            terms = [self.parse_term(a, scope) for a in args]
            eqs = [fol.Eq(a, b) for a, b in zip(terms, terms[1:])]
            return eqs[0] if len(eqs) == 1 else fol.And(tuple(eqs))
        if head == "distinct":
            terms = [self.parse_term(a, scope) for a in args]
            pairs = [
                fol.Not(fol.Eq(terms[i], terms[j]))
                for i in range(len(terms))
                for j in range(i + 1, len(terms))
            ]
            return fol.conj(pairs) if pairs else fol.TRUE
        if head in self.relations:
            sig = self.relations[head]
            if len(sig) != len(args):
                raise _err(f"{head} expects {len(sig)} arguments, got {len(args)}", e)
            return fol.Relation(head, tuple(self.parse_term(a, scope) for a in args))
        raise _err(f"unknown operator or relation {head}", e)

    def _is_formula(self, e: Sexpr, scope: dict[str, Sort]) -> bool:
        if isinstance(e, Atom):
            return e.text in ("true", "false") or e.text in self.relations
        if not e.items or not isinstance(e.items[0], Atom):
            return False
        head = e.items[0].text
        return head in ("and", "or", "not", "=>", "=", "distinct", "forall", "exists") or head in self.relations

    def parse_term(self, e: Sexpr, scope: dict[str, Sort]) -> Term:
        if isinstance(e, Atom):
            if e.text in scope:
                return fol.Var(e.text, scope[e.text])
            if e.text in self.constants:
                return fol.Const(e.text)
            raise _err(f"unknown constant or variable {e.text}", e)
        if not e.items:
            raise _err("empty term", e)
        head = _atom(e.items[0], "function symbol")
        if head not in self.functions:
            raise _err(f"unknown function {head}", e)
        sig, _ = self.functions[head]
        args = e.items[1:]
        if len(sig) != len(args):
            raise _err(f"{head} expects {len(sig)} arguments, got {len(args)}", e)
        return fol.App(head, tuple(self.parse_term(a, scope) for a in args))

    # -- assembly --

    def finish(self, source: Optional[str]) -> Problem:
        if not self.assertions:
            raise ParseError("no assertion")
        assertion = fol.conj(self.assertions)
        if self.order_relation is not None and self.order_relation not in self.relations:
            raise ParseError(f"order relation {self.order_relation} is not declared")
        voc = Vocabulary(
            sorts=frozenset(self.sorts.values()),
            constants=dict(self.constants),
            functions=dict(self.functions),
            relations=dict(self.relations),
            order_relation=self.order_relation,
        )
        try:
            fol.check_well_sorted(assertion, voc)
        except SortError as exc:
            raise ParseError(str(exc)) from exc
        if self.auto_order:
            if self.order_relation is None:
                raise ParseError(":needle-auto-order requires :needle-order")
            assertion = fol.And((fol.order_axioms(voc), assertion))
        assertion = fol.ensure_unique_bound_names(assertion)

        infinite = self._infinite_sorts(assertion, voc)
        voc = Vocabulary(
            sorts=voc.sorts,
            constants=voc.constants,
            functions=voc.functions,
            relations=voc.relations,
            order_relation=voc.order_relation,
            infinite_sorts=infinite,
        )
        return Problem(voc, assertion, auto_order=self.auto_order, source=source)

    def _infinite_sorts(self, assertion: Formula, voc: Vocabulary) -> frozenset[Sort]:
        if self.declared_infinite:
            out = set()
            for name in self.declared_infinite:
                if name not in self.sorts:
                    raise ParseError(f"undeclared infinite sort {name}")
                out.add(self.sorts[name])
            return frozenset(out)
        # Default: sorts on a cycle of the quantifier-alternation graph.
        from .transforms import cycle_sorts, qa_graph, to_nnf

        return frozenset(cycle_sorts(qa_graph(to_nnf(assertion), voc)))


def parse_problem(text: str, source: Optional[str] = None) -> Problem:
    """Parse one problem file into a well-sorted :class:`Problem`."""
    builder = _ProblemBuilder()
    try:
        commands = parse_all(text)
    except SexprError as exc:
        raise ParseError(exc.message, exc.line, exc.column) from exc
    for cmd in commands:
        if not isinstance(cmd, SList) or not cmd.items:
            raise _err("expected a command", cmd)
        head = _atom(cmd.items[0], "command")
        args = cmd.items[1:]
        if head == "declare-sort":
            builder.declare_sort(args, cmd)
        elif head == "declare-const":
            builder.declare_const(args, cmd)
        elif head == "declare-fun":
            builder.declare_fun(args, cmd)
        elif head == "assert":
            if len(args) != 1:
                raise _err("assert expects one formula", cmd)
            builder.assertions.append(builder.parse_formula(args[0], {}))
        elif head == "set-info":
            builder.set_info(args, cmd)
        elif head in ("set-logic", "check-sat", "exit", "set-option", "get-model"):
            pass
        else:
            raise _err(f"unsupported command {head}", cmd)
    return builder.finish(source)
