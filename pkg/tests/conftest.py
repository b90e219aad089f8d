"""Shared fixtures: solver config, corpus loading, random generators."""

from __future__ import annotations

import itertools
import random
from typing import Iterator, Optional

import pytest

from needle import corpus_path, default_config, parse_problem
from needle.fol import (
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
)
from needle.solver import SolverConfig, SolverError
from needle.structure import FiniteStructure


@pytest.fixture(scope="session")
def solver() -> SolverConfig:
    try:
        return default_config(timeout_ms=60_000)
    except SolverError:
        pytest.skip("no SMT solver available")


@pytest.fixture(scope="session")
def quick_solver() -> SolverConfig:
    try:
        return default_config(timeout_ms=15_000)
    except SolverError:
        pytest.skip("no SMT solver available")


def load_problem(name: str) -> Problem:
    path = corpus_path(name)
    with open(path, "r", encoding="utf-8") as handle:
        return parse_problem(handle.read(), source=path)


def load_text(name: str) -> str:
    with open(corpus_path(name), "r", encoding="utf-8") as handle:
        return handle.read()


# --- Random finite structures and formulas ---------------------------------


def random_vocabulary(rng: random.Random, sorts: int = 1) -> Vocabulary:
    sort_objs = [Sort(f"s{i}") for i in range(sorts)]
    constants = {}
    for i in range(rng.randint(1, 2)):
        constants[f"c{i}"] = rng.choice(sort_objs)
    functions = {}
    for i in range(rng.randint(0, 2)):
        arity = rng.randint(1, 2)
        functions[f"f{i}"] = (
            tuple(rng.choice(sort_objs) for _ in range(arity)),
            rng.choice(sort_objs),
        )
    relations = {}
    for i in range(rng.randint(1, 2)):
        arity = rng.randint(1, 2)
        relations[f"r{i}"] = tuple(rng.choice(sort_objs) for _ in range(arity))
    return Vocabulary(
        sorts=frozenset(sort_objs),
        constants=constants,
        functions=functions,
        relations=relations,
    )


def random_finite_structure(
    rng: random.Random, voc: Vocabulary, max_elems: int = 3
) -> FiniteStructure:
    domain = {
        s: tuple(f"{s.name}e{i}" for i in range(rng.randint(1, max_elems)))
        for s in voc.sorts
    }
    constants = {sym: rng.choice(domain[s]) for sym, s in voc.constants.items()}
    functions = {}
    for sym, (args, ret) in voc.functions.items():
        for combo in itertools.product(*[domain[a] for a in args]):
            functions[(sym, combo)] = rng.choice(domain[ret])
    relations = {}
    for sym, args in voc.relations.items():
        for combo in itertools.product(*[domain[a] for a in args]):
            relations[(sym, combo)] = rng.random() < 0.5
    return FiniteStructure(domain, constants, functions, relations)


def random_term(rng: random.Random, voc: Vocabulary, sort: Sort, scope: dict[str, Sort], depth: int) -> Optional[Term]:
    choices = []
    for name, s in scope.items():
        if s == sort:
            choices.append(Var(name, s))
    for sym, s in voc.constants.items():
        if s == sort:
            choices.append(Const(sym))
    apps = [
        (sym, args)
        for sym, (args, ret) in voc.functions.items()
        if ret == sort
    ]
    if depth > 0 and apps and rng.random() < 0.5:
        sym, args = rng.choice(apps)
        sub = [random_term(rng, voc, a, scope, depth - 1) for a in args]
        if all(s is not None for s in sub):
            return App(sym, tuple(sub))  # type: ignore[arg-type]
    if choices:
        return rng.choice(choices)
    return None


def random_formula(
    rng: random.Random,
    voc: Vocabulary,
    qdepth: int,
    scope: Optional[dict[str, Sort]] = None,
    counter: Optional[itertools.count] = None,
    budget: int = 8,
) -> Formula:
    scope = dict(scope or {})
    counter = counter or itertools.count()

    def atom() -> Formula:
        for _ in range(8):
            if rng.random() < 0.7 and voc.relations:
                sym = rng.choice(sorted(voc.relations))
                args = [
                    random_term(rng, voc, s, scope, 1) for s in voc.relations[sym]
                ]
                if all(a is not None for a in args):
                    return Relation(sym, tuple(args))  # type: ignore[arg-type]
            else:
                sort = rng.choice(sorted(voc.sorts, key=lambda s: s.name))
                lhs = random_term(rng, voc, sort, scope, 1)
                rhs = random_term(rng, voc, sort, scope, 1)
                if lhs is not None and rhs is not None:
                    return Eq(lhs, rhs)
        return And(())

    if budget <= 0:
        return atom()
    roll = rng.random()
    if qdepth > 0 and roll < 0.35:
        sort = rng.choice(sorted(voc.sorts, key=lambda s: s.name))
        var = f"q{next(counter)}"
        body = random_formula(rng, voc, qdepth - 1, {**scope, var: sort}, counter, budget - 1)
        ctor = Forall if rng.random() < 0.5 else Exists
        return ctor(var, sort, body)
    if roll < 0.5:
        return atom()
    kind = rng.randint(0, 4)
    a = random_formula(rng, voc, qdepth, scope, counter, budget - 2)
    b = random_formula(rng, voc, qdepth, scope, counter, budget - 2)
    if kind == 0:
        return Not(a)
    if kind == 1:
        return And((a, b))
    if kind == 2:
        return Or((a, b))
    if kind == 3:
        return Implies(a, b)
    return Iff(a, b)


def all_finite_structures(voc: Vocabulary, max_size: int) -> Iterator[FiniteStructure]:
    """Every structure with per-sort domains up to ``max_size`` elements."""
    sorts = sorted(voc.sorts, key=lambda s: s.name)
    for sizes in itertools.product(range(1, max_size + 1), repeat=len(sorts)):
        domain = {
            s: tuple(f"{s.name}e{i}" for i in range(k)) for s, k in zip(sorts, sizes)
        }
        const_opts = [
            [(sym, e) for e in domain[s]] for sym, s in sorted(voc.constants.items())
        ]
        func_cells = []
        for sym, (args, ret) in sorted(voc.functions.items()):
            for combo in itertools.product(*[domain[a] for a in args]):
                func_cells.append((sym, combo, domain[ret]))
        rel_cells = []
        for sym, args in sorted(voc.relations.items()):
            for combo in itertools.product(*[domain[a] for a in args]):
                rel_cells.append((sym, combo))
        for consts in itertools.product(*const_opts) if const_opts else [()]:
            for fvals in itertools.product(*[opts for _, _, opts in func_cells]) if func_cells else [()]:
                for rbits in itertools.product([False, True], repeat=len(rel_cells)):
                    yield FiniteStructure(
                        domain,
                        dict(consts),
                        {
                            (sym, combo): val
                            for (sym, combo, _), val in zip(func_cells, fvals)
                        },
                        {cell: bit for cell, bit in zip(rel_cells, rbits)},
                    )
