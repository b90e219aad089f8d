"""Command-line interface: check, find, classify, decide, validate."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import lia
from .fol import Problem, Sort
from .finder import (
    EnumerationCaps,
    FinderOptions,
    Found,
    NoneInFamily,
    Template,
    Undetermined,
    build_domain,
    enumerate_find,
    find,
    heuristic_template,
)
from .modelcheck import Truth, model_check
from .osc import ResourceExhausted, Sat, Unsat, check_membership, compute_bounds, decide
from .parse import ParseError, parse_problem
from .solver import SolverConfig, SolverError, config_for, default_config
from .structure import from_json, to_dot, to_json, validate

EX_USAGE = 64
EX_NOINPUT = 66
EX_UNAVAILABLE = 69


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EX_USAGE)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", help="path to an SMT-LIB2 solver executable")
    p.add_argument("--timeout-ms", type=int, default=60_000, help="per-query solver timeout")
    p.add_argument("--logic", default="ALL", help="SMT-LIB logic header")
    p.add_argument("--seed", type=int, help="random seed passed to the solver")


def _finder_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-total-nodes", type=int, default=6)
    p.add_argument("--sizes", help="fixed size vector, e.g. round=1/1,value=2")
    p.add_argument("--template", help="template description file (JSON)")
    p.add_argument(
        "--extra-fn-term",
        action="append",
        default=[],
        metavar="SYM=TERM",
        help="extra candidate term for a function, e.g. plus='(+ x1 x2)'",
    )
    p.add_argument("--no-symmetry-breaking", action="store_true")
    p.add_argument("--no-order-optimization", action="store_true")
    p.add_argument("--regular-simplification", action="store_true")
    p.add_argument("--time-budget-s", type=float, help="overall search budget")


def _build_parser() -> _Parser:
    parser = _Parser(prog="needle", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="model-check a structure against a problem")
    p_check.add_argument("structure")
    p_check.add_argument("problem")
    p_check.add_argument("--auto-order", metavar="REL")
    p_check.add_argument("--regular-simplification", action="store_true")
    _solver_flags(p_check)

    p_find = sub.add_parser("find", help="search for a satisfying structure")
    p_find.add_argument("problem")
    p_find.add_argument("--auto-order", metavar="REL")
    p_find.add_argument("--format", choices=("json", "dot", "text"), default="text")
    _finder_flags(p_find)
    _solver_flags(p_find)

    p_classify = sub.add_parser("classify", help="fragment membership report")
    p_classify.add_argument("problem")
    p_classify.add_argument("--auto-order", metavar="REL")
    p_classify.add_argument("--bounds", action="store_true", help="include size caps for members")

    p_decide = sub.add_parser("decide", help="bounded decision for member problems")
    p_decide.add_argument("problem")
    p_decide.add_argument("--auto-order", metavar="REL")
    p_decide.add_argument("--format", choices=("json", "dot", "text"), default="text")
    p_decide.add_argument("--max-total-nodes", type=int, default=6)
    p_decide.add_argument("--time-budget-s", type=float)
    p_decide.add_argument("--no-symmetry-breaking", action="store_true")
    p_decide.add_argument("--no-order-optimization", action="store_true")
    _solver_flags(p_decide)

    p_validate = sub.add_parser("validate", help="well-formedness of a structure file")
    p_validate.add_argument("structure")
    p_validate.add_argument("problem", help="problem file supplying the vocabulary")
    p_validate.add_argument("--auto-order", metavar="REL")
    _solver_flags(p_validate)

    return parser


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _load_problem(path: str, auto_order: Optional[str]) -> Problem:
    text = _read(path)
    if auto_order:
        text = (
            f"(set-info :needle-order {auto_order})\n"
            "(set-info :needle-auto-order true)\n" + text
        )
    return parse_problem(text, source=path)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    extra: tuple[str, ...] = ()
    if args.solver:
        if args.seed is not None:
            extra = _seed_args(args.solver, args.seed)
        return config_for(args.solver, args.timeout_ms, args.logic, extra)
    cfg = default_config(args.timeout_ms, args.logic)
    if args.seed is not None:
        cfg = SolverConfig(
            cfg.executable,
            cfg.args + _seed_args(cfg.executable, args.seed),
            cfg.timeout_ms,
            cfg.logic,
            cfg.check_command,
        )
    return cfg


def _seed_args(executable: str, seed: int) -> tuple[str, ...]:
    base = os.path.basename(executable)
    if "z3" in base:
        return (f"smt.random_seed={seed}", f"sat.random_seed={seed}")
    if "cvc" in base:
        return (f"--seed={seed}",)
    return ()


def _parse_sizes(spec: str, problem: Problem) -> dict[Sort, tuple[int, int]]:
    by_name = {s.name: s for s in problem.vocabulary.sorts}
    sizes: dict[Sort, tuple[int, int]] = {}
    for chunk in spec.split(","):
        if "=" not in chunk:
            raise ParseError(f"bad --sizes entry {chunk!r}; expected sort=reg/sum")
        name, counts = chunk.split("=", 1)
        name = name.strip()
        if name not in by_name:
            raise ParseError(f"unknown sort {name!r} in --sizes")
        if "/" in counts:
            reg_s, sum_s = counts.split("/", 1)
        else:
            reg_s, sum_s = counts, "0"
        sizes[by_name[name]] = (int(reg_s), int(sum_s))
    missing = sorted(set(by_name) - {s.name for s in sizes})
    if missing:
        raise ParseError(f"--sizes missing sorts: {', '.join(missing)}")
    return sizes


def _parse_extra_terms(entries: Sequence[str]) -> dict[str, list[lia.LiaTerm]]:
    out: dict[str, list[lia.LiaTerm]] = {}
    for entry in entries:
        if "=" not in entry:
            raise ParseError(f"bad --extra-fn-term {entry!r}; expected SYM=TERM")
        sym, text = entry.split("=", 1)
        out.setdefault(sym.strip(), []).append(lia.parse_term(text.strip()))
    return out


def _load_template(path: str, problem: Problem) -> Template:
    doc = json.loads(_read(path))
    by_name = {s.name: s for s in problem.vocabulary.sorts}
    sizes = {}
    for name, spec in doc["sizes"].items():
        if name not in by_name:
            raise ParseError(f"unknown sort {name!r} in template")
        sizes[by_name[name]] = (int(spec.get("regular", 0)), int(spec.get("summary", 0)))
    domain = build_domain(problem.vocabulary, sizes)
    bounds = tuple(lia.parse_formula(b) for b in doc.get("bounds", ["true"]))
    functions = {
        sym: tuple(lia.parse_term(t) for t in terms)
        for sym, terms in doc.get("functions", {}).items()
    }
    relations = {
        sym: tuple(lia.parse_formula(t) for t in forms)
        for sym, forms in doc.get("relations", {}).items()
    }
    for sym in problem.vocabulary.functions:
        functions.setdefault(sym, (lia.IntLit(0),))
    for sym in problem.vocabulary.relations:
        relations.setdefault(sym, (lia.TRUE, lia.FALSE))
    return Template(problem.vocabulary, domain, bounds, functions, relations)


def _emit_structure(structure, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(to_json(structure))
    elif fmt == "dot":
        sys.stdout.write(to_dot(structure))
    else:
        sys.stdout.write(to_json(structure))


def _finder_options(args: argparse.Namespace) -> FinderOptions:
    return FinderOptions(
        symmetry_breaking=not args.no_symmetry_breaking,
        order_optimization=not args.no_order_optimization,
        simplify_regular=getattr(args, "regular_simplification", False),
    )


def _cmd_check(args: argparse.Namespace) -> int:
    problem = _load_problem(args.problem, args.auto_order)
    structure = from_json(_read(args.structure))
    cfg = _solver_config(args)
    verdict = model_check(
        structure,
        problem.assertion,
        solver=cfg,
        simplify_regular=args.regular_simplification,
    )
    print(f"check: {verdict.value}")
    return {Truth.TRUE: 0, Truth.FALSE: 1, Truth.UNDETERMINED: 2}[verdict]


def _cmd_find(args: argparse.Namespace) -> int:
    problem = _load_problem(args.problem, args.auto_order)
    cfg = _solver_config(args)
    opts = _finder_options(args)
    extra = _parse_extra_terms(args.extra_fn_term)

    if args.template or args.sizes:
        if args.template:
            template = _load_template(args.template, problem)
        else:
            sizes = _parse_sizes(args.sizes, problem)
            template = heuristic_template(problem.vocabulary, sizes, extra)
        outcome = find(problem.assertion, template, cfg, opts)
        log = None
    else:
        caps = EnumerationCaps(args.max_total_nodes, args.time_budget_s)
        outcome, log = enumerate_find(problem, caps, cfg, opts, extra)

    if log is not None:
        for entry in log.entries:
            print(f"tried {entry.sizes}: {entry.outcome} ({entry.seconds:.2f}s)", file=sys.stderr)
    if isinstance(outcome, Found):
        if args.format == "text":
            print("found a satisfying structure:", file=sys.stderr)
        _emit_structure(outcome.structure, args.format)
        return 0
    if isinstance(outcome, NoneInFamily):
        print("exhausted: no structure in the searched family")
        return 1
    print(f"undetermined: {outcome.reason}")
    return 2


def _cmd_classify(args: argparse.Namespace) -> int:
    problem = _load_problem(args.problem, args.auto_order)
    report = check_membership(problem)
    doc = report.to_json()
    if args.bounds and report.member:
        doc["bounds"] = compute_bounds(problem).to_json()
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_decide(args: argparse.Namespace) -> int:
    problem = _load_problem(args.problem, args.auto_order)
    report = check_membership(problem)
    if not report.member:
        print("input is not in the decidable fragment:", file=sys.stderr)
        for v in report.violations:
            print(f"  condition ({v.condition}) at {v.where}: {v.explanation}", file=sys.stderr)
        return EX_USAGE
    cfg = _solver_config(args)
    opts = FinderOptions(
        symmetry_breaking=not args.no_symmetry_breaking,
        order_optimization=not args.no_order_optimization,
    )
    caps = EnumerationCaps(args.max_total_nodes, args.time_budget_s)
    outcome, log = decide(problem, caps, cfg, opts)
    for entry in log.entries:
        print(f"tried {entry.sizes}: {entry.outcome} ({entry.seconds:.2f}s)", file=sys.stderr)
    if isinstance(outcome, Sat):
        print("sat", file=sys.stderr)
        _emit_structure(outcome.structure, args.format)
        return 0
    if isinstance(outcome, Unsat):
        print("unsat")
        return 1
    print(f"resource-exhausted: {outcome.progress}")
    return 2


def _cmd_validate(args: argparse.Namespace) -> int:
    problem = _load_problem(args.problem, args.auto_order)
    structure = from_json(_read(args.structure))
    cfg = _solver_config(args)
    report = validate(structure, problem.vocabulary, cfg)
    json.dump(report.to_json(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if report.ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "check": _cmd_check,
        "find": _cmd_find,
        "classify": _cmd_classify,
        "decide": _cmd_decide,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"needle: cannot read {exc.filename}", file=sys.stderr)
        return EX_NOINPUT
    except OSError as exc:
        print(f"needle: {exc}", file=sys.stderr)
        return EX_NOINPUT
    except SolverError as exc:
        print(f"needle: {exc}", file=sys.stderr)
        return EX_UNAVAILABLE
    except (ParseError, ValueError) as exc:
        print(f"needle: {exc}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
