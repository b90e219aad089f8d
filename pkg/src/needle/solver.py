"""External SMT process management.

One process per query: each script is self-contained, written to the
child's stdin together with ``(check-sat)`` and one ``(get-value ...)``
per wanted constant block, and the answer is parsed from stdout.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .sexpr import Atom, SList, parse_all

ENV_SOLVER = "NEEDLE_SOLVER"

Value = Union[int, bool]


class SolverError(Exception):
    """Process launch failure or unparseable solver output."""


@dataclass(frozen=True)
class SolverConfig:
    executable: str
    args: tuple[str, ...] = ()
    timeout_ms: int = 60_000
    logic: str = "ALL"
    # How to ask for an answer.  z3 benefits from racing its default
    # engine against quantifier elimination: the encodings are pure
    # quantified integer arithmetic plus free Booleans, where elimination
    # is complete and often much faster on unsatisfiable instances.
    check_command: str = "(check-sat)"

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")

    def with_timeout(self, timeout_ms: int) -> "SolverConfig":
        return SolverConfig(
            self.executable, self.args, timeout_ms, self.logic, self.check_command
        )


Z3_CHECK_COMMAND = "(check-sat-using (par-or (then qe smt) smt))"


@dataclass(frozen=True)
class SatResult:
    status: str  # sat | unsat | unknown | timeout
    values: Mapping[str, Value] = field(default_factory=dict)
    reason: str = ""
    stderr: str = ""

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"


def _default_args(executable: str) -> tuple[str, ...]:
    base = os.path.basename(executable)
    if "z3" in base:
        return ("-in", "-smt2")
    if "cvc" in base:
        return ("--lang", "smt2")
    return ()


def default_config(timeout_ms: int = 60_000, logic: str = "ALL") -> SolverConfig:
    """Solver from $NEEDLE_SOLVER, else the first of z3/cvc5 on PATH."""
    exe = os.environ.get(ENV_SOLVER)
    if not exe:
        for name in ("z3", "cvc5"):
            found = shutil.which(name)
            if found:
                exe = found
                break
    if not exe:
        raise SolverError(
            f"no SMT solver found; set {ENV_SOLVER} or put z3/cvc5 on PATH"
        )
    return SolverConfig(exe, _default_args(exe), timeout_ms, logic, _check_command(exe))


def _check_command(executable: str) -> str:
    return Z3_CHECK_COMMAND if "z3" in os.path.basename(executable) else "(check-sat)"


def config_for(executable: str, timeout_ms: int = 60_000, logic: str = "ALL",
               extra_args: Sequence[str] = ()) -> SolverConfig:
    return SolverConfig(executable, _default_args(executable) + tuple(extra_args),
                        timeout_ms, logic, _check_command(executable))


def check(cfg: SolverConfig, script: str, wanted: Sequence[str] = ()) -> SatResult:
    """Run one query; ``wanted`` names declared constants to extract on sat."""
    payload = script
    if not payload.endswith("\n"):
        payload += "\n"
    payload += cfg.check_command + "\n"
    if wanted:
        from .sexpr import quote_symbol

        payload += f"(get-value ({' '.join(quote_symbol(w) for w in wanted)}))\n"
    try:
        proc = subprocess.Popen(
            [cfg.executable, *cfg.args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except OSError as exc:
        raise SolverError(f"cannot launch solver {cfg.executable}: {exc}") from exc
    try:
        out, err = proc.communicate(payload, timeout=cfg.timeout_ms / 1000.0)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.communicate()
        return SatResult("timeout", reason=f"exceeded {cfg.timeout_ms} ms")

    status: Optional[str] = None
    rest_lines: list[str] = []
    for line in out.splitlines():
        stripped = line.strip()
        if status is None and stripped in ("sat", "unsat", "unknown"):
            status = stripped
        elif status is not None:
            rest_lines.append(line)
    if status is None:
        raise SolverError(
            f"unparseable solver output (exit {proc.returncode}): "
            f"{out.strip()[:500]!r} stderr: {err.strip()[:500]!r}"
        )
    if status == "unknown":
        return SatResult("unknown", reason=out.strip(), stderr=err)
    if status == "unsat" or not wanted:
        return SatResult(status, stderr=err)
    values = parse_values("\n".join(rest_lines), wanted)
    return SatResult("sat", values=values, stderr=err)


def parse_values(response: str, wanted: Sequence[str]) -> dict[str, Value]:
    """Parse a ``get-value`` response into a constant-to-value map."""
    exprs = parse_all(response)
    pairs: dict[str, Value] = {}
    for e in exprs:
        if not isinstance(e, SList):
            raise SolverError(f"malformed value response: {response[:200]!r}")
        for item in e.items:
            if not isinstance(item, SList) or len(item.items) != 2:
                raise SolverError(f"malformed value pair: {item!r}")
            name_e, val_e = item.items
            if not isinstance(name_e, Atom):
                raise SolverError(f"malformed value name: {name_e!r}")
            pairs[name_e.text] = _parse_value(val_e)
    missing = [w for w in wanted if w not in pairs]
    if missing:
        raise SolverError(f"solver response missing values for: {', '.join(missing)}")
    return {w: pairs[w] for w in wanted}


def _parse_value(e) -> Value:
    if isinstance(e, Atom):
        if e.text == "true":
            return True
        if e.text == "false":
            return False
        if e.text.lstrip("-").isdigit():
            return int(e.text)
        raise SolverError(f"unsupported value {e.text!r}")
    if (
        isinstance(e, SList)
        and len(e.items) == 2
        and isinstance(e.items[0], Atom)
        and e.items[0].text == "-"
        and isinstance(e.items[1], Atom)
    ):
        return -int(e.items[1].text)
    raise SolverError(f"unsupported value form {e!r}")
