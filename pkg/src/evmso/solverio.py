"""Drive an SMT solver over SMT-LIB v2 text and extract model values.

Any external solver that speaks SMT-LIB on stdin works via `command`
(e.g. "z3 -in -smt2"). Without a command the bundled solver handles the
script; it still consumes exactly the serialized text, so exported .smt2
files re-run identically through the `evmso-smt` subprocess.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from . import smtlib as s
from .minismt import sexpr as _sexpr
from .minismt.solver import solve_text

GRACE_SECONDS = 2.0


class SolverError(Exception):
    pass


@dataclass
class SolverVerdict:
    status: str  # Sat | Unsat | Unknown | Timeout | SolverError
    model: Optional[dict] = None  # query sexpr -> int | bool
    wall_time: float = 0.0
    detail: str = ""

    def __post_init__(self) -> None:
        if (self.status == "Sat") != (self.model is not None):
            raise ValueError("model present iff status is Sat")


@dataclass
class SolverConfig:
    command: Optional[str] = None      # None: bundled solver, in process
    logic_all: bool = False            # emit (set-logic ALL) instead of UFBVLIA
    export_dir: Optional[str] = None
    grace: float = GRACE_SECONDS
    _export_seq: int = field(default=0, repr=False)

    def resolved_command(self) -> Optional[list[str]]:
        cmd = self.command or os.environ.get("EVMSO_SOLVER")
        if cmd:
            if cmd.strip() == "builtin":
                return [sys.executable, "-m", "evmso.minismt"]
            return cmd.split()
        return None


def default_solver_command() -> Optional[str]:
    """Prefer a real solver on PATH; otherwise the bundled one runs in process."""
    if shutil.which("z3"):
        return "z3 -in -smt2"
    return None


def _serialize(script: s.Script, cfg: SolverConfig) -> str:
    if cfg.logic_all:
        old = script.logic
        script.logic = "ALL"
        text = script.serialize()
        script.logic = old
        return text
    return script.serialize()


def export_smtlib(script: s.Script, path: str, cfg: Optional[SolverConfig] = None) -> str:
    text = _serialize(script, cfg or SolverConfig())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _parse_value(node) -> object:
    if isinstance(node, str):
        if node == "true":
            return True
        if node == "false":
            return False
        if node.startswith("#b"):
            return int(node[2:], 2)
        if node.startswith("#x"):
            return int(node[2:], 16)
        if node.lstrip("-").isdigit():
            return int(node)
    elif isinstance(node, list):
        if len(node) == 2 and node[0] == "-":
            inner = _parse_value(node[1])
            if isinstance(inner, int):
                return -inner
        if len(node) == 3 and node[0] == "_" and isinstance(node[1], str) \
                and node[1].startswith("bv"):
            return int(node[1][2:])
    raise SolverError(f"unparsable model value {node!r}")


def _parse_model(text: str, queries: list[s.Term]) -> dict:
    try:
        nodes = _sexpr.read_sexprs(_sexpr.tokenize(text))
    except Exception as e:
        raise SolverError(f"unparsable get-value answer: {e}\n{text}") from None
    pairs: list = []
    for node in nodes:
        if isinstance(node, list):
            pairs.extend(x for x in node if isinstance(x, list) and len(x) == 2)
    if len(pairs) != len(queries):
        raise SolverError(
            f"expected {len(queries)} model values, got {len(pairs)}:\n{text}")
    model = {}
    for q, (_, val) in zip(queries, pairs):
        model[s.to_sexpr(q)] = _parse_value(val)
    return model


def check(script: s.Script, cfg: Optional[SolverConfig] = None,
          timeout: float = 60.0) -> SolverVerdict:
    """Serialize, solve, and on Sat answer every query via get-value."""
    cfg = cfg or SolverConfig()
    text = _serialize(script, cfg)
    if cfg.export_dir:
        os.makedirs(cfg.export_dir, exist_ok=True)
        cfg._export_seq += 1
        export_path = os.path.join(cfg.export_dir, f"query_{cfg._export_seq:05d}.smt2")
        with open(export_path, "w", encoding="utf-8") as fh:
            fh.write(text)

    t0 = time.monotonic()
    command = cfg.resolved_command()
    if command is None:
        try:
            status, lines = solve_text(text, timeout_ms=int(timeout * 1000))
        except Exception as e:
            return SolverVerdict("SolverError", wall_time=time.monotonic() - t0,
                                 detail=str(e))
        return _verdict_from(status, "\n".join(lines), script, time.monotonic() - t0)

    try:
        proc = subprocess.Popen(command, stdin=subprocess.PIPE,
                                stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                text=True)
    except OSError as e:
        return SolverVerdict("SolverError", detail=f"cannot run {command}: {e}")
    try:
        out, err = proc.communicate(text, timeout=timeout + cfg.grace)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.communicate()
        return SolverVerdict("Timeout", wall_time=time.monotonic() - t0)
    wall = time.monotonic() - t0
    lines = [ln for ln in out.splitlines() if ln.strip()]
    if not lines:
        return SolverVerdict("SolverError", wall_time=wall,
                             detail=f"no output; stderr: {err[:500]}")
    head, rest = lines[0].strip(), "\n".join(lines[1:])
    return _verdict_from(head, rest, script, wall)


def _verdict_from(head: str, rest: str, script: s.Script, wall: float) -> SolverVerdict:
    if head == "sat":
        model = _parse_model(rest, script.queries) if script.queries else {}
        return SolverVerdict("Sat", model=model, wall_time=wall)
    if head == "unsat":
        return SolverVerdict("Unsat", wall_time=wall)
    if head == "timeout":
        return SolverVerdict("Timeout", wall_time=wall)
    if head == "unknown":
        return SolverVerdict("Unknown", wall_time=wall)
    return SolverVerdict("SolverError", wall_time=wall, detail=head + "\n" + rest)
