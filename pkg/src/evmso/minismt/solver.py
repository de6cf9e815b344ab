"""Verdict orchestration: route a parsed script to the right engine."""

from __future__ import annotations

import time
from typing import Optional

from .. import smtlib as s
from . import values as V
from .ground import Ground, Unknown, Verdict, solve_residue
from .sexpr import ParsedScript, parse_script
from .synth import Extract, solve_synthesis


def _is_ef_assert(a: s.Term) -> bool:
    if a.kind != "forall":
        return False
    body = a.args[0]
    return not (body.kind == "op" and body.name == "=")


def _looks_like_synthesis(parsed: ParsedScript) -> bool:
    if any(_is_ef_assert(a) for a in parsed.asserts):
        return True
    # purely existential program search: free integer positions next to a chain
    has_int_const = any(not args and ret == s.INT
                        for args, ret in parsed.decls.values())
    has_chain = any(name.startswith(("st_", "cnt_")) for name in parsed.decls)
    return has_int_const and has_chain


def solve_parsed(parsed: ParsedScript, deadline: Optional[float] = None) -> Verdict:
    if _looks_like_synthesis(parsed):
        try:
            return solve_synthesis(parsed, deadline)
        except Extract as e:
            raise Unknown(f"synthesis fragment: {e}") from None
    return solve_ground(parsed, deadline)


def solve_ground(parsed: ParsedScript, deadline: Optional[float] = None) -> Verdict:
    g = Ground(parsed.decls, parsed.asserts, deadline=deadline)
    residue = g.residue()
    verdict = solve_residue(residue, deadline=deadline)
    if verdict.status == "sat":
        if g.approx:
            return Verdict("unknown")
        model = _query_models(parsed, g, verdict.model or {})
        return Verdict("sat", model=model)
    return verdict


def _query_models(parsed: ParsedScript, g: Ground, atom_model: dict) -> dict:
    """Evaluate get-value queries under the discovered assignment."""
    name_asg = {name: atom_model[key] for name, key in g.free_vars.items()
                if key in atom_model}
    g2 = Ground(parsed.decls, parsed.asserts, assignment=name_asg)
    out = {}
    for q in parsed.queries:
        val = g2.value(q, {})
        out[s.to_sexpr(q)] = (q.sort, _concretize(val, atom_model))
    return out


def _concretize(val, atom_model: dict):
    if isinstance(val, (int, bool)):
        return val
    atoms: dict = {}
    V.free_atoms(val, atoms)
    asg = dict(atom_model)
    for key, atom in atoms.items():
        if key not in asg:
            tag = atom.payload[-1] if atom.kind == "var" else atom.payload[2]
            asg[key] = 0 if isinstance(tag, int) or tag == "int" else False
    return V.eval_value(val, asg)


def format_value(sort, val) -> str:
    if sort == s.BOOL:
        return "true" if val else "false"
    if sort == s.INT:
        return str(val) if val >= 0 else f"(- {-val})"
    k = s.bv_width(sort)
    if k % 4 == 0:
        return f"#x{val:0{k // 4}x}"
    return f"#b{val:0{k}b}"


def solve_text(text: str, timeout_ms: Optional[int] = None) -> tuple[str, list[str]]:
    """Run a full script; returns (status line, response lines for get-value)."""
    deadline = time.monotonic() + timeout_ms / 1000.0 if timeout_ms else None
    try:
        parsed = parse_script(text)
    except Exception as e:  # malformed input is an error verdict, not a crash
        return f"(error \"{e}\")", []
    try:
        verdict = solve_parsed(parsed, deadline)
    except Unknown as e:
        return ("timeout" if "deadline" in str(e) else "unknown"), []
    lines = []
    if verdict.status == "sat" and parsed.queries and verdict.model is not None:
        pairs = []
        for q in parsed.queries:
            key = s.to_sexpr(q)
            sort, val = verdict.model.get(key, (q.sort, 0))
            pairs.append(f"({key} {format_value(sort, val)})")
        lines.append("(" + " ".join(pairs) + ")")
    return verdict.status, lines
