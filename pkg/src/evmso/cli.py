"""Batch front end: read bytecode or assembly, split, dedup, optimize, report.

Exit codes: 0 clean, 1 when any block ends Unsupported or in a solver
error, 2 for unreadable input.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

from .bytecode import (AsmError, Block, Program, assemble, dedup_key, disassemble,
                       parse_asm, parse_hex, splice)
from .report import render_text, report_json, write_report_dir
from .solverio import SolverConfig, default_solver_command
from .superopt import (OptimizationReport, basic_superoptimize,
                       unbounded_superoptimize)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="evmso",
        description="Superoptimizer for straight-line EVM bytecode blocks.")
    ap.add_argument("inputs", nargs="*",
                    help="files, hex strings, or assembly; stdin when omitted")
    ap.add_argument("--mode", choices=("basic", "unbounded"), default="unbounded")
    ap.add_argument("--width", type=int, default=4, choices=(2, 4, 8, 16, 256),
                    help="search word size in bits (validation always runs at 256)")
    ap.add_argument("--timeout", type=float, default=900.0,
                    help="per-block budget in seconds")
    ap.add_argument("--solver", default=None,
                    help="external solver command reading SMT-LIB on stdin; "
                         "'builtin' forces the bundled solver subprocess")
    ap.add_argument("--logic-all", action="store_true",
                    help="emit (set-logic ALL) instead of UFBVLIA")
    ap.add_argument("--no-validate", action="store_true",
                    help="skip width-256 translation validation (unsound; for experiments)")
    ap.add_argument("--validate-intermediate", action="store_true",
                    help="validate every intermediate unbounded-mode target")
    ap.add_argument("--trials", type=int, default=64,
                    help="random interpreter trials per reported optimization")
    ap.add_argument("--no-dedup", action="store_true")
    ap.add_argument("--format", choices=("auto", "hex", "asm"), default="auto")
    ap.add_argument("--json", action="store_true", help="JSON report on stdout")
    ap.add_argument("--out", default=None, help="write the report to a file")
    ap.add_argument("--export-smt-dir", default=None,
                    help="write every solver query as a standalone .smt2 file")
    ap.add_argument("--report-dir", default=None,
                    help="write blocks.csv, report.json, and summary figures here")
    ap.add_argument("--emit-patched", default=None, metavar="FILE",
                    help="write the input program with optimized blocks spliced in")
    ap.add_argument("--jobs", type=int, default=1, help="parallel block workers")
    return ap


@dataclass
class _Job:
    block: Block
    mode: str
    width: int
    timeout: float
    solver: Optional[str]
    logic_all: bool
    export_dir: Optional[str]
    validate: bool
    validate_intermediate: bool
    trials: int


def _optimize_one(job: _Job) -> OptimizationReport:
    cfg = SolverConfig(command=job.solver or default_solver_command(),
                       logic_all=job.logic_all, export_dir=job.export_dir)
    if job.mode == "basic":
        return basic_superoptimize(job.block, cfg=cfg, timeout=job.timeout,
                                   search_width=job.width,
                                   translation_validation=job.validate,
                                   random_trials=job.trials)
    return unbounded_superoptimize(job.block, cfg=cfg, timeout=job.timeout,
                                   search_width=job.width,
                                   translation_validation=job.validate,
                                   validate_intermediate=job.validate_intermediate,
                                   random_trials=job.trials)


def _looks_like_hex(token: str) -> bool:
    t = token.strip()
    if t.startswith(("0x", "0X")):
        return True
    return len(t) % 2 == 0 and len(t) > 0 and all(c in "0123456789abcdefABCDEF" for c in t)


def _read_programs(args) -> list[tuple[str, Program]]:
    import os

    texts: list[tuple[str, str]] = []
    if not args.inputs:
        texts.append(("<stdin>", sys.stdin.read()))
    for item in args.inputs:
        if os.path.exists(item):
            with open(item, "r", encoding="utf-8") as fh:
                texts.append((item, fh.read()))
        else:
            texts.append(("<arg>", item))

    programs = []
    for name, text in texts:
        text = text.strip()
        if not text:
            programs.append((name, Program()))
            continue
        fmt = args.format
        if fmt == "auto":
            fmt = "hex" if _looks_like_hex(text) else "asm"
        if fmt == "hex":
            programs.append((name, disassemble(parse_hex(text))))
        else:
            programs.append((name, Program((parse_asm(text),))))
    return programs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        programs = _read_programs(args)
    except (ValueError, AsmError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    # collect blocks; dedup keyed on the PUSH-abstracted instruction sequence
    work: list[Block] = []
    slots: list[tuple[int, int, object]] = []  # (program idx, segment idx, work key)
    seen: dict = {}
    for pi, (_, prog) in enumerate(programs):
        for si, seg in enumerate(prog.segments):
            if not isinstance(seg, Block) or len(seg) == 0:
                continue
            key = dedup_key(seg, 4) if not args.no_dedup else (pi, si)
            if key not in seen:
                seen[key] = len(work)
                work.append(seg)
            slots.append((pi, si, seen[key]))

    jobs = [_Job(b, args.mode, args.width, args.timeout, args.solver,
                 args.logic_all, args.export_smt_dir, not args.no_validate,
                 args.validate_intermediate, args.trials) for b in work]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_optimize_one, jobs))
    else:
        results = [_optimize_one(j) for j in jobs]

    # reports follow input order; duplicates share the representative's result
    reports: list[OptimizationReport] = []
    for pi, si, wi in slots:
        src = programs[pi][1].segments[si]
        rep = results[wi]
        if rep.source.instrs != src.instrs:
            rep = _transfer_result(rep, src, validate=not args.no_validate)
        reports.append(rep)

    slot_reports = reports
    out_text = report_json(reports) if args.json else render_text(reports)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out_text + "\n")
    else:
        print(out_text)
    if args.report_dir:
        write_report_dir(reports, args.report_dir)

    if args.emit_patched:
        _emit_patched(args, programs, slots, slot_reports)

    bad = any(r.status == "Unsupported" or "SolverError" in (r.reason or "")
              for r in results)
    return 1 if bad else 0


def _transfer_result(rep: OptimizationReport, src: Block, validate: bool) -> OptimizationReport:
    """Carry a representative's result over to a block that differs only in
    oversized PUSH constants; revalidate since the constants changed."""
    from .validate import random_validate, translation_validate

    if not rep.improved:
        return replace(rep, source=src, target=src)
    threshold = 1 << rep.search_width
    remap: dict[int, int] = {}
    for (ri, rimm), (_, dimm) in zip(rep.source.instrs, src.instrs):
        if ri.is_push and rimm >= threshold:
            remap[rimm] = dimm
    instrs = []
    for ins, imm in rep.target.instrs:
        if ins.is_push and imm in remap:
            from .bytecode import min_push

            val = remap[imm]
            instrs.append((min_push(val), val))
        else:
            instrs.append((ins, imm))
    target = Block(tuple(instrs))
    out = replace(rep, source=src, target=target)
    if validate:
        tv = translation_validate(src, target)
        ok = tv.status == "Equivalent" and random_validate(src, target, seed=1)[0]
        if not ok:
            return replace(rep, source=src, target=src, status="Timeout",
                           gas_saved_min=0, gas_saved_max=0,
                           reason="shared result failed revalidation")
    from .isa import static_gas

    slo, shi = static_gas(src)
    tlo, thi = static_gas(target)
    return replace(out, gas_saved_min=slo - tlo, gas_saved_max=shi - thi)


def _emit_patched(args, programs, slots, slot_reports) -> None:
    for pi, (name, prog) in enumerate(programs):
        patched = prog
        shifted = False
        offset_sensitive = prog.has_jumps()
        for slot_i, (pj, si, wi) in sorted(enumerate(slots), key=lambda t: -t[1][1]):
            if pj != pi:
                continue
            rep = slot_reports[slot_i]
            if not rep.improved:
                continue
            old = prog.segments[si]
            new_bytes, old_bytes = assemble(rep.target), assemble(old)
            if len(new_bytes) != len(old_bytes) and offset_sensitive:
                shifted = True
                continue
            patched = splice(patched, si, rep.target)
        if shifted:
            print(f"warning: {name}: jump targets present and block lengths "
                  f"changed; those blocks were left unpatched", file=sys.stderr)
        suffix = f".{pi}" if len(programs) > 1 else ""
        with open(args.emit_patched + suffix, "w", encoding="utf-8") as fh:
            fh.write("0x" + assemble(patched).hex() + "\n")


if __name__ == "__main__":
    sys.exit(main())
