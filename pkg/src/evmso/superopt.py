"""The two superoptimization loops and model decoding.

Basic mode enumerates candidate multisets by increasing gas and asks the
solver whether some ordering of each multiset matches the source block.
Unbounded mode builds one formula whose models are all strictly cheaper
equivalent programs and tightens it until unsatisfiability proves
optimality. Both certify winners with full-width translation validation
and seeded random interpreter trials before reporting them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

from . import smtlib as s
from .bytecode import Block, min_push, program_depth
from .encoder import (Candidate, EncodingError, abstract_push_args, encode_bso,
                      encode_uso, tighten_bound)
from .isa import Instruction, InstructionTable, TABLE, static_gas
from .solverio import SolverConfig, SolverError, check

PUSHC_CODE_BASE = 0x1000  # candidate codes for abstracted PUSH constants

DEFAULT_TIMEOUT = 900.0
WIDTH_LADDER = (4, 8, 16)


@dataclass
class OptimizationReport:
    source: Block
    target: Block
    status: str  # Optimized | OptimizedOptimal | AlreadyOptimal | Timeout |
    #              TranslationValidationFailed | Unsupported
    gas_saved_min: int = 0
    gas_saved_max: int = 0
    solver_calls: int = 0
    total_time: float = 0.0
    search_width: int = 4
    mode: str = "unbounded"
    reason: str = ""
    counterexample: Optional[dict] = None

    @property
    def improved(self) -> bool:
        return self.status in ("Optimized", "OptimizedOptimal")


class _Budget:
    def __init__(self, seconds: float):
        self.t0 = time.monotonic()
        self.seconds = seconds

    @property
    def remaining(self) -> float:
        return self.seconds - (time.monotonic() - self.t0)

    @property
    def expired(self) -> bool:
        return self.remaining <= 0

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.t0


def candidate_set(source: Block, width: int, abstract_map: dict[str, int],
                  table: InstructionTable = TABLE,
                  dup_swap_cap: Optional[int] = None) -> list[Candidate]:
    """Default CI: every interpreted instruction plus the uninterpreted ones
    that occur in the source; DUP/SWAP indices capped by what the source can
    usefully reach; one pseudo-PUSH per abstracted source constant."""
    if dup_swap_cap is None:
        dup_swap_cap = max(program_depth(source) + len(source), 4)
    dup_swap_cap = min(dup_swap_cap, 16)
    out = [Candidate(table.lookup_mnemonic("PUSH1"), table.lookup_mnemonic("PUSH1").opcode,
                     "template")]
    occurring = {ins.mnemonic for ins, _ in source}
    for ins in table:
        if ins.is_push:
            continue
        m = ins.mnemonic
        if m.startswith(("DUP", "SWAP")):
            idx = int(m[3:]) if m.startswith("DUP") else int(m[4:])
            if idx > dup_swap_cap:
                continue
        if ins.is_uninterpreted and m not in occurring:
            continue
        out.append(Candidate(ins, ins.opcode))
    for i, name in enumerate(sorted(abstract_map)):
        out.append(Candidate(table.lookup_mnemonic("PUSH1"), PUSHC_CODE_BASE + i, name))
    return out


def enumerate_candidates(budget: int, ci: Sequence[Candidate]):
    """All multisets over CI whose summed minimal gas equals the budget,
    by cardinality then lexicographic candidate order."""
    items = sorted(ci, key=lambda c: (c.ins.gas.min_cost, c.code))
    results: list[tuple[Candidate, ...]] = []

    def rec(start: int, left: int, acc: list[Candidate]):
        if left == 0:
            results.append(tuple(acc))
            return
        for i in range(start, len(items)):
            cost = items[i].ins.gas.min_cost
            if cost > left:
                continue
            acc.append(items[i])
            rec(i, left - cost, acc)
            acc.pop()

    rec(0, budget, [])
    results.sort(key=lambda ms: (len(ms), tuple(c.code for c in ms)))
    yield from results


def decode_bso(model: dict, candidates: Sequence[Candidate],
               mapping: dict[str, int]) -> Block:
    """Order candidates by their position values; fill PUSH arguments."""
    placed: list[tuple[int, Candidate]] = []
    for ell, cand in enumerate(candidates):
        key = f"j_{ell + 1}"
        if key not in model:
            raise SolverError(f"model misses {key}")
        placed.append((model[key], cand))
    positions = [p for p, _ in placed]
    if len(set(positions)) != len(positions):
        raise SolverError("duplicate candidate positions in model")
    placed.sort(key=lambda pc: pc[0])
    instrs = []
    for pos, cand in placed:
        instrs.append(_decode_instr(cand, pos, model, mapping))
    return Block(tuple(instrs))


def decode_uso(model: dict, ci: Sequence[Candidate],
               mapping: dict[str, int]) -> Block:
    if "n" not in model:
        raise SolverError("model misses n")
    n = model["n"]
    by_code = {c.code: c for c in ci}
    instrs = []
    for j in range(n):
        code = model.get(f"(instr {j})")
        if code not in by_code:
            raise SolverError(f"model instruction code {code!r} outside CI")
        instrs.append(_decode_instr(by_code[code], j, model, mapping))
    return Block(tuple(instrs))


def _decode_instr(cand: Candidate, pos: int, model: dict,
                  mapping: dict[str, int]) -> tuple[Instruction, Optional[int]]:
    if not cand.ins.is_push:
        return (cand.ins, None)
    if cand.push_arg == "template":
        val = model.get(f"(a {pos})", 0)
    else:
        val = mapping[cand.push_arg]  # substitute the original constant back
    return (min_push(val), val)


@dataclass
class _Search:
    source: Block
    table: InstructionTable
    cfg: SolverConfig
    budget: _Budget
    solver_calls: int = 0
    counterexample: Optional[dict] = None
    solver_error: str = ""

    def check(self, script):
        self.solver_calls += 1
        timeout = max(0.5, min(60.0, self.budget.remaining))
        verdict = check(script, self.cfg, timeout=timeout)
        if verdict.status == "SolverError":
            self.solver_error = "SolverError: " + (verdict.detail or "no detail")
        return verdict


def _validate(source: Block, target: Block, cfg: SolverConfig, search: _Search,
              trials: int = 64) -> tuple[bool, Optional[dict]]:
    """Width-256 translation validation plus seeded random interpreter runs."""
    from .validate import random_validate, translation_validate

    search.solver_calls += 1
    verdict = translation_validate(source, target, cfg=cfg,
                                   timeout=max(1.0, search.budget.remaining))
    if verdict.status != "Equivalent":
        return False, verdict.counterexample
    ok, witness = random_validate(source, target, trials=trials, seed=1)
    if not ok:
        return False, {"random_witness": witness}
    return True, None


def basic_superoptimize(p: Block, cfg: Optional[SolverConfig] = None,
                        table: InstructionTable = TABLE,
                        budget_cap: Optional[int] = None,
                        timeout: float = DEFAULT_TIMEOUT,
                        search_width: int = 4,
                        translation_validation: bool = True,
                        candidates: Optional[list[Candidate]] = None,
                        random_trials: int = 64) -> OptimizationReport:
    cfg = cfg or SolverConfig()
    budget = _Budget(timeout)
    try:
        lo, hi = static_gas(p)
    except Exception as e:
        return OptimizationReport(p, p, "Unsupported", reason=str(e), mode="basic")
    if budget_cap is None:
        budget_cap = hi - 1

    widths = [w for w in WIDTH_LADDER if w >= search_width] or [search_width]
    search = _Search(p, table, cfg, budget)
    last_width = widths[0]
    for width in widths:
        last_width = width
        result = _basic_at_width(p, width, budget_cap, search, cfg, table,
                                 translation_validation, candidates, random_trials)
        if result is not None:
            result.total_time = budget.elapsed
            result.search_width = width
            result.solver_calls = search.solver_calls
            result.counterexample = result.counterexample or search.counterexample
            return result
        if budget.expired:
            break
    status = "Timeout" if search.counterexample is None else "TranslationValidationFailed"
    return OptimizationReport(p, p, status, solver_calls=search.solver_calls,
                              total_time=budget.elapsed, search_width=last_width,
                              mode="basic", counterexample=search.counterexample,
                              reason=search.solver_error)


def _basic_at_width(p: Block, width: int, budget_cap: int, search: _Search,
                    cfg: SolverConfig, table: InstructionTable,
                    translation_validation: bool,
                    candidates: Optional[list[Candidate]] = None,
                    random_trials: int = 64) -> Optional[OptimizationReport]:
    from .bytecode import stack_growth

    _, mapping = abstract_push_args(p, width)
    ci = candidates if candidates is not None else candidate_set(p, width, mapping, table)
    hi = static_gas(p)[1]
    net = stack_growth(p)
    complete = True
    for gas_budget in range(0, budget_cap + 1):
        if search.budget.expired:
            return None
        for multiset in enumerate_candidates(gas_budget, ci):
            if search.budget.expired:
                return None
            if sum(c.ins.gas.max_cost for c in multiset) >= hi:
                continue  # cannot strictly improve even the worst case
            if sum(c.ins.alpha - c.ins.delta for c in multiset) != net:
                continue  # net stack effect is permutation-invariant
            try:
                script, meta = encode_bso(p, multiset, width, mapping)
            except EncodingError as e:
                return OptimizationReport(p, p, "Unsupported", reason=str(e), mode="basic")
            verdict = search.check(script)
            if verdict.status == "SolverError":
                return None
            if verdict.status == "Sat":
                # gas-minimal by construction of the budget walk, unless an
                # earlier budget was left undecided
                status = "OptimizedOptimal" if complete else "Optimized"
                target = decode_bso(verdict.model, multiset, mapping)
                if not translation_validation:
                    return _improved_report(p, target, status, "basic")
                ok, cex = _validate(p, target, cfg, search, trials=random_trials)
                if ok:
                    return _improved_report(p, target, status, "basic")
                search.counterexample = cex
                return None  # retry the whole search at a wider word size
            if verdict.status in ("Timeout", "Unknown"):
                complete = False  # an undecided budget forfeits the optimality claim
    if not complete:
        return None
    return OptimizationReport(p, p, "AlreadyOptimal", mode="basic")


def _improved_report(p: Block, target: Block, status: str, mode: str) -> OptimizationReport:
    slo, shi = static_gas(p)
    tlo, thi = static_gas(target)
    # a reported improvement must strictly lower the worst case and never
    # raise the best case; anything else is not an optimization
    if target.instrs == p.instrs or thi >= shi or tlo > slo:
        return OptimizationReport(p, p, "AlreadyOptimal", mode=mode)
    return OptimizationReport(p, target, status,
                              gas_saved_min=slo - tlo, gas_saved_max=shi - thi,
                              mode=mode)


def unbounded_superoptimize(p: Block, cfg: Optional[SolverConfig] = None,
                            table: InstructionTable = TABLE,
                            timeout: float = DEFAULT_TIMEOUT,
                            search_width: int = 4,
                            translation_validation: bool = True,
                            validate_intermediate: bool = False,
                            candidates: Optional[list[Candidate]] = None,
                            random_trials: int = 64) -> OptimizationReport:
    cfg = cfg or SolverConfig()
    budget = _Budget(timeout)
    try:
        static_gas(p)
    except Exception as e:
        return OptimizationReport(p, p, "Unsupported", reason=str(e), mode="unbounded")

    widths = [w for w in WIDTH_LADDER if w >= search_width] or [search_width]
    search = _Search(p, table, cfg, budget)
    best: Optional[Block] = None
    last_width = widths[0]
    for width in widths:
        last_width = width
        result, best = _unbounded_at_width(p, width, search, cfg, table,
                                           translation_validation,
                                           validate_intermediate, best, candidates,
                                           random_trials)
        if result is not None:
            result.total_time = budget.elapsed
            result.search_width = width
            result.solver_calls = search.solver_calls
            result.counterexample = result.counterexample or search.counterexample
            return result
        if budget.expired:
            break
    if best is not None:
        ok, cex = (_validate(p, best, cfg, search, trials=random_trials)
                   if translation_validation else (True, None))
        if ok:
            rep = _improved_report(p, best, "Optimized", "unbounded")
            rep.total_time = budget.elapsed
            rep.search_width = last_width
            rep.solver_calls = search.solver_calls
            return rep
        search.counterexample = cex
    status = "Timeout" if search.counterexample is None else "TranslationValidationFailed"
    return OptimizationReport(p, p, status, solver_calls=search.solver_calls,
                              total_time=budget.elapsed, search_width=last_width,
                              mode="unbounded", counterexample=search.counterexample,
                              reason=search.solver_error)


def _unbounded_at_width(p: Block, width: int, search: _Search, cfg: SolverConfig,
                        table: InstructionTable, translation_validation: bool,
                        validate_intermediate: bool, best: Optional[Block],
                        candidates: Optional[list[Candidate]] = None,
                        random_trials: int = 64):
    _, mapping = abstract_push_args(p, width)
    ci = candidates if candidates is not None else candidate_set(p, width, mapping, table)
    try:
        script, meta = encode_uso(p, ci, width, mapping)
    except EncodingError as e:
        return OptimizationReport(p, p, "Unsupported", reason=str(e),
                                  mode="unbounded"), best

    target: Optional[Block] = None
    while True:
        if search.budget.expired:
            return None, best
        verdict = search.check(script)
        if verdict.status == "Unsat":
            if target is None:
                return OptimizationReport(p, p, "AlreadyOptimal", mode="unbounded"), best
            if not translation_validation:
                return _improved_report(p, target, "OptimizedOptimal", "unbounded"), best
            ok, cex = _validate(p, target, cfg, search, trials=random_trials)
            if ok:
                return _improved_report(p, target, "OptimizedOptimal", "unbounded"), best
            search.counterexample = cex
            return None, best  # retry wider
        if verdict.status != "Sat":
            # timeout/unknown: fall back to the best target seen so far
            if target is not None:
                ok, cex = (_validate(p, target, cfg, search, trials=random_trials)
                           if translation_validation else (True, None))
                if ok:
                    return _improved_report(p, target, "Optimized", "unbounded"), best
                search.counterexample = cex
            return None, best
        target = decode_uso(verdict.model, ci, mapping)
        if validate_intermediate and translation_validation:
            ok, _ = _validate(p, target, cfg, search, trials=random_trials)
            if not ok:
                return None, best
        best = target
        tgt_gas = static_gas(target)[1]
        script = tighten_bound(script, meta, tgt_gas)
