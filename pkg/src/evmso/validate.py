"""Certification: a concrete interpreter for the encodable subset, random
differential testing, full-width translation validation, and a brute-force
optimality oracle for small instances.

The interpreter is not a full EVM: no memory, no call frames, no refund
counter. It executes exactly what the encoding models, which is the point:
it is the independent reference the symbolic side is tested against.
"""

from __future__ import annotations

import hashlib
import itertools
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .bytecode import Block, program_depth
from .encoder import encode_validation
from .isa import EffectClass, Instruction, STACK_LIMIT
from .solverio import SolverConfig, SolverVerdict, check

FULL_WIDTH = 256


class Oracle:
    """Arbitrary but fixed environment: results of uninterpreted instructions
    and the contents of untouched storage. Deterministic in the seed."""

    def __init__(self, seed: int = 0, width: int = FULL_WIDTH):
        self.seed = seed
        self.width = width
        self.fixed: dict = {}

    def _draw(self, key: str) -> int:
        if key in self.fixed:
            return self.fixed[key]
        h = hashlib.sha256(f"{self.seed}:{key}".encode()).digest()
        val = int.from_bytes(h, "big") % (1 << self.width)
        self.fixed[key] = val
        return val

    def const(self, mnemonic: str) -> int:
        return self._draw(f"const:{mnemonic}")

    def fn(self, mnemonic: str, arg: int) -> int:
        return self._draw(f"fn:{mnemonic}:{arg}")

    def storage_default(self, key: int) -> int:
        return self._draw(f"storage:{key}")


def zero_oracle(width: int = FULL_WIDTH) -> Oracle:
    o = Oracle(seed=0, width=width)
    o.const = lambda m: 0  # type: ignore[assignment]
    o.fn = lambda m, a: 0  # type: ignore[assignment]
    o.storage_default = lambda k: 0  # type: ignore[assignment]
    return o


@dataclass
class ConcreteState:
    stack: list = field(default_factory=list)  # top is last
    storage: dict = field(default_factory=dict)
    gas_used: int = 0
    halted: bool = False  # exceptional halt; state frozen once set
    oracle: Optional[Oracle] = None
    width: int = FULL_WIDTH

    def copy(self) -> "ConcreteState":
        return ConcreteState(list(self.stack), dict(self.storage), self.gas_used,
                             self.halted, self.oracle, self.width)

    def storage_read(self, key: int) -> int:
        if key in self.storage:
            return self.storage[key]
        if self.oracle is not None:
            val = self.oracle.storage_default(key)
            self.storage[key] = val  # record so both runs observe one world
            return val
        return 0


def _sign(v: int, width: int) -> int:
    return v - (1 << width) if v >> (width - 1) else v


def _step(state: ConcreteState, ins: Instruction, imm: Optional[int]) -> None:
    width = state.width
    mask = (1 << width) - 1
    st = state.stack
    size = len(st)
    if size - ins.delta < 0 or size - ins.delta + ins.alpha > STACK_LIMIT:
        state.halted = True
        return

    def pop() -> int:
        return st.pop()

    def push(v: int) -> None:
        st.append(v & mask)

    m = ins.mnemonic
    gas = ins.gas.amount
    if m == "SSTORE":
        key, val = st[-1], st[-2]
        current = state.storage_read(key)
        gas = ins.gas.reset_cost if (current != 0 or val == 0) else ins.gas.set_cost
    state.gas_used += gas

    if ins.is_push:
        push(imm)
    elif m == "POP":
        pop()
    elif m in ("ADD", "SUB", "MUL", "DIV", "SDIV", "MOD", "SMOD",
               "LT", "GT", "SLT", "SGT", "EQ", "AND", "OR", "XOR"):
        a, b = pop(), pop()
        if m == "ADD":
            push(a + b)
        elif m == "SUB":
            push(a - b)
        elif m == "MUL":
            push(a * b)
        elif m == "DIV":
            push(0 if b == 0 else a // b)
        elif m == "SDIV":
            if b == 0:
                push(0)
            else:
                sa, sb = _sign(a, width), _sign(b, width)
                q = abs(sa) // abs(sb)
                push(-q if (sa < 0) != (sb < 0) else q)
        elif m == "MOD":
            push(0 if b == 0 else a % b)
        elif m == "SMOD":
            if b == 0:
                push(0)
            else:
                sa, sb = _sign(a, width), _sign(b, width)
                r = abs(sa) % abs(sb)
                push(-r if sa < 0 else r)
        elif m == "LT":
            push(1 if a < b else 0)
        elif m == "GT":
            push(1 if a > b else 0)
        elif m == "SLT":
            push(1 if _sign(a, width) < _sign(b, width) else 0)
        elif m == "SGT":
            push(1 if _sign(a, width) > _sign(b, width) else 0)
        elif m == "EQ":
            push(1 if a == b else 0)
        elif m == "AND":
            push(a & b)
        elif m == "OR":
            push(a | b)
        elif m == "XOR":
            push(a ^ b)
    elif m == "ISZERO":
        push(1 if pop() == 0 else 0)
    elif m == "NOT":
        push(pop() ^ mask)
    elif m == "SLOAD":
        push(state.storage_read(pop()))
    elif m == "SSTORE":
        key, val = pop(), pop()
        state.storage[key] = val
    elif m.startswith("DUP"):
        st.append(st[-int(m[3:])])
    elif m.startswith("SWAP"):
        i = int(m[4:])
        st[-1], st[-1 - i] = st[-1 - i], st[-1]
    elif ins.effect_class is EffectClass.CONST_UNINTERPRETED:
        push(state.oracle.const(m) if state.oracle else 0)
    elif ins.effect_class is EffectClass.NONCONST_UNINTERPRETED:
        arg = pop()
        push(state.oracle.fn(m, arg) if state.oracle else 0)
    else:
        raise ValueError(f"cannot interpret {m}")


def interpret(p: Block, init: ConcreteState) -> ConcreteState:
    """Execute left to right; exceptional halt freezes the state."""
    state = init.copy()
    for ins, imm in p:
        if state.halted:
            break
        _step(state, ins, imm)
        if state.halted:
            break
    return state


def states_equal(a: ConcreteState, b: ConcreteState) -> bool:
    """Equality per the target relation: stack, storage, halt flag; never gas.

    Untouched keys fall back to the (shared) oracle default, so a program
    that rewrites a key with the value already held there stays equal to one
    that never touches it."""
    if a.halted != b.halted or a.stack != b.stack:
        return False
    keys = set(a.storage) | set(b.storage)
    return all(a.storage_read(k) == b.storage_read(k) for k in keys)


@dataclass
class ValidationResult:
    status: str  # Equivalent | Counterexample | Indeterminate
    counterexample: Optional[dict] = None
    verdict: Optional[SolverVerdict] = None


def translation_validate(p: Block, p2: Block, cfg: Optional[SolverConfig] = None,
                         width: int = FULL_WIDTH, timeout: float = 120.0) -> ValidationResult:
    """Full-width equivalence: unsatisfiable distinguishing formula, or a witness."""
    script, meta = encode_validation(p, p2, width)
    verdict = check(script, cfg or SolverConfig(), timeout=timeout)
    if verdict.status == "Unsat":
        return ValidationResult("Equivalent", verdict=verdict)
    if verdict.status == "Sat":
        return ValidationResult("Counterexample", counterexample=verdict.model,
                                verdict=verdict)
    return ValidationResult("Indeterminate", verdict=verdict)


def _boundary_biased(rng: random.Random, width: int) -> int:
    if rng.random() < 0.25:
        return rng.choice([0, 1, 1 << (width - 1), (1 << width) - 1])
    return rng.getrandbits(width)


def random_validate(p: Block, p2: Block, trials: int = 64, seed: int = 0,
                    width: int = FULL_WIDTH) -> tuple[bool, Optional[dict]]:
    """Seeded differential testing; gas excluded from the comparison."""
    depth = max(program_depth(p), program_depth(p2))
    for t in range(trials):
        rng = random.Random((seed << 20) ^ t)
        oracle = Oracle(seed=(seed << 20) ^ t ^ 0x5EED, width=width)
        stack = [_boundary_biased(rng, width) for _ in range(depth)]
        init = ConcreteState(stack=stack, oracle=oracle, width=width)
        ra = interpret(p, init)
        rb = interpret(p2, init)
        if not states_equal(ra, rb):
            return False, {"trial": t, "stack": stack,
                           "left": (ra.stack, sorted(ra.storage.items()), ra.halted),
                           "right": (rb.stack, sorted(rb.storage.items()), rb.halted)}
    return True, None


# -- brute-force optimality oracle (test machinery) ---------------------------


class BruteForceBudget(Exception):
    pass


def _enumerate_programs(isa: Sequence[tuple[Instruction, Optional[int]]],
                        gas_cap: int):
    """All instruction sequences with minimal gas <= cap, cheapest first."""
    frontier: list[tuple[int, tuple]] = [(0, ())]
    yield ()
    while frontier:
        nxt = []
        for cost, prog in frontier:
            for ins, imm in isa:
                c2 = cost + ins.gas.min_cost
                if c2 <= gas_cap:
                    p2 = prog + ((ins, imm),)
                    yield p2
                    nxt.append((c2, p2))
        frontier = nxt


def brute_force_optimum(p: Block, isa: Sequence[tuple[Instruction, Optional[int]]],
                        width: int, gas_cap: Optional[int] = None,
                        _sig_cache: dict = {}) -> Block:
    """Cheapest block equivalent to p on every input at the given width.

    Equivalence is exhaustive over all stacks of depth delta-hat(p); ties
    break by gas, then length, then opcode sequence. The instruction set
    must be tiny: the candidate signatures are enumerated outright.
    """
    from .isa import static_gas

    if len({ins.opcode for ins, _ in isa}) > 8 or width > 4:
        raise BruteForceBudget("instance too large for exhaustive search")
    src_gas = static_gas(p)[0]
    cap = src_gas if gas_cap is None else min(gas_cap, src_gas)
    if cap > 12:
        raise BruteForceBudget("gas cap too large for exhaustive search")
    depth = program_depth(p)

    def signature(block: Block, d: int) -> tuple:
        sig = []
        for inputs in itertools.product(range(1 << width), repeat=d):
            st = interpret(block, ConcreteState(stack=list(inputs),
                                                oracle=zero_oracle(width), width=width))
            sig.append((tuple(st.stack), tuple(sorted(st.storage.items())), st.halted))
        return tuple(sig)

    cache_key = (tuple((i.mnemonic, imm) for i, imm in isa), width, depth, cap)
    table = _sig_cache.get(cache_key)
    if table is None:
        table = {}
        for prog in _enumerate_programs(isa, cap):
            block = Block(tuple(prog))
            sig = signature(block, depth)
            lo, _ = static_gas(block)
            key_entry = table.get(sig)
            cand = (lo, len(block), tuple(i.opcode for i, _ in block), block)
            if key_entry is None or cand[:3] < key_entry[:3]:
                table[sig] = cand
        _sig_cache[cache_key] = table
    src_sig = signature(p, depth)
    entry = table.get(src_sig)
    if entry is None:
        return p
    return entry[3]
