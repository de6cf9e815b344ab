"""Property tests for the spec-level invariants."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from evmso import smtlib as s
from evmso.bytecode import (Block, assemble, disassemble, parse_asm,
                            program_depth)
from evmso.encoder import Encoding, build_universe, encode_execution
from evmso.isa import TABLE, EffectClass, static_gas
from evmso.minismt.solver import solve_text
from evmso.solverio import SolverConfig, check
from evmso.validate import ConcreteState, interpret, states_equal

from .conftest import SequenceOracle, random_block

# -- strategies ---------------------------------------------------------------

ENCODABLE = [i for i in TABLE if not i.is_push]
SMALL_ENCODABLE = [i for i in ENCODABLE
                   if not (i.mnemonic.startswith(("DUP", "SWAP"))
                           and int(i.mnemonic.lstrip("DUPSWA")) > 4)]


def instr_token():
    pushes = st.tuples(st.sampled_from([TABLE.push(w) for w in (1, 2, 4, 32)]),
                       st.integers(min_value=0, max_value=2**32 - 1))
    plain = st.tuples(st.sampled_from(SMALL_ENCODABLE), st.none())
    return st.one_of(plain, pushes)


def well_formed_bytes():
    """Random byte streams whose PUSH immediates are complete."""
    unknown = st.sampled_from([0x00, 0x56, 0x57, 0x5B, 0xF1, 0xFE, 0x20])

    def tok_bytes(tok):
        if isinstance(tok, int):
            return bytes([tok])
        ins, imm = tok
        if ins.is_push:
            return bytes([ins.opcode]) + (imm % (1 << (8 * ins.push_width))).to_bytes(
                ins.push_width, "big")
        return bytes([ins.opcode])

    return st.lists(st.one_of(instr_token(), unknown), max_size=12).map(
        lambda toks: b"".join(tok_bytes(t) for t in toks))


@st.composite
def blocks(draw, max_len=6, push_bits=8):
    n = draw(st.integers(min_value=0, max_value=max_len))
    instrs = []
    for _ in range(n):
        if draw(st.booleans()):
            instrs.append((TABLE.push(1), draw(st.integers(0, (1 << push_bits) - 1))))
        else:
            instrs.append((draw(st.sampled_from(SMALL_ENCODABLE)), None))
    return Block(tuple(instrs))


# -- round trip and splitting --------------------------------------------------


@given(well_formed_bytes())
@settings(max_examples=300, deadline=None)
def test_round_trip_well_formed(data):
    assert assemble(disassemble(data)) == data


@given(well_formed_bytes())
@settings(max_examples=300, deadline=None)
def test_split_partition(data):
    prog = disassemble(data)
    offsets = [seg.byte_offset for seg in prog.segments]
    assert offsets == sorted(set(offsets))
    lengths = [len(assemble(type(prog)((seg,)))) for seg in prog.segments]
    assert sum(lengths) == len(data)
    for seg, length, off in zip(prog.segments, lengths, offsets):
        assert data[off:off + length] == assemble(type(prog)((seg,)))


# -- depth tightness ------------------------------------------------------------


@given(blocks())
@settings(max_examples=300, deadline=None)
def test_depth_tightness(blk):
    d = program_depth(blk)
    full = interpret(blk, ConcreteState(stack=[7] * d, width=256))
    assert not full.halted
    if d > 0:
        starved = interpret(blk, ConcreteState(stack=[7] * (d - 1), width=256))
        assert starved.halted


@given(blocks(), blocks())
@settings(max_examples=200, deadline=None)
def test_static_gas_additive(a, b):
    combined = Block(a.instrs + b.instrs)
    ga, gb, gc = static_gas(a), static_gas(b), static_gas(combined)
    assert gc == (ga[0] + gb[0], ga[1] + gb[1])


# -- interpreter-level halting & gas invariants ---------------------------------


@given(blocks(), st.integers(0, 2**64))
@settings(max_examples=300, deadline=None)
def test_halt_monotone_and_gas_positive_interpreter(blk, seed):
    rng = random.Random(seed)
    st0 = ConcreteState(stack=[rng.getrandbits(256) for _ in range(rng.randint(0, 3))],
                        width=256)
    halted = False
    gas = 0
    state = st0
    for i in range(len(blk)):
        nxt = interpret(Block(blk.instrs[: i + 1]), st0)
        if halted:
            assert nxt.halted  # monotone
        if not nxt.halted:
            assert nxt.gas_used > gas or i < 0
            gas = nxt.gas_used
        halted = nxt.halted


# -- solver-level per-instruction invariants -------------------------------------


def _per_instruction_script(ins, premise, conclusion_neg):
    """tau(ins, sigma, 0) with the premise asserted and conclusion negated."""
    imm = 1 if ins.is_push else None
    blk = Block(((ins, imm),))
    u = build_universe(blk, 4)
    enc = Encoding(u)
    state = enc.state("src")
    enc.declare_universe_consts()
    enc.script.add(enc.encode_instruction(ins, imm, state, 0))
    premise(enc, state)
    conclusion_neg(enc, state)
    return enc.script


ALL_INSTRUCTIONS = [i for i in TABLE if not i.is_push or i.push_width == 1]


@pytest.mark.parametrize("ins", ALL_INSTRUCTIONS, ids=lambda i: i.mnemonic)
def test_halting_monotone_per_instruction(ins):
    script = _per_instruction_script(
        ins,
        lambda enc, state: enc.script.add(s.eq(state.hlt(s.intlit(0)), s.TRUE)),
        lambda enc, state: enc.script.add(s.neg(state.hlt(s.intlit(1)))),
    )
    assert solve_text(script.serialize())[0] == "unsat"


@pytest.mark.parametrize("ins", ALL_INSTRUCTIONS, ids=lambda i: i.mnemonic)
def test_gas_strictly_increases_per_instruction(ins):
    script = _per_instruction_script(
        ins,
        lambda enc, state: None,
        lambda enc, state: enc.script.add(
            s.le(state.gas(s.intlit(1)), state.gas(s.intlit(0)))),
    )
    assert solve_text(script.serialize())[0] == "unsat"


def test_equivalence_reflexive():
    p = parse_asm("PUSH 1 SLOAD ADD")
    u = build_universe(p, 4)
    enc = Encoding(u)
    state = enc.state("src")
    enc.declare_universe_consts()
    enc.script.add(enc.init_state(state, u.depth))
    enc.script.add(enc.init_storage(state, p))
    enc.script.add(enc.encode_program(p, state))
    enc.script.add(s.neg(enc.encode_equivalence(state, state, 3, 3)))
    assert solve_text(enc.script.serialize())[0] == "unsat"


# -- encoder vs interpreter agreement --------------------------------------------


def _chain_oracle_values(rng, blk, width):
    const = {}
    fns = {}
    storage = []
    for ins, _ in blk:
        if ins.effect_class is EffectClass.CONST_UNINTERPRETED:
            const.setdefault(ins.mnemonic, rng.randrange(1 << width))
        if ins.effect_class is EffectClass.NONCONST_UNINTERPRETED:
            fns.setdefault(ins.mnemonic, []).append(rng.randrange(1 << width))
        if ins.is_storage:
            storage.append(rng.randrange(1 << width))
    return const, fns, storage


@pytest.mark.parametrize("seed", range(25))
def test_encoder_interpreter_agreement(seed):
    width = 4
    rng = random.Random(seed * 77 + 5)
    blk = random_block(rng, width, max_len=5)
    d = program_depth(blk)
    inputs = [rng.randrange(1 << width) for _ in range(d)]
    const, fns, storage = _chain_oracle_values(rng, blk, width)

    script, meta = encode_execution(blk, width)
    u = meta["universe"]
    state = meta["state"]
    for x, val in zip(u.stack_inputs, inputs):
        script.add(s.eq(x, s.bvlit(val, width)))
    for m, var in sorted(u.const_ui.items()):
        script.add(s.eq(var, s.bvlit(const[m], width)))
    for m in sorted(u.nonconst_vars):
        for var, val in zip(u.nonconst_vars[m], fns[m]):
            script.add(s.eq(var, s.bvlit(val, width)))
    for var, val in zip(u.storage_inits, storage):
        script.add(s.eq(var, s.bvlit(val, width)))

    end = s.intlit(len(blk))
    script.query(state.cnt(end))
    script.query(state.hlt(end))
    script.query(state.gas(end))
    verdict = check(script, SolverConfig())
    assert verdict.status == "Sat"
    cnt, hlt, gas = verdict.model.values()

    oracle = SequenceOracle(const, fns, storage, width=width)
    final = interpret(blk, ConcreteState(stack=list(inputs), oracle=oracle,
                                         width=width))
    assert hlt == final.halted
    if not final.halted:
        assert cnt == len(final.stack)
        assert gas == final.gas_used
        # stack words agree position by position
        script2, meta2 = encode_execution(blk, width)
        for x, val in zip(meta2["universe"].stack_inputs, inputs):
            script2.add(s.eq(x, s.bvlit(val, width)))
        for m, var in sorted(meta2["universe"].const_ui.items()):
            script2.add(s.eq(var, s.bvlit(const[m], width)))
        for m in sorted(meta2["universe"].nonconst_vars):
            for var, val in zip(meta2["universe"].nonconst_vars[m], fns[m]):
                script2.add(s.eq(var, s.bvlit(val, width)))
        for var, val in zip(meta2["universe"].storage_inits, storage):
            script2.add(s.eq(var, s.bvlit(val, width)))
        for pos in range(len(final.stack)):
            script2.query(meta2["state"].st(end, s.intlit(pos)))
        v2 = check(script2, SolverConfig())
        assert list(v2.model.values()) == final.stack


# -- scaling of word size ---------------------------------------------------------


SCALING_OPS = [TABLE.lookup_mnemonic(m)
               for m in ("ADD", "SUB", "AND", "OR", "XOR", "NOT", "POP",
                         "DUP1", "SWAP1")]


def _equivalent_at(p, q, width, depth):
    import itertools

    for inputs in itertools.product(range(1 << width), repeat=depth):
        a = interpret(p, ConcreteState(stack=list(inputs), width=width))
        b = interpret(q, ConcreteState(stack=list(inputs), width=width))
        if (a.halted, a.stack) != (b.halted, b.stack):
            return False
    return True


@pytest.mark.parametrize("seed", range(40))
def test_scaling_equivalence_downward(seed):
    rng = random.Random(seed * 31 + 9)

    def gen():
        out = []
        for _ in range(rng.randint(1, 3)):
            if rng.random() < 0.4:
                out.append((TABLE.push(1), rng.randrange(4)))
            else:
                out.append((rng.choice(SCALING_OPS), None))
        return Block(tuple(out))

    p, q = gen(), gen()
    depth = max(program_depth(p), program_depth(q))
    if depth > 2:
        return
    if _equivalent_at(p, q, 8, depth):  # stands in for full width
        assert _equivalent_at(p, q, 2, depth)
        assert _equivalent_at(p, q, 3, depth)


def test_scaling_converse_false_not_example():
    p = parse_asm("PUSH 0 SUB PUSH 3 ADD")
    q = parse_asm("NOT")
    assert _equivalent_at(p, q, 2, 1)
    assert not _equivalent_at(p, q, 8, 1)


# -- context closure (replacement safety) ------------------------------------------


VALIDATED_PAIRS = [
    ("PUSH 0 SUB PUSH 3 ADD", "PUSH 3 SUB"),
    ("ADDRESS DUP1", "ADDRESS ADDRESS"),
    ("PUSH 0 PUSH 4 SLOAD SUB PUSH 4 DUP2 SWAP1 SSTORE POP", ""),
]


@pytest.mark.parametrize("pair", VALIDATED_PAIRS, ids=lambda p: p[0][:18])
def test_context_closure(pair):
    p, t = parse_asm(pair[0]), parse_asm(pair[1])
    need = program_depth(p)
    rng = random.Random(2024)
    checked = 0
    while checked < 40:
        c1 = random_block(rng, 8, max_len=4, allow_uninterpreted=True)
        c2 = random_block(rng, 8, max_len=4, allow_uninterpreted=True)
        depth0 = program_depth(c1)
        probe = ConcreteState(stack=[rng.getrandbits(256) for _ in range(depth0 + need)],
                              oracle=SequenceOracle({}, {}, [], width=256), width=256)
        mid = interpret(c1, probe)
        if mid.halted or len(mid.stack) < need:
            continue  # context starves the junction; replacement presumes it does not
        checked += 1
        left = Block(c1.instrs + p.instrs + c2.instrs)
        right = Block(c1.instrs + t.instrs + c2.instrs)
        oracle = SequenceOracle({"ADDRESS": rng.getrandbits(256)}, {}, [], width=256)
        oracle._storage = [rng.getrandbits(256) for _ in range(8)]
        init = ConcreteState(stack=list(probe.stack), oracle=oracle, width=256)
        ra = interpret(left, init)
        rb = interpret(right, init)
        assert states_equal(ra, rb)


# -- distinguishing formula agrees with exhaustive interpretation -----------------


@pytest.mark.parametrize("seed", range(20))
def test_validation_matches_exhaustive_equivalence(seed):
    from evmso.validate import translation_validate

    width = 3
    rng = random.Random(seed * 131 + 17)
    p = random_block(rng, width, max_len=3, allow_uninterpreted=False,
                     allow_storage=False)
    q = random_block(rng, width, max_len=3, allow_uninterpreted=False,
                     allow_storage=False)
    depth = max(program_depth(p), program_depth(q))
    if depth > 3:
        return
    import itertools

    truth = True
    for inputs in itertools.product(range(1 << width), repeat=depth):
        a = interpret(p, ConcreteState(stack=list(inputs), width=width))
        b = interpret(q, ConcreteState(stack=list(inputs), width=width))
        if not states_equal(a, b):
            truth = False
            break
    verdict = translation_validate(p, q, width=width)
    assert verdict.status == ("Equivalent" if truth else "Counterexample"), \
        (p.asm(), q.asm())
