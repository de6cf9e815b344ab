import pytest

from evmso.bytecode import Block, parse_asm
from evmso.encoder import Candidate
from evmso.isa import TABLE, static_gas
from evmso.solverio import SolverError
from evmso.superopt import (basic_superoptimize, candidate_set, decode_bso,
                            decode_uso, enumerate_candidates,
                            unbounded_superoptimize)


def labels(ms):
    return sorted(c.label for c in ms)


def test_enumerate_budget_zero_is_only_empty():
    ci = candidate_set(parse_asm("PUSH 1 ADD"), 4, {})
    assert list(enumerate_candidates(0, ci)) == [()]


def test_enumerate_budget_two_is_single_two_gas_instructions():
    ci = candidate_set(parse_asm("CALLVALUE ADD"), 4, {})
    sets = [labels(ms) for ms in enumerate_candidates(2, ci)]
    assert ["POP"] in sets and ["CALLVALUE"] in sets
    assert all(len(ms) == 1 for ms in sets)


def test_enumerate_budget_six_contains_push_sub():
    ci = candidate_set(parse_asm("PUSH 0 SUB PUSH 3 ADD"), 4, {})
    sets = [labels(ms) for ms in enumerate_candidates(6, ci)]
    assert ["PUSH", "SUB"] in sets


def test_enumerate_deterministic_order():
    ci = candidate_set(parse_asm("PUSH 1 ADD"), 4, {})
    a = [labels(ms) for ms in enumerate_candidates(5, ci)]
    b = [labels(ms) for ms in enumerate_candidates(5, ci)]
    assert a == b


def test_candidate_set_includes_only_occurring_uninterpreted():
    ci = candidate_set(parse_asm("ADDRESS DUP1"), 4, {})
    names = {c.label for c in ci}
    assert "ADDRESS" in names
    assert "CALLVALUE" not in names and "BLOCKHASH" not in names


def test_candidate_set_abstracted_push_pseudo_instruction():
    p = parse_asm("PUSH 224981 POP")
    ci = candidate_set(p, 4, {"c_1": 224981})
    assert any(c.label == "PUSH.c_1" for c in ci)


def test_decode_bso_orders_by_position():
    push = TABLE.lookup_mnemonic("PUSH1")
    sub = TABLE.lookup_mnemonic("SUB")
    cands = [Candidate(sub, sub.opcode), Candidate(push, push.opcode, "template")]
    model = {"j_1": 1, "j_2": 0, "(a 0)": 3, "(a 1)": 0}
    blk = decode_bso(model, cands, {})
    assert blk.asm() == "PUSH 3 SUB"


def test_decode_bso_single_candidate():
    pop = TABLE.lookup_mnemonic("POP")
    blk = decode_bso({"j_1": 0}, [Candidate(pop, pop.opcode)], {})
    assert blk.asm() == "POP"


def test_decode_bso_rejects_duplicate_positions():
    pop = TABLE.lookup_mnemonic("POP")
    cands = [Candidate(pop, pop.opcode), Candidate(pop, pop.opcode)]
    with pytest.raises(SolverError):
        decode_bso({"j_1": 0, "j_2": 0}, cands, {})


def test_decode_uso_reorders_and_substitutes():
    push = TABLE.lookup_mnemonic("PUSH1")
    sub = TABLE.lookup_mnemonic("SUB")
    ci = [Candidate(push, push.opcode, "template"), Candidate(sub, sub.opcode)]
    model = {"n": 2, "(instr 0)": push.opcode, "(a 0)": 3,
             "(instr 1)": sub.opcode, "(a 1)": 0}
    assert decode_uso(model, ci, {}).asm() == "PUSH 3 SUB"


def test_decode_uso_empty():
    assert len(decode_uso({"n": 0}, [], {})) == 0


def test_decode_uso_substitutes_abstracted_constant():
    push = TABLE.lookup_mnemonic("PUSH1")
    ci = [Candidate(push, 0x1000, "c_1")]
    blk = decode_uso({"n": 1, "(instr 0)": 0x1000}, ci, {"c_1": 224981})
    assert blk.asm() == "PUSH 224981"


def test_decode_uso_rejects_foreign_code():
    with pytest.raises(SolverError):
        decode_uso({"n": 1, "(instr 0)": 9999}, [], {})


def test_basic_example1():
    rep = basic_superoptimize(parse_asm("PUSH 0 SUB PUSH 3 ADD"), timeout=90)
    assert rep.status == "OptimizedOptimal"
    assert rep.gas_saved_min == rep.gas_saved_max == 6
    assert static_gas(rep.target) == (6, 6)


def test_basic_already_optimal():
    rep = basic_superoptimize(parse_asm("PUSH 3 SUB"), timeout=90)
    assert rep.status == "AlreadyOptimal"
    assert rep.target.instrs == parse_asm("PUSH 3 SUB").instrs


def test_unbounded_address_dup():
    rep = unbounded_superoptimize(parse_asm("ADDRESS DUP1"), timeout=90)
    assert rep.status == "OptimizedOptimal"
    assert static_gas(rep.target)[1] == 4
    assert rep.gas_saved_min == 1


def test_unbounded_monotone_loop_via_solver_calls():
    # each sat iteration tightens the bound; the run must end on unsat
    rep = unbounded_superoptimize(parse_asm("PUSH 0 SUB PUSH 3 ADD"), timeout=90)
    assert rep.status == "OptimizedOptimal"
    assert rep.solver_calls >= 3  # sat, unsat, validation


def test_improvement_is_strict_everywhere():
    rep = unbounded_superoptimize(
        parse_asm("PUSH 0 PUSH 4 SLOAD SUB PUSH 4 DUP2 SWAP1 SSTORE POP"),
        timeout=200)
    assert rep.improved
    slo, shi = static_gas(rep.source)
    tlo, thi = static_gas(rep.target)
    assert thi < shi and tlo <= slo


def test_unsupported_block_reports_reason():
    from evmso.isa import EffectClass, GasRule, Instruction

    weird = Instruction(0xEE, "WEIRD", 0, 1, GasRule("fixed", amount=3),
                        EffectClass.UNENCODABLE)
    rep = basic_superoptimize(Block(((weird, None),)), timeout=10)
    assert rep.status == "Unsupported"


def test_push_argument_round_trip_through_search():
    # the found target must push the true 256-bit constant, not a truncation
    rep = unbounded_superoptimize(parse_asm("PUSH 224981 POP PUSH 7"), timeout=90)
    assert rep.improved
    for ins, imm in rep.target:
        if ins.is_push and imm >= 16:
            assert imm == 224981


def test_decode_bso_three_candidates_reorder():
    pop = TABLE.lookup_mnemonic("POP")
    addr = TABLE.lookup_mnemonic("ADDRESS")
    add = TABLE.lookup_mnemonic("ADD")
    cands = [Candidate(pop, pop.opcode), Candidate(addr, addr.opcode),
             Candidate(add, add.opcode)]
    model = {"j_1": 2, "j_2": 0, "j_3": 1}
    blk = decode_bso(model, cands, {})
    assert blk.asm() == "ADDRESS ADD POP"


def test_basic_finds_simple_rewrite_of_convoluted_block():
    src = parse_asm("PUSH 0 PUSH 12 SLOAD LT ISZERO ISZERO ISZERO PUSH 12250")
    rep = basic_superoptimize(src, timeout=300)
    assert rep.status == "OptimizedOptimal"
    assert rep.target.asm() == "PUSH 1 PUSH 12250"


def test_bso_sat_implies_width_k_validation():
    # decoded models of the permutation formula validate at the search width
    from evmso.bytecode import parse_asm as asm
    from evmso.encoder import encode_bso
    from evmso.solverio import SolverConfig, check
    from evmso.validate import translation_validate

    push = TABLE.lookup_mnemonic("PUSH1")
    sub = TABLE.lookup_mnemonic("SUB")
    cases = [
        (asm("PUSH 0 SUB PUSH 3 ADD"),
         [Candidate(sub, sub.opcode), Candidate(push, push.opcode, "template")]),
        (asm("PUSH 0 ADD"), []),
    ]
    for src, cands in cases:
        script, _ = encode_bso(src, cands, 4)
        verdict = check(script, SolverConfig())
        assert verdict.status == "Sat"
        target = decode_bso(verdict.model, cands, {})
        assert translation_validate(src, target, width=4).status == "Equivalent"


def test_mode_agreement_on_micro_isa(micro_isa, micro_ci):
    import itertools
    import random

    rng = random.Random(404)
    tokens = list(micro_isa)
    pool = list(itertools.product(tokens, repeat=2))
    for prog in rng.sample(pool, 15):
        src = Block(tuple(prog))
        b = basic_superoptimize(src, search_width=2, timeout=60,
                                candidates=micro_ci, translation_validation=False)
        u = unbounded_superoptimize(src, search_width=2, timeout=60,
                                    candidates=micro_ci, translation_validation=False)
        terminating = {"AlreadyOptimal", "OptimizedOptimal"}
        if b.status in terminating and u.status in terminating:
            assert static_gas(b.target)[0] == static_gas(u.target)[0], src.asm()


def test_unbounded_callvalue_pattern_with_wide_push():
    # the same rewrite works when the trailing constant needs two bytes
    src = parse_asm("CALLVALUE DUP1 ISZERO PUSH 364")
    rep = unbounded_superoptimize(src, timeout=300)
    assert rep.improved and rep.gas_saved_min == 1
    pushes = [imm for ins, imm in rep.target if ins.is_push]
    assert pushes == [364]
