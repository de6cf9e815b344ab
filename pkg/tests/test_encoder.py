import pytest

from evmso import smtlib as s
from evmso.bytecode import parse_asm
from evmso.encoder import (Candidate, EncodingError, Encoding, abstract_push_args,
                           build_universe, encode_bso, encode_execution, encode_uso,
                           encode_validation)
from evmso.isa import TABLE
from evmso.minismt.solver import solve_text
from evmso.solverio import SolverConfig, check

ALLONES = 2**256 - 1


def test_init_state_clauses():
    p = parse_asm("ADD")
    u = build_universe(p, 4)
    enc = Encoding(u)
    st = enc.state("src")
    init = s.to_sexpr(enc.init_state(st, 2))
    assert "(= (cnt_src 0) 2)" in init
    assert "x_0" in init and "x_1" in init
    assert "(= (gas_src" in init and "(= (hlt_src 0) false)" in init


def test_init_state_depth_zero_has_no_stack_clauses():
    p = parse_asm("PUSH 1")
    u = build_universe(p, 4)
    enc = Encoding(u)
    init = s.to_sexpr(enc.init_state(enc.state("src"), 0))
    assert "x_0" not in init
    assert "(= (cnt_src 0) 0)" in init


def test_init_storage_chain_length():
    p = parse_asm("PUSH 0 PUSH 4 SLOAD SUB PUSH 4 DUP2 SWAP1 SSTORE POP")
    u = build_universe(p, 4)
    assert len(u.storage_inits) == 2
    enc = Encoding(u)
    st = enc.state("src")
    chain = s.to_sexpr(enc.init_storage(st, p))
    assert chain.count("ite") == 2
    assert "s_1" in chain and "s_2" in chain


def test_init_storage_no_storage_instructions():
    p = parse_asm("PUSH 1 ADD")
    u = build_universe(p, 4)
    enc = Encoding(u)
    chain = s.to_sexpr(enc.init_storage(enc.state("src"), p))
    assert "ite" not in chain  # bare default


def test_init_uninterpreted_chain():
    p = parse_asm("PUSH 1 BLOCKHASH PUSH 2 BLOCKHASH")
    u = build_universe(p, 4)
    enc = Encoding(u)
    st = enc.state("src")
    f = s.to_sexpr(enc.init_uninterpreted(p, st))
    assert f.count("ite") == 2
    assert "u_BLOCKHASH_1" in f and "u_BLOCKHASH_2" in f


def test_tau_add_stack_clause():
    p = parse_asm("ADD")
    u = build_universe(p, 4)
    enc = Encoding(u)
    st = enc.state("src")
    tau = s.to_sexpr(enc.encode_instruction(TABLE.lookup_mnemonic("ADD"), None, st, 0))
    assert "bvadd" in tau
    assert "(+ (cnt_src 0) (- 1))" in tau or "(+ (cnt_src 0) -1)" in tau


def test_tau_sload_reads_storage():
    p = parse_asm("PUSH 1 SLOAD")
    u = build_universe(p, 4)
    enc = Encoding(u)
    st = enc.state("src")
    tau = s.to_sexpr(enc.encode_instruction(TABLE.lookup_mnemonic("SLOAD"), None, st, 1))
    assert "str_src" in tau


def test_tau_rejects_unencodable():
    from evmso.isa import EffectClass, GasRule, Instruction

    bogus = Instruction(0xFE, "INVALID", 0, 0, GasRule("fixed", amount=1),
                        EffectClass.UNENCODABLE)
    p = parse_asm("PUSH 1")
    enc = Encoding(build_universe(p, 4))
    with pytest.raises(EncodingError):
        enc.encode_instruction(bogus, None, enc.state("src"), 0)


def test_encode_program_forces_example_trace():
    script, meta = encode_execution(parse_asm("PUSH 41 PUSH 1 ADD"), width=256)
    st = meta["state"]
    for term in (st.gas(s.intlit(3)), st.cnt(s.intlit(3)),
                 st.st(s.intlit(3), s.intlit(0)), st.hlt(s.intlit(3))):
        script.query(term)
    verdict = check(script, SolverConfig())
    assert verdict.status == "Sat"
    vals = list(verdict.model.values())
    assert vals == [9, 1, 42, False]


def test_abstract_push_args_example():
    p = parse_asm("PUSH 224981")
    _, mapping = abstract_push_args(p, 4)
    assert mapping == {"c_1": 224981}


def test_abstract_push_args_small_untouched():
    p = parse_asm("PUSH 3")
    _, mapping = abstract_push_args(p, 4)
    assert mapping == {}


def test_abstract_push_args_shares_equal_values():
    p = parse_asm("PUSH 100000 PUSH 100000 PUSH 200000")
    _, mapping = abstract_push_args(p, 4)
    assert len(mapping) == 2
    assert sorted(mapping.values()) == [100000, 200000]


def test_encode_requires_abstraction_for_oversized_push():
    p = parse_asm("PUSH 224981")
    with pytest.raises(EncodingError):
        encode_bso(p, [], 4, abstract_map={})


def test_serialization_deterministic():
    p = parse_asm("PUSH 0 SUB PUSH 3 ADD")
    t1 = encode_validation(p, parse_asm("NOT"), 256)[0].serialize()
    t2 = encode_validation(p, parse_asm("NOT"), 256)[0].serialize()
    assert t1 == t2


def test_bso_empty_candidates_unsat_for_push():
    script, _ = encode_bso(parse_asm("PUSH 1"), [], 4)
    assert solve_text(script.serialize())[0] == "unsat"


def test_bso_empty_candidates_sat_for_add_zero():
    script, _ = encode_bso(parse_asm("PUSH 0 ADD"), [], 4)
    assert solve_text(script.serialize())[0] == "sat"


def test_bso_example1_model_assigns_push_argument():
    push = TABLE.lookup_mnemonic("PUSH1")
    sub = TABLE.lookup_mnemonic("SUB")
    cands = [Candidate(sub, sub.opcode), Candidate(push, push.opcode, "template")]
    script, _ = encode_bso(parse_asm("PUSH 0 SUB PUSH 3 ADD"), cands, 4)
    verdict = check(script, SolverConfig())
    assert verdict.status == "Sat"
    push_pos = verdict.model["j_2"]
    assert verdict.model[f"(a {push_pos})"] == 3


def test_uso_formula_satisfiable_for_address_dup(micro_ci):
    addr = TABLE.lookup_mnemonic("ADDRESS")
    ci = list(micro_ci) + [Candidate(addr, addr.opcode)]
    script, meta = encode_uso(parse_asm("ADDRESS DUP1"), ci, 4)
    verdict = check(script, SolverConfig())
    assert verdict.status == "Sat"
    assert verdict.model["n"] == 2


def test_uso_length_bound_uses_max_gas():
    script, meta = encode_uso(parse_asm("PUSH 1 POP"), [], 4)
    assert meta["n_bound"] == 5  # static max gas of the source
    big, meta2 = encode_uso(parse_asm("PUSH 1 SSTORE"), [], 4)
    assert meta2["n_bound"] == 32  # capped by the decoding window


def test_tighten_bound_below_zero_unsat(micro_ci):
    from evmso.encoder import tighten_bound

    script, meta = encode_uso(parse_asm("PUSH 0 ADD"), list(micro_ci), 4)
    tighten_bound(script, meta, 0)
    assert solve_text(script.serialize())[0] == "unsat"


def test_validation_width_parameter_controls_sorts():
    script, _ = encode_validation(parse_asm("PUSH 1"), parse_asm("PUSH 1"), 2)
    assert "(_ BitVec 2)" in script.serialize()


def _two_state_script(p, width=4, third=False):
    u = build_universe(p, width)
    enc = Encoding(u)
    s1, s2 = enc.state("src"), enc.state("tgt")
    states = [s1, s2]
    if third:
        states.append(enc.state("mid"))
    enc.declare_universe_consts()
    d = u.depth
    for st in states:
        enc.script.add(enc.init_state(st, d))
        enc.script.add(enc.init_storage(st, p, key_state=states[0]))
    return enc, states


def test_equivalence_at_zero_entailed_by_shared_init():
    enc, (s1, s2) = _two_state_script(parse_asm("PUSH 1 SLOAD ADD"))
    enc.script.add(s.neg(enc.encode_equivalence(s1, s2, 0, 0)))
    assert solve_text(enc.script.serialize())[0] == "unsat"


def test_equivalence_symmetric_on_shared_init():
    enc, (s1, s2) = _two_state_script(parse_asm("ADD"))
    enc.script.add(enc.encode_equivalence(s1, s2, 0, 0))
    enc.script.add(s.neg(enc.encode_equivalence(s2, s1, 0, 0)))
    assert solve_text(enc.script.serialize())[0] == "unsat"


def test_equivalence_transitive_on_shared_init():
    enc, (s1, s2, s3) = _two_state_script(parse_asm("ADD"), third=True)
    enc.script.add(enc.encode_equivalence(s1, s2, 0, 0))
    enc.script.add(enc.encode_equivalence(s2, s3, 0, 0))
    enc.script.add(s.neg(enc.encode_equivalence(s1, s3, 0, 0)))
    assert solve_text(enc.script.serialize())[0] == "unsat"
