from evmso.bytecode import parse_asm
from evmso.validate import (ConcreteState, Oracle, brute_force_optimum, interpret,
                            random_validate, states_equal, translation_validate)

from .conftest import SequenceOracle


def run(asm, stack=(), storage=None, oracle=None, width=256):
    init = ConcreteState(stack=list(stack), storage=dict(storage or {}),
                         oracle=oracle, width=width)
    return interpret(parse_asm(asm), init)


def test_interpret_example_trace():
    st = run("PUSH 41 PUSH 1 ADD")
    assert st.stack == [42]
    assert st.gas_used == 9
    assert not st.halted


def test_interpret_underflow_halts():
    st = run("ADD")
    assert st.halted
    assert st.stack == []


def test_interpret_storage_block_is_identity():
    st = run("PUSH 0 PUSH 4 SLOAD SUB PUSH 4 DUP2 SWAP1 SSTORE POP",
             storage={4: 77})
    assert st.stack == []
    assert st.storage[4] == 77
    assert not st.halted


def test_interpret_halt_freezes_state():
    st = run("PUSH 5 POP POP PUSH 9")
    assert st.halted
    assert st.stack == []          # frozen at the underflow
    assert st.gas_used == 3 + 2    # PUSH 5 and the first POP only


def test_interpret_wraparound():
    st = run("PUSH 1 PUSH 1 PUSH 0 SUB ADD")  # (0 - 1) + 1 wraps to 0
    assert st.stack == [0]


def test_interpret_signed_ops():
    allones = 2**256 - 1  # -1
    st = run(f"PUSH 2 PUSH {allones} SDIV")  # -1 / 2 = 0
    assert st.stack == [0]
    st = run(f"PUSH 2 PUSH {allones} SLT PUSH 2 PUSH {allones} LT")
    assert st.stack == [1, 0]  # -1 < 2 signed; 2^256-1 > 2 unsigned


def test_interpret_sstore_gas_rule():
    fresh = run("PUSH 5 PUSH 1 SSTORE")  # store 5 at key 1, key was zero
    assert fresh.gas_used == 3 + 3 + 20000
    reset = run("PUSH 5 PUSH 1 SSTORE", storage={1: 9})
    assert reset.gas_used == 3 + 3 + 5000
    zero_write = run("PUSH 0 PUSH 1 SSTORE", storage={1: 9})
    assert zero_write.gas_used == 3 + 3 + 5000


def test_interpret_uninterpreted_reads_oracle():
    oracle = SequenceOracle({"ADDRESS": 123}, {"BLOCKHASH": [7, 8]}, [])
    st = run("ADDRESS PUSH 1 BLOCKHASH PUSH 1 BLOCKHASH PUSH 2 BLOCKHASH",
             oracle=oracle)
    assert st.stack == [123, 7, 7, 8]


def test_translation_validate_identity():
    p = parse_asm("PUSH 3 SUB")
    assert translation_validate(p, p).status == "Equivalent"


def test_translation_validate_not_example_both_widths():
    src = parse_asm("PUSH 0 SUB PUSH 3 ADD")
    tgt = parse_asm("NOT")
    assert translation_validate(src, tgt, width=2).status == "Equivalent"
    res = translation_validate(src, tgt, width=256)
    assert res.status == "Counterexample"
    assert res.counterexample  # witness assignment for the inputs


def test_random_validate_equivalent_pair():
    ok, _ = random_validate(parse_asm("PUSH 3 SUB"),
                            parse_asm("PUSH 0 SUB PUSH 3 ADD"), trials=64, seed=3)
    assert ok


def test_random_validate_distinguishes():
    ok, witness = random_validate(parse_asm("PUSH 1"), parse_asm("PUSH 2"),
                                  trials=1, seed=0)
    assert not ok
    assert witness["stack"] == []


def test_random_validate_address_dup():
    ok, _ = random_validate(parse_asm("ADDRESS DUP1"), parse_asm("ADDRESS ADDRESS"),
                            trials=64, seed=5)
    assert ok


def test_states_equal_ignores_gas():
    a = ConcreteState(stack=[1], gas_used=10)
    b = ConcreteState(stack=[1], gas_used=99)
    assert states_equal(a, b)


def test_brute_force_push0_add(micro_isa):
    opt = brute_force_optimum(parse_asm("PUSH 0 ADD"), micro_isa, width=2)
    assert len(opt) == 0


def test_brute_force_push3_sub_is_optimal(micro_isa):
    from evmso.isa import static_gas

    opt = brute_force_optimum(parse_asm("PUSH 3 SUB"), micro_isa, width=2)
    assert static_gas(opt)[0] == 6


def test_brute_force_dup_pop(micro_isa):
    opt = brute_force_optimum(parse_asm("DUP1 POP"), micro_isa, width=2)
    assert len(opt) == 0


def test_brute_force_idempotent(micro_isa):
    from evmso.isa import static_gas

    p = parse_asm("PUSH 1 PUSH 2 ADD")
    opt = brute_force_optimum(p, micro_isa, width=2)
    again = brute_force_optimum(opt, micro_isa, width=2)
    assert static_gas(opt)[0] == static_gas(again)[0]


def test_translation_validate_long_deep_block():
    # exceeds the default position window; the adaptive bound must cover it
    body = "POP " * 45
    p = parse_asm(body)
    q = parse_asm(body)
    assert translation_validate(p, q, width=256).status == "Equivalent"
    shorter = parse_asm("POP " * 44)
    assert translation_validate(p, shorter, width=256).status == "Counterexample"


def test_translation_validate_oracle_key_sensitivity():
    # duplicating an environment read is only sound when the keys agree
    same = translation_validate(parse_asm("PUSH 5 BLOCKHASH PUSH 5 BLOCKHASH"),
                                parse_asm("PUSH 5 BLOCKHASH DUP1"))
    diff = translation_validate(parse_asm("PUSH 5 BLOCKHASH PUSH 6 BLOCKHASH"),
                                parse_asm("PUSH 5 BLOCKHASH DUP1"))
    assert same.status == "Equivalent"
    assert diff.status == "Counterexample"


def test_translation_validate_rejects_untouched_storage_spoof():
    # a target must not pass by reading storage the source never names
    res = translation_validate(parse_asm("PUSH 0"), parse_asm("PUSH 9 SLOAD"))
    assert res.status == "Counterexample"
