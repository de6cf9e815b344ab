"""Solver driver tests, including the 20-case golden suite run through the
bundled solver as a real subprocess."""

import subprocess
import sys
import time

import pytest

from evmso import smtlib as s
from evmso.bytecode import parse_asm
from evmso.encoder import encode_validation
from evmso.solverio import SolverConfig, check, export_smtlib

SUBPROCESS_CFG = SolverConfig(command="builtin")

# (name, script text, expected status)
GOLDEN = [
    ("forced-bv", "(declare-fun x () (_ BitVec 4)) (assert (= x #x3)) (check-sat)"
     " (get-value (x))", "sat"),
    ("false", "(assert false) (check-sat)", "unsat"),
    ("contradiction", "(declare-fun x () (_ BitVec 4)) (assert (= x #x3))"
     " (assert (= x #x4)) (check-sat)", "unsat"),
    ("bool-sat", "(declare-fun p () Bool) (declare-fun q () Bool)"
     " (assert (and (or p q) (not p))) (check-sat)", "sat"),
    ("bool-unsat", "(declare-fun p () Bool) (assert (and p (not p))) (check-sat)",
     "unsat"),
    ("add-comm", "(declare-fun a () (_ BitVec 8)) (declare-fun b () (_ BitVec 8))"
     " (assert (distinct (bvadd a b) (bvadd b a))) (check-sat)", "unsat"),
    ("sub-self", "(declare-fun a () (_ BitVec 8))"
     " (assert (distinct (bvsub a a) #x00)) (check-sat)", "unsat"),
    ("neg-not", "(declare-fun a () (_ BitVec 8))"
     " (assert (distinct (bvneg a) (bvadd (bvnot a) #x01))) (check-sat)", "unsat"),
    ("and-ones", "(declare-fun a () (_ BitVec 8))"
     " (assert (distinct (bvand a #xff) a)) (check-sat)", "unsat"),
    ("or-zero", "(declare-fun a () (_ BitVec 8))"
     " (assert (distinct (bvor a #x00) a)) (check-sat)", "unsat"),
    ("xor-self", "(declare-fun a () (_ BitVec 8))"
     " (assert (distinct (bvxor a a) #x00)) (check-sat)", "unsat"),
    ("mul-by-3", "(declare-fun a () (_ BitVec 8))"
     " (assert (= (bvmul a #x03) #x09)) (check-sat) (get-value (a))", "sat"),
    ("mul-no-solution", "(declare-fun a () (_ BitVec 4))"
     " (assert (= (bvmul a #x2) #x3)) (check-sat)", "unsat"),
    ("udiv", "(declare-fun a () (_ BitVec 8))"
     " (assert (= (bvudiv #x09 #x02) a)) (check-sat) (get-value (a))", "sat"),
    ("ult-chain", "(declare-fun a () (_ BitVec 4)) (declare-fun b () (_ BitVec 4))"
     " (assert (and (bvult a b) (bvult b a))) (check-sat)", "unsat"),
    ("slt-sign", "(assert (bvslt #xf #x1)) (check-sat)", "sat"),
    ("ite", "(declare-fun a () (_ BitVec 4))"
     " (assert (= (ite (bvult a #x8) #x1 #x0) #x1)) (assert (bvult #x8 a))"
     " (check-sat)", "unsat"),
    ("int-eq", "(declare-fun n () Int) (assert (= n 3)) (assert (> n 2))"
     " (check-sat) (get-value (n))", "sat"),
    ("int-contradiction", "(declare-fun n () Int) (assert (= n 3))"
     " (assert (= n 4)) (check-sat)", "unsat"),
    ("uf-congruence", "(declare-fun f ((_ BitVec 4)) (_ BitVec 4))"
     " (declare-fun x () (_ BitVec 4)) (assert (= (f x) #x1))"
     " (assert (= (f x) #x2)) (check-sat)", "unsat"),
]


def _run_subprocess(text: str) -> list[str]:
    proc = subprocess.run([sys.executable, "-m", "evmso.minismt"], input=text,
                          capture_output=True, text=True, timeout=120)
    return [ln for ln in proc.stdout.splitlines() if ln.strip()]


@pytest.mark.parametrize("name,text,expected", GOLDEN, ids=[g[0] for g in GOLDEN])
def test_golden_suite_through_subprocess(name, text, expected):
    lines = _run_subprocess(text)
    assert lines[0] == expected


def test_golden_suite_has_twenty_cases():
    assert len(GOLDEN) == 20


def test_check_forced_model():
    script = s.Script()
    x = script.declare_const("x", s.BV(4))
    script.add(s.eq(x, s.bvlit(3, 4)))
    script.query(x)
    verdict = check(script, SolverConfig())
    assert verdict.status == "Sat"
    assert verdict.model["x"] == 3


def test_check_false_is_unsat():
    script = s.Script()
    script.add(s.FALSE)
    verdict = check(script, SolverConfig())
    assert verdict.status == "Unsat"
    assert verdict.model is None


def test_check_missing_binary_is_solver_error():
    script = s.Script()
    script.add(s.TRUE)
    verdict = check(script, SolverConfig(command="definitely-not-a-solver-xyz"))
    assert verdict.status == "SolverError"


def test_timeout_containment_and_reaping():
    script = s.Script()
    script.add(s.TRUE)
    cfg = SolverConfig(command=f"{sys.executable} -c import~time;time.sleep(60)".replace("~", " "),
                       grace=0.5)
    t0 = time.monotonic()
    verdict = check(script, cfg, timeout=0.5)
    assert verdict.status in ("Timeout", "SolverError")
    assert time.monotonic() - t0 < 0.5 + 0.5 + 2.0


def test_emission_deterministic():
    script, _ = encode_validation(parse_asm("PUSH 1 ADD"), parse_asm("PUSH 1 ADD"), 256)
    assert script.serialize() == script.serialize()


def test_export_reruns_identically(tmp_path):
    script, _ = encode_validation(parse_asm("PUSH 0 SUB PUSH 3 ADD"),
                                  parse_asm("PUSH 3 SUB"), 256)
    in_process = check(script, SolverConfig())
    path = export_smtlib(script, str(tmp_path / "query.smt2"))
    lines = _run_subprocess(open(path).read())
    assert lines[0] == in_process.status.lower()


def test_export_empty_formula_is_sat(tmp_path):
    script = s.Script()
    path = export_smtlib(script, str(tmp_path / "empty.smt2"))
    lines = _run_subprocess(open(path).read())
    assert lines[0] == "sat"


def test_export_dir_writes_every_call(tmp_path):
    cfg = SolverConfig(export_dir=str(tmp_path / "smt"))
    script = s.Script()
    x = script.declare_const("x", s.BV(4))
    script.add(s.eq(x, s.bvlit(1, 4)))
    check(script, cfg)
    check(script, cfg)
    files = sorted((tmp_path / "smt").glob("*.smt2"))
    assert len(files) == 2
    assert _run_subprocess(files[0].read_text())[0] == "sat"


def test_logic_all_flag():
    cfg = SolverConfig(logic_all=True)
    script = s.Script()
    from evmso.solverio import _serialize

    assert "(set-logic ALL)" in _serialize(script, cfg)
    assert "(set-logic UFBVLIA)" in script.serialize()
