"""SMT encoding of stack-machine execution and the superoptimization queries.

One execution state is four function symbols indexed by the step counter
(stack contents, stack size, exceptional-halt flag, accumulated gas) plus
a storage function. Input words, initial storage words, and the outputs
of environment-dependent instructions form the variable universe V that
every word-producing function takes as explicit leading arguments
(Ackermann style, no array theory).

Word width k is a construction parameter: small widths for searching,
256 for translation validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import smtlib as s
from .bytecode import Block, program_depth
from .isa import EffectClass, Instruction, STACK_LIMIT

W_BOTTOM = 0  # default word: untouched storage keys and oracle slots read as zero

# decoding window: EncodeUso models are read back through get-value on
# instr(0..W-1)/a(0..W-1), so target length is additionally capped here
USO_MAX_LEN = 32


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    """One element of the candidate instruction set CI.

    `push_arg` selects how a PUSH gets its word: "template" reads the
    position-indexed template function, a string names an abstracted
    source constant (encoded like a constant-uninterpreted output).
    """

    ins: Instruction
    code: int
    push_arg: Optional[str] = None  # None | "template" | variable name

    @property
    def label(self) -> str:
        if self.ins.is_push and self.push_arg not in (None, "template"):
            return f"PUSH.{self.push_arg}"
        return self.ins.base_mnemonic


def abstract_push_args(p: Block, k: int) -> tuple[Block, dict[str, int]]:
    """Mark PUSH immediates that do not fit in k bits as symbolic constants.

    Returns the block (immediates stay in place so reassembly is exact) and
    the mapping var name -> original value; equal oversized immediates share
    one variable. Encoding at width k treats mapped immediates as variables.
    """
    if k > 256:
        raise EncodingError("width above 256 bits")
    mapping: dict[str, int] = {}
    seen: dict[int, str] = {}
    for ins, imm in p:
        if ins.is_push and imm >= (1 << k) and imm not in seen:
            name = f"c_{len(seen) + 1}"
            seen[imm] = name
            mapping[name] = imm
    return p, mapping


@dataclass
class VarUniverse:
    """The universally quantified inputs V shared by source and target."""

    width: int
    stack_inputs: list[s.Term] = field(default_factory=list)   # x_0 .. x_{d-1}
    storage_inits: list[s.Term] = field(default_factory=list)  # s_1 .. s_l
    const_ui: dict[str, s.Term] = field(default_factory=dict)  # mnemonic -> u_<m>
    nonconst_ui: dict[str, list[int]] = field(default_factory=dict)  # mnemonic -> positions
    nonconst_vars: dict[str, list[s.Term]] = field(default_factory=dict)
    abstract_vars: dict[str, s.Term] = field(default_factory=dict)  # c_i name -> sym
    abstract_map: dict[str, int] = field(default_factory=dict)      # c_i name -> value

    @property
    def depth(self) -> int:
        return len(self.stack_inputs)

    def all_vars(self) -> list[s.Term]:
        out = list(self.stack_inputs) + list(self.storage_inits)
        for m in sorted(self.const_ui):
            out.append(self.const_ui[m])
        for m in sorted(self.nonconst_vars):
            out.extend(self.nonconst_vars[m])
        out.extend(self.abstract_vars[n] for n in sorted(self.abstract_vars))
        return out

    def sorts(self) -> tuple[s.Sort, ...]:
        return tuple(v.sort for v in self.all_vars())


@dataclass
class SymbolicState:
    """Handles to the five state functions of one program, sharing V."""

    prefix: str
    universe: VarUniverse

    @property
    def _word(self) -> s.Sort:
        return s.BV(self.universe.width)

    def declare(self, script: s.Script) -> None:
        vsorts = self.universe.sorts()
        script.declare(f"st_{self.prefix}", vsorts + (s.INT, s.INT), self._word)
        script.declare(f"cnt_{self.prefix}", (s.INT,), s.INT)
        script.declare(f"hlt_{self.prefix}", (s.INT,), s.BOOL)
        script.declare(f"gas_{self.prefix}", vsorts + (s.INT,), s.INT)
        script.declare(f"str_{self.prefix}", vsorts + (s.INT, self._word), self._word)

    def _v(self) -> tuple[s.Term, ...]:
        return tuple(self.universe.all_vars())

    def st(self, j: s.Term, n: s.Term) -> s.Term:
        return s.app(f"st_{self.prefix}", self._v() + (j, n), self._word)

    def cnt(self, j: s.Term) -> s.Term:
        return s.app(f"cnt_{self.prefix}", (j,), s.INT)

    def hlt(self, j: s.Term) -> s.Term:
        return s.app(f"hlt_{self.prefix}", (j,), s.BOOL)

    def gas(self, j: s.Term) -> s.Term:
        return s.app(f"gas_{self.prefix}", self._v() + (j,), s.INT)

    def storage(self, j: s.Term, w: s.Term) -> s.Term:
        return s.app(f"str_{self.prefix}", self._v() + (j, w), self._word)

    def top(self, j: s.Term, back: int = 0) -> s.Term:
        """Word `back` positions below the top of the stack after j steps."""
        return self.st(j, s.sub(self.cnt(j), s.intlit(back + 1)))


def build_universe(source: Block, width: int, abstract_map: Optional[dict[str, int]] = None,
                   extra_storage_blocks: Sequence[tuple["SymbolicState", Block]] = ()) -> VarUniverse:
    u = VarUniverse(width=width)
    word = s.BV(width)
    for i in range(program_depth(source)):
        u.stack_inputs.append(s.sym(f"x_{i}", word))
    for j, (ins, _) in enumerate(source):
        if ins.is_storage:
            u.storage_inits.append(s.sym(f"s_{len(u.storage_inits) + 1}", word))
        if ins.effect_class is EffectClass.CONST_UNINTERPRETED:
            u.const_ui.setdefault(ins.mnemonic, s.sym(f"u_{ins.mnemonic}", word))
        if ins.effect_class is EffectClass.NONCONST_UNINTERPRETED:
            u.nonconst_ui.setdefault(ins.mnemonic, []).append(j)
    for m, positions in u.nonconst_ui.items():
        u.nonconst_vars[m] = [s.sym(f"u_{m}_{i + 1}", word) for i in range(len(positions))]
    for name, value in (abstract_map or {}).items():
        u.abstract_vars[name] = s.sym(name, word)
        u.abstract_map[name] = value
    return u


class Encoding:
    """One encoding instance: a script under construction plus its V."""

    def __init__(self, universe: VarUniverse, logic: str = "UFBVLIA"):
        self.universe = universe
        self.width = universe.width
        self.script = s.Script(logic=logic)
        self._fresh = 0

    # -- plumbing ---------------------------------------------------------

    def state(self, prefix: str) -> SymbolicState:
        st = SymbolicState(prefix, self.universe)
        st.declare(self.script)
        return st

    def fresh(self, base: str) -> str:
        self._fresh += 1
        return f"{base}{self._fresh}"

    def word_lit(self, v: int) -> s.Term:
        return s.bvlit(v, self.width)

    def push_word(self, imm: int) -> s.Term:
        """Immediate of a source PUSH: literal if it fits, else its c_i variable."""
        if imm < (1 << self.width):
            return self.word_lit(imm)
        for name, value in self.universe.abstract_map.items():
            if value == imm:
                return self.universe.abstract_vars[name]
        raise EncodingError(
            f"PUSH {imm} does not fit in {self.width} bits and is not abstracted")

    def declare_universe_consts(self) -> None:
        """Translation-validation mode: V are free constants, not bound."""
        for v in self.universe.all_vars():
            self.script.declare(v.name, (), v.sort)

    def fn_symbol(self, m: str) -> str:
        return f"f_{m}"

    def oracle_fn(self, m: str, arg: s.Term) -> s.Term:
        word = s.BV(self.width)
        vs = tuple(self.universe.all_vars())
        self.script.declare(self.fn_symbol(m), self.universe.sorts() + (word,), word)
        return s.app(self.fn_symbol(m), vs + (arg,), word)

    # -- initialization (Def. 3 plus storage/oracle chains) ----------------

    def init_state(self, st: SymbolicState, d: int) -> s.Term:
        zero = s.intlit(0)
        parts = [
            s.eq(st.gas(zero), s.intlit(0)),
            s.eq(st.hlt(zero), s.FALSE),
            s.eq(st.cnt(zero), s.intlit(d)),
        ]
        for ell in range(d):
            parts.append(s.eq(st.st(zero, s.intlit(ell)), self.universe.stack_inputs[ell]))
        return s.conj(*parts)

    def _key_chain(self, keyed: list[tuple[s.Term, s.Term]], w: s.Term) -> s.Term:
        expr = self.word_lit(W_BOTTOM)
        for key, val in reversed(keyed):
            expr = s.ite(s.eq(w, key), val, expr)
        return expr

    def init_storage(self, st: SymbolicState, source: Block,
                     key_state: Optional[SymbolicState] = None) -> s.Term:
        """Universally quantified ite chain seeding the storage with s_1..s_l.

        Key expressions read the stack of `key_state` (the source state by
        default) right before each storage instruction executes.
        """
        key_state = key_state or st
        keyed = []
        idx = 0
        for j, (ins, _) in enumerate(source):
            if ins.is_storage:
                keyed.append((key_state.top(s.intlit(j)), self.universe.storage_inits[idx]))
                idx += 1
        w = s.sym(self.fresh("qw"), s.BV(self.width))
        return s.forall([w], s.eq(st.storage(s.intlit(0), w), self._key_chain(keyed, w)))

    def init_uninterpreted(self, source: Block, st: SymbolicState) -> s.Term:
        """Seed each oracle function f with the results its source calls produce."""
        parts = []
        for m in sorted(self.universe.nonconst_ui):
            positions = self.universe.nonconst_ui[m]
            results = self.universe.nonconst_vars[m]
            keyed = [(st.top(s.intlit(j)), u) for j, u in zip(positions, results)]
            w = s.sym(self.fresh("qw"), s.BV(self.width))
            parts.append(s.forall([w], s.eq(self.oracle_fn(m, w), self._key_chain(keyed, w))))
        return s.conj(*parts)

    # -- per-instruction transition tau ------------------------------------

    def _tau_st(self, ins: Instruction, imm, st: SymbolicState,
                j: s.Term, j1: s.Term, push_term: Optional[s.Term]) -> s.Term:
        newtop = st.st(j1, s.sub(st.cnt(j1), s.intlit(1)))
        top = st.top(j)
        sec = st.top(j, 1)
        m = ins.mnemonic
        zero = self.word_lit(0)
        one = self.word_lit(1)

        if ins.is_push:
            word = push_term if push_term is not None else self.push_word(imm)
            return s.eq(newtop, word)
        if m == "POP" or m == "SSTORE":
            return s.TRUE  # stack effect is preservation only
        if m == "ADD":
            return s.eq(newtop, s.bvadd(top, sec))
        if m == "SUB":
            return s.eq(newtop, s.bvsub(top, sec))
        if m == "MUL":
            return s.eq(newtop, s.bvmul(top, sec))
        if m == "DIV":
            return s.eq(newtop, s.ite(s.eq(sec, zero), zero, s.bvudiv(top, sec)))
        if m == "SDIV":
            return s.eq(newtop, s.ite(s.eq(sec, zero), zero, s.bvsdiv(top, sec)))
        if m == "MOD":
            return s.eq(newtop, s.ite(s.eq(sec, zero), zero, s.bvurem(top, sec)))
        if m == "SMOD":
            return s.eq(newtop, s.ite(s.eq(sec, zero), zero, s.bvsrem(top, sec)))
        if m == "LT":
            return s.eq(newtop, s.ite(s.bvult(top, sec), one, zero))
        if m == "GT":
            return s.eq(newtop, s.ite(s.bvult(sec, top), one, zero))
        if m == "SLT":
            return s.eq(newtop, s.ite(s.bvslt(top, sec), one, zero))
        if m == "SGT":
            return s.eq(newtop, s.ite(s.bvslt(sec, top), one, zero))
        if m == "EQ":
            return s.eq(newtop, s.ite(s.eq(top, sec), one, zero))
        if m == "ISZERO":
            return s.eq(newtop, s.ite(s.eq(top, zero), one, zero))
        if m == "AND":
            return s.eq(newtop, s.bvand(top, sec))
        if m == "OR":
            return s.eq(newtop, s.bvor(top, sec))
        if m == "XOR":
            return s.eq(newtop, s.bvxor(top, sec))
        if m == "NOT":
            return s.eq(newtop, s.bvnot(top))
        if m == "SLOAD":
            return s.eq(newtop, st.storage(j, top))
        if m.startswith("DUP"):
            i = int(m[3:])
            parts = [s.eq(newtop, st.top(j, i - 1))]
            for t in range(i):
                pos = s.sub(st.cnt(j), s.intlit(i - t))
                parts.append(s.eq(st.st(j1, pos), st.st(j, pos)))
            return s.conj(*parts)
        if m.startswith("SWAP"):
            i = int(m[4:])
            parts = [
                s.eq(st.top(j1), st.top(j, i)),
                s.eq(st.st(j1, s.sub(st.cnt(j1), s.intlit(i + 1))), st.top(j)),
            ]
            for t in range(1, i):
                pos = s.sub(st.cnt(j), s.intlit(t + 1))
                parts.append(s.eq(st.st(j1, pos), st.st(j, pos)))
            return s.conj(*parts)
        if ins.effect_class is EffectClass.CONST_UNINTERPRETED:
            return s.eq(newtop, self.universe.const_ui[m])
        if ins.effect_class is EffectClass.NONCONST_UNINTERPRETED:
            return s.eq(newtop, self.oracle_fn(m, top))
        raise EncodingError(f"no stack encoding for {m}")

    def _gas_cost(self, ins: Instruction, st: SymbolicState, j: s.Term) -> s.Term:
        if ins.gas.kind == "fixed":
            return s.intlit(ins.gas.amount)
        # SSTORE: writing a fresh (zero) key a non-zero value pays the set cost
        key, val = st.top(j), st.top(j, 1)
        cur = st.storage(j, key)
        zero = self.word_lit(0)
        is_reset = s.disj(s.neg(s.eq(cur, zero)), s.eq(val, zero))
        return s.ite(is_reset, s.intlit(ins.gas.reset_cost), s.intlit(ins.gas.set_cost))

    def encode_instruction(self, ins: Instruction, imm, st: SymbolicState,
                           j: Union[int, s.Term], push_term: Optional[s.Term] = None) -> s.Term:
        """tau(instruction, state, j): the five-part transition formula."""
        if ins.effect_class is EffectClass.UNENCODABLE:
            raise EncodingError(f"{ins.mnemonic} is not encodable")
        if isinstance(j, int):
            j = s.intlit(j)
        j1 = s.add(j, s.intlit(1))
        delta, alpha = ins.delta, ins.alpha

        tau_c = s.eq(st.cnt(j1), s.add(st.cnt(j), s.intlit(alpha - delta)))
        tau_g = s.eq(st.gas(j1), s.add(st.gas(j), self._gas_cost(ins, st, j)))
        tau_hlt = s.eq(
            st.hlt(j1),
            s.disj(
                st.hlt(j),
                s.lt(s.sub(st.cnt(j), s.intlit(delta)), s.intlit(0)),
                s.gt(s.add(s.sub(st.cnt(j), s.intlit(delta)), s.intlit(alpha)),
                     s.intlit(STACK_LIMIT)),
            ),
        )
        n = s.sym(self.fresh("qn"), s.INT)
        tau_pres = s.forall(
            [n],
            s.implies(s.lt(n, s.sub(st.cnt(j), s.intlit(delta))),
                      s.eq(st.st(j1, n), st.st(j, n))),
        )
        if ins.mnemonic == "SSTORE":
            w = s.sym(self.fresh("qw"), s.BV(self.width))
            stor = s.forall(
                [w],
                s.eq(st.storage(j1, w),
                     s.ite(s.eq(w, st.top(j)), st.top(j, 1), st.storage(j, w))),
            )
        else:
            w = s.sym(self.fresh("qw"), s.BV(self.width))
            stor = s.forall([w], s.eq(st.storage(j1, w), st.storage(j, w)))
        tau_st = self._tau_st(ins, imm, st, j, j1, push_term)
        return s.conj(tau_st, tau_c, tau_g, tau_hlt, tau_pres, stor)

    def encode_program(self, p: Block, st: SymbolicState) -> s.Term:
        return s.conj(*(self.encode_instruction(ins, imm, st, j)
                        for j, (ins, imm) in enumerate(p)))

    # -- state equality epsilon (gas deliberately unconstrained) -----------

    def encode_equivalence(self, st1: SymbolicState, st2: SymbolicState,
                           j1: Union[int, s.Term], j2: Union[int, s.Term]) -> s.Term:
        if isinstance(j1, int):
            j1 = s.intlit(j1)
        if isinstance(j2, int):
            j2 = s.intlit(j2)
        n = s.sym(self.fresh("qn"), s.INT)
        w = s.sym(self.fresh("qw"), s.BV(self.width))
        # stack positions are non-negative by construction; leaving the lower
        # bound open would let unconstrained slots below the stack distinguish
        # otherwise equal states
        in_stack = s.conj(s.ge(n, s.intlit(0)), s.lt(n, st1.cnt(j1)))
        return s.conj(
            s.eq(st1.cnt(j1), st2.cnt(j2)),
            s.eq(st1.hlt(j1), st2.hlt(j2)),
            s.forall([n], s.implies(in_stack, s.eq(st1.st(j1, n), st2.st(j2, n)))),
            s.forall([w], s.eq(st1.storage(j1, w), st2.storage(j2, w))),
        )

    def candidate_tau(self, cand: Candidate, st: SymbolicState, j: s.Term) -> s.Term:
        push_term = None
        if cand.ins.is_push:
            if cand.push_arg == "template":
                self.script.declare("a", (s.INT,), s.BV(self.width))
                push_term = s.app("a", (j,), s.BV(self.width))
            else:
                push_term = self.universe.abstract_vars[cand.push_arg]
        return self.encode_instruction(cand.ins, 0 if cand.ins.is_push else None,
                                       st, j, push_term=push_term)


def _source_setup(enc: Encoding, source: Block, src: SymbolicState,
                  tgt: Optional[SymbolicState]) -> list[s.Term]:
    d = enc.universe.depth
    parts = [enc.init_state(src, d), enc.init_storage(src, source),
             enc.init_uninterpreted(source, src)]
    if tgt is not None:
        parts.append(enc.init_state(tgt, d))
        parts.append(enc.init_storage(tgt, source, key_state=src))
    parts.append(enc.encode_program(source, src))
    return parts


def encode_bso(source: Block, candidates: Sequence[Candidate], width: int,
               abstract_map: Optional[dict[str, int]] = None) -> tuple[s.Script, dict]:
    """All-permutations formula over a fixed candidate multiset."""
    universe = build_universe(source, width, abstract_map)
    enc = Encoding(universe)
    src = enc.state("src")
    tgt = enc.state("tgt")
    n = len(candidates)

    j_syms = [enc.script.declare_const(f"j_{ell + 1}", s.INT) for ell in range(n)]
    body = _source_setup(enc, source, src, tgt)
    body.append(enc.encode_equivalence(src, tgt, 0, 0))
    body.append(enc.encode_equivalence(src, tgt, len(source), n))
    for ell, cand in enumerate(candidates):
        body.append(enc.candidate_tau(cand, tgt, j_syms[ell]))
    if n > 1:
        body.append(s.distinct(*j_syms))
    for jl in j_syms:
        body.append(s.conj(s.ge(jl, s.intlit(0)), s.lt(jl, s.intlit(n))))

    enc.script.add(s.forall(universe.all_vars(), s.conj(*body)))
    for jl in j_syms:
        enc.script.query(jl)
    a_terms = []
    for j in range(n):
        if any(c.push_arg == "template" for c in candidates):
            t = s.app("a", (s.intlit(j),), s.BV(width))
            enc.script.query(t)
            a_terms.append(t)
    meta = {
        "mode": "bso",
        "width": width,
        "candidates": list(candidates),
        "j_syms": j_syms,
        "a_terms": a_terms,
        "abstract_map": dict(abstract_map or {}),
    }
    return enc.script, meta


def encode_uso(source: Block, ci: Sequence[Candidate], width: int,
               abstract_map: Optional[dict[str, int]] = None,
               max_gas: Optional[int] = None) -> tuple[s.Script, dict]:
    """Unbounded search formula: models are all cheaper equivalent programs."""
    from .isa import static_gas

    universe = build_universe(source, width, abstract_map)
    enc = Encoding(universe)
    src = enc.state("src")
    tgt = enc.state("tgt")
    if max_gas is None:
        max_gas = static_gas(source)[1]
    n_bound = min(max_gas, USO_MAX_LEN)

    n = enc.script.declare_const("n", s.INT)
    enc.script.declare("instr", (s.INT,), s.INT)

    body = _source_setup(enc, source, src, tgt)
    j = s.sym(enc.fresh("qj"), s.INT)
    guard = s.conj(s.ge(j, s.intlit(0)), s.lt(j, n))
    branches = [s.implies(s.eq(s.app("instr", (j,), s.INT), s.intlit(c.code)),
                          enc.candidate_tau(c, tgt, j)) for c in ci]
    domain = s.disj(*(s.eq(s.app("instr", (j,), s.INT), s.intlit(c.code)) for c in ci))
    body.append(s.forall([j], s.implies(guard, s.conj(*branches, domain))))
    body.append(enc.encode_equivalence(src, tgt, 0, 0))
    body.append(enc.encode_equivalence(src, tgt, len(source), n))
    body.append(s.gt(src.gas(s.intlit(len(source))), tgt.gas(n)))

    enc.script.add(s.forall(universe.all_vars(), s.conj(*body)))
    enc.script.add(s.ge(n, s.intlit(0)))
    enc.script.add(s.le(n, s.intlit(n_bound)))

    enc.script.query(n)
    instr_terms, a_terms = [], []
    enc.script.declare("a", (s.INT,), s.BV(width))
    for jj in range(n_bound):
        ti = s.app("instr", (s.intlit(jj),), s.INT)
        ta = s.app("a", (s.intlit(jj),), s.BV(width))
        enc.script.query(ti)
        enc.script.query(ta)
        instr_terms.append(ti)
        a_terms.append(ta)
    meta = {
        "mode": "uso",
        "width": width,
        "ci": list(ci),
        "n_sym": n,
        "n_bound": n_bound,
        "instr_terms": instr_terms,
        "a_terms": a_terms,
        "tgt_gas_at_n": tgt.gas(n),
        "universe": universe,
        "abstract_map": dict(abstract_map or {}),
    }
    return enc.script, meta


def tighten_bound(script: s.Script, meta: dict, target_gas: int) -> s.Script:
    """Conjoin gas(target, n) < target_gas so the next model is strictly cheaper."""
    universe: VarUniverse = meta["universe"]
    bound = s.forall(universe.all_vars(),
                     s.lt(meta["tgt_gas_at_n"], s.intlit(target_gas)))
    script.add(bound)
    return script


def encode_validation(p: Block, p2: Block, width: int = 256) -> tuple[s.Script, dict]:
    """Translation-validation formula: satisfiable iff the programs differ.

    Both blocks' storage instructions seed the shared initial storage, and
    the oracle chains cover occurrences in either program, so a target
    reading state the source never touched cannot be validated by accident.
    """
    d = max(program_depth(p), program_depth(p2))
    combined_instrs = tuple(p.instrs) + tuple(p2.instrs)
    combined = Block(combined_instrs)
    universe = build_universe(combined, width)
    # the combined depth can exceed max of the two; pin inputs to the real need
    universe.stack_inputs = [s.sym(f"x_{i}", s.BV(width)) for i in range(d)]
    enc = Encoding(universe)
    src = enc.state("src")
    tgt = enc.state("tgt")
    enc.declare_universe_consts()

    keyed_positions: list[tuple[s.Term, s.Term]] = []
    idx = 0
    for state, blk in ((src, p), (tgt, p2)):
        for j, (ins, _) in enumerate(blk):
            if ins.is_storage:
                keyed_positions.append((state.top(s.intlit(j)), universe.storage_inits[idx]))
                idx += 1
    w = s.sym(enc.fresh("qw"), s.BV(width))
    chain = enc._key_chain(keyed_positions, w)
    for state in (src, tgt):
        ww = s.sym(enc.fresh("qw"), s.BV(width))
        chain_w = enc._key_chain(keyed_positions, ww)
        enc.script.add(s.forall([ww], s.eq(state.storage(s.intlit(0), ww), chain_w)))

    # oracle chains keyed by occurrence in either program
    fn_keys: dict[str, list[tuple[s.Term, s.Term]]] = {}
    counters: dict[str, int] = {}
    for state, blk in ((src, p), (tgt, p2)):
        for j, (ins, _) in enumerate(blk):
            if ins.effect_class is EffectClass.NONCONST_UNINTERPRETED:
                m = ins.mnemonic
                i = counters.get(m, 0)
                counters[m] = i + 1
                fn_keys.setdefault(m, []).append(
                    (state.top(s.intlit(j)), universe.nonconst_vars[m][i]))
    for m in sorted(fn_keys):
        ww = s.sym(enc.fresh("qw"), s.BV(width))
        enc.script.add(s.forall([ww], s.eq(enc.oracle_fn(m, ww),
                                           enc._key_chain(fn_keys[m], ww))))

    enc.script.add(enc.init_state(src, d))
    enc.script.add(enc.init_state(tgt, d))
    enc.script.add(enc.encode_program(p, src))
    enc.script.add(enc.encode_program(p2, tgt))
    enc.script.add(enc.encode_equivalence(src, tgt, 0, 0))
    enc.script.add(s.neg(enc.encode_equivalence(src, tgt, len(p), len(p2))))

    for v in universe.all_vars():
        enc.script.query(v)
    meta = {"mode": "validate", "width": width, "universe": universe,
            "src": src, "tgt": tgt}
    return enc.script, meta


def encode_execution(p: Block, width: int) -> tuple[s.Script, dict]:
    """Single-program chain (init + tau) for agreement checks and traces."""
    universe = build_universe(p, width)
    enc = Encoding(universe)
    src = enc.state("src")
    enc.declare_universe_consts()
    enc.script.add(enc.init_state(src, universe.depth))
    enc.script.add(enc.init_storage(src, p))
    enc.script.add(enc.init_uninterpreted(p, src))
    enc.script.add(enc.encode_program(p, src))
    meta = {"mode": "execution", "width": width, "universe": universe, "state": src,
            "encoding": enc}
    return enc.script, meta
