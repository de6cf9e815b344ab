"""Exists-forall synthesis: decides the program-search formulas.

The existential unknowns of these formulas describe a straight-line
program: a length, per-position instruction choices (or a permutation of
fixed candidates), and PUSH words. Fixing them turns the formula into a
deterministic execution chain, so the engine searches the finite choice
space with counterexample-guided pruning: candidates run on a small
example set of universal inputs through step functions compiled from the
formula itself, survivors are verified by exhaustive enumeration of the
universal space (complete at small word sizes), and verification
failures feed new examples back into the search.

Search order is deterministic (lengths ascend, instructions sort by
min-gas then code, PUSH words ascend), so verdicts are reproducible.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .. import smtlib as s
from .ground import Unknown, Verdict
from .sexpr import ParsedScript

ENUM_VERIFY_LIMIT = 1 << 16
POOL_WIDTH_LIMIT = 4  # enumerate PUSH words exhaustively up to this width
STACK_LIMIT = 1 << 10


class Extract(Exception):
    """Formula outside the synthesis fragment this engine understands."""


# -- compiled step semantics ---------------------------------------------------


@dataclass
class Step:
    dc: int = 0
    delta: int = 0
    alpha: int = 0
    limit: int = STACK_LIMIT
    gas_fixed: Optional[int] = None
    gas_ite: Optional[tuple] = None  # (cond_fn, reset_cost, set_cost)
    writes: list = field(default_factory=list)  # (offset below new top, closure)
    storage_write: Optional[tuple] = None       # (key closure, val closure)
    uses_template: bool = False

    @property
    def gas_min(self) -> int:
        return self.gas_fixed if self.gas_fixed is not None else min(self.gas_ite[1:])

    @property
    def gas_max(self) -> int:
        return self.gas_fixed if self.gas_fixed is not None else max(self.gas_ite[1:])


def _is_app(t: s.Term, name: str) -> bool:
    return t.kind == "app" and t.name == name


class StepCompiler:
    """Turn one instruction's tau conjuncts into an executable Step.

    `pre` identifies the step index in the formula: ("sym", j_name) for
    templated positions, ("lit", j) for a fixed source position.
    """

    def __init__(self, prefix: str, pre, width: int):
        self.prefix = prefix
        self.pre = pre
        self.width = width
        self.st_name = f"st_{prefix}"
        self.cnt_name = f"cnt_{prefix}"
        self.gas_name = f"gas_{prefix}"
        self.hlt_name = f"hlt_{prefix}"
        self.str_name = f"str_{prefix}"

    def index_kind(self, t: s.Term) -> Optional[str]:
        """"pre" | "post" | None."""
        kind, ref = self.pre
        if kind == "sym":
            if t.kind == "sym" and t.name == ref:
                return "pre"
            if (t.kind == "op" and t.name == "+" and len(t.args) == 2
                    and t.args[0].kind == "sym" and t.args[0].name == ref
                    and t.args[1].kind == "lit" and t.args[1].value == 1):
                return "post"
            return None
        j = ref
        if t.kind == "lit":
            return "pre" if t.value == j else "post" if t.value == j + 1 else None
        if (t.kind == "op" and t.name == "+" and len(t.args) == 2
                and t.args[0].kind == "lit" and t.args[1].kind == "lit"):
            v = t.args[0].value + t.args[1].value
            return "pre" if v == j else "post" if v == j + 1 else None
        return None

    def compile(self, conjs: list[s.Term]) -> Step:
        step = Step()
        hlt_terms = []
        raw_writes = []
        for c in conjs:
            self._classify(c, step, raw_writes, hlt_terms)
        if step.gas_fixed is None and step.gas_ite is None:
            raise Extract("missing gas clause")
        for lt_arg, gt_arg, limit in hlt_terms:
            step.delta = -self._cnt_offset(lt_arg)
            step.alpha = self._cnt_offset(gt_arg) + step.delta
            step.limit = limit
        for pos_term, rhs in raw_writes:
            off = self._write_offset(pos_term, step.dc)
            step.writes.append((off, self._closure(rhs, step)))
        step.writes.sort(key=lambda w: w[0])
        return step

    def _classify(self, c: s.Term, step: Step, raw_writes, hlt_terms) -> None:
        if c.kind == "forall":
            body = c.args[0]
            if body.kind == "op" and body.name == "=>":
                return  # tau_pres: the simulator preserves untouched slots
            if (body.kind == "op" and body.name == "="
                    and _is_app(body.args[0], self.str_name)):
                rhs = body.args[1]
                if _is_app(rhs, self.str_name):
                    return  # storage preservation
                if rhs.kind == "op" and rhs.name == "ite":
                    cond, val, els = rhs.args
                    if not _is_app(els, self.str_name):
                        raise Extract("storage update tail")
                    key_term = cond.args[1]
                    step.storage_write = (self._closure(key_term, step),
                                          self._closure(val, step))
                    return
            raise Extract("unrecognized quantified clause")
        if c.kind != "op" or c.name != "=":
            raise Extract(f"unrecognized clause {c.name or c.kind}")
        lhs, rhs = c.args
        if _is_app(lhs, self.cnt_name) and self.index_kind(lhs.args[0]) == "post":
            step.dc = self._cnt_offset(rhs)
            return
        if _is_app(lhs, self.gas_name):
            if (rhs.kind == "op" and rhs.name == "+" and len(rhs.args) == 2
                    and _is_app(rhs.args[0], self.gas_name)):
                inc = rhs.args[1]
                if inc.kind == "lit":
                    step.gas_fixed = inc.value
                    return
                if inc.kind == "op" and inc.name == "ite":
                    cond, lo, hi = inc.args
                    if lo.kind == "lit" and hi.kind == "lit":
                        step.gas_ite = (self._closure_bool(cond, step), lo.value, hi.value)
                        return
            raise Extract("unrecognized gas clause")
        if _is_app(lhs, self.hlt_name):
            lt_arg = gt_arg = limit = None
            if rhs.kind == "op" and rhs.name == "or":
                for part in rhs.args:
                    if part.kind == "op" and part.name == "<":
                        lt_arg = part.args[0]
                    elif part.kind == "op" and part.name == ">" \
                            and part.args[1].kind == "lit":
                        gt_arg, limit = part.args[0], part.args[1].value
            if lt_arg is None or gt_arg is None:
                raise Extract("unrecognized halt clause")
            hlt_terms.append((lt_arg, gt_arg, limit))
            return
        if _is_app(lhs, self.st_name):
            raw_writes.append((lhs.args[-1], rhs))
            return
        raise Extract(f"unrecognized equation head {lhs!r}")

    # positions are affine in cnt(pre)/cnt(post) with coefficient one
    def _cnt_parts(self, t: s.Term) -> tuple[int, int, int]:
        """(coeff of cnt(pre), coeff of cnt(post), constant)."""
        if t.kind == "lit":
            return 0, 0, t.value
        if _is_app(t, self.cnt_name):
            k = self.index_kind(t.args[0])
            if k == "pre":
                return 1, 0, 0
            if k == "post":
                return 0, 1, 0
            raise Extract("cnt at foreign index")
        if t.kind == "op" and t.name == "+":
            a = b = c = 0
            for x in t.args:
                xa, xb, xc = self._cnt_parts(x)
                a, b, c = a + xa, b + xb, c + xc
            return a, b, c
        if t.kind == "op" and t.name == "-":
            a, b, c = self._cnt_parts(t.args[0])
            if len(t.args) == 1:
                return -a, -b, -c
            for x in t.args[1:]:
                xa, xb, xc = self._cnt_parts(x)
                a, b, c = a - xa, b - xb, c - xc
            return a, b, c
        raise Extract(f"position term {t!r}")

    def _cnt_offset(self, t: s.Term) -> int:
        """Constant C where t = cnt(pre) + C."""
        a, b, c = self._cnt_parts(t)
        if (a, b) != (1, 0):
            raise Extract("expected cnt(j) + C")
        return c

    def _write_offset(self, pos: s.Term, dc: int) -> int:
        a, b, c = self._cnt_parts(pos)
        if a + b != 1:
            raise Extract("write position not on the stack")
        rel = c + b * dc  # position = cnt(pre) + rel
        return (dc - 1) - rel  # offset below the post-step top

    def _read_offset(self, t: s.Term) -> int:
        if self.index_kind(t.args[-2]) != "pre":
            raise Extract("stack read from the post state")
        a, b, c = self._cnt_parts(t.args[-1])
        if (a, b) != (1, 0):
            raise Extract("stack read position")
        return -1 - c  # cnt(j) - 1 - b reads b words below the top

    def _closure(self, t: s.Term, step: Step) -> Callable:
        width = self.width
        mask = (1 << width) - 1
        if t.kind == "lit":
            v = t.value & mask
            return lambda env: v
        if t.kind == "sym":
            name = t.name
            return lambda env: env["u"][name]
        if t.kind == "app":
            if t.name == self.st_name:
                off = self._read_offset(t)
                return lambda env: _stack_read(env["stack"], off)
            if t.name == self.str_name:
                if self.index_kind(t.args[-2]) != "pre":
                    raise Extract("storage read from the post state")
                keyf = self._closure(t.args[-1], step)
                return lambda env: env["storage"](keyf(env))
            if t.name == "a":
                step.uses_template = True
                return lambda env: env["push"]
            if t.name.startswith("f_"):
                fname = t.name
                argf = self._closure(t.args[-1], step)
                return lambda env: env["oracle"](fname, argf(env))
            raise Extract(f"application {t.name}")
        if t.kind == "op" and t.name == "ite":
            cf = self._closure_bool(t.args[0], step)
            af = self._closure(t.args[1], step)
            bf = self._closure(t.args[2], step)
            return lambda env: af(env) if cf(env) else bf(env)
        if t.kind == "op":
            fns = [self._closure(a, step) for a in t.args]
            return _word_op(t.name, fns, width)
        raise Extract(f"word term {t!r}")

    def _closure_bool(self, t: s.Term, step: Step) -> Callable:
        if t.kind == "lit":
            v = bool(t.value)
            return lambda env: v
        if t.kind != "op":
            raise Extract(f"bool term {t!r}")
        if t.name == "not":
            f = self._closure_bool(t.args[0], step)
            return lambda env: not f(env)
        if t.name in ("and", "or"):
            fs = [self._closure_bool(a, step) for a in t.args]
            return (lambda env: all(f(env) for f in fs)) if t.name == "and" \
                else (lambda env: any(f(env) for f in fs))
        if t.name in ("=", "bvult", "bvslt"):
            a = self._closure(t.args[0], step)
            b = self._closure(t.args[1], step)
            if t.name == "=":
                return lambda env: a(env) == b(env)
            if t.name == "bvult":
                return lambda env: a(env) < b(env)
            w = self.width
            return lambda env: _sign(a(env), w) < _sign(b(env), w)
        raise Extract(f"bool term {t!r}")


def _stack_read(stack: list, off: int) -> int:
    idx = len(stack) - 1 - off
    if 0 <= idx < len(stack):
        return stack[idx]
    return 0  # only reachable in halting runs, which comparisons reject


def _sign(v: int, width: int) -> int:
    return v - (1 << width) if v >> (width - 1) else v


def _word_op(name: str, fns: list, width: int) -> Callable:
    mask = (1 << width) - 1
    if name == "bvadd":
        return lambda env: (fns[0](env) + fns[1](env)) & mask
    if name == "bvsub":
        return lambda env: (fns[0](env) - fns[1](env)) & mask
    if name == "bvmul":
        return lambda env: (fns[0](env) * fns[1](env)) & mask
    if name == "bvnot":
        return lambda env: fns[0](env) ^ mask
    if name == "bvneg":
        return lambda env: (-fns[0](env)) & mask
    if name == "bvand":
        return lambda env: fns[0](env) & fns[1](env)
    if name == "bvor":
        return lambda env: fns[0](env) | fns[1](env)
    if name == "bvxor":
        return lambda env: fns[0](env) ^ fns[1](env)
    if name == "bvudiv":
        return lambda env: mask if fns[1](env) == 0 else fns[0](env) // fns[1](env)
    if name == "bvurem":
        return lambda env: fns[0](env) if fns[1](env) == 0 else fns[0](env) % fns[1](env)
    if name == "bvsdiv":
        def sdiv(env):
            a, b = fns[0](env), fns[1](env)
            if b == 0:
                return mask
            sa, sb = _sign(a, width), _sign(b, width)
            q = abs(sa) // abs(sb)
            return (-q if (sa < 0) != (sb < 0) else q) & mask
        return sdiv
    if name == "bvsrem":
        def srem(env):
            a, b = fns[0](env), fns[1](env)
            if b == 0:
                return a
            sa, sb = _sign(a, width), _sign(b, width)
            r = abs(sa) % abs(sb)
            return (-r if sa < 0 else r) & mask
        return srem
    raise Extract(f"word operator {name}")


# -- problem extraction --------------------------------------------------------


@dataclass
class ChainSpec:
    prefix: str
    depth: int = 0
    init_stack: list = field(default_factory=list)  # universal var names, bottom first
    steps: list = field(default_factory=list)
    bindings: list = field(default_factory=list)    # (step index, var name) storage seeds
    oracles: dict = field(default_factory=dict)     # fname -> [(step index, var name)]


@dataclass
class SynthProblem:
    width: int
    universal: list  # (name, width)
    mode: str        # "uso" | "bso"
    src: ChainSpec
    tgt_prefix: str
    tgt_depth: int
    src_len: int
    strict_gas: bool
    tighten: list
    positional: list          # ground Int constraints over n / j_l
    domain: list = field(default_factory=list)   # uso: (code, Step), sorted
    n_lo: int = 0
    n_hi: int = 0
    n_name: str = "n"
    items: list = field(default_factory=list)     # bso: (j_name, Step)
    incomplete_pool: bool = False


def _app_prefix(t: s.Term) -> Optional[str]:
    for fam in ("cnt_", "st_", "gas_", "hlt_", "str_"):
        if t.kind == "app" and t.name.startswith(fam):
            return t.name[len(fam):]
    return None


def _prefixes_in(t: s.Term, out: set) -> None:
    p = _app_prefix(t)
    if p:
        out.add(p)
    for a in t.args:
        _prefixes_in(a, out)


def _syms_in(t: s.Term, out: set) -> None:
    if t.kind == "sym":
        out.add(t.name)
    for a in t.args:
        _syms_in(a, out)


def extract_problem(parsed: ParsedScript) -> SynthProblem:
    ef_bodies = []
    rest = []
    for a in parsed.asserts:
        if a.kind == "forall" and not _single_equation(a.args[0]):
            ef_bodies.append(a)
        else:
            rest.append(a)

    universal = [(b.name, s.bv_width(b.sort)) for b in ef_bodies[0].binders] \
        if ef_bodies else []
    width = universal[0][1] if universal else _any_bv_width(parsed)
    body: list[s.Term] = []
    for a in ef_bodies:
        body.extend(s.conjuncts(a.args[0]))
    for a in rest:
        body.extend(s.conjuncts(a))

    # locate rho (unbounded mode)
    rho = None
    n_name = None
    for c in body:
        if c.kind == "forall" and len(c.binders) == 1 and c.binders[0].sort == s.INT:
            b = c.args[0]
            if b.kind == "op" and b.name == "=>" and _mentions_app(b.args[1], "instr"):
                rho = c
                guard = b.args[0]
                for g in s.conjuncts(guard):
                    if g.kind == "op" and g.name == "<" and g.args[1].kind == "sym":
                        n_name = g.args[1].name
    mode = "uso" if rho is not None else "bso"

    int_consts = sorted(n for n, (args, ret) in parsed.decls.items()
                        if not args and ret == s.INT)
    j_names = [n for n in int_consts if n != n_name]

    # split the body: candidate clauses, positional constraints, chain context
    ctx: list[s.Term] = []
    positional: list[s.Term] = []
    cand_tau: dict[str, list[s.Term]] = {j: [] for j in j_names}
    for c in body:
        if c is rho:
            continue
        syms: set = set()
        _syms_in(c, syms)
        touched = [j for j in j_names if j in syms]
        if touched:
            prefs: set = set()
            _prefixes_in(c, prefs)
            if prefs:
                if len(touched) != 1:
                    raise Extract("clause touches several positions")
                cand_tau[touched[0]].append(c)
            else:
                positional.append(c)
            continue
        if n_name is not None and n_name in syms and not _has_app(c):
            positional.append(c)
            continue
        ctx.append(c)

    # identify source/target prefixes from the final state equality on cnt
    prefixes: set = set()
    for c in body:
        _prefixes_in(c, prefixes)
    src_prefix, tgt_prefix, src_len = _find_final_cnt(ctx, n_name, cand_tau, mode)

    src = _extract_chain(ctx, src_prefix, width)
    tgt_init = _extract_chain(ctx, tgt_prefix, width, steps=False)

    strict_gas = False
    tighten: list[int] = []
    for c in ctx:
        if c.kind == "op" and c.name == ">":
            a, b = c.args
            if _is_gas(a, src_prefix) and _is_gas(b, tgt_prefix):
                strict_gas = True
        if c.kind == "op" and c.name == "<":
            a, b = c.args
            if _is_gas(a, tgt_prefix) and b.kind == "lit":
                tighten.append(b.value)

    prob = SynthProblem(width=width, universal=universal, mode=mode, src=src,
                        tgt_prefix=tgt_prefix, tgt_depth=tgt_init.depth,
                        src_len=src_len, strict_gas=strict_gas, tighten=tighten,
                        positional=positional, n_name=n_name or "n")

    if mode == "uso":
        guard, inner = rho.args[0].args
        jname = rho.binders[0].name
        comp = StepCompiler(tgt_prefix, ("sym", jname), width)
        domain = []
        for part in s.conjuncts(inner):
            if part.kind == "op" and part.name == "=>":
                head = part.args[0]
                if (head.kind == "op" and head.name == "=" and _is_app_name(head.args[0], "instr")
                        and head.args[1].kind == "lit"):
                    code = head.args[1].value
                    step = comp.compile(s.conjuncts(part.args[1]))
                    domain.append((code, step))
        if not domain:
            raise Extract("empty candidate domain")
        domain.sort(key=lambda cs: (cs[1].gas_min, cs[0]))
        prob.domain = domain
        lo, hi = 0, None
        for g in positional:
            if g.kind == "op" and g.name == "<=" and g.args[0].kind == "sym" \
                    and g.args[0].name == prob.n_name and g.args[1].kind == "lit":
                hi = g.args[1].value if hi is None else min(hi, g.args[1].value)
        if hi is None:
            raise Extract("no length bound")
        prob.n_lo, prob.n_hi = lo, hi
    else:
        items = []
        for jn in j_names:
            conjs = []
            for c in cand_tau[jn]:
                conjs.extend(s.conjuncts(c))
            comp = StepCompiler(tgt_prefix, ("sym", jn), width)
            items.append((jn, comp.compile(conjs)))
        prob.items = items
    return prob


def _single_equation(body: s.Term) -> bool:
    return body.kind == "op" and body.name == "="


def _any_bv_width(parsed: ParsedScript) -> int:
    for args, ret in parsed.decls.values():
        for srt in tuple(args) + (ret,):
            if s.is_bv(srt):
                return s.bv_width(srt)
    return 4


def _mentions_app(t: s.Term, name: str) -> bool:
    if t.kind == "app" and t.name == name:
        return True
    return any(_mentions_app(a, name) for a in t.args)


def _has_app(t: s.Term) -> bool:
    if t.kind == "app":
        return True
    return any(_has_app(a) for a in t.args)


def _is_app_name(t: s.Term, name: str) -> bool:
    return t.kind == "app" and t.name == name


def _is_gas(t: s.Term, prefix: str) -> bool:
    return t.kind == "app" and t.name == f"gas_{prefix}"


def _find_final_cnt(ctx, n_name, cand_tau, mode) -> tuple[str, str, int]:
    """(source prefix, target prefix, source length) from the final cnt equality."""
    tgt_hint = None
    for conjs in cand_tau.values():
        prefs: set = set()
        for c in conjs:
            _prefixes_in(c, prefs)
        if prefs:
            tgt_hint = sorted(prefs)[0]
    best = None
    for c in ctx:
        if c.kind != "op" or c.name != "=":
            continue
        a, b = c.args
        if not (a.kind == "app" and a.name.startswith("cnt_")
                and b.kind == "app" and b.name.startswith("cnt_")):
            continue
        pa, pb = a.name[4:], b.name[4:]
        if pa == pb:
            continue
        ia, ib = a.args[0], b.args[0]
        if mode == "uso":
            if ib.kind == "sym" and ib.name == n_name and ia.kind == "lit":
                return pa, pb, ia.value
            if ia.kind == "sym" and ia.name == n_name and ib.kind == "lit":
                return pb, pa, ib.value
        else:
            if ia.kind == "lit" and ib.kind == "lit" and (ia.value, ib.value) != (0, 0):
                if tgt_hint == pb or tgt_hint is None:
                    best = (pa, pb, ia.value)
                else:
                    best = (pb, pa, ib.value)
            if ia.kind == "lit" and ib.kind == "lit" and ia.value == 0 and ib.value == 0 \
                    and best is None:
                best = (pa if tgt_hint != pa else pb,
                        tgt_hint or pb, 0)
    if best is None:
        raise Extract("no final state equality")
    return best


def _extract_chain(ctx, prefix: str, width: int, steps: bool = True) -> ChainSpec:
    spec = ChainSpec(prefix=prefix)
    per_step: dict[int, list[s.Term]] = {}
    st_name, cnt_name, str_name = f"st_{prefix}", f"cnt_{prefix}", f"str_{prefix}"

    def foreign(c: s.Term) -> bool:
        prefs: set = set()
        _prefixes_in(c, prefs)
        return bool(prefs - {prefix})

    own = {st_name: -2, f"str_{prefix}": -2, cnt_name: 0,
           f"hlt_{prefix}": 0, f"gas_{prefix}": -1}

    def step_of(t: s.Term) -> Optional[int]:
        """State index of a clause head, if it belongs to this chain."""
        if t.kind == "app" and t.name in own:
            idx_arg = t.args[own[t.name]]
            if idx_arg.kind == "lit":
                return idx_arg.value
            if (idx_arg.kind == "op" and idx_arg.name == "+"
                    and all(a.kind == "lit" for a in idx_arg.args)):
                return sum(a.value for a in idx_arg.args)
        return None

    for c in ctx:
        if foreign(c):
            continue  # state equalities and goals tie both chains together
        if c.kind == "op" and c.name == "=":
            lhs, rhs = c.args
            j = step_of(lhs)
            if j is None:
                continue
            if j == 0:
                if lhs.name == cnt_name and rhs.kind == "lit":
                    spec.depth = rhs.value
                elif lhs.name == st_name and lhs.args[-1].kind == "lit" and rhs.kind == "sym":
                    pos = lhs.args[-1].value
                    while len(spec.init_stack) <= pos:
                        spec.init_stack.append(None)
                    spec.init_stack[pos] = rhs.name
                continue
            per_step.setdefault(j - 1, []).append(c)
        elif c.kind == "forall":
            body = c.args[0]
            inner = body.args[1] if body.kind == "op" and body.name == "=>" else body
            for part in s.conjuncts(inner):
                if part.kind == "op" and part.name == "=":
                    j = step_of(part.args[0])
                    if j == 0 and part.args[0].name == str_name:
                        spec.bindings = _chain_bindings(part.args[1], prefix)
                        break
                    if j is not None and j > 0:
                        per_step.setdefault(j - 1, []).append(c)
                        break
                    if part.args[0].kind == "app" and part.args[0].name.startswith("f_"):
                        spec.oracles[part.args[0].name] = _chain_bindings(part.args[1], prefix)
                        break

    if steps and per_step:
        length = max(per_step) + 1
        for j in range(length):
            comp = StepCompiler(prefix, ("lit", j), width)
            spec.steps.append(comp.compile(per_step.get(j, [])))
    return spec


def _chain_bindings(t: s.Term, prefix: str) -> list:
    """[(source step, var name)] from an ite key chain."""
    out = []
    st_name = f"st_{prefix}"
    while t.kind == "op" and t.name == "ite":
        cond, val, rest = t.args
        key = cond.args[1]
        if not (key.kind == "app" and key.name == st_name and key.args[-2].kind == "lit"):
            raise Extract("storage chain key")
        if val.kind != "sym":
            raise Extract("storage chain value")
        out.append((key.args[-2].value, val.name))
        t = rest
    return out


# -- simulation -----------------------------------------------------------------


class Store:
    """Storage as an overlay over the shared initial binding chain."""

    __slots__ = ("over", "chain")

    def __init__(self, chain: list):
        self.over: dict[int, int] = {}
        self.chain = chain  # [(key or None while unrecorded, value)]

    def read(self, key: int) -> int:
        if key in self.over:
            return self.over[key]
        for k, v in self.chain:
            if k == key:
                return v
        return 0

    def write(self, key: int, val: int) -> None:
        self.over[key] = val

    def snapshot(self) -> tuple:
        return tuple(sorted(self.over.items()))


@dataclass
class RunResult:
    stack: tuple
    store: Store
    gas: int
    hlt: bool


def run_chain(spec: ChainSpec, u: dict, chain_bindings: list, oracle_tables: dict,
              push_args: Optional[dict] = None, record: bool = False) -> RunResult:
    """Execute compiled steps; optionally record binding keys as they resolve."""
    stack = [u[name] for name in spec.init_stack]
    store = Store(chain_bindings)
    gas = 0
    hlt = False

    def oracle(fname: str, arg: int) -> int:
        for k, v in oracle_tables.get(fname, ()):
            if k == arg:
                return v
        return 0

    env = {"stack": stack, "storage": store.read, "oracle": oracle, "u": u, "push": 0}

    for t, step in enumerate(spec.steps):
        if push_args is not None:
            env["push"] = push_args.get(t, 0)
        size = len(stack)
        if size - step.delta < 0 or size - step.delta + step.alpha > step.limit:
            hlt = True
            break
        if record:
            # seed the shared storage chain / oracle table with this call's key
            key = stack[-1] if stack else 0
            _record_binding(spec, t, key, u, chain_bindings, oracle_tables)
        if step.gas_fixed is not None:
            gas += step.gas_fixed
        else:
            cond, lo, hi = step.gas_ite
            gas += lo if cond(env) else hi
        vals = [(off, fn(env)) for off, fn in step.writes]
        if step.storage_write is not None:
            kf, vf = step.storage_write
            k_, v_ = kf(env), vf(env)
        else:
            k_ = None
        new_size = size + step.dc
        if step.dc > 0:
            stack.extend([0] * step.dc)
        elif step.dc < 0:
            del stack[new_size:]
        for off, v in vals:
            idx = new_size - 1 - off
            if 0 <= idx < new_size:
                stack[idx] = v
        if k_ is not None:
            store.write(k_, v_)
    return RunResult(tuple(stack), store, gas, hlt)


def _record_binding(spec: ChainSpec, t: int, key: int, u: dict,
                    chain_bindings: list, oracle_tables: dict) -> None:
    for i, (j, var) in enumerate(spec.bindings):
        if j == t and chain_bindings[i][0] is None:
            chain_bindings[i] = (key, u[var])
    for fname, entries in spec.oracles.items():
        table = oracle_tables.setdefault(fname, [None] * len(entries))
        for i, (j, var) in enumerate(entries):
            if j == t and table[i] is None:
                table[i] = (key, u[var])


def simulate_source(prob: SynthProblem, u: dict) -> tuple[RunResult, list, dict]:
    chain = [(None, u[var]) for _, var in prob.src.bindings]
    oracles: dict = {f: [None] * len(es) for f, es in prob.src.oracles.items()}
    res = run_chain(prob.src, u, chain, oracles, record=True)
    chain = [(k if k is not None else None, v) for k, v in chain]
    clean_chain = [(k, v) for k, v in chain if k is not None]
    clean_oracles = {f: [e for e in t if e is not None] for f, t in oracles.items()}
    return res, clean_chain, clean_oracles


def storages_equal(a: Store, b: Store, width: int) -> bool:
    keys = set(a.over) | set(b.over)
    if width <= 8:
        keys |= set(range(1 << width))
    else:
        keys |= {k for k, _ in a.chain}
    return all(a.read(k) == b.read(k) for k in keys)


# -- search -------------------------------------------------------------------


def _eval_positional(t: s.Term, env: dict):
    if t.kind == "lit":
        return t.value
    if t.kind == "sym":
        return env[t.name]
    a = [_eval_positional(x, env) for x in t.args]
    n = t.name
    if n == "and":
        return all(a)
    if n == "or":
        return any(a)
    if n == "not":
        return not a[0]
    if n == "=>":
        return (not a[0]) or a[1]
    if n == "=":
        return a[0] == a[1]
    if n == "distinct":
        return len(set(a)) == len(a)
    if n == "+":
        return sum(a)
    if n == "-":
        return -a[0] if len(a) == 1 else a[0] - sum(a[1:])
    if n == "*":
        return a[0] * a[1]
    if n == "<":
        return a[0] < a[1]
    if n == "<=":
        return a[0] <= a[1]
    if n == ">":
        return a[0] > a[1]
    if n == ">=":
        return a[0] >= a[1]
    raise Extract(f"positional term {t!r}")


@dataclass
class _ExState:
    """Per-example target machine state."""

    stack: list
    store: Store
    gas: int
    hlt: bool

    def key(self) -> tuple:
        return (tuple(self.stack), self.store.snapshot(), self.gas, self.hlt)

    def copy(self) -> "_ExState":
        st = Store(self.store.chain)
        st.over = dict(self.store.over)
        return _ExState(list(self.stack), st, self.gas, self.hlt)


def _apply_step(state: _ExState, step: Step, u: dict, oracle_tables: dict,
                push: int) -> bool:
    """Mutates state; returns False when the step halts the machine."""
    stack = state.stack
    size = len(stack)
    if size - step.delta < 0 or size - step.delta + step.alpha > step.limit:
        state.hlt = True
        return False

    def oracle(fname, arg):
        for k, v in oracle_tables.get(fname, ()):
            if k == arg:
                return v
        return 0

    env = {"stack": stack, "storage": state.store.read, "oracle": oracle,
           "u": u, "push": push}
    if step.gas_fixed is not None:
        state.gas += step.gas_fixed
    else:
        cond, lo, hi = step.gas_ite
        state.gas += lo if cond(env) else hi
    vals = [(off, fn(env)) for off, fn in step.writes]
    sw = None
    if step.storage_write is not None:
        kf, vf = step.storage_write
        sw = (kf(env), vf(env))
    new_size = size + step.dc
    if step.dc > 0:
        stack.extend([0] * step.dc)
    elif step.dc < 0:
        del stack[new_size:]
    for off, v in vals:
        idx = new_size - 1 - off
        if 0 <= idx < new_size:
            stack[idx] = v
    if sw is not None:
        state.store.write(sw[0], sw[1])
    return True


class Synthesizer:
    def __init__(self, prob: SynthProblem, parsed: ParsedScript,
                 deadline: Optional[float] = None):
        self.prob = prob
        self.parsed = parsed
        self.deadline = deadline
        self.names = [n for n, _ in prob.universal]
        self.widths = [w for _, w in prob.universal]
        self.space = 1
        for w in self.widths:
            self.space *= 1 << w
        self.src_cache: dict = {}
        self.incomplete = False
        import random as _random
        self._rng = _random.Random(0xE5B0)

    def _tick(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise Unknown("deadline")

    def src_run(self, ukey: tuple):
        hit = self.src_cache.get(ukey)
        if hit is None:
            u = dict(zip(self.names, ukey))
            hit = simulate_source(self.prob, u)
            self.src_cache[ukey] = hit
        return hit

    def _initial_examples(self) -> list[tuple]:
        exs = [tuple(0 for _ in self.widths),
               tuple((1 << w) - 1 for w in self.widths),
               tuple((i + 1) % (1 << w) for i, w in enumerate(self.widths)),
               tuple(self._rng.getrandbits(w) for w in self.widths)]
        out, seen = [], set()
        for e in exs:
            if e not in seen:
                seen.add(e)
                out.append(e)
        return out

    def _push_values(self) -> tuple[list[int], bool]:
        w = self.prob.width
        if w <= POOL_WIDTH_LIMIT:
            return list(range(1 << w)), False
        pool = {0, 1, (1 << w) - 1, 1 << (w - 1)}
        for t in self._literal_pool():
            pool.add(t & ((1 << w) - 1))
        return sorted(pool), True

    def _literal_pool(self) -> set[int]:
        out: set[int] = set()

        def walk(t: s.Term):
            if t.kind == "lit" and s.is_bv(t.sort):
                out.add(t.value)
            for a in t.args:
                walk(a)

        for a in self.parsed.asserts:
            walk(a)
        return out

    def _gas_budget_hi(self) -> Optional[int]:
        """Largest total target gas any model could spend (for pruning)."""
        bounds = [b - 1 for b in self.prob.tighten]
        if self.prob.strict_gas:
            hi = 0
            for st in self.prob.src.steps:
                hi += st.gas_max
            bounds.append(hi - 1)
        return min(bounds) if bounds else None

    def solve(self) -> Verdict:
        if self.prob.mode == "uso":
            return self._solve_uso()
        return self._solve_bso()

    # -- unbounded ---------------------------------------------------------

    def _solve_uso(self) -> Verdict:
        prob = self.prob
        examples = self._initial_examples()
        push_vals, incomplete = self._push_values()
        self.incomplete = incomplete
        budget_hi = self._gas_budget_hi()
        min_step = min(step.gas_min for _, step in prob.domain)

        for n in range(prob.n_lo, prob.n_hi + 1):
            self._tick()
            if budget_hi is not None and n * min_step > budget_hi:
                break
            env = {prob.n_name: n}
            if not all(_eval_positional(p, env) for p in self.prob.positional
                       if self._positional_ready(p, env)):
                continue
            domain_fn = lambda mask: [(c, s_, 0) for c, s_ in prob.domain]
            found = self._search_level(n, examples, push_vals, domain_fn)
            while found is not None:
                choices, args = found
                cex = self._verify(n, choices, args)
                if cex is None:
                    return self._model(n, choices, args)
                if cex in examples:
                    raise Unknown("verification loop")
                examples.append(cex)
                found = self._search_level(n, examples, push_vals, domain_fn)
        if self.incomplete:
            raise Unknown("push-argument pool search exhausted")
        return Verdict("unsat")

    def _solve_bso(self) -> Verdict:
        prob = self.prob
        n = len(prob.items)
        examples = self._initial_examples()
        push_vals, incomplete = self._push_values()
        self.incomplete = incomplete

        def avail(used_mask):
            return [(i, prob.items[i][1], i) for i in range(n) if not (used_mask >> i) & 1]

        found = self._search_level(n, examples, push_vals, avail, bso=True)
        while found is not None:
            choices, args = found
            positions = {prob.items[i][0]: pos for pos, i in enumerate(choices)}
            if not all(_eval_positional(p, positions)
                       for p in prob.positional if self._positional_ready(p, positions)):
                raise Unknown("positional constraints outside permutation form")
            cex = self._verify(n, choices, args, bso=True)
            if cex is None:
                return self._model(n, choices, args, bso=True)
            if cex in examples:
                raise Unknown("verification loop")
            examples.append(cex)
            found = self._search_level(n, examples, push_vals, avail, bso=True)
        if self.incomplete:
            raise Unknown("push-argument pool search exhausted")
        return Verdict("unsat")

    def _positional_ready(self, p: s.Term, env: dict) -> bool:
        syms: set = set()
        _syms_in(p, syms)
        return syms <= set(env)

    # -- the level-BFS over instruction choices -----------------------------

    def _search_level(self, n: int, examples: list[tuple], push_vals: list[int],
                      domain_fn, bso: bool = False):
        prob = self.prob
        runs = [self.src_run(e) for e in examples]
        final_cnt = len(runs[0][0].stack)
        budgets = []
        for (res, _, _) in runs:
            b = [t - 1 for t in prob.tighten]
            if prob.strict_gas:
                b.append(res.gas - 1)
            budgets.append(min(b) if b else None)
        min_step = min(st.gas_min for _, st, _ in domain_fn(0)) if domain_fn(0) else 0
        max_up = max((st.dc for _, st, _ in domain_fn(0)), default=0)
        max_down = min((st.dc for _, st, _ in domain_fn(0)), default=0)

        init_states = []
        for e, (res, chain, oracles) in zip(examples, runs):
            u = dict(zip(self.names, e))
            store = Store(chain)
            stack = [u[name] for name in prob.src.init_stack]
            init_states.append(_ExState(stack, store, 0, False))

        frontier = {(): ((), {}, init_states)}
        for t in range(n):
            self._tick()
            nxt: dict = {}
            remaining = n - t - 1
            for choices, args, states in frontier.values():
                mask = 0
                if bso:
                    for i in choices:
                        mask |= 1 << i
                for code, step, item_idx in domain_fn(mask):
                    arg_options = push_vals if step.uses_template else (None,)
                    for arg in arg_options:
                        ok = True
                        new_states = []
                        for ex_i, st0 in enumerate(states):
                            st1 = st0.copy()
                            u = dict(zip(self.names, examples[ex_i]))
                            if not _apply_step(st1, step, u, runs[ex_i][2],
                                               arg if arg is not None else 0):
                                ok = False
                                break
                            b = budgets[ex_i]
                            if b is not None and st1.gas + remaining * min_step > b:
                                ok = False
                                break
                            sz = len(st1.stack)
                            if sz + remaining * max_up < final_cnt or \
                                    sz + remaining * max_down > final_cnt:
                                ok = False
                                break
                            new_states.append(st1)
                        if not ok:
                            continue
                        key = tuple(st.key() for st in new_states)
                        if bso:
                            key = key + (mask | (1 << item_idx),)
                        if key in nxt:
                            continue
                        new_args = dict(args)
                        if arg is not None:
                            new_args[t] = arg
                        nxt[key] = (choices + ((item_idx if bso else code),),
                                    new_args, new_states)
            frontier = nxt
            if not frontier:
                return None

        candidates = sorted(frontier.values(),
                            key=lambda cav: (cav[0], tuple(sorted(cav[1].items()))))
        for choices, args, states in candidates:
            if self._accept(states, runs, budgets):
                return choices, args
        return None

    def _accept(self, states, runs, budgets) -> bool:
        for st, (res, _, _), b in zip(states, runs, budgets):
            if st.hlt != res.hlt:
                return False
            if tuple(st.stack) != res.stack:
                return False
            if not storages_equal(st.store, res.store, self.prob.width):
                return False
            if self.prob.strict_gas and not st.gas < res.gas:
                return False
            for t in self.prob.tighten:
                if not st.gas < t:
                    return False
        return True

    # -- complete verification over the universal space ---------------------

    def _assignments(self):
        return itertools.product(*(range(1 << w) for w in self.widths))

    def _verify(self, n: int, choices, args: dict, bso: bool = False):
        prob = self.prob
        if bso:
            steps = [prob.items[i][1] for i in choices]
        else:
            by_code = dict(prob.domain)
            steps = [by_code[c] for c in choices]
        if self.space <= ENUM_VERIFY_LIMIT:
            source = self._assignments()
            complete = True
        else:
            source = self._sampled_assignments(3000)
            complete = False
        for ukey in source:
            self._tick()
            res, chain, oracles = self.src_run(tuple(ukey))
            u = dict(zip(self.names, ukey))
            st = _ExState([u[nm] for nm in prob.src.init_stack], Store(chain), 0, False)
            dead = False
            for t, step in enumerate(steps):
                if not _apply_step(st, step, u, oracles, args.get(t, 0)):
                    dead = True
                    break
            if dead and not res.hlt:
                return tuple(ukey)
            if st.hlt != res.hlt or tuple(st.stack) != res.stack \
                    or not storages_equal(st.store, res.store, prob.width):
                return tuple(ukey)
            if prob.strict_gas and not st.gas < res.gas:
                return tuple(ukey)
            for b in prob.tighten:
                if not st.gas < b:
                    return tuple(ukey)
        if not complete:
            self.incomplete = True
        return None

    def _sampled_assignments(self, count: int):
        for _ in range(count):
            yield tuple(self._rng.getrandbits(w) for w in self.widths)

    # -- model -------------------------------------------------------------

    def _model(self, n: int, choices, args: dict, bso: bool = False) -> Verdict:
        prob = self.prob
        model: dict = {}
        if bso:
            for pos, i in enumerate(choices):
                model[prob.items[i][0]] = pos
        else:
            model[prob.n_name] = n
            for j, code in enumerate(choices):
                model[("instr", j)] = code
        for j, a in args.items():
            model[("a", j)] = a
        default_code = prob.domain[0][0] if prob.domain else 0
        out = {}
        for q in self.parsed.queries:
            out[s.to_sexpr(q)] = (q.sort, self._eval_query(q, model, n, default_code))
        return Verdict("sat", model=out)

    def _eval_query(self, q: s.Term, model: dict, n: int, default_code: int):
        if q.kind == "sym":
            return model.get(q.name, 0)
        if q.kind == "app" and q.args and q.args[0].kind == "lit":
            j = q.args[0].value
            if q.name == "instr":
                return model.get(("instr", j), default_code)
            if q.name == "a":
                return model.get(("a", j), 0)
        return 0


def solve_synthesis(parsed: ParsedScript, deadline: Optional[float] = None) -> Verdict:
    prob = extract_problem(parsed)
    return Synthesizer(prob, parsed, deadline).solve()
