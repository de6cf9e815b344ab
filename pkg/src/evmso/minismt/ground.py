"""Quantifier-free core: demand-driven evaluation of execution-chain formulas.

Every equation in the input acts as a rewrite rule for the uninterpreted
point(s) it mentions: querying st(V, j, n) walks backwards through the
step chain until an initialization clause answers. Universally
quantified integer positions are instantiated over a window that covers
every stack position the chain can reach; universally quantified words
are handled structurally (definitions fire pointwise at symbolic keys,
equalities between chains reduce to if-then-else trees over one fresh
key). What remains after evaluation is a quantifier-free residue over
the free words, decided by enumeration, seeded sampling, or bit-blasting.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass
from typing import Optional

from .. import smtlib as s
from . import values as V
from .values import Atom, EvalError

# universally quantified stack positions are instantiated over
# [-window, bound): deep enough for any underflowing candidate chain
MIN_POS_WINDOW = 40

ENUM_LIMIT = 1 << 16
SAMPLE_ROUNDS = 300


class Unknown(Exception):
    """The engine cannot decide this input honestly."""


@dataclass
class Rule:
    binders: tuple          # sym Terms
    guard: Optional[s.Term]
    args: tuple             # argument Terms of the defined application
    rhs: s.Term
    index_key: Optional[int] = None  # static step index, when recognizable


_FAMILY_INDEX = {"st": -2, "str": -2, "cnt": 0, "hlt": 0, "gas": -1}


def _family_index_pos(fname: str) -> Optional[int]:
    return _FAMILY_INDEX.get(fname.split("_")[0])


def _static_int(t: s.Term) -> Optional[int]:
    if t.kind == "lit":
        return t.value
    if t.kind == "op" and t.name == "+" and all(a.kind == "lit" for a in t.args):
        return sum(a.value for a in t.args)
    return None


@dataclass
class Verdict:
    status: str  # "sat" | "unsat" | "unknown"
    model: Optional[dict] = None  # repr(atom) -> int/bool
    approx: bool = False


def _sort_width(sort) -> int:
    return sort[1] if s.is_bv(sort) else 0


class Ground:
    def __init__(self, decls: dict, conjuncts: list[s.Term],
                 assignment: Optional[dict] = None, deadline: Optional[float] = None):
        self.decls = decls
        self.asg = assignment or {}
        self.rules: dict[str, list[Rule]] = {}
        self.checks: list[s.Term] = []
        self.points: dict = {}
        self.inprogress: set = set()
        self.approx = False
        self.deadline = deadline
        self.free_vars: dict[str, str] = {}  # symbol name -> atom key
        self._sym_cache: dict = {}
        self._fresh_n = 0
        for c in conjuncts:
            self._register(c)
        # stack positions can drift one slot per executed instruction, and the
        # longest chain is bounded by the largest small step literal around
        self.pos_window = max(MIN_POS_WINDOW, self._max_step_literal() + 8)

    def _max_step_literal(self) -> int:
        """Largest literal step index any chain function is applied at."""
        best = 0

        def index_value(t: s.Term) -> int:
            if t.kind == "lit":
                return t.value
            if t.kind == "op" and t.name == "+" and \
                    all(a.kind == "lit" for a in t.args):
                return sum(a.value for a in t.args)
            return 0

        def walk(t: s.Term) -> None:
            nonlocal best
            if t.kind == "app" and t.name.split("_")[0] in ("st", "cnt", "hlt",
                                                            "gas", "str"):
                pos = {"st": -2, "str": -2, "cnt": 0, "hlt": 0, "gas": -1}
                idx = t.args[pos[t.name.split("_")[0]]]
                best = max(best, index_value(idx))
            for a in t.args:
                walk(a)

        for c in self.checks:
            walk(c)
        return best

    # -- rule registration --------------------------------------------------

    def _register(self, term: s.Term) -> None:
        for c in s.conjuncts(term):
            self.checks.append(c)
            self._index(c, (), None)

    def _index(self, c: s.Term, binders: tuple, guard: Optional[s.Term]) -> None:
        if c.kind == "forall":
            body = c.args[0]
            inner_binders = binders + c.binders
            if body.kind == "op" and body.name == "=>":
                g = body.args[0] if guard is None else s.conj(guard, body.args[0])
                for part in s.conjuncts(body.args[1]):
                    self._index(part, inner_binders, g)
            else:
                for part in s.conjuncts(body):
                    self._index(part, inner_binders, guard)
            return
        if c.kind == "op" and c.name == "=":
            a, b = c.args
            for head, rhs in ((a, b), (b, a)):
                if head.kind != "app":
                    continue
                key = None
                pos = _family_index_pos(head.name)
                if pos is not None:
                    key = _static_int(head.args[pos])
                self.rules.setdefault(head.name, []).append(
                    Rule(binders, guard, head.args, rhs, index_key=key))

    # -- term evaluation ----------------------------------------------------

    def _tick(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise Unknown("deadline")

    def fresh_word(self, width: int, tag: str) -> V.WordV:
        self._fresh_n += 1
        return V.word_atom(width, Atom("var", (f"!{tag}{self._fresh_n}", width)))

    def value(self, t: s.Term, env: dict):
        if t.kind == "lit":
            return t.value
        if t.kind == "sym":
            if t.name in env:
                return env[t.name]
            if t.name in self.asg:
                return self.asg[t.name]
            cached = self._sym_cache.get(t.name)
            if cached is not None:
                return cached
            if s.is_bv(t.sort):
                atom = Atom("var", (t.name, s.bv_width(t.sort)))
                val = V.word_atom(s.bv_width(t.sort), atom)
            elif t.sort == s.INT:
                atom = Atom("var", (t.name, "int"))
                val = V.int_atom(atom)
            else:
                atom = Atom("var", (t.name, "bool"))
                val = V.SymBool("cmp", ("=int", 0, V.int_atom(atom), 1))
            self.free_vars[t.name] = repr(atom)
            self._sym_cache[t.name] = val
            return val
        if t.kind == "app":
            args = tuple(self.value(a, env) for a in t.args)
            return self.point(t.name, args, t.sort)
        if t.kind in ("forall", "exists"):
            return self.quantified(t, env, positive=(t.kind == "forall"))
        return self.op_value(t, env)

    def op_value(self, t: s.Term, env: dict):
        name = t.name
        if name == "and":
            return V.b_and(*(self.value(a, env) for a in t.args))
        if name == "or":
            return V.b_or(*(self.value(a, env) for a in t.args))
        if name == "not":
            return V.b_not(self.value(t.args[0], env))
        if name == "=>":
            return V.b_or(V.b_not(self.value(t.args[0], env)), self.value(t.args[1], env))
        args = [self.value(a, env) for a in t.args]
        if name == "=":
            a, b = t.args
            if s.is_bv(a.sort):
                return V.w_eq(args[0], args[1], s.bv_width(a.sort))
            if a.sort == s.INT:
                return V.i_cmp("=", args[0], args[1])
            return self._bool_eq(args[0], args[1])
        if name == "distinct":
            parts = []
            srt = t.args[0].sort
            for i in range(len(args)):
                for j in range(i + 1, len(args)):
                    if s.is_bv(srt):
                        parts.append(V.b_not(V.w_eq(args[i], args[j], s.bv_width(srt))))
                    else:
                        parts.append(V.b_not(V.i_cmp("=", args[i], args[j])))
            return V.b_and(*parts)
        if name == "ite":
            c = args[0]
            srt = t.args[1].sort
            if s.is_bv(srt):
                return V.w_ite(c, args[1], args[2], s.bv_width(srt))
            if srt == s.INT:
                return V.i_ite(c, args[1], args[2])
            return V.b_ite(c, args[1], args[2])
        if name == "+":
            out = args[0]
            for a in args[1:]:
                out = V.i_add(out, a)
            return out
        if name == "-":
            if len(args) == 1:
                return V.i_sub(0, args[0])
            out = args[0]
            for a in args[1:]:
                out = V.i_sub(out, a)
            return out
        if name == "*":
            return V.i_mul(args[0], args[1])
        if name == "<":
            return V.i_cmp("<", args[0], args[1])
        if name == "<=":
            return V.i_cmp("<=", args[0], args[1])
        if name == ">":
            return V.i_cmp("<", args[1], args[0])
        if name == ">=":
            return V.i_cmp("<=", args[1], args[0])
        w = s.bv_width(t.args[0].sort) if s.is_bv(t.args[0].sort) else 0
        if name == "bvadd":
            return V.w_add(args[0], args[1], w)
        if name == "bvsub":
            return V.w_sub(args[0], args[1], w)
        if name == "bvneg":
            return V.w_neg(args[0], w)
        if name == "bvnot":
            return V.w_not(args[0], w)
        if name == "bvmul":
            return V.w_mul(args[0], args[1], w)
        if name == "bvudiv":
            return V.w_udiv(args[0], args[1], w)
        if name == "bvsdiv":
            return V.w_sdiv(args[0], args[1], w)
        if name == "bvurem":
            return V.w_urem(args[0], args[1], w)
        if name == "bvsrem":
            return V.w_srem(args[0], args[1], w)
        if name == "bvand":
            return V.w_and(args[0], args[1], w)
        if name == "bvor":
            return V.w_or(args[0], args[1], w)
        if name == "bvxor":
            return V.w_xor(args[0], args[1], w)
        if name == "bvult":
            return V.w_ult(args[0], args[1], w)
        if name == "bvslt":
            return V.w_slt(args[0], args[1], w)
        raise Unknown(f"operator {name}")

    def _bool_eq(self, a, b):
        if isinstance(a, bool) and isinstance(b, bool):
            return a == b
        return V.b_or(V.b_and(a, b), V.b_and(V.b_not(a), V.b_not(b)))

    # -- uninterpreted points -----------------------------------------------

    def point(self, fname: str, args: tuple, sort):
        self._tick()
        key = (fname, args)
        if key in self.points:
            return self.points[key]
        if key in self.inprogress:
            raise _Cycle()
        self.inprogress.add(key)
        qkey = None
        pos = _family_index_pos(fname)
        if pos is not None and isinstance(args[pos], int):
            qkey = args[pos]
        try:
            for rule in self.rules.get(fname, ()):
                if rule.index_key is not None and qkey is not None \
                        and rule.index_key != qkey:
                    continue
                val = self._try_rule(rule, args)
                if val is not _NOMATCH:
                    self.points[key] = val
                    return val
        finally:
            self.inprogress.discard(key)
        atom = Atom("app", (fname, args, _sort_width(sort) if s.is_bv(sort) else sort))
        if s.is_bv(sort):
            val = V.word_atom(s.bv_width(sort), atom)
        elif sort == s.INT:
            val = V.int_atom(atom)
        else:
            val = V.SymBool("cmp", ("=int", 0, V.int_atom(atom), 1))
        self.points[key] = val
        return val

    def _try_rule(self, rule: Rule, args: tuple):
        env: dict = {}
        binder_names = {b.name for b in rule.binders}
        if len(rule.args) != len(args):
            return _NOMATCH
        # bind: a pattern argument that is literally a binder captures the value,
        # anything else must evaluate equal to the queried value
        deferred = []
        for pat, given in zip(rule.args, args):
            if pat.kind == "sym" and pat.name in binder_names and pat.name not in env:
                env[pat.name] = given
            else:
                deferred.append((pat, given))
        try:
            for pat, given in deferred:
                mine = self.value(pat, env)
                if not self._must_equal(mine, given, pat.sort):
                    return _NOMATCH
            if rule.guard is not None:
                g = self.value(rule.guard, env)
                if g is not True:
                    return _NOMATCH
            return self.value(rule.rhs, env)
        except _Cycle:
            return _NOMATCH

    def _must_equal(self, a, b, sort) -> bool:
        if a is b:
            return True
        if s.is_bv(sort):
            return V.w_eq(a, b, s.bv_width(sort)) is True
        if sort == s.INT:
            return V.i_cmp("=", a, b) is True
        return isinstance(a, bool) and isinstance(b, bool) and a == b

    # -- quantifiers in checks ------------------------------------------------

    def _int_bound(self, guard: s.Term, binder: str, env: dict) -> Optional[tuple]:
        """(lo, ub) from guards shaped `binder < t` or `binder >= l and binder < t`."""
        lo = None
        ub_term = None
        for part in s.conjuncts(guard):
            if part.kind != "op" or part.args[0].kind != "sym" \
                    or part.args[0].name != binder:
                return None
            if part.name == "<":
                ub_term = part.args[1]
            elif part.name == ">=" and part.args[1].kind == "lit":
                lo = part.args[1].value
            else:
                return None
        if ub_term is None:
            return None
        ub = self.value(ub_term, env)
        if not isinstance(ub, int):
            return None
        return (lo if lo is not None else -self.pos_window, ub)

    def quantified(self, t: s.Term, env: dict, positive: bool):
        body = t.args[0]
        binder = t.binders[0]
        rest = t.binders[1:]
        if rest:
            body = s.Term(t.kind, s.BOOL, args=(body,), binders=rest)
        if binder.sort == s.INT:
            guard, inner = None, body
            if body.kind == "op" and body.name == "=>":
                guard, inner = body.args
            bounds = self._int_bound(guard, binder.name, env) if guard is not None else None
            if bounds is None:
                # unknown range: the body may still hold at a symbolic index
                self._fresh_n += 1
                env2 = dict(env)
                env2[binder.name] = V.int_atom(Atom("var", (f"!qi{self._fresh_n}", "int")))
                if self.value(inner, env2) is True:
                    return True
                raise Unknown("unbounded integer quantifier")
            parts = []
            for n in range(bounds[0], bounds[1]):
                env2 = dict(env)
                env2[binder.name] = n
                parts.append(self.value(inner, env2))
            return V.b_and(*parts)
        if s.is_bv(binder.sort):
            w = s.bv_width(binder.sort)
            env2 = dict(env)
            env2[binder.name] = self.fresh_word(w, "q")
            val = self.value(body, env2)
            if val is True:
                return True
            if positive:
                # one fresh point under-approximates a universal; remember it
                self.approx = True
            return val
        raise Unknown("boolean quantifier")

    # -- residue ---------------------------------------------------------------

    def residue(self) -> V.BoolV:
        parts = []
        for c in self.checks:
            try:
                parts.append(self.value(c, {}))
            except Unknown:
                # dropping a conjunct weakens the formula: unsat stays sound,
                # sat degrades to unknown through the approx flag
                self.approx = True
        return V.b_and(*parts)


class _Cycle(Exception):
    pass


_NOMATCH = object()


# -- residue decision ---------------------------------------------------------


def _boundary_values(width: int) -> list[int]:
    ones = (1 << width) - 1
    return [0, 1, ones, 1 << (width - 1), 2, 3 % (ones + 1)]


def _substitute_int_equalities(residue: V.BoolV) -> tuple[V.BoolV, dict]:
    """Pin integer unknowns forced by top-level equalities n = literal."""
    parts = residue.payload if isinstance(residue, V.SymBool) and residue.kind == "and" \
        else (residue,)
    asg: dict = {}
    for p in parts:
        if isinstance(p, V.SymBool) and p.kind == "cmp" and p.payload[0] == "=int":
            d = V.i_sub(p.payload[2], p.payload[3])
            if isinstance(d, V.SymInt) and len(d.items) == 1:
                atom, coeff = d.items[0]
                if atom.kind == "var" and coeff in (1, -1) and d.const % coeff == 0:
                    asg.setdefault(repr(atom), -d.const // coeff)
    if not asg:
        return residue, {}
    try:
        out = V.eval_value(residue, dict(asg))
        return out, asg
    except EvalError:
        return residue, asg


def solve_residue(residue: V.BoolV, deadline: Optional[float] = None,
                  seed: int = 2531) -> Verdict:
    if residue is True:
        return Verdict("sat", model={})
    if residue is False:
        return Verdict("unsat")
    pinned: dict = {}
    atoms: dict = {}
    V.free_atoms(residue, atoms)
    if any((a.payload[-1] if a.kind == "var" else a.payload[2]) == "int"
           for a in atoms.values()):
        solved, pinned = _substitute_int_equalities(residue)
        if solved is True:
            return Verdict("sat", model=pinned)
        if solved is False and pinned:
            # the forced assignment falsifies the rest
            return Verdict("unsat")
        raise Unknown("unbounded integer unknowns in residue")
    keys = sorted(atoms)
    widths = []
    for k in keys:
        a = atoms[k]
        tag = a.payload[-1] if a.kind == "var" else a.payload[2]
        if tag == "bool":
            widths.append(1)
        elif not isinstance(tag, int):
            raise Unknown("non-bitvector unknowns in residue")
        else:
            widths.append(tag)

    space = 1
    for w in widths:
        space *= 1 << w

    def try_asg(vals) -> Optional[dict]:
        asg = dict(zip(keys, vals))
        try:
            if V.eval_value(residue, asg):
                return asg
        except EvalError:
            return None
        return None

    if space <= ENUM_LIMIT:
        for combo in itertools.product(*(range(1 << w) for w in widths)):
            if deadline is not None and time.monotonic() > deadline:
                raise Unknown("deadline")
            m = try_asg(combo)
            if m is not None:
                return Verdict("sat", model=m)
        return Verdict("unsat")

    rng = random.Random(seed)
    cands: list[list[int]] = [_boundary_values(w) for w in widths]
    for combo in itertools.islice(itertools.product(*cands), 4096):
        m = try_asg(combo)
        if m is not None:
            return Verdict("sat", model=m)
    for _ in range(SAMPLE_ROUNDS):
        if deadline is not None and time.monotonic() > deadline:
            raise Unknown("deadline")
        combo = [rng.getrandbits(w) for w in widths]
        m = try_asg(combo)
        if m is not None:
            return Verdict("sat", model=m)

    from .blast import blast_residue  # late import: heavy path

    return blast_residue(residue, keys, atoms, widths, deadline)
