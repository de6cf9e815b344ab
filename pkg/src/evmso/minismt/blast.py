"""Bit-blasting of quantifier-free bit-vector residues onto the SAT core."""

from __future__ import annotations

import time
from typing import Optional, Union

from . import values as V
from .values import Atom
from .sat import SatSolver

Bit = Union[bool, int]  # constant or SAT literal

CLAUSE_BUDGET = 2_000_000


class BlastError(Exception):
    pass


class Circuit:
    def __init__(self, deadline: Optional[float] = None):
        self.sat = SatSolver()
        self.cache: dict = {}
        self.var_bits: dict[str, list[int]] = {}
        self.deadline = deadline

    def _check_budget(self) -> None:
        if len(self.sat.clauses) > CLAUSE_BUDGET:
            raise BlastError("circuit too large")
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BlastError("deadline")

    # -- gates ---------------------------------------------------------------

    def g_and(self, a: Bit, b: Bit) -> Bit:
        if a is False or b is False:
            return False
        if a is True:
            return b
        if b is True:
            return a
        if a == b:
            return a
        if a == -b:
            return False
        key = ("and", *sorted((a, b)))
        if key in self.cache:
            return self.cache[key]
        o = self.sat.new_var()
        self.sat.add_clause([-o, a])
        self.sat.add_clause([-o, b])
        self.sat.add_clause([o, -a, -b])
        self.cache[key] = o
        self._check_budget()
        return o

    def g_or(self, a: Bit, b: Bit) -> Bit:
        return self.g_not(self.g_and(self.g_not(a), self.g_not(b)))

    def g_not(self, a: Bit) -> Bit:
        if isinstance(a, bool):
            return not a
        return -a

    def g_xor(self, a: Bit, b: Bit) -> Bit:
        if isinstance(a, bool):
            return self.g_not(b) if a else b
        if isinstance(b, bool):
            return self.g_not(a) if b else a
        if a == b:
            return False
        if a == -b:
            return True
        key = ("xor", *sorted((abs(a), abs(b))))
        neg = (a < 0) != (b < 0)
        if key in self.cache:
            o = self.cache[key]
        else:
            x, y = abs(a), abs(b)
            o = self.sat.new_var()
            self.sat.add_clause([-o, x, y])
            self.sat.add_clause([-o, -x, -y])
            self.sat.add_clause([o, -x, y])
            self.sat.add_clause([o, x, -y])
            self.cache[key] = o
            self._check_budget()
        return -o if neg else o

    def g_ite(self, c: Bit, a: Bit, b: Bit) -> Bit:
        return self.g_or(self.g_and(c, a), self.g_and(self.g_not(c), b))

    def lit_of(self, b: Bit) -> int:
        if isinstance(b, bool):
            t = self.cache.get("const_true")
            if t is None:
                t = self.sat.new_var()
                self.sat.add_clause([t])
                self.cache["const_true"] = t
            return t if b else -t
        return b

    # -- word circuits ---------------------------------------------------------

    def const_bits(self, value: int, width: int) -> list[Bit]:
        return [bool((value >> i) & 1) for i in range(width)]

    def add_bits(self, a: list[Bit], b: list[Bit]) -> list[Bit]:
        out, carry = [], False
        for x, y in zip(a, b):
            s1 = self.g_xor(x, y)
            out.append(self.g_xor(s1, carry))
            carry = self.g_or(self.g_and(x, y), self.g_and(s1, carry))
        return out

    def neg_bits(self, a: list[Bit]) -> list[Bit]:
        inv = [self.g_not(x) for x in a]
        return self.add_bits(inv, self.const_bits(1, len(a)))

    def mul_bits(self, a: list[Bit], b: list[Bit]) -> list[Bit]:
        width = len(a)
        acc = self.const_bits(0, width)
        for i in range(width):
            if b[i] is False:
                continue
            row = [False] * i + [self.g_and(a[j], b[i]) for j in range(width - i)]
            acc = self.add_bits(acc, row)
            self._check_budget()
        return acc

    def ult_bit(self, a: list[Bit], b: list[Bit]) -> Bit:
        lt = False
        for x, y in zip(a, b):  # LSB to MSB
            eqb = self.g_not(self.g_xor(x, y))
            lt = self.g_or(self.g_and(self.g_not(x), y), self.g_and(eqb, lt))
        return lt

    def slt_bit(self, a: list[Bit], b: list[Bit]) -> Bit:
        fa = a[:-1] + [self.g_not(a[-1])]
        fb = b[:-1] + [self.g_not(b[-1])]
        return self.ult_bit(fa, fb)

    def eq_bit(self, a: list[Bit], b: list[Bit]) -> Bit:
        out: Bit = True
        for x, y in zip(a, b):
            out = self.g_and(out, self.g_not(self.g_xor(x, y)))
        return out

    def fresh_bits(self, width: int) -> list[int]:
        return [self.sat.new_var() for _ in range(width)]

    def udivrem_bits(self, a: list[Bit], b: list[Bit]) -> tuple[list[Bit], list[Bit]]:
        """Relational encoding: q*b + r = a, b != 0 -> r < b, b = 0 -> q = ones, r = a."""
        width = len(a)
        q = self.fresh_bits(width)
        r = self.fresh_bits(width)
        prod = self.mul_bits(q, b)
        total = self.add_bits(prod, r)
        ok = self.eq_bit(total, a)
        bz = self.eq_bit(b, self.const_bits(0, width))
        rlt = self.ult_bit(r, b)
        q_ones = self.eq_bit(q, self.const_bits((1 << width) - 1, width))
        r_eq_a = self.eq_bit(r, a)
        nz_case = self.g_and(ok, rlt)
        z_case = self.g_and(q_ones, r_eq_a)
        constraint = self.g_ite(bz, z_case, nz_case)
        self.sat.add_clause([self.lit_of(constraint)])
        return q, r

    # -- value translation -------------------------------------------------------

    def word_bits(self, v: V.WordV, width: int) -> list[Bit]:
        if isinstance(v, int):
            return self.const_bits(v, width)
        key = ("w", v)
        if key in self.cache:
            return self.cache[key]
        acc = self.const_bits(v.const, width)
        for atom, coeff in v.items:
            bits = self.atom_bits(atom, width)
            c = coeff % (1 << width)
            # shift-add the constant multiple
            for i in range(width):
                if (c >> i) & 1:
                    acc = self.add_bits(acc, [False] * i + bits[: width - i])
            self._check_budget()
        self.cache[key] = acc
        return acc

    def atom_bits(self, atom: Atom, width: int) -> list[Bit]:
        key = ("a", atom)
        if key in self.cache:
            return self.cache[key]
        if atom.kind in ("var", "app"):
            name = repr(atom)
            bits = self.fresh_bits(width)
            self.var_bits[name] = bits
            self.cache[key] = bits
            return bits
        if atom.kind == "ite":
            w, c, x, y = atom.payload
            cb = self.bool_bit(c)
            xb = self.word_bits(x, w)
            yb = self.word_bits(y, w)
            bits = [self.g_ite(cb, xi, yi) for xi, yi in zip(xb, yb)]
            self.cache[key] = bits
            return bits
        op, w, a, b = atom.payload
        ab = self.word_bits(a, w)
        bb = self.word_bits(b, w)
        if op == "bvmul":
            bits = self.mul_bits(ab, bb)
        elif op == "bvand":
            bits = [self.g_and(x, y) for x, y in zip(ab, bb)]
        elif op == "bvor":
            bits = [self.g_or(x, y) for x, y in zip(ab, bb)]
        elif op == "bvxor":
            bits = [self.g_xor(x, y) for x, y in zip(ab, bb)]
        elif op == "bvudiv":
            bits = self.udivrem_bits(ab, bb)[0]
        elif op == "bvurem":
            bits = self.udivrem_bits(ab, bb)[1]
        elif op in ("bvsdiv", "bvsrem"):
            bits = self._signed_divrem(ab, bb, op)
        else:
            raise BlastError(f"op {op}")
        self.cache[key] = bits
        return bits

    def _signed_divrem(self, ab: list[Bit], bb: list[Bit], op: str) -> list[Bit]:
        sa, sb = ab[-1], bb[-1]
        abs_a = [self.g_ite(sa, n, p) for n, p in zip(self.neg_bits(ab), ab)]
        abs_b = [self.g_ite(sb, n, p) for n, p in zip(self.neg_bits(bb), bb)]
        q, r = self.udivrem_bits(abs_a, abs_b)
        if op == "bvsdiv":
            neg_out = self.g_xor(sa, sb)
            return [self.g_ite(neg_out, n, p) for n, p in zip(self.neg_bits(q), q)]
        return [self.g_ite(sa, n, p) for n, p in zip(self.neg_bits(r), r)]

    def bool_bit(self, v: V.BoolV) -> Bit:
        if isinstance(v, bool):
            return v
        key = ("b", v)
        if key in self.cache:
            return self.cache[key]
        if v.kind == "not":
            out = self.g_not(self.bool_bit(v.payload[0]))
        elif v.kind == "and":
            out = True
            for p in v.payload:
                out = self.g_and(out, self.bool_bit(p))
        elif v.kind == "or":
            out = False
            for p in v.payload:
                out = self.g_or(out, self.bool_bit(p))
        else:
            op, w, a, b = v.payload
            if op.endswith("int"):
                raise BlastError("integer atoms in residue")
            ab = self.word_bits(a, w)
            bb = self.word_bits(b, w)
            if op == "=bv":
                out = self.eq_bit(ab, bb)
            elif op == "bvult":
                out = self.ult_bit(ab, bb)
            elif op == "bvslt":
                out = self.slt_bit(ab, bb)
            else:
                raise BlastError(f"cmp {op}")
        self.cache[key] = out
        return out


def blast_residue(residue: V.BoolV, keys: list[str], atoms: dict,
                  widths: list[int], deadline: Optional[float] = None):
    from .ground import Unknown, Verdict

    ckt = Circuit(deadline)
    try:
        root = ckt.bool_bit(residue)
        ckt.sat.add_clause([ckt.lit_of(root)])
        model_bits = ckt.sat.solve(deadline)
    except (BlastError, TimeoutError) as e:
        raise Unknown(f"blast: {e}") from None
    if model_bits is None:
        return Verdict("unsat")
    model = {}
    for name, w in zip(keys, widths):
        bits = ckt.var_bits.get(name)
        if bits is None:
            model[name] = 0
            continue
        val = 0
        for i, b in enumerate(bits):
            bv = model_bits.get(abs(b), False) if isinstance(b, int) else b
            if isinstance(b, int) and b < 0:
                bv = not bv
            if bv:
                val |= 1 << i
        model[name] = val
    return Verdict("sat", model=model)
