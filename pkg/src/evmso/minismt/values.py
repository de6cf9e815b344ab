"""Symbolic value domain for the bundled solver.

Bit-vector values are kept in affine normal form, const + sum of
coeff*atom mod 2^w, so additive reasoning (ADD/SUB/NEG/NOT and constant
multiples) is decided by normalization alone; everything else becomes an
opaque atom. Booleans and integers get the same treatment with a small
structural layer on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union


@dataclass(frozen=True)
class Atom:
    """Opaque non-affine node: a variable, an uninterpreted point, an
    operator application, or an if-then-else."""

    kind: str  # "var" | "app" | "bv" | "ite"
    payload: tuple

    def __repr__(self) -> str:
        return f"Atom({self.kind}, {self.payload!r})"


@dataclass(frozen=True)
class SymWord:
    width: int
    const: int
    items: tuple  # sorted tuple of (Atom, coeff), coeff != 0

    def __repr__(self) -> str:
        return f"SymWord<{self.width}>({self.const} + {self.items})"

    @property
    def is_const(self) -> bool:
        return not self.items


@dataclass(frozen=True)
class SymInt:
    const: int
    items: tuple

    @property
    def is_const(self) -> bool:
        return not self.items


@dataclass(frozen=True)
class SymBool:
    kind: str  # "cmp" | "not" | "and" | "or"
    payload: tuple


WordV = Union[int, SymWord]       # concrete BV values are plain ints (width from context)
IntV = Union[int, SymInt]
BoolV = Union[bool, SymBool]
Value = Union[int, bool, SymWord, SymInt, SymBool]


def word(width: int, const: int = 0, items: Iterable = ()) -> WordV:
    mask = (1 << width) - 1
    items = tuple(sorted(((a, c & mask) for a, c in items if c & mask),
                         key=lambda ac: repr(ac[0])))
    const &= mask
    if not items:
        return const
    return SymWord(width, const, items)


def word_atom(width: int, atom: Atom) -> WordV:
    return word(width, 0, ((atom, 1),))


def intval(const: int = 0, items: Iterable = ()) -> IntV:
    items = tuple(sorted(((a, c) for a, c in items if c), key=lambda ac: repr(ac[0])))
    if not items:
        return const
    return SymInt(const, items)


def int_atom(atom: Atom) -> IntV:
    return intval(0, ((atom, 1),))


def _as_affine_word(v: WordV, width: int) -> tuple[int, tuple]:
    if isinstance(v, int):
        return v & ((1 << width) - 1), ()
    assert v.width == width, f"width mismatch {v.width} vs {width}"
    return v.const, v.items


def _as_affine_int(v: IntV) -> tuple[int, tuple]:
    if isinstance(v, int):
        return v, ()
    return v.const, v.items


def _merge(items1: tuple, items2: tuple, s2: int = 1) -> dict:
    acc: dict[Atom, int] = {}
    for a, c in items1:
        acc[a] = acc.get(a, 0) + c
    for a, c in items2:
        acc[a] = acc.get(a, 0) + s2 * c
    return acc


def w_add(a: WordV, b: WordV, width: int) -> WordV:
    c1, i1 = _as_affine_word(a, width)
    c2, i2 = _as_affine_word(b, width)
    return word(width, c1 + c2, _merge(i1, i2).items())


def w_sub(a: WordV, b: WordV, width: int) -> WordV:
    c1, i1 = _as_affine_word(a, width)
    c2, i2 = _as_affine_word(b, width)
    return word(width, c1 - c2, _merge(i1, i2, -1).items())


def w_neg(a: WordV, width: int) -> WordV:
    return w_sub(0, a, width)


def w_not(a: WordV, width: int) -> WordV:
    # ~x = -x - 1 mod 2^w
    return w_sub(word(width, -1), a, width)


def w_scale(a: WordV, k: int, width: int) -> WordV:
    c, i = _as_affine_word(a, width)
    return word(width, c * k, ((at, co * k) for at, co in i))


def w_mul(a: WordV, b: WordV, width: int) -> WordV:
    if isinstance(a, int):
        return w_scale(b, a, width)
    if isinstance(b, int):
        return w_scale(a, b, width)
    return word_atom(width, Atom("bv", ("bvmul", width, a, b)))


def _wrap_binop(op: str, a: WordV, b: WordV, width: int) -> WordV:
    return word_atom(width, Atom("bv", (op, width, a, b)))


def w_udiv(a: WordV, b: WordV, width: int) -> WordV:
    if isinstance(a, int) and isinstance(b, int):
        return ((1 << width) - 1) if b == 0 else a // b
    return _wrap_binop("bvudiv", a, b, width)


def _signed(v: int, width: int) -> int:
    return v - (1 << width) if v >> (width - 1) else v


def w_sdiv(a: WordV, b: WordV, width: int) -> WordV:
    if isinstance(a, int) and isinstance(b, int):
        if b == 0:
            return (1 << width) - 1
        sa, sb = _signed(a, width), _signed(b, width)
        q = abs(sa) // abs(sb)
        if (sa < 0) != (sb < 0):
            q = -q
        return q & ((1 << width) - 1)
    return _wrap_binop("bvsdiv", a, b, width)


def w_urem(a: WordV, b: WordV, width: int) -> WordV:
    if isinstance(a, int) and isinstance(b, int):
        return a if b == 0 else a % b
    return _wrap_binop("bvurem", a, b, width)


def w_srem(a: WordV, b: WordV, width: int) -> WordV:
    if isinstance(a, int) and isinstance(b, int):
        if b == 0:
            return a
        sa, sb = _signed(a, width), _signed(b, width)
        r = abs(sa) % abs(sb)
        if sa < 0:
            r = -r
        return r & ((1 << width) - 1)
    return _wrap_binop("bvsrem", a, b, width)


def _bitwise(op: str, a: WordV, b: WordV, width: int) -> WordV:
    ones = (1 << width) - 1
    if isinstance(a, int) and isinstance(b, int):
        if op == "bvand":
            return a & b
        if op == "bvor":
            return a | b
        return a ^ b
    for x, y in ((a, b), (b, a)):
        if isinstance(x, int):
            if op == "bvand":
                if x == 0:
                    return 0
                if x == ones:
                    return y
            elif op == "bvor":
                if x == 0:
                    return y
                if x == ones:
                    return ones
            elif op == "bvxor":
                if x == 0:
                    return y
                if x == ones:
                    return w_not(y, width)
    if w_is_zero(w_sub(a, b, width), width):
        if op in ("bvand", "bvor"):
            return a
        return 0  # x ^ x
    key = sorted((a, b), key=repr)
    return word_atom(width, Atom("bv", (op, width, key[0], key[1])))


def w_and(a, b, width):
    return _bitwise("bvand", a, b, width)


def w_or(a, b, width):
    return _bitwise("bvor", a, b, width)


def w_xor(a, b, width):
    return _bitwise("bvxor", a, b, width)


def w_is_zero(v: WordV, width: int) -> bool:
    return isinstance(v, int) and v % (1 << width) == 0


def _same_cond_branch(c: BoolV, v: WordV, which: int) -> WordV:
    """Collapse ite(c, x, ite(c, y, z)) -> ite(c, x, z) and the then-side dual."""
    if isinstance(v, SymWord) and len(v.items) == 1 and v.const == 0:
        atom, coeff = v.items[0]
        if coeff == 1 and atom.kind == "ite" and repr(atom.payload[1]) == repr(c):
            return atom.payload[2 + which]
    return v


def w_ite(c: BoolV, a: WordV, b: WordV, width: int) -> WordV:
    if c is True:
        return a
    if c is False:
        return b
    a = _same_cond_branch(c, a, 0)
    b = _same_cond_branch(c, b, 1)
    if w_is_zero(w_sub(a, b, width), width):
        return a
    return word_atom(width, Atom("ite", (width, c, a, b)))


def i_add(a: IntV, b: IntV) -> IntV:
    c1, i1 = _as_affine_int(a)
    c2, i2 = _as_affine_int(b)
    return intval(c1 + c2, _merge(i1, i2).items())


def i_sub(a: IntV, b: IntV) -> IntV:
    c1, i1 = _as_affine_int(a)
    c2, i2 = _as_affine_int(b)
    return intval(c1 - c2, _merge(i1, i2, -1).items())


def i_mul(a: IntV, b: IntV) -> IntV:
    if isinstance(a, int):
        c, i = _as_affine_int(b)
        return intval(c * a, ((at, co * a) for at, co in i))
    if isinstance(b, int):
        return i_mul(b, a)
    return int_atom(Atom("bv", ("int*", 0, a, b)))


def i_ite(c: BoolV, a: IntV, b: IntV) -> IntV:
    if c is True:
        return a
    if c is False:
        return b
    d = i_sub(a, b)
    if isinstance(d, int) and d == 0:
        return a
    return int_atom(Atom("ite", (0, c, a, b)))


def b_not(b: BoolV) -> BoolV:
    if isinstance(b, bool):
        return not b
    if b.kind == "not":
        return b.payload[0]
    return SymBool("not", (b,))


def _gather(parts, flatten_kind: str, absorb: bool):
    out, seen = [], set()
    for p in parts:
        if isinstance(p, bool):
            if p is absorb:
                return None
            continue
        if isinstance(p, SymBool) and p.kind == flatten_kind:
            sub = _gather(p.payload, flatten_kind, absorb)
            if sub is None:
                return None
            for q in sub:
                r = repr(q)
                if r not in seen:
                    seen.add(r)
                    out.append(q)
            continue
        r = repr(p)
        if r not in seen:
            seen.add(r)
            out.append(p)
    for p in out:  # complementary pair closes the connective
        if repr(b_not(p)) in seen:
            return None
    return out


def b_and(*parts: BoolV) -> BoolV:
    uniq = _gather(parts, "and", absorb=False)
    if uniq is None:
        return False
    if not uniq:
        return True
    if len(uniq) == 1:
        return uniq[0]
    return SymBool("and", tuple(uniq))


def b_or(*parts: BoolV) -> BoolV:
    uniq = _gather(parts, "or", absorb=True)
    if uniq is None:
        return True
    if not uniq:
        return False
    if len(uniq) == 1:
        return uniq[0]
    return SymBool("or", tuple(uniq))


def b_ite(c: BoolV, a: BoolV, b: BoolV) -> BoolV:
    if isinstance(c, bool):
        return a if c else b
    return b_or(b_and(c, a), b_and(b_not(c), b))


def w_eq(a: WordV, b: WordV, width: int) -> BoolV:
    d = w_sub(a, b, width)
    if isinstance(d, int):
        return d == 0
    return SymBool("cmp", ("=bv", width, a, b))


def w_ult(a: WordV, b: WordV, width: int) -> BoolV:
    if isinstance(a, int) and isinstance(b, int):
        return a < b
    return SymBool("cmp", ("bvult", width, a, b))


def w_slt(a: WordV, b: WordV, width: int) -> BoolV:
    if isinstance(a, int) and isinstance(b, int):
        return _signed(a, width) < _signed(b, width)
    return SymBool("cmp", ("bvslt", width, a, b))


def _int_cases(v: IntV) -> list[tuple[BoolV, int]]:
    """Expand an integer value into (condition, concrete int) cases by lifting
    its ite atoms; returns [] if some atom is not an ite of expandable values."""
    if isinstance(v, int):
        return [(True, v)]
    cases: list[tuple[BoolV, IntV]] = [(True, intval(v.const))]
    for atom, coeff in v.items:
        if atom.kind != "ite":
            return []
        _w, c, x, y = atom.payload
        subx = _int_cases(x)
        suby = _int_cases(y)
        if not subx or not suby:
            return []
        nxt: list[tuple[BoolV, IntV]] = []
        for gc, acc in cases:
            for sc, xv in subx:
                nxt.append((b_and(gc, c, sc), i_add(acc, i_mul(coeff, xv))))
            for sc, yv in suby:
                nxt.append((b_and(gc, b_not(c), sc), i_add(acc, i_mul(coeff, yv))))
        cases = nxt
    out = []
    for cond, val in cases:
        if cond is False:
            continue
        if not isinstance(val, int):
            return []
        out.append((cond, val))
    return out


def i_cmp(op: str, a: IntV, b: IntV) -> BoolV:
    d = i_sub(a, b)
    if isinstance(d, int):
        if op == "=":
            return d == 0
        if op == "<":
            return d < 0
        if op == "<=":
            return d <= 0
    cases = _int_cases(d)
    if cases:
        parts = []
        for cond, val in cases:
            ok = (val == 0) if op == "=" else (val < 0) if op == "<" else (val <= 0)
            if ok:
                parts.append(cond)
        return b_or(*parts)
    return SymBool("cmp", (op + "int", 0, a, b))


def free_atoms(v: Value, out: dict) -> None:
    """Collect base unknowns: var atoms and app atoms (uninterpreted points)."""
    if isinstance(v, (int, bool)):
        return
    if isinstance(v, (SymWord, SymInt)):
        for atom, _ in v.items:
            _atom_frees(atom, out)
        return
    if isinstance(v, SymBool):
        if v.kind == "cmp":
            _, _, a, b = v.payload
            free_atoms(a, out)
            free_atoms(b, out)
        else:
            for p in v.payload:
                free_atoms(p, out)


def _atom_frees(atom: Atom, out: dict) -> None:
    if atom.kind in ("var", "app"):
        out.setdefault(repr(atom), atom)
        if atom.kind == "app":
            for a in atom.payload[1]:
                free_atoms(a, out)
        return
    if atom.kind == "bv":
        for a in atom.payload[2:]:
            free_atoms(a, out)
        return
    if atom.kind == "ite":
        _w, c, x, y = atom.payload
        free_atoms(c, out)
        free_atoms(x, out)
        free_atoms(y, out)


class EvalError(Exception):
    pass


def eval_value(v: Value, asg: dict) -> Union[int, bool]:
    """Fully evaluate under an assignment repr(atom) -> int/bool."""
    if isinstance(v, (int, bool)):
        return v
    if isinstance(v, SymWord):
        total = v.const
        for atom, coeff in v.items:
            total += coeff * eval_atom(atom, asg)
        return total & ((1 << v.width) - 1)
    if isinstance(v, SymInt):
        total = v.const
        for atom, coeff in v.items:
            total += coeff * eval_atom(atom, asg)
        return total
    if isinstance(v, SymBool):
        if v.kind == "not":
            return not eval_value(v.payload[0], asg)
        if v.kind == "and":
            return all(eval_value(p, asg) for p in v.payload)
        if v.kind == "or":
            return any(eval_value(p, asg) for p in v.payload)
        op, width, a, b = v.payload
        av, bv = eval_value(a, asg), eval_value(b, asg)
        if op == "=bv":
            return av == bv
        if op == "bvult":
            return av < bv
        if op == "bvslt":
            return _signed(av, width) < _signed(bv, width)
        if op == "=int":
            return av == bv
        if op == "<int":
            return av < bv
        if op == "<=int":
            return av <= bv
        raise EvalError(f"bad cmp {op}")
    raise EvalError(f"bad value {v!r}")


def eval_atom(atom: Atom, asg: dict) -> Union[int, bool]:
    key = repr(atom)
    if key in asg:
        return asg[key]
    if atom.kind in ("var", "app"):
        raise EvalError(f"unassigned atom {key}")
    if atom.kind == "ite":
        width, c, x, y = atom.payload
        return eval_value(x, asg) if eval_value(c, asg) else eval_value(y, asg)
    if atom.kind == "bv":
        op, width, a, b = atom.payload
        av, bv = eval_value(a, asg), eval_value(b, asg)
        fn = {"bvmul": w_mul, "bvudiv": w_udiv, "bvsdiv": w_sdiv,
              "bvurem": w_urem, "bvsrem": w_srem, "bvand": w_and,
              "bvor": w_or, "bvxor": w_xor}.get(op)
        if fn is None:
            if op == "int*":
                return av * bv
            raise EvalError(f"bad op {op}")
        res = fn(av, bv, width)
        assert isinstance(res, int)
        return res
    raise EvalError(f"bad atom {atom!r}")
