"""Sorted SMT terms and deterministic SMT-LIB v2 serialization.

The fragment used here: bit-vectors of one width k, unbounded integers
for counters and gas, booleans, uninterpreted functions over those
sorts, and forall/exists quantifiers. Scripts serialize byte-identically
for identical formulas (symbol declarations are emitted sorted).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

Sort = Union[str, tuple]

INT: Sort = "Int"
BOOL: Sort = "Bool"


def BV(k: int) -> Sort:
    return ("bv", k)


def is_bv(s: Sort) -> bool:
    return isinstance(s, tuple) and s[0] == "bv"


def bv_width(s: Sort) -> int:
    if not is_bv(s):
        raise TypeError(f"not a bit-vector sort: {s}")
    return s[1]


def sort_text(s: Sort) -> str:
    if s == INT:
        return "Int"
    if s == BOOL:
        return "Bool"
    if is_bv(s):
        return f"(_ BitVec {s[1]})"
    raise TypeError(f"unknown sort {s!r}")


class SortError(TypeError):
    pass


@dataclass(frozen=True)
class Term:
    kind: str  # "lit" | "sym" | "app" | "op" | "forall" | "exists"
    sort: Sort
    name: str = ""
    args: tuple = ()
    value: object = None
    binders: tuple = ()  # quantifiers: tuple of sym Terms

    def __repr__(self) -> str:
        return to_sexpr(self)


TRUE = Term("lit", BOOL, value=True)
FALSE = Term("lit", BOOL, value=False)


def boollit(b: bool) -> Term:
    return TRUE if b else FALSE


def intlit(n: int) -> Term:
    return Term("lit", INT, value=int(n))


def bvlit(v: int, k: int) -> Term:
    return Term("lit", BV(k), value=v % (1 << k))


def sym(name: str, sort: Sort) -> Term:
    return Term("sym", sort, name=name)


def app(name: str, args: Iterable[Term], sort: Sort) -> Term:
    return Term("app", sort, name=name, args=tuple(args))


def _want(t: Term, sort: Sort, who: str) -> None:
    if t.sort != sort:
        raise SortError(f"{who}: expected {sort}, got {t.sort} in {t!r}")


def _want_bv(t: Term, who: str) -> int:
    if not is_bv(t.sort):
        raise SortError(f"{who}: expected a bit-vector, got {t.sort}")
    return bv_width(t.sort)


def _op(op: str, args: tuple, sort: Sort) -> Term:
    return Term("op", sort, name=op, args=args)


def conj(*ts: Term) -> Term:
    flat = []
    for t in ts:
        _want(t, BOOL, "and")
        if t.kind == "lit":
            if t.value is False:
                return FALSE
            continue
        flat.append(t)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return _op("and", tuple(flat), BOOL)


def disj(*ts: Term) -> Term:
    flat = []
    for t in ts:
        _want(t, BOOL, "or")
        if t.kind == "lit":
            if t.value is True:
                return TRUE
            continue
        flat.append(t)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return _op("or", tuple(flat), BOOL)


def neg(t: Term) -> Term:
    _want(t, BOOL, "not")
    if t.kind == "lit":
        return boollit(not t.value)
    return _op("not", (t,), BOOL)


def implies(a: Term, b: Term) -> Term:
    _want(a, BOOL, "=>")
    _want(b, BOOL, "=>")
    return _op("=>", (a, b), BOOL)


def eq(a: Term, b: Term) -> Term:
    if a.sort != b.sort:
        raise SortError(f"=: sorts differ, {a.sort} vs {b.sort}")
    return _op("=", (a, b), BOOL)


def distinct(*ts: Term) -> Term:
    if len(ts) < 2:
        return TRUE
    s0 = ts[0].sort
    for t in ts:
        _want(t, s0, "distinct")
    return _op("distinct", tuple(ts), BOOL)


def ite(c: Term, a: Term, b: Term) -> Term:
    _want(c, BOOL, "ite")
    if a.sort != b.sort:
        raise SortError(f"ite: branch sorts differ, {a.sort} vs {b.sort}")
    if c.kind == "lit":
        return a if c.value else b
    return _op("ite", (c, a, b), a.sort)


def add(*ts: Term) -> Term:
    for t in ts:
        _want(t, INT, "+")
    return _op("+", tuple(ts), INT)


def sub(a: Term, b: Term) -> Term:
    _want(a, INT, "-")
    _want(b, INT, "-")
    return _op("-", (a, b), INT)


def intneg(a: Term) -> Term:
    _want(a, INT, "-")
    return _op("-", (a,), INT)


def mul(a: Term, b: Term) -> Term:
    _want(a, INT, "*")
    _want(b, INT, "*")
    return _op("*", (a, b), INT)


def _int_cmp(op: str, a: Term, b: Term) -> Term:
    _want(a, INT, op)
    _want(b, INT, op)
    return _op(op, (a, b), BOOL)


def lt(a: Term, b: Term) -> Term:
    return _int_cmp("<", a, b)


def le(a: Term, b: Term) -> Term:
    return _int_cmp("<=", a, b)


def gt(a: Term, b: Term) -> Term:
    return _int_cmp(">", a, b)


def ge(a: Term, b: Term) -> Term:
    return _int_cmp(">=", a, b)


def _bv_binop(op: str, a: Term, b: Term) -> Term:
    k = _want_bv(a, op)
    if a.sort != b.sort:
        raise SortError(f"{op}: widths differ")
    return _op(op, (a, b), BV(k))


def bvadd(a: Term, b: Term) -> Term:
    return _bv_binop("bvadd", a, b)


def bvsub(a: Term, b: Term) -> Term:
    return _bv_binop("bvsub", a, b)


def bvmul(a: Term, b: Term) -> Term:
    return _bv_binop("bvmul", a, b)


def bvudiv(a: Term, b: Term) -> Term:
    return _bv_binop("bvudiv", a, b)


def bvsdiv(a: Term, b: Term) -> Term:
    return _bv_binop("bvsdiv", a, b)


def bvurem(a: Term, b: Term) -> Term:
    return _bv_binop("bvurem", a, b)


def bvsrem(a: Term, b: Term) -> Term:
    return _bv_binop("bvsrem", a, b)


def bvand(a: Term, b: Term) -> Term:
    return _bv_binop("bvand", a, b)


def bvor(a: Term, b: Term) -> Term:
    return _bv_binop("bvor", a, b)


def bvxor(a: Term, b: Term) -> Term:
    return _bv_binop("bvxor", a, b)


def bvnot(a: Term) -> Term:
    k = _want_bv(a, "bvnot")
    return _op("bvnot", (a,), BV(k))


def bvneg(a: Term) -> Term:
    k = _want_bv(a, "bvneg")
    return _op("bvneg", (a,), BV(k))


def bvult(a: Term, b: Term) -> Term:
    _want_bv(a, "bvult")
    if a.sort != b.sort:
        raise SortError("bvult: widths differ")
    return _op("bvult", (a, b), BOOL)


def bvslt(a: Term, b: Term) -> Term:
    _want_bv(a, "bvslt")
    if a.sort != b.sort:
        raise SortError("bvslt: widths differ")
    return _op("bvslt", (a, b), BOOL)


def _quant(kind: str, binders, body: Term) -> Term:
    binders = tuple(binders)
    _want(body, BOOL, kind)
    if not binders:
        return body
    for b in binders:
        if b.kind != "sym":
            raise SortError(f"{kind}: binder must be a symbol, got {b!r}")
    return Term(kind, BOOL, args=(body,), binders=binders)


def forall(binders, body: Term) -> Term:
    return _quant("forall", binders, body)


def exists(binders, body: Term) -> Term:
    return _quant("exists", binders, body)


def conjuncts(t: Term) -> list[Term]:
    """Flatten nested conjunction."""
    if t.kind == "op" and t.name == "and":
        out: list[Term] = []
        for a in t.args:
            out.extend(conjuncts(a))
        return out
    if t.kind == "lit" and t.value is True:
        return []
    return [t]


def free_syms(t: Term, bound: frozenset = frozenset()) -> set[tuple[str, Sort]]:
    out: set[tuple[str, Sort]] = set()
    if t.kind == "sym":
        if t.name not in bound:
            out.add((t.name, t.sort))
        return out
    if t.kind in ("forall", "exists"):
        inner = bound | {b.name for b in t.binders}
        return free_syms(t.args[0], inner)
    for a in t.args:
        out |= free_syms(a, bound)
    return out


def to_sexpr(t: Term) -> str:
    if t.kind == "lit":
        if t.sort == BOOL:
            return "true" if t.value else "false"
        if t.sort == INT:
            return str(t.value) if t.value >= 0 else f"(- {-t.value})"
        k = bv_width(t.sort)
        if k % 4 == 0:
            return f"#x{t.value:0{k // 4}x}"
        return f"#b{t.value:0{k}b}"
    if t.kind == "sym":
        return t.name
    if t.kind == "app":
        if not t.args:
            return t.name
        return "(" + " ".join([t.name] + [to_sexpr(a) for a in t.args]) + ")"
    if t.kind in ("forall", "exists"):
        bs = " ".join(f"({b.name} {sort_text(b.sort)})" for b in t.binders)
        return f"({t.kind} ({bs}) {to_sexpr(t.args[0])})"
    return "(" + " ".join([t.name] + [to_sexpr(a) for a in t.args]) + ")"


@dataclass
class Script:
    """A full solver interaction: declarations, assertions, model queries."""

    logic: str = "UFBVLIA"
    decls: dict[str, tuple[tuple[Sort, ...], Sort]] = field(default_factory=dict)
    asserts: list[Term] = field(default_factory=list)
    queries: list[Term] = field(default_factory=list)

    def declare(self, name: str, arg_sorts: Iterable[Sort], ret: Sort) -> None:
        key = (tuple(arg_sorts), ret)
        old = self.decls.get(name)
        if old is not None and old != key:
            raise ValueError(f"conflicting declaration for {name}")
        self.decls[name] = key

    def declare_const(self, name: str, sort: Sort) -> Term:
        self.declare(name, (), sort)
        return sym(name, sort)

    def add(self, t: Term) -> None:
        if t.sort != BOOL:
            raise SortError("assertions must be Bool")
        if t.kind == "lit" and t.value is True:
            return
        self.asserts.append(t)

    def query(self, t: Term) -> None:
        self.queries.append(t)

    def serialize(self, *, get_model: bool = True) -> str:
        lines = [f"(set-logic {self.logic})"]
        for name in sorted(self.decls):
            arg_sorts, ret = self.decls[name]
            args = " ".join(sort_text(s) for s in arg_sorts)
            lines.append(f"(declare-fun {name} ({args}) {sort_text(ret)})")
        for a in self.asserts:
            lines.append(f"(assert {to_sexpr(a)})")
        lines.append("(check-sat)")
        if get_model and self.queries:
            qs = " ".join(to_sexpr(q) for q in self.queries)
            lines.append(f"(get-value ({qs}))")
        lines.append("(exit)")
        return "\n".join(lines) + "\n"
