"""SMT-LIB v2 reader for the fragment this tool emits."""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import smtlib as s


class ParseError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    out = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in "()":
            out.append(ch)
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch.isspace():
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            out.append(text[i : j + 1])
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            out.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            out.append(text[i:j])
            i = j
    return out


def read_sexprs(tokens: list[str]):
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of input")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while tokens[pos] != ")":
                items.append(read())
            pos += 1
            return items
        if tok == ")":
            raise ParseError("unbalanced )")
        return tok

    exprs = []
    while pos < len(tokens):
        exprs.append(read())
    return exprs


def _parse_sort(sx) -> s.Sort:
    if sx == "Int":
        return s.INT
    if sx == "Bool":
        return s.BOOL
    if isinstance(sx, list) and len(sx) == 3 and sx[0] == "_" and sx[1] == "BitVec":
        return s.BV(int(sx[2]))
    raise ParseError(f"unknown sort {sx!r}")


_INT_OPS = {"+", "-", "*"}
_CMP_OPS = {"<", "<=", ">", ">="}
_BV_BINOPS = {"bvadd", "bvsub", "bvmul", "bvudiv", "bvsdiv", "bvurem", "bvsrem",
              "bvand", "bvor", "bvxor"}


@dataclass
class ParsedScript:
    logic: str = "ALL"
    decls: dict[str, tuple[tuple[s.Sort, ...], s.Sort]] = field(default_factory=dict)
    asserts: list[s.Term] = field(default_factory=list)
    queries: list[s.Term] = field(default_factory=list)
    check_sat: bool = False


def _parse_term(sx, decls, scope) -> s.Term:
    if isinstance(sx, str):
        if sx == "true":
            return s.TRUE
        if sx == "false":
            return s.FALSE
        if sx.startswith("#b"):
            return s.bvlit(int(sx[2:], 2), len(sx) - 2)
        if sx.startswith("#x"):
            return s.bvlit(int(sx[2:], 16), (len(sx) - 2) * 4)
        if sx.lstrip("-").isdigit():
            return s.intlit(int(sx))
        if sx in scope:
            return s.sym(sx, scope[sx])
        if sx in decls:
            args, ret = decls[sx]
            if args:
                raise ParseError(f"{sx} needs arguments")
            return s.sym(sx, ret)
        raise ParseError(f"unknown symbol {sx!r}")

    head = sx[0]
    if head == "_":
        # (_ bvN width)
        if len(sx) == 3 and isinstance(sx[1], str) and sx[1].startswith("bv"):
            return s.bvlit(int(sx[1][2:]), int(sx[2]))
        raise ParseError(f"unsupported indexed term {sx!r}")
    if head in ("forall", "exists"):
        binders = []
        inner = dict(scope)
        for name, sortx in sx[1]:
            sort = _parse_sort(sortx)
            inner[name] = sort
            binders.append(s.sym(name, sort))
        body = _parse_term(sx[2], decls, inner)
        return s.forall(binders, body) if head == "forall" else s.exists(binders, body)
    if head == "let":
        inner = dict(scope)
        subs = {}
        for name, bound_sx in sx[1]:
            t = _parse_term(bound_sx, decls, scope)
            subs[name] = t
            inner[name] = t.sort
        body = _parse_term(sx[2], decls, inner)
        return _substitute(body, subs)

    args = [_parse_term(a, decls, scope) for a in sx[1:]]
    if head == "and":
        return s.conj(*args)
    if head == "or":
        return s.disj(*args)
    if head == "not":
        return s.neg(args[0])
    if head == "=>":
        return s.implies(*args)
    if head == "=":
        out = [s.eq(args[i], args[i + 1]) for i in range(len(args) - 1)]
        return s.conj(*out)
    if head == "distinct":
        return s.distinct(*args)
    if head == "ite":
        return s.ite(*args)
    if head in _INT_OPS:
        if head == "-" and len(args) == 1:
            return s.intneg(args[0])
        if head == "-":
            out = args[0]
            for a in args[1:]:
                out = s.sub(out, a)
            return out
        if head == "+":
            return s.add(*args)
        out = args[0]
        for a in args[1:]:
            out = s.mul(out, a)
        return out
    if head in _CMP_OPS:
        return {"<": s.lt, "<=": s.le, ">": s.gt, ">=": s.ge}[head](*args)
    if head in _BV_BINOPS:
        return getattr(s, head)(*args)
    if head == "bvnot":
        return s.bvnot(args[0])
    if head == "bvneg":
        return s.bvneg(args[0])
    if head == "bvult":
        return s.bvult(*args)
    if head == "bvslt":
        return s.bvslt(*args)
    if head == "bvule":
        return s.neg(s.bvult(args[1], args[0]))
    if head == "bvugt":
        return s.bvult(args[1], args[0])
    if head == "bvsgt":
        return s.bvslt(args[1], args[0])
    if head in decls:
        arg_sorts, ret = decls[head]
        if len(arg_sorts) != len(args):
            raise ParseError(f"{head}: arity mismatch")
        return s.app(head, args, ret)
    raise ParseError(f"unknown operator {head!r}")


def _substitute(t: s.Term, subs: dict) -> s.Term:
    if t.kind == "sym":
        return subs.get(t.name, t)
    if t.kind in ("forall", "exists"):
        inner = {k: v for k, v in subs.items() if k not in {b.name for b in t.binders}}
        return s.Term(t.kind, t.sort, args=(_substitute(t.args[0], inner),),
                      binders=t.binders)
    if t.args:
        return s.Term(t.kind, t.sort, name=t.name,
                      args=tuple(_substitute(a, subs) for a in t.args), value=t.value)
    return t


def parse_script(text: str) -> ParsedScript:
    out = ParsedScript()
    for sx in read_sexprs(tokenize(text)):
        if not isinstance(sx, list) or not sx:
            raise ParseError(f"bad command {sx!r}")
        cmd = sx[0]
        if cmd == "set-logic":
            out.logic = sx[1]
        elif cmd in ("set-info", "set-option"):
            continue
        elif cmd == "declare-fun":
            name = sx[1]
            arg_sorts = tuple(_parse_sort(a) for a in sx[2])
            out.decls[name] = (arg_sorts, _parse_sort(sx[3]))
        elif cmd == "declare-const":
            out.decls[sx[1]] = ((), _parse_sort(sx[2]))
        elif cmd == "assert":
            out.asserts.append(_parse_term(sx[1], out.decls, {}))
        elif cmd == "check-sat":
            out.check_sat = True
        elif cmd == "get-value":
            for q in sx[1]:
                out.queries.append(_parse_term(q, out.decls, {}))
        elif cmd == "exit":
            break
        else:
            raise ParseError(f"unsupported command {cmd!r}")
    return out
