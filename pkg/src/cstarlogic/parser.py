"""Textual DSL for formulas: lexer, recursive-descent parser, canonical printer.

Grammar (EBNF):

    formula := {"free" IDENT ":" sort "."} fsum
    fsum    := fatom {("+" | "-" | "-.") fatom}
    fatom   := ("sup"|"inf") IDENT ":" sort "." fsum
             | FN "(" formula {"," formula} ")"
             | "norm" "(" term ")"
             | NUMBER
             | "(" formula ")"
    sort    := KIND "(" radius ["," "amp" "=" INT] ")"
    KIND    := ball | sa | pos | proj | unit | pisom | scal
    term    := tprod {("+" | "-") tprod}
    tprod   := tfactor {"*" tfactor}
    tfactor := primary {"^*"}
    primary := IDENT | "one" | "zero" | SCALAR "*" tfactor
             | FN "[" term "]" | "(" term ")"

`free` binders declare sorts of free variables so open formulas round-trip.
Scalars are written as plain reals or parenthesized a+bi literals; named
constants are resolved against the registered constant table.
"""

from __future__ import annotations

import re

from .algebra import ScalarFunction, SQRT, pos_part, shifted_sqrt
from .errors import ParseError, SortError
from .logic import (
    CONNECTIVES, KRON_CONSTANTS, Add, Adjoint, Atomic, Conn, Const, Constraint,
    Embed, FnApp, Formula, Lit, Mul, Quant, ScalarMul, SortSpec, Term, ValConst,
    Var, free_vars,
)

_KIND_TO_CONSTRAINT = {
    "ball": Constraint.NONE,
    "sa": Constraint.SA,
    "pos": Constraint.POS,
    "proj": Constraint.PROJ,
    "unit": Constraint.UNIT,
    "pisom": Constraint.PISOM,
}
_CONSTRAINT_TO_KIND = {v: k for k, v in _KIND_TO_CONSTRAINT.items()}

# Scalar functions that may appear in terms, by stable lexable name.
TERM_FUNCTIONS: dict[str, ScalarFunction] = {
    "sqrt": SQRT,
    "sqrts3": shifted_sqrt(1e-3),
    "pos": pos_part(),
}


def register_term_function(fn: ScalarFunction) -> ScalarFunction:
    existing = TERM_FUNCTIONS.get(fn.name)
    if existing is None:
        TERM_FUNCTIONS[fn.name] = fn
    return TERM_FUNCTIONS[fn.name]


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<adj>\^\*)"
    r"|(?P<dotminus>-\.)"
    r"|(?P<sym>[()\[\]:.,+\-*=]))"
)


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        self._lex()
        self.i = 0

    def _lex(self):
        pos = 0
        while pos < len(self.text):
            m = _TOKEN_RE.match(self.text, pos)
            if not m or m.end() == pos:
                rest = self.text[pos:].lstrip()
                if not rest:
                    break
                line = self.text.count("\n", 0, pos) + 1
                col = pos - self.text.rfind("\n", 0, pos)
                raise ParseError(f"unexpected character {rest[0]!r}", line, col)
            pos = m.end()
            for kind in ("num", "ident", "adj", "dotminus", "sym"):
                val = m.group(kind)
                if val is not None:
                    self.tokens.append((kind, val, m.start(kind)))
                    break

    def _coords(self, offset: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, offset) + 1
        col = offset - self.text.rfind("\n", 0, offset)
        return line, col

    def peek(self, ahead: int = 0):
        j = self.i + ahead
        return self.tokens[j] if j < len(self.tokens) else ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.next()
        if val != value:
            line, col = self._coords(off)
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}",
                             line, col)
        return val

    def error(self, message: str, offset=None):
        off = offset if offset is not None else self.peek()[2]
        line, col = self._coords(off)
        raise ParseError(message, line, col)


class _Parser:
    def __init__(self, text: str, constants: dict | None):
        self.lx = _Lexer(text)
        self.scopes: list[dict[str, SortSpec]] = [{}]
        self.constants = constants or {}

    # -- sorts ------------------------------------------------------------

    def parse_sort(self) -> SortSpec:
        kind, val, off = self.lx.next()
        if val == "scal":
            self.lx.expect("(")
            radius = self._number()
            self.lx.expect(")")
            return SortSpec(radius, Constraint.NONE, 1, scalar=True)
        if val not in _KIND_TO_CONSTRAINT:
            self.lx.error(f"unknown sort kind {val!r}", off)
        self.lx.expect("(")
        radius = self._number()
        amp = 1
        if self.lx.peek()[1] == ",":
            self.lx.next()
            self.lx.expect("amp")
            self.lx.expect("=")
            amp = int(self._number())
        self.lx.expect(")")
        try:
            return SortSpec(radius, _KIND_TO_CONSTRAINT[val], amp)
        except SortError as e:
            self.lx.error(str(e), off)

    def _number(self) -> float:
        kind, val, off = self.lx.next()
        if kind != "num":
            self.lx.error(f"expected a number, found {val!r}", off)
        return float(val)

    # -- formulas -----------------------------------------------------------

    def parse_formula(self) -> Formula:
        while self.lx.peek()[1] == "free":
            self.lx.next()
            _, name, _ = self.lx.next()
            self.lx.expect(":")
            sort = self.parse_sort()
            self.lx.expect(".")
            self.scopes[0][name] = sort
        return self._fsum()

    def _fsum(self) -> Formula:
        left = self._fatom()
        while True:
            kind, val, _ = self.lx.peek()
            if val == "+":
                self.lx.next()
                left = Conn("add", (left, self._fatom()))
            elif val == "-":
                self.lx.next()
                left = Conn("sub", (left, self._fatom()))
            elif kind == "dotminus":
                self.lx.next()
                left = Conn("dotminus", (left, self._fatom()))
            else:
                return left

    def _fatom(self) -> Formula:
        kind, val, off = self.lx.peek()
        if val in ("sup", "inf"):
            self.lx.next()
            _, name, noff = self.lx.next()
            self.lx.expect(":")
            sort = self.parse_sort()
            self.lx.expect(".")
            self.scopes.append({name: sort})
            body = self._fsum()
            self.scopes.pop()
            return Quant(val, name, sort, body)
        if val == "norm":
            self.lx.next()
            self.lx.expect("(")
            t = self._term()
            self.lx.expect(")")
            return Atomic(t)
        if kind == "num":
            self.lx.next()
            return Lit(float(val))
        if val == "(":
            self.lx.next()
            f = self._fsum()
            self.lx.expect(")")
            return f
        if kind == "ident" and val in CONNECTIVES and self.lx.peek(1)[1] == "(":
            self.lx.next()
            self.lx.next()
            args = [self.parse_formula_arg()]
            while self.lx.peek()[1] == ",":
                self.lx.next()
                args.append(self.parse_formula_arg())
            self.lx.expect(")")
            return Conn(val, tuple(args))
        self.lx.error(f"expected a formula, found {val or 'end of input'!r}", off)

    def parse_formula_arg(self) -> Formula:
        return self._fsum()

    # -- terms ---------------------------------------------------------------

    def _term(self) -> Term:
        left = self._tprod()
        while self.lx.peek()[1] in ("+", "-"):
            op = self.lx.next()[1]
            right = self._tprod()
            left = Add(left, right) if op == "+" else Add(left, ScalarMul(-1.0, right))
        return left

    def _tprod(self) -> Term:
        left = self._tfactor()
        while self.lx.peek()[1] == "*":
            self.lx.next()
            left = Mul(left, self._tfactor())
        return left

    def _tfactor(self) -> Term:
        t = self._tprimary()
        while self.lx.peek()[0] == "adj":
            self.lx.next()
            t = Adjoint(t)
        return t

    def _lookup(self, name: str, off: int) -> Term:
        for scope in reversed(self.scopes):
            if name in scope:
                return Var(name, scope[name])
        if name in ("one", "zero"):
            return Const(name)
        if name in self.constants:
            v = self.constants[name]
            return v if isinstance(v, (Const, ValConst)) else ValConst(name, v)
        if name in KRON_CONSTANTS:
            return Const(name)
        self.lx.error(f"unbound variable {name!r}", off)

    def _tprimary(self) -> Term:
        kind, val, off = self.lx.peek()
        if kind == "num" or (val == "(" and self._complex_ahead()):
            lam = self._scalar()
            self.lx.expect("*")
            return ScalarMul(lam, self._tfactor())
        if val == "(":
            self.lx.next()
            t = self._term()
            self.lx.expect(")")
            return t
        if kind == "ident":
            if self.lx.peek(1)[1] == "[":
                self.lx.next()
                self.lx.next()
                t = self._term()
                self.lx.expect("]")
                m = re.fullmatch(r"emb(\d+)", val)
                if m:
                    return Embed(t, int(m.group(1)))
                if val not in TERM_FUNCTIONS:
                    self.lx.error(f"unknown scalar function {val!r}", off)
                return FnApp(TERM_FUNCTIONS[val], t)
            self.lx.next()
            return self._lookup(val, off)
        self.lx.error(f"expected a term, found {val or 'end of input'!r}", off)

    def _complex_ahead(self) -> bool:
        # "(" NUM ("+"|"-") NUM "i" ")"
        toks = [self.lx.peek(k) for k in range(6)]
        return (toks[0][1] == "(" and toks[1][0] == "num"
                and toks[2][1] in ("+", "-") and toks[3][0] == "num"
                and toks[4][1] == "i" and toks[5][1] == ")")

    def _scalar(self) -> complex:
        kind, val, off = self.lx.peek()
        if kind == "num":
            self.lx.next()
            return complex(float(val), 0.0)
        self.lx.expect("(")
        re_part = self._number()
        sign = 1.0 if self.lx.next()[1] == "+" else -1.0
        im_part = self._number()
        self.lx.expect("i")
        self.lx.expect(")")
        return complex(re_part, sign * im_part)


def parse(text: str, constants: dict | None = None) -> Formula:
    """Parse DSL text into a formula AST."""
    p = _Parser(text, constants)
    phi = p.parse_formula()
    tok = p.lx.peek()
    if tok[0] != "eof":
        p.lx.error(f"trailing input starting at {tok[1]!r}")
    return phi


# -- printing --------------------------------------------------------------------


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _fmt_scalar(lam: complex) -> str:
    lam = complex(lam)
    if lam.imag == 0:
        return _fmt_num(lam.real)
    sign = "+" if lam.imag >= 0 else "-"
    return f"({_fmt_num(lam.real)}{sign}{_fmt_num(abs(lam.imag))}i)"


def _fmt_sort(s: SortSpec) -> str:
    if s.scalar:
        return f"scal({_fmt_num(s.radius)})"
    kind = _CONSTRAINT_TO_KIND[s.constraint]
    if s.amplification != 1:
        return f"{kind}({_fmt_num(s.radius)}, amp={s.amplification})"
    return f"{kind}({_fmt_num(s.radius)})"


_TERM_ATOM, _TERM_MUL, _TERM_SUM = 3, 2, 1


def _print_term(t: Term, level: int) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return t.name
    if isinstance(t, ValConst):
        return t.label
    if isinstance(t, Add):
        if isinstance(t.right, ScalarMul) and t.right.lam == -1.0:
            s = f"{_print_term(t.left, _TERM_SUM)} - {_print_term(t.right.child, _TERM_MUL)}"
        else:
            s = f"{_print_term(t.left, _TERM_SUM)} + {_print_term(t.right, _TERM_MUL)}"
        return f"({s})" if level > _TERM_SUM else s
    if isinstance(t, Mul):
        s = f"{_print_term(t.left, _TERM_MUL)}*{_print_term(t.right, _TERM_ATOM)}"
        return f"({s})" if level > _TERM_MUL else s
    if isinstance(t, Adjoint):
        return f"{_print_term(t.child, _TERM_ATOM)}^*"
    if isinstance(t, ScalarMul):
        s = f"{_fmt_scalar(t.lam)}*{_print_term(t.child, _TERM_ATOM)}"
        return f"({s})" if level > _TERM_MUL else s
    if isinstance(t, FnApp):
        return f"{t.fn.name}[{_print_term(t.child, _TERM_SUM)}]"
    if isinstance(t, Embed):
        return f"emb{t.factor}[{_print_term(t.child, _TERM_SUM)}]"
    raise TypeError(f"not a term: {t!r}")


_INFIX = {"add": "+", "sub": "-", "dotminus": "-."}


def _print_formula(phi: Formula, ctx: str) -> str:
    # ctx: "top" extends to the end of the enclosing group, "left" sits left
    # of an infix operator, "right" sits right of one without closing it.
    if isinstance(phi, Atomic):
        return f"norm({_print_term(phi.term, _TERM_SUM)})"
    if isinstance(phi, Lit):
        return _fmt_num(phi.value)
    if isinstance(phi, Quant):
        s = f"{phi.kind} {phi.var}:{_fmt_sort(phi.sort)}. {_print_formula(phi.body, 'top')}"
        return s if ctx == "top" else f"({s})"
    if isinstance(phi, Conn):
        if phi.op in _INFIX:
            left = _print_formula(phi.args[0], "left")
            right = _print_formula(phi.args[1], "right" if ctx != "top" else "top")
            if isinstance(phi.args[1], Conn) and phi.args[1].op in _INFIX:
                right = f"({_print_formula(phi.args[1], 'top')})"
            s = f"{left} {_INFIX[phi.op]} {right}"
            return s if ctx in ("top", "left") else f"({s})"
        args = ", ".join(_print_formula(a, "top") for a in phi.args)
        return f"{phi.op}({args})"
    raise TypeError(f"not a formula: {phi!r}")


def print_formula(phi: Formula) -> str:
    """Canonical text: bound variables renamed x0, x1, ... by binding order,
    free variables declared by leading `free` binders in name order."""
    from .logic import rename_bound

    phi = rename_bound(phi)
    prefix = "".join(
        f"free {name}:{_fmt_sort(sort)}. "
        for name, sort in sorted(free_vars(phi).items())
    )
    return prefix + _print_formula(phi, "top")
