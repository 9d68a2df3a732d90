"""Text format for expressions and system files, with a canonical printer.

Expressions use ``+ - * / ^`` (integer exponents), parentheses, ``exp(...)``,
function application and jet variables written ``u_tx`` or ``u_{x:2,t:1}``.
``D_x(...)`` applies a total derivative.

A system file is a list of line statements (``\\`` continues a line, ``#``
starts a comment)::

    indep t x
    dep u
    const eps
    fn IntA(u) d/u = A(u)
    fn sigma(t, v) rule sigma_t -> -sigma_vv
    eq u_t = D_x(A(u)*u_x) label L
    cv F1 = (x*u, IntA(u) - x*A(u)*u_x)
    cv F5v = F5 with sigma(t, v) := v
    potential P kind 2d from F1 vars v
    potential C kind covering on P flux w (t: w*u, x: w)
    variants eps 0 1 -1
    check row-1: char F1 = (x)

See the README for the full statement and check grammar.
"""

from __future__ import annotations

import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .diffsys import DiffSystem, Equation
from .errors import ConslawError, ParseError
from .expr import (
    Expr,
    Func,
    FuncDecl,
    FuncRegistry,
    Indep,
    Jet,
    as_expr,
    exp,
    instantiate,
    to_text,
)
from .jet import total_derivative_multi

RESERVED = {
    "indep", "dep", "const", "fn", "eq", "cv", "potential", "check", "variants",
    "weight", "rule", "nongeneric", "label", "with", "kind", "on", "in", "from",
    "vars", "flux", "lift", "witness", "wrt", "exp",
}
KINDS = ("2d", "abelian", "standard", "covering")
CHECK_KINDS = (
    "conserved", "char", "cosym", "phi", "localize", "purity", "trivial", "equiv",
    "residual", "locality", "dv", "minimal",
)
VERDICTS = ("Induced", "PurelyPotential", "Trivial", "Undecided")

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\\\n|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+)
  | (?P<name>[A-Za-z][A-Za-z0-9]*(?:_(?:\{[^}\n]*\}|[A-Za-z0-9]+))?)
  | (?P<op>:=|->|[-+*/^(),=:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            out.append(Token("nl", "\n", line, col))
        elif kind != "ws":
            out.append(Token(kind, m.group(), line, col))
        nls = m.group().count("\n")
        if nls:
            line += nls
            line_start = m.end()
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


def _split_name(text: str):
    base, _, suffix = text.partition("_")
    return base, suffix


# --------------------------------------------------------------------------
# Symbol scope


class Scope:
    """Names visible to the expression parser."""

    def __init__(self, indep=(), deps=(), registry: FuncRegistry | None = None, consts=(),
                 bindings: Mapping[str, object] | None = None, free: bool = False):
        self.indep = list(indep)
        self.deps = list(deps)
        self.registry = registry or FuncRegistry()
        self.consts = set(consts)
        self.bindings = {k: as_expr(v) for k, v in (bindings or {}).items()}
        # free mode: unknown names become dependent variables
        self.free = free

    def known(self, name: str) -> bool:
        return name in self.indep or name in self.deps or name in self.registry or name == "exp"

    def declare_name(self, name: str, tok: Token):
        if "_" in name:
            raise ParseError(f"names may not contain '_': {name!r}", tok.line, tok.col)
        if name in RESERVED or name == "D":
            raise ParseError(f"{name!r} is a reserved word", tok.line, tok.col)
        if self.known(name):
            raise ParseError(f"{name!r} is already declared", tok.line, tok.col)


# --------------------------------------------------------------------------
# Expression parser


class _Stream:
    def __init__(self, tokens: list):
        self.toks = tokens
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("op", "name") and t.text == text

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def expect_kind(self, kind: str, what: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {what}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        return ParseError(msg, tok.line, tok.col)


class ExprParser:
    def __init__(self, stream: _Stream, scope: Scope):
        self.s = stream
        self.scope = scope

    def expr(self) -> Expr:
        s = self.s
        if s.at("-"):
            s.next()
            e = -self.term()
        else:
            if s.at("+"):
                s.next()
            e = self.term()
        while s.at("+") or s.at("-"):
            op = s.next().text
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self) -> Expr:
        s = self.s
        e = self.power()
        while s.at("*") or s.at("/"):
            tok = s.next()
            rhs = self.power()
            if tok.text == "*":
                e = e * rhs
            else:
                if rhs.iszero():
                    raise s.error("division by zero", tok)
                e = e / rhs
        return e

    def power(self) -> Expr:
        s = self.s
        base = self.unary()
        if s.at("^"):
            s.next()
            k = self._int_exponent()
            if k < 0 and base.iszero():
                raise s.error("zero to a negative power")
            return base**k
        return base

    def unary(self) -> Expr:
        if self.s.at("-"):
            self.s.next()
            return -self.power()
        return self.primary()

    def _int_exponent(self) -> int:
        s = self.s
        sign = 1
        paren = False
        if s.at("("):
            s.next()
            paren = True
        if s.at("-"):
            s.next()
            sign = -1
        tok = s.expect_kind("num", "an integer exponent")
        if paren:
            s.expect(")")
        return sign * int(tok.text)

    def primary(self) -> Expr:
        s = self.s
        tok = s.peek()
        if tok.kind == "num":
            s.next()
            return Expr.const(int(tok.text))
        if s.at("("):
            s.next()
            e = self.expr()
            s.expect(")")
            return e
        if tok.kind == "name":
            s.next()
            return self.name(tok)
        raise s.error(f"unexpected {tok.text or 'end of input'!r}", tok)

    # names ---------------------------------------------------------------
    def _orders(self, suffix: str, labels: Sequence[str], tok: Token) -> dict:
        out: dict = {}
        if suffix.startswith("{"):
            body = suffix[1:-1].strip()
            if not body:
                raise ParseError("empty derivative index", tok.line, tok.col)
            for item in body.split(","):
                name, sep, cnt = item.partition(":")
                name = name.strip()
                if not sep or not cnt.strip().isdigit():
                    raise ParseError(f"bad derivative index {item.strip()!r}", tok.line, tok.col)
                if name not in labels:
                    raise ParseError(f"unknown derivative direction {name!r}", tok.line, tok.col)
                out[name] = out.get(name, 0) + int(cnt)
        else:
            for ch in suffix:
                if ch not in labels:
                    raise ParseError(f"unknown derivative direction {ch!r} in {tok.text!r}", tok.line, tok.col)
                out[ch] = out.get(ch, 0) + 1
        return {n: c for n, c in out.items() if c}

    def _args(self, decl: FuncDecl, tok: Token) -> tuple:
        s = self.s
        if not s.at("("):
            return tuple(as_expr(p) for p in decl.params)
        s.next()
        args = []
        if not s.at(")"):
            args.append(self.expr())
            while s.at(","):
                s.next()
                args.append(self.expr())
        s.expect(")")
        if len(args) != decl.arity:
            raise ParseError(f"{decl.name} expects {decl.arity} arguments, got {len(args)}", tok.line, tok.col)
        return tuple(args)

    def _adhoc_function(self, name: str) -> Expr:
        # free scope: an unknown name applied to arguments is a generic function
        s = self.s
        s.next()
        args = [self.expr()]
        while s.at(","):
            s.next()
            args.append(self.expr())
        s.expect(")")
        params = []
        for k, a in enumerate(args):
            term = a.single_term()
            atom = None
            if term is not None and term[1] == 1 and len(term[0]) == 1 and term[0][0][1] == 1:
                f = term[0][0][0]
                if isinstance(f, (Indep, Jet)) and f not in params:
                    atom = f
            params.append(atom if atom is not None else Indep(f"z{k + 1}"))
        decl = self.scope.registry.declare(FuncDecl(name, params))
        return decl.apply(tuple(args), (0,) * decl.arity)

    def name(self, tok: Token) -> Expr:
        scope = self.scope
        base, suffix = _split_name(tok.text)
        if suffix:
            if base == "D" and "D" not in scope.registry and "D" not in scope.deps:
                dirs = self._orders(suffix, scope.indep, tok)
                self.s.expect("(")
                e = self.expr()
                self.s.expect(")")
                return total_derivative_multi(e, [(d, dirs[d]) for d in scope.indep if d in dirs])
            if base in scope.deps or (scope.free and base not in scope.indep and base not in scope.registry):
                if base not in scope.deps:
                    scope.deps.append(base)
                return Expr.atom(Jet(base, self._orders(suffix, scope.indep, tok)))
            if base in scope.registry:
                decl = scope.registry[base]
                if not decl.params:
                    raise ParseError(f"constant {base!r} has no derivatives", tok.line, tok.col)
                labels = decl.param_labels()
                orders = self._orders(suffix, labels, tok)
                derivs = tuple(orders.get(lab, 0) for lab in labels)
                return decl.apply(self._args(decl, tok), derivs)
            raise ParseError(f"unknown symbol {base!r}", tok.line, tok.col)
        name = base
        if name in scope.indep:
            return Expr.atom(Indep(name))
        if name in scope.bindings:
            return scope.bindings[name]
        if name in scope.registry:
            decl = scope.registry[name]
            return decl.apply(self._args(decl, tok), (0,) * decl.arity)
        if name in scope.deps:
            return Expr.atom(Jet(name))
        if name == "exp" and self.s.at("("):
            self.s.next()
            e = self.expr()
            self.s.expect(")")
            return exp(e)
        if scope.free and name not in RESERVED and self.s.at("("):
            return self._adhoc_function(name)
        if scope.free and name not in RESERVED:
            scope.deps.append(name)
            return Expr.atom(Jet(name))
        raise ParseError(f"unknown symbol {name!r}", tok.line, tok.col)


def parse_expression(text: str, scope: Scope | None = None) -> Expr:
    """Parse one expression; without a scope, ``t``, ``x`` are independent and other names dependent."""
    if scope is None:
        scope = Scope(indep=("t", "x"), free=True)
    toks = [t for t in tokenize(text) if t.kind != "nl"]
    s = _Stream(toks)
    e = ExprParser(s, scope).expr()
    if s.peek().kind != "eof":
        t = s.peek()
        raise ParseError(f"unexpected {t.text!r} after expression", t.line, t.col)
    return e


def format_expression(e) -> str:
    """Canonical (explicit-index) rendering."""
    return to_text(as_expr(e), explicit=True)


# --------------------------------------------------------------------------
# File model


@dataclass
class FnDef:
    decl: FuncDecl
    param_names: tuple
    rules: list  # (param name, Expr)
    constraint_text: tuple | None  # (pattern derivs, [(coef, derivs)])


@dataclass
class CVDef:
    name: str
    components: tuple
    source: tuple | None = None  # (cv name, function name, params, body)


@dataclass
class PotentialDef:
    name: str
    kind: str
    on: str | None
    sources: tuple
    vars: tuple
    fluxes: list  # [(var, [(dir, Expr)])]


@dataclass
class Check:
    id: str
    kind: str
    subjects: list = field(default_factory=list)  # cv names or component tuples
    on: str | None = None
    in_: str | None = None
    wrt: str | None = None
    fluxes: list = field(default_factory=list)
    lift: bool = False
    expect: object = None  # tuple, Expr or verdict string
    witness: tuple | None = None
    line: int = 0


class SystemFile:
    """A parsed system file: base system, conserved vectors, potential structures and checks."""

    def __init__(self, bindings: Mapping[str, object] | None = None):
        self.scope = Scope(bindings=bindings)
        self.weights: dict = {}
        self.consts: list = []
        self.fns: dict = {}
        self.equations: list = []
        self.cvs: dict = {}
        self.potentials: dict = {}
        self.structures: dict = {}
        self.checks: list = []
        self.variants: list = []  # (const name, [values])
        self.statements: list = []
        self._base: DiffSystem | None = None
        self.base_deps: list = []

    @property
    def indep(self) -> tuple:
        return tuple(self.scope.indep)

    @property
    def registry(self) -> FuncRegistry:
        return self.scope.registry

    @property
    def base(self) -> DiffSystem:
        if self._base is None:
            if not self.equations:
                raise ConslawError("the file declares no equations")
            w = {d: self.weights[d] for d in self.base_deps if self.weights.get(d) is not None}
            self._base = DiffSystem(self.indep, self.base_deps, self.equations, w, registry=self.registry)
        return self._base

    def structure(self, name: str):
        try:
            return self.structures[name]
        except KeyError:
            raise ConslawError(f"no potential structure named {name!r}") from None

    def system(self, name: str | None = None) -> DiffSystem:
        if name is None or name == "base":
            return self.base
        return self.structure(name).system

    def default_target(self) -> str:
        return list(self.structures)[-1] if self.structures else "base"

    def cv(self, name: str) -> tuple:
        try:
            return self.cvs[name].components
        except KeyError:
            raise ConslawError(f"no conserved vector named {name!r}") from None

    def parse_expression(self, text: str) -> Expr:
        return parse_expression(text, self.scope)

    def format(self) -> str:
        return format_system_file(self)


def _statements(tokens: list):
    cur: list = []
    for t in tokens:
        if t.kind in ("nl", "eof"):
            if cur:
                yield cur + [Token("eof", "", t.line, t.col)]
                cur = []
        else:
            cur.append(t)


class _FileParser:
    def __init__(self, text: str, bindings):
        self.f = SystemFile(bindings)
        self.text = text

    def run(self) -> SystemFile:
        for toks in _statements(tokenize(self.text)):
            self.s = _Stream(toks)
            head = self.s.peek()
            handler = getattr(self, "st_" + head.text, None) if head.kind == "name" else None
            if handler is None:
                raise ParseError(f"unknown statement {head.text!r}", head.line, head.col)
            self.s.next()
            try:
                handler(head)
            except ParseError:
                raise
            except (ConslawError, ValueError) as exc:
                raise ParseError(str(exc), head.line, head.col) from exc
            end = self.s.peek()
            if end.kind != "eof":
                raise ParseError(f"unexpected {end.text!r}", end.line, end.col)
        return self.f

    # helpers -----------------------------------------------------------
    def expr(self) -> Expr:
        return ExprParser(self.s, self.f.scope).expr()

    def tuple_(self) -> tuple:
        s = self.s
        s.expect("(")
        items = [self.expr()]
        while s.at(","):
            s.next()
            items.append(self.expr())
        s.expect(")")
        return tuple(items)

    def new_name(self) -> Token:
        tok = self.s.expect_kind("name", "a name")
        self.f.scope.declare_name(tok.text, tok)
        return tok

    def _no_base_yet(self, tok: Token, what: str):
        if self.f._base is not None:
            raise ParseError(f"{what} must precede conserved vectors, potentials and checks", tok.line, tok.col)

    # statements --------------------------------------------------------
    def st_indep(self, head):
        self._no_base_yet(head, "indep")
        if self.f.scope.indep:
            raise ParseError("independent variables are declared once", head.line, head.col)
        while self.s.peek().kind == "name":
            tok = self.new_name()
            self.f.scope.indep.append(tok.text)
        if not self.f.scope.indep:
            raise self.s.error("expected at least one independent variable")
        self.f.statements.append(("indep", None))

    def st_dep(self, head):
        self._no_base_yet(head, "dep")
        tok = self.new_name()
        w = None
        if self.s.at("weight"):
            self.s.next()
            w = int(self.s.expect_kind("num", "a weight").text)
        self.f.scope.deps.append(tok.text)
        self.f.base_deps.append(tok.text)
        self.f.weights[tok.text] = w
        self.f.statements.append(("dep", tok.text))

    def st_const(self, head):
        tok = self.new_name()
        decl = self.f.registry.declare(FuncDecl(tok.text))
        self.f.scope.consts.add(tok.text)
        self.f.consts.append(decl)
        self.f.statements.append(("const", tok.text))

    def st_fn(self, head):
        s = self.s
        tok = self.new_name()
        s.expect("(")
        names = []
        if not s.at(")"):
            names.append(s.expect_kind("name", "a parameter").text)
            while s.at(","):
                s.next()
                names.append(s.expect_kind("name", "a parameter").text)
        s.expect(")")
        if len(set(names)) != len(names):
            raise s.error("repeated parameter")
        params = tuple(Indep(n) if n in self.f.scope.indep else Jet(n) for n in names)
        rules = []
        while s.at("d"):
            s.next()
            s.expect("/")
            p = s.expect_kind("name", "a parameter").text
            if p not in names:
                raise s.error(f"{p!r} is not a parameter of {tok.text}")
            s.expect("=")
            rules.append((p, self.expr()))
        constraint = None
        if s.at("rule"):
            s.next()
            constraint = self._rule(tok.text, names, params)
        generic = True
        if s.at("nongeneric"):
            s.next()
            generic = False
        derivatives = {names.index(p): e for p, e in rules}
        decl = FuncDecl(tok.text, params, derivatives, constraint, generic)
        self.f.registry.declare(decl)
        self.f.fns[tok.text] = FnDef(decl, tuple(names), rules, constraint)
        self.f.statements.append(("fn", tok.text))

    def _rule(self, name: str, names, params):
        s = self.s
        pat = s.expect_kind("name", "a derivative pattern")
        base, suffix = _split_name(pat.text)
        if base != name or not suffix:
            raise ParseError(f"rule pattern must be a derivative of {name}", pat.line, pat.col)
        tmp = FuncDecl(name, params)
        p = ExprParser(s, self.f.scope)
        orders = p._orders(suffix, names, pat)
        pattern = tuple(orders.get(n, 0) for n in names)
        s.expect("->")
        # the right-hand side is read against an unconstrained stand-in
        saved = self.f.registry._decls.get(name)
        self.f.registry._decls[name] = tmp
        try:
            rhs = self.expr()
        finally:
            if saved is None:
                self.f.registry._decls.pop(name, None)
            else:
                self.f.registry._decls[name] = saved
        repl = []
        formal = tuple(as_expr(q) for q in params)
        for m, c in rhs.terms():
            if len(m) != 1 or m[0][1] != 1 or not isinstance(m[0][0], Func) or m[0][0].decl is not tmp \
                    or tuple(m[0][0].args) != formal:
                raise ParseError("a rule right-hand side must be a constant-coefficient combination "
                                 f"of derivatives of {name}", pat.line, pat.col)
            repl.append((c, m[0][0].derivs))
        return (pattern, repl)

    def st_eq(self, head):
        s = self.s
        self._no_base_yet(head, "equations")
        lt = s.peek()
        lead = self.expr()
        single = lead.single_term()
        if single is None or single[1] != 1 or len(single[0]) != 1 or single[0][0][1] != 1 \
                or not isinstance(single[0][0][0], Jet):
            raise ParseError("the left-hand side must be a single jet variable", lt.line, lt.col)
        j = single[0][0][0]
        if j.dep not in self.f.base_deps:
            raise ParseError(f"{j.dep!r} is not a dependent variable", lt.line, lt.col)
        s.expect("=")
        rhs = self.expr()
        label = f"L{len(self.f.equations) + 1}"
        if s.at("label"):
            s.next()
            label = s.expect_kind("name", "a label").text
        if any(e.label == label for e in self.f.equations):
            raise ParseError(f"duplicate label {label!r}", head.line, head.col)
        self.f.equations.append(Equation(j, rhs, label))
        self.f.statements.append(("eq", len(self.f.equations) - 1))

    def st_cv(self, head):
        s = self.s
        self.f.base  # freeze the base system
        tok = s.expect_kind("name", "a name")
        if tok.text in self.f.cvs or tok.text in self.f.potentials:
            raise ParseError(f"{tok.text!r} is already defined", tok.line, tok.col)
        s.expect("=")
        if s.at("("):
            comps = self.tuple_()
            if len(comps) != len(self.f.indep):
                raise ParseError(f"a conserved vector needs {len(self.f.indep)} components", tok.line, tok.col)
            self.f.cvs[tok.text] = CVDef(tok.text, comps)
        else:
            ref = s.expect_kind("name", "a conserved vector name")
            src = self.f.cvs.get(ref.text)
            if src is None:
                raise ParseError(f"unknown conserved vector {ref.text!r}", ref.line, ref.col)
            s.expect("with")
            fn = s.expect_kind("name", "a function symbol")
            decl = self.f.registry.get(fn.text)
            if decl is None:
                raise ParseError(f"unknown function symbol {fn.text!r}", fn.line, fn.col)
            params = []
            if s.at("("):
                s.next()
                if not s.at(")"):
                    params.append(s.expect_kind("name", "a parameter").text)
                    while s.at(","):
                        s.next()
                        params.append(s.expect_kind("name", "a parameter").text)
                s.expect(")")
            if tuple(params) != tuple(decl.param_labels()):
                raise ParseError(f"parameters must be written as {fn.text}({', '.join(decl.param_labels())})",
                                 fn.line, fn.col)
            s.expect(":=")
            body = self.expr()
            comps = tuple(instantiate(c, decl, body) for c in src.components)
            self.f.cvs[tok.text] = CVDef(tok.text, comps, (ref.text, fn.text, tuple(params), body))
        self.f.statements.append(("cv", tok.text))

    def st_potential(self, head):
        from .potential import (
            build_abelian_covering,
            build_general_covering,
            build_potential_system_2d,
            build_standard_potential_system,
        )

        s = self.s
        self.f.base
        tok = s.expect_kind("name", "a name")
        if tok.text in self.f.potentials or tok.text in self.f.cvs or tok.text == "base":
            raise ParseError(f"{tok.text!r} is already defined", tok.line, tok.col)
        s.expect("kind")
        kt = s.next()
        if kt.kind == "num" and s.peek().kind == "name" and s.peek().col == kt.col + len(kt.text):
            d = s.next()
            kt = Token("name", kt.text + d.text, kt.line, kt.col)
        if kt.text not in KINDS:
            raise ParseError(f"unknown potential kind {kt.text!r}", kt.line, kt.col)
        on = None
        if s.at("on"):
            s.next()
            on = s.expect_kind("name", "a structure name").text
            if on not in self.f.structures:
                raise s.error(f"unknown structure {on!r}")
        sources: list = []
        names: list = []
        fluxes: list = []
        if s.at("from"):
            s.next()
            while s.peek().kind == "name" and s.peek().text not in RESERVED:
                r = s.next()
                if r.text not in self.f.cvs:
                    raise ParseError(f"unknown conserved vector {r.text!r}", r.line, r.col)
                sources.append(r.text)
        if s.at("vars"):
            s.next()
            while s.peek().kind == "name" and s.peek().text not in RESERVED:
                names.append(self._potential_name().text)
        new_vars = list(names)
        while s.at("flux"):
            s.next()
            vt = s.peek()
            var = self._potential_name().text
            if var not in new_vars:
                new_vars.append(var)
            # the potential itself may occur in covering fluxes
            if var not in self.f.scope.deps:
                self.f.scope.deps.append(var)
            fluxes.append((var, self._flux_body()))
        for v in new_vars:
            if v not in self.f.scope.deps:
                self.f.scope.deps.append(v)
        base = self.f.system(on)
        kind = kt.text
        if kind in ("2d", "standard"):
            if fluxes or len(sources) != len(names) or not sources:
                raise ParseError(f"kind {kind} needs 'from' conserved vectors and as many 'vars'",
                                 head.line, head.col)
            cvs = [self.f.cv(n) for n in sources]
            build = build_potential_system_2d if kind == "2d" else build_standard_potential_system
            P = build(base, cvs, names)
        else:
            if sources or names or not fluxes:
                raise ParseError(f"kind {kind} is declared through 'flux' clauses", head.line, head.col)
            G = {v: dict(body) for v, body in fluxes}
            build = build_abelian_covering if kind == "abelian" else build_general_covering
            P = build(base, G, [v for v, _ in fluxes])
        for p in P.potentials:
            if p not in self.f.scope.deps:
                self.f.scope.deps.append(p)
        self.f.potentials[tok.text] = PotentialDef(tok.text, kind, on, tuple(sources), tuple(names), fluxes)
        self.f.structures[tok.text] = P
        self.f.statements.append(("potential", tok.text))

    def _potential_name(self) -> Token:
        # potential names may be reused by several structures of one file
        tok = self.s.expect_kind("name", "a potential name")
        if tok.text in self.f.scope.deps and tok.text not in self.f.base_deps:
            return tok
        self.f.scope.declare_name(tok.text, tok)
        return tok

    def _flux_body(self) -> list:
        s = self.s
        s.expect("(")
        out = []
        while True:
            d = s.expect_kind("name", "a direction")
            if d.text not in self.f.indep:
                raise ParseError(f"unknown direction {d.text!r}", d.line, d.col)
            s.expect(":")
            out.append((d.text, self.expr()))
            if not s.at(","):
                break
            s.next()
        s.expect(")")
        return out

    def st_variants(self, head):
        s = self.s
        c = s.expect_kind("name", "a constant")
        if c.text not in self.f.scope.consts:
            raise ParseError(f"{c.text!r} is not a declared constant", c.line, c.col)
        vals = []
        while s.peek().kind == "num" or s.at("-"):
            sign = 1
            if s.at("-"):
                s.next()
                sign = -1
            vals.append(sign * int(s.expect_kind("num", "an integer").text))
        if not vals:
            raise s.error("expected at least one value")
        self.f.variants.append((c.text, vals))
        self.f.statements.append(("variants", len(self.f.variants) - 1))

    def st_check(self, head):
        s = self.s
        self.f.base
        parts = []
        first = s.peek()
        while not s.at(":"):
            t = s.next()
            if t.kind == "eof":
                raise ParseError("expected ':' after the check id", t.line, t.col)
            parts.append(t.text)
        if not parts:
            raise ParseError("missing check id", first.line, first.col)
        s.expect(":")
        kt = s.expect_kind("name", "a check kind")
        if kt.text not in CHECK_KINDS:
            raise ParseError(f"unknown check kind {kt.text!r}", kt.line, kt.col)
        c = Check("".join(parts), kt.text, line=head.line)
        while s.at("(") or (s.peek().kind == "name" and s.peek().text not in RESERVED):
            if s.at("("):
                c.subjects.append(self.tuple_())
            else:
                r = s.next()
                if r.text not in self.f.cvs:
                    raise ParseError(f"unknown conserved vector {r.text!r}", r.line, r.col)
                c.subjects.append(r.text)
        for kw in ("on", "in"):
            if s.at(kw):
                s.next()
                r = s.expect_kind("name", "a structure name")
                if r.text != "base" and r.text not in self.f.structures:
                    raise ParseError(f"unknown structure {r.text!r}", r.line, r.col)
                setattr(c, "on" if kw == "on" else "in_", r.text)
        if s.at("wrt"):
            s.next()
            c.wrt = s.expect_kind("name", "a potential").text
        while s.at("flux"):
            s.next()
            vt = self._potential_name()
            if vt.text not in self.f.scope.deps:
                self.f.scope.deps.append(vt.text)
            c.fluxes.append((vt.text, self._flux_body()))
        if s.at("lift"):
            s.next()
            c.lift = True
        if s.at("="):
            s.next()
            if c.lift:
                # expected residuals are written before any constraint is imposed
                with _lifted(self.f.registry):
                    c.expect = self.tuple_()
            elif c.kind in ("purity", "locality"):
                v = s.expect_kind("name", "a verdict")
                if v.text not in VERDICTS:
                    raise ParseError(f"unknown verdict {v.text!r}", v.line, v.col)
                c.expect = v.text
            elif c.kind == "phi":
                c.expect = self.expr()
            else:
                c.expect = self.tuple_()
        if s.at("witness"):
            s.next()
            c.witness = self.tuple_()
        self.f.checks.append(c)
        self.f.statements.append(("check", len(self.f.checks) - 1))


@contextmanager
def _lifted(registry: FuncRegistry):
    saved = dict(registry._decls)
    for name, decl in saved.items():
        if decl.constraint is not None:
            registry._decls[name] = decl.unconstrained()
    try:
        yield
    finally:
        registry._decls.clear()
        registry._decls.update(saved)


def parse_system_file(text: str, bindings: Mapping[str, object] | None = None) -> SystemFile:
    """Parse a system file.  ``bindings`` assigns values to declared constants."""
    return _FileParser(text, bindings).run()


# --------------------------------------------------------------------------
# Printing


def _tuple_text(t) -> str:
    return "(" + ", ".join(format_expression(e) for e in t) + ")"


def _flux_text(var, body) -> str:
    return f"flux {var} (" + ", ".join(f"{d}: {format_expression(e)}" for d, e in body) + ")"


def _fn_text(f: SystemFile, fd: FnDef) -> str:
    decl = fd.decl
    out = f"fn {decl.name}({', '.join(fd.param_names)})"
    for p, e in fd.rules:
        out += f" d/{p} = {format_expression(e)}"
    if fd.constraint_text is not None:
        pattern, repl = fd.constraint_text
        tmp = FuncDecl(decl.name, decl.params)
        formal = tuple(as_expr(q) for q in decl.params)
        lhs = Expr.atom(Func(tmp, formal, pattern))
        rhs = Expr({((Func(tmp, formal, d), 1),): c for c, d in repl})
        lt = format_expression(lhs)
        out += f" rule {lt[:lt.index('(')]} -> {_strip_formal(format_expression(rhs), decl)}"
    if not decl.generic:
        out += " nongeneric"
    return out


def _strip_formal(text: str, decl: FuncDecl) -> str:
    call = "(" + ", ".join(decl.param_labels()) + ")"
    return text.replace(call, "")


def _check_text(c: Check) -> str:
    out = f"check {c.id}: {c.kind}"
    for subj in c.subjects:
        out += " " + (subj if isinstance(subj, str) else _tuple_text(subj))
    if c.on:
        out += f" on {c.on}"
    if c.in_:
        out += f" in {c.in_}"
    if c.wrt:
        out += f" wrt {c.wrt}"
    for var, body in c.fluxes:
        out += " " + _flux_text(var, body)
    if c.lift:
        out += " lift"
    if c.expect is not None:
        if isinstance(c.expect, str):
            out += f" = {c.expect}"
        elif isinstance(c.expect, Expr):
            out += f" = {format_expression(c.expect)}"
        else:
            out += f" = {_tuple_text(c.expect)}"
    if c.witness is not None:
        out += f" witness {_tuple_text(c.witness)}"
    return out


def format_system_file(f: SystemFile) -> str:
    lines = []
    for kind, ref in f.statements:
        if kind == "indep":
            lines.append("indep " + " ".join(f.indep))
        elif kind == "dep":
            w = f.weights.get(ref)
            lines.append(f"dep {ref}" + (f" weight {w}" if w is not None else ""))
        elif kind == "const":
            lines.append(f"const {ref}")
        elif kind == "fn":
            lines.append(_fn_text(f, f.fns[ref]))
        elif kind == "eq":
            eq = f.equations[ref]
            lines.append(f"eq {format_expression(eq.lhs)} = {format_expression(eq.rhs)} label {eq.label}")
        elif kind == "cv":
            cv = f.cvs[ref]
            if cv.source is None:
                lines.append(f"cv {ref} = {_tuple_text(cv.components)}")
            else:
                src, fn, params, body = cv.source
                call = f"{fn}({', '.join(params)})" if params else fn
                lines.append(f"cv {ref} = {src} with {call} := {format_expression(body)}")
        elif kind == "potential":
            p = f.potentials[ref]
            out = f"potential {ref} kind {p.kind}"
            if p.on:
                out += f" on {p.on}"
            if p.sources:
                out += " from " + " ".join(p.sources)
            if p.vars:
                out += " vars " + " ".join(p.vars)
            for var, body in p.fluxes:
                out += " " + _flux_text(var, body)
            lines.append(out)
        elif kind == "variants":
            name, vals = f.variants[ref]
            lines.append(f"variants {name} " + " ".join(map(str, vals)))
        elif kind == "check":
            lines.append(_check_text(f.checks[ref]))
    return "\n".join(lines) + "\n"


def parse_tuple(text: str, scope: Scope) -> tuple:
    toks = [t for t in tokenize(text) if t.kind != "nl"]
    s = _Stream(toks)
    p = ExprParser(s, scope)
    s.expect("(")
    items = [p.expr()]
    while s.at(","):
        s.next()
        items.append(p.expr())
    s.expect(")")
    if s.peek().kind != "eof":
        raise s.error(f"unexpected {s.peek().text!r}")
    return tuple(items)


__all__ = [
    "Check",
    "CVDef",
    "FnDef",
    "PotentialDef",
    "Scope",
    "SystemFile",
    "Token",
    "format_expression",
    "format_system_file",
    "parse_expression",
    "parse_system_file",
    "parse_tuple",
    "tokenize",
]
