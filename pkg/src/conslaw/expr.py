"""Exact canonical expressions over jet-space atoms.

An :class:`Expr` is a finite sum of terms ``c * f1^p1 * ... * fk^pk`` with
rational ``c`` and integer powers.  Atoms are independent variables, jet
variables ``u^a_alpha``, applied function symbols (with a derivative
multiindex over their argument slots), exponential factors and reciprocals
of sums.  Canonical form is the fully expanded sum; two canonical forms are
equal iff the dictionaries of terms are equal.

Reciprocals of sums enter only as :class:`Inv` atoms, so the structural form
of a rational expression is not unique.  :func:`is_zero` clears those
denominators before deciding, and all identity checks in the package go
through it.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping

from .errors import UnboundAtom, UnsupportedExpression


def _q(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"not an exact rational: {c!r}")


# --------------------------------------------------------------------------
# Atoms


class Atom:
    __slots__ = ("_key", "_hash")

    def __init__(self, key):
        self._key = key
        self._hash = hash(key)

    @property
    def key(self):
        return self._key

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other or (isinstance(other, Atom) and self._key == other._key)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __lt__(self, other):
        return self._key < other._key

    def __repr__(self):
        return f"{type(self).__name__}({atom_text(self)})"

    def __str__(self):
        return atom_text(self)

    composite = False

    def inner(self) -> tuple["Expr", ...]:
        return ()


class Indep(Atom):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        super().__init__((0, name))


class Jet(Atom):
    """Jet variable ``dep`` differentiated ``count`` times along each direction."""

    __slots__ = ("dep", "orders")

    def __init__(self, dep: str, orders=()):
        if isinstance(orders, Mapping):
            orders = orders.items()
        clean = {}
        for name, count in orders:
            if count < 0:
                raise ValueError("multiindex entries must be non-negative")
            if count:
                clean[name] = clean.get(name, 0) + count
        self.dep = dep
        self.orders = tuple(sorted(clean.items()))
        super().__init__((1, dep, self.orders))

    @property
    def order(self) -> int:
        return sum(c for _, c in self.orders)

    def count(self, direction: str) -> int:
        for name, c in self.orders:
            if name == direction:
                return c
        return 0

    def multiindex(self) -> dict:
        return dict(self.orders)

    def derivative(self, direction: str, times: int = 1) -> "Jet":
        m = dict(self.orders)
        m[direction] = m.get(direction, 0) + times
        return Jet(self.dep, m)


class Func(Atom):
    """Applied function symbol; ``derivs[k]`` counts derivatives in slot ``k``."""

    __slots__ = ("decl", "args", "derivs")
    composite = True

    def __init__(self, decl: "FuncDecl", args: tuple, derivs: tuple | None = None):
        args = tuple(args)
        if derivs is None:
            derivs = (0,) * len(args)
        self.decl = decl
        self.args = args
        self.derivs = tuple(derivs)
        super().__init__((2, decl.name, decl.tag, self.derivs, tuple(a.key for a in args)))

    @property
    def name(self) -> str:
        return self.decl.name

    def inner(self):
        return self.args


class ExpAtom(Atom):
    __slots__ = ("exponent",)
    composite = True

    def __init__(self, exponent: "Expr"):
        self.exponent = exponent
        super().__init__((3, exponent.key))

    def inner(self):
        return (self.exponent,)


class Inv(Atom):
    """Reciprocal ``1/base`` of a normalized sum."""

    __slots__ = ("base",)
    composite = True

    def __init__(self, base: "Expr"):
        self.base = base
        super().__init__((4, base.key))

    def inner(self):
        return (self.base,)


# --------------------------------------------------------------------------
# Monomials: sorted tuples of (atom, nonzero int power)


def _sort_mono(d: dict) -> tuple:
    return tuple(sorted(d.items(), key=lambda fp: fp[0]._key))


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for f, p in b:
        q = d.get(f, 0) + p
        if q:
            d[f] = q
        else:
            del d[f]
    return _sort_mono(d)


def _mono_key(m: tuple) -> tuple:
    return tuple((f._key, p) for f, p in m)


# --------------------------------------------------------------------------
# Expr


class Expr:
    __slots__ = ("_t", "_h", "_k")

    def __init__(self, terms: dict | None = None):
        # callers guarantee canonical monomials and nonzero coefficients
        self._t = terms if terms is not None else {}
        self._h = None
        self._k = None

    # construction -----------------------------------------------------
    @staticmethod
    def const(c) -> "Expr":
        c = _q(c)
        return Expr({(): c}) if c else Expr()

    @staticmethod
    def atom(a: Atom, power: int = 1) -> "Expr":
        if power == 0:
            return Expr({(): Fraction(1)})
        if power < 0 and isinstance(a, Inv):
            return a.base ** (-power)
        return Expr({((a, power),): Fraction(1)})

    @staticmethod
    def _from(d: dict) -> "Expr":
        return Expr({m: c for m, c in d.items() if c})

    # inspection -------------------------------------------------------
    @property
    def key(self):
        if self._k is None:
            self._k = tuple(sorted((_mono_key(m), c) for m, c in self._t.items()))
        return self._k

    def terms(self):
        """Terms as ``(monomial, coefficient)`` pairs in canonical order."""
        return sorted(self._t.items(), key=lambda mc: _mono_key(mc[0]))

    def __len__(self):
        return len(self._t)

    def iszero(self) -> bool:
        return not self._t

    def is_constant(self) -> bool:
        return all(m == () for m in self._t)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"not a constant: {self}")
        return self._t.get((), Fraction(0))

    def constant_term(self) -> Fraction:
        return self._t.get((), Fraction(0))

    def single_term(self):
        if len(self._t) != 1:
            return None
        return next(iter(self._t.items()))

    def atoms(self) -> set:
        """Atoms appearing at top level."""
        out = set()
        for m in self._t:
            for f, _ in m:
                out.add(f)
        return out

    def all_atoms(self) -> set:
        """Atoms appearing anywhere, including inside composite atoms."""
        out = set()
        stack = [self]
        while stack:
            e = stack.pop()
            for m in e._t:
                for f, _ in m:
                    if f not in out:
                        out.add(f)
                        stack.extend(f.inner())
        return out

    def jets(self) -> set:
        return {a for a in self.all_atoms() if isinstance(a, Jet)}

    def depends_on(self, pred: Callable[[Atom], bool]) -> bool:
        return any(pred(a) for a in self.all_atoms())

    # equality ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Expr):
            return self._t == other._t
        if isinstance(other, (int, Fraction)):
            return self._t == Expr.const(other)._t
        return NotImplemented

    def __hash__(self):
        if self._h is None:
            self._h = hash(frozenset(self._t.items()))
        return self._h

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = as_expr(other)
        if not other._t:
            return self
        if not self._t:
            return other
        d = dict(self._t)
        for m, c in other._t.items():
            s = d.get(m, 0) + c
            if s:
                d[m] = s
            else:
                d.pop(m, None)
        return Expr(d)

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self._t.items()})

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c0 = _q(other)
            if not c0:
                return Expr()
            return Expr({m: c * c0 for m, c in self._t.items()})
        other = as_expr(other)
        if not self._t or not other._t:
            return Expr()
        d = {}
        for m1, c1 in self._t.items():
            for m2, c2 in other._t.items():
                m = _mono_mul(m1, m2)
                s = d.get(m, 0) + c1 * c2
                if s:
                    d[m] = s
                else:
                    d.pop(m, None)
        return Expr(d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / _q(other))
        return self * reciprocal(as_expr(other))

    def __rtruediv__(self, other):
        return as_expr(other) * reciprocal(self)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise UnsupportedExpression("only integer powers are supported")
        if k < 0:
            return reciprocal(self) ** (-k)
        st = self.single_term()
        if st is not None:
            m, c = st
            d = {}
            for f, p in m:
                d[f] = p * k
            if k == 0:
                return Expr.const(1)
            return Expr({_sort_mono(d): c**k})
        result = Expr.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # display ----------------------------------------------------------
    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)})"


ZERO = Expr()
ONE = Expr.const(1)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Expr.const(x)
    if isinstance(x, Atom):
        return Expr.atom(x)
    raise TypeError(f"cannot convert {x!r} to Expr")


def _monomial_expr(m: tuple, c: Fraction = Fraction(1)) -> Expr:
    """Expression of a monomial that may carry negative powers of Inv atoms."""
    pos = {}
    extra = ONE
    for f, p in m:
        if isinstance(f, Inv) and p < 0:
            extra = extra * f.base ** (-p)
        else:
            pos[f] = p
    e = Expr({_sort_mono(pos): c}) if c else Expr()
    return e if extra is ONE else e * extra


# --------------------------------------------------------------------------
# Constructors for composite atoms


def exp(e) -> Expr:
    """``exp(e)``, split into one exponential atom per term of ``e``.

    ``exp(2*x + v)`` becomes ``exp(x)^2 * exp(v)``; non-integer coefficients
    stay inside the exponent.
    """
    e = as_expr(e)
    result = ONE
    for m, c in e._t.items():
        if m == ():
            raise UnsupportedExpression("exp of a nonzero rational constant is not representable")
        if c.denominator == 1:
            result = result * Expr.atom(ExpAtom(Expr({m: Fraction(1)})), int(c))
        else:
            p = c.numerator
            result = result * Expr.atom(ExpAtom(Expr({m: Fraction(1, c.denominator)})), p)
    return result


def reciprocal(e) -> Expr:
    """``1/e``; a sum becomes an :class:`Inv` atom of its normalized form."""
    e = as_expr(e)
    if not e._t:
        raise ZeroDivisionError("reciprocal of zero")
    st = e.single_term()
    if st is not None:
        m, c = st
        return _monomial_expr(tuple((f, -p) for f, p in m), 1 / c)
    # pull out the common monomial factor (minimum power of every shared atom)
    monos = list(e._t)
    common = dict(monos[0])
    for m in monos[1:]:
        md = dict(m)
        for f in list(common):
            if f in md:
                common[f] = min(common[f], md[f])
            else:
                del common[f]
    common = {f: p for f, p in common.items() if p != 0 and not isinstance(f, Inv)}
    base = e
    factor = ONE
    if common:
        cm = _sort_mono(common)
        inv_cm = tuple((f, -p) for f, p in cm)
        base = Expr({_mono_mul(m, inv_cm): c for m, c in e._t.items()})
        factor = Expr({inv_cm: Fraction(1)})
    first_c = base.terms()[0][1]
    base = base * (1 / first_c)
    return factor * Expr.atom(Inv(base)) * (1 / first_c)


# --------------------------------------------------------------------------
# Function declarations


class FuncDecl:
    """A registered function symbol.

    ``params`` are the formal argument atoms (used to label derivative slots
    and to instantiate derivative rules).  ``derivatives`` maps a slot index
    to the expression of the partial derivative in that slot, written in the
    formal params.  ``constraint`` is ``(pattern, [(coef, derivs), ...])``
    meaning ``f_pattern = sum coef * f_derivs`` (a linear constant-coefficient
    rewrite such as ``h_t -> -h_xx``).  A declaration without params is a
    constant symbol.
    """

    def __init__(self, name: str, params=(), derivatives=None, constraint=None, generic=True, tag=""):
        self.name = name
        # distinguishes same-named variants, e.g. a symbol with its constraint lifted
        self.tag = tag
        self.params = tuple(params)
        self.derivatives = dict(derivatives or {})
        self.generic = generic
        self.constraint = None
        if constraint is not None:
            pattern, repl = constraint
            pattern = tuple(pattern)
            repl = [(_q(c), tuple(d)) for c, d in repl]
            n = len(self.params)
            if len(pattern) != n or any(len(d) != n for _, d in repl):
                raise ValueError("constraint multiindices must match the function arity")
            support = [k for k in range(n) if pattern[k]]
            if not support:
                raise ValueError("constraint pattern must be a proper derivative")
            for _, d in repl:
                if sum(d[k] for k in support) >= sum(pattern[k] for k in support):
                    raise ValueError(
                        f"constraint on {name} does not reduce the derivative ranking; "
                        "the rewrite would not terminate"
                    )
            if self.derivatives:
                raise ValueError("a function cannot carry both derivative rules and a constraint")
            self.constraint = (pattern, repl)
        self._norm_cache = {}

    @property
    def arity(self) -> int:
        return len(self.params)

    def param_labels(self) -> list[str]:
        out = []
        for p in self.params:
            if isinstance(p, Indep):
                out.append(p.name)
            elif isinstance(p, Jet):
                out.append(p.dep)
            else:
                out.append(str(p))
        return out

    def __call__(self, *args) -> Expr:
        if not args and self.params:
            args = tuple(as_expr(p) for p in self.params)
        if len(args) != len(self.params):
            raise ValueError(f"{self.name} expects {len(self.params)} arguments")
        return self.apply(tuple(as_expr(a) for a in args), (0,) * len(args))

    def apply(self, args: tuple, derivs: tuple) -> Expr:
        if any(derivs) and self.derivatives:
            # derivatives of a ruled symbol are computed through its rules
            e = Expr.atom(Func(self, self.params and tuple(as_expr(p) for p in self.params)))
            for k, n in enumerate(derivs):
                for _ in range(n):
                    e = partial_diff(e, self.params[k])
            return substitute_params(e, self.params, args)
        return self._normalized(derivs, args)

    def _normalized(self, derivs: tuple, args: tuple) -> Expr:
        combo = self._normal_combination(tuple(derivs))
        out = {}
        for d, c in combo.items():
            m = ((Func(self, args, d), 1),)
            out[m] = out.get(m, 0) + c
        return Expr._from(out)

    def _normal_combination(self, derivs: tuple) -> dict:
        """``f_derivs`` as a combination of constraint-free derivative multiindices."""
        cached = self._norm_cache.get(derivs)
        if cached is not None:
            return cached
        if self.constraint is None:
            res = {derivs: Fraction(1)}
        else:
            pattern, repl = self.constraint
            if all(d >= p for d, p in zip(derivs, pattern)):
                res = {}
                for c, dk in repl:
                    nd = tuple(d - p + q for d, p, q in zip(derivs, pattern, dk))
                    for d2, c2 in self._normal_combination(nd).items():
                        s = res.get(d2, 0) + c * c2
                        if s:
                            res[d2] = s
                        else:
                            res.pop(d2, None)
            else:
                res = {derivs: Fraction(1)}
        self._norm_cache[derivs] = res
        return res

    def slot_derivative(self, atom: Func, k: int) -> Expr:
        """Partial derivative of the applied symbol ``atom`` in slot ``k``."""
        rule = self.derivatives.get(k)
        if rule is not None:
            if any(atom.derivs):
                raise UnsupportedExpression(f"derivative of {self.name} beyond its rule")
            return substitute(rule, dict(zip(self.params, atom.args)))
        if self.derivatives:
            # other slots of a ruled function: keep symbolic derivative
            pass
        d = list(atom.derivs)
        d[k] += 1
        return self._normalized(tuple(d), atom.args)

    def unconstrained(self) -> "FuncDecl":
        """Same symbol with its constraint lifted (a distinct atom family)."""
        return FuncDecl(self.name, self.params, self.derivatives, None, self.generic, tag="free")

    def __repr__(self):
        return f"FuncDecl({self.name})"


class FuncRegistry:
    """Name-unique table of function symbols for one session."""

    def __init__(self):
        self._decls: dict[str, FuncDecl] = {}

    def declare(self, decl: FuncDecl) -> FuncDecl:
        old = self._decls.get(decl.name)
        if old is not None and old is not decl:
            raise ValueError(f"function symbol {decl.name!r} is already registered")
        self._decls[decl.name] = decl
        return decl

    def __getitem__(self, name) -> FuncDecl:
        return self._decls[name]

    def get(self, name, default=None):
        return self._decls.get(name, default)

    def __contains__(self, name):
        return name in self._decls

    def __iter__(self):
        return iter(self._decls.values())

    def names(self):
        return list(self._decls)


# --------------------------------------------------------------------------
# Derivations


def apply_derivation(e: Expr, delta: Callable[[Atom], Expr]) -> Expr:
    """Extend an atom-level derivation ``delta`` to ``e`` by the Leibniz rule."""
    out: dict = {}
    for m, c in e._t.items():
        for idx, (f, p) in enumerate(m):
            df = delta(f)
            if not df._t:
                continue
            if p == 1:
                rest = m[:idx] + m[idx + 1:]
            else:
                rest = m[:idx] + ((f, p - 1),) + m[idx + 1:]
            cp = c * p
            for m2, c2 in df._t.items():
                mm = _mono_mul(rest, m2)
                s = out.get(mm, 0) + cp * c2
                if s:
                    out[mm] = s
                else:
                    out.pop(mm, None)
    return Expr(out)


def _chain(f: Atom, inner_d: Callable[[Expr], Expr]) -> Expr:
    """Derivative of a composite atom given the derivation on inner expressions."""
    if isinstance(f, Func):
        total = ZERO
        for k, arg in enumerate(f.args):
            da = inner_d(arg)
            if da._t:
                total = total + f.decl.slot_derivative(f, k) * da
        return total
    if isinstance(f, ExpAtom):
        dg = inner_d(f.exponent)
        return Expr.atom(f) * dg if dg._t else ZERO
    if isinstance(f, Inv):
        db = inner_d(f.base)
        return -(Expr.atom(f, 2) * db) if db._t else ZERO
    return ZERO


@lru_cache(maxsize=200_000)
def _partial_atom(f: Atom, a: Atom) -> Expr:
    if f == a:
        return ONE
    if not f.composite:
        return ZERO
    return _chain(f, lambda inner: partial_diff(inner, a))


def partial_diff(e: Expr, a: Atom) -> Expr:
    """Formal partial derivative treating every atom other than ``a`` as independent.

    Composite atoms are differentiated by the chain rule through their inner
    expressions; function symbols use their registered derivative rules.
    """
    return apply_derivation(as_expr(e), lambda f: _partial_atom(f, a))


# --------------------------------------------------------------------------
# Substitution and evaluation


def substitute(e: Expr, bindings: Mapping[Atom, Expr]) -> Expr:
    """Simultaneous replacement of atoms (also inside composite atoms)."""
    bindings = {a: as_expr(v) for a, v in bindings.items()}
    for a in bindings:
        if isinstance(a, Func) and a.decl.constraint is not None:
            raise UnsupportedExpression(
                f"binding the constrained symbol {a.name} would leave its constraint dangling; "
                "use instantiate() instead"
            )
    return map_atoms(as_expr(e), lambda f, rec: bindings.get(f) if f in bindings else None)


def map_atoms(e: Expr, fn) -> Expr:
    """Rebuild ``e`` with ``fn(atom, recurse)`` giving the image of each atom.

    ``fn`` returns an Expr or ``None`` (keep the atom, recursing into composite
    atoms with the same mapping).
    """
    cache: dict = {}

    def image(f: Atom) -> Expr:
        if f in cache:
            return cache[f]
        r = fn(f, rebuild)
        if r is None:
            if isinstance(f, Func):
                args = tuple(rebuild(a) for a in f.args)
                if all(x == y for x, y in zip(args, f.args)):
                    r = Expr.atom(f)
                else:
                    r = Expr.atom(Func(f.decl, args, f.derivs))
            elif isinstance(f, ExpAtom):
                g = rebuild(f.exponent)
                r = Expr.atom(f) if g == f.exponent else exp(g)
            elif isinstance(f, Inv):
                b = rebuild(f.base)
                r = Expr.atom(f) if b == f.base else reciprocal(b)
            else:
                r = Expr.atom(f)
        cache[f] = r
        return r

    def rebuild(x: Expr) -> Expr:
        total_terms: dict = {}
        result = None
        simple = True
        for m, c in x._t.items():
            for f, _ in m:
                im = image(f)
                if not (len(im._t) == 1 and next(iter(im._t)) == ((f, 1),)):
                    simple = False
                    break
            if not simple:
                break
        if simple:
            return x
        result = ZERO
        for m, c in x._t.items():
            t = Expr.const(c)
            for f, p in m:
                im = image(f)
                if p > 0:
                    t = t * im**p
                else:
                    t = t * reciprocal(im) ** (-p)
            result = result + t
        del total_terms
        return result

    return rebuild(e)


def eval_rational(e: Expr, point: Mapping[Atom, object]) -> Fraction:
    """Exact value of ``e`` at a rational point.

    Exponential factors are only evaluated when their exponent evaluates
    to zero.
    """
    point = {a: _q(v) for a, v in point.items()}
    cache: dict = {}

    def val_atom(f: Atom) -> Fraction:
        if f in point:
            return point[f]
        if f in cache:
            return cache[f]
        if isinstance(f, ExpAtom):
            g = val(f.exponent)
            if g != 0:
                raise UnsupportedExpression("cannot evaluate exp at a nonzero exponent exactly")
            r = Fraction(1)
        elif isinstance(f, Inv):
            b = val(f.base)
            if b == 0:
                raise ZeroDivisionError("reciprocal of a zero value")
            r = 1 / b
        else:
            raise UnboundAtom(f"no value for {atom_text(f)}")
        cache[f] = r
        return r

    def val(x: Expr) -> Fraction:
        total = Fraction(0)
        for m, c in x._t.items():
            t = c
            for f, p in m:
                v = val_atom(f)
                if p < 0 and v == 0:
                    raise ZeroDivisionError(f"negative power of zero value {atom_text(f)}")
                t *= v**p
            total += t
        return total

    return val(as_expr(e))


# --------------------------------------------------------------------------
# Zero testing


def clear_denominators(e: Expr) -> Expr:
    """A multiple of ``e`` by powers of its Inv bases that is free of top-level Inv atoms."""
    e = as_expr(e)
    while True:
        invs = {}
        for m in e._t:
            for f, p in m:
                if isinstance(f, Inv):
                    invs[f] = max(invs.get(f, 0), p)
        if not invs:
            return e
        f, k = max(invs.items(), key=lambda fp: fp[0]._key)
        out = ZERO
        for m, c in e._t.items():
            p = dict(m).get(f, 0)
            rest = tuple((g, q) for g, q in m if g != f)
            out = out + Expr({rest: c}) * f.base ** (k - p)
        e = out


def is_zero(e) -> bool:
    """Decide ``e == 0`` as a function, clearing reciprocal-of-sum atoms first."""
    e = as_expr(e)
    if not e._t:
        return True
    return not clear_denominators(e)._t


def equal(a, b) -> bool:
    return is_zero(as_expr(a) - as_expr(b))


# --------------------------------------------------------------------------
# Instantiation of function symbols


def instantiate(e: Expr, decl: FuncDecl, body: Expr) -> Expr:
    """Replace the symbol ``decl`` by a concrete ``body`` written in its formal params.

    Derivatives ``f_d(args)`` become the corresponding partial derivatives of
    ``body`` evaluated at ``args``.
    """
    body = as_expr(body)
    cache: dict = {}

    def body_derivative(d: tuple) -> Expr:
        if d in cache:
            return cache[d]
        r = body
        for k, n in enumerate(d):
            for _ in range(n):
                r = partial_diff(r, decl.params[k])
        cache[d] = r
        return r

    def fn(f, rebuild):
        if isinstance(f, Func) and f.decl is decl:
            args = tuple(rebuild(a) for a in f.args)
            return substitute_params(body_derivative(f.derivs), decl.params, args)
        return None

    return map_atoms(as_expr(e), fn)


def substitute_params(e: Expr, params: tuple, args: tuple) -> Expr:
    if all(Expr.atom(p) == a for p, a in zip(params, args)):
        return e
    return map_atoms(e, lambda f, rec: args[params.index(f)] if f in params else None)


def redeclare(e: Expr, decl: FuncDecl) -> Expr:
    """Rebuild every atom of the symbol named ``decl.name`` under ``decl``.

    Used to impose a constraint on an expression computed with an
    unconstrained version of the same symbol.
    """

    def fn(f, rebuild):
        if isinstance(f, Func) and f.name == decl.name and f.decl is not decl:
            args = tuple(rebuild(a) for a in f.args)
            return decl._normalized(f.derivs, args)
        return None

    return map_atoms(as_expr(e), fn)


# --------------------------------------------------------------------------
# Convenience constructors


def indep(name: str) -> Expr:
    return Expr.atom(Indep(name))


def jet(dep: str, *directions, **counts) -> Expr:
    """``jet('u', 'txx')``, ``jet('u', 't', 'x', 'x')`` or ``jet('u', x=2, t=1)``."""
    m: dict = {}
    for d in directions:
        for name in (d if isinstance(d, str) and len(d) > 1 and d.isalpha() and d.islower() else [d]):
            m[name] = m.get(name, 0) + 1
    for name, c in counts.items():
        m[name] = m.get(name, 0) + c
    return Expr.atom(Jet(dep, m))


def const(c) -> Expr:
    return Expr.const(c)


# --------------------------------------------------------------------------
# Printing


def _short(name: str) -> bool:
    return len(name) == 1


def atom_text(f: Atom, explicit: bool = False) -> str:
    if isinstance(f, Indep):
        return f.name
    if isinstance(f, Jet):
        if not f.orders:
            return f.dep
        if not explicit and all(_short(n) for n, _ in f.orders):
            return f.dep + "_" + "".join(n * c for n, c in f.orders)
        return f.dep + "_{" + ",".join(f"{n}:{c}" for n, c in f.orders) + "}"
    if isinstance(f, Func):
        name = f.name
        if any(f.derivs):
            labels = f.decl.param_labels()
            pairs = [(labels[k], n) for k, n in enumerate(f.derivs) if n]
            if not explicit and all(_short(lab) for lab, _ in pairs) and len(set(labels)) == len(labels):
                name += "_" + "".join(lab * n for lab, n in pairs)
            else:
                name += "_{" + ",".join(f"{lab}:{n}" for lab, n in pairs) + "}"
        if not f.args:
            return name
        return name + "(" + ", ".join(to_text(a, explicit) for a in f.args) + ")"
    if isinstance(f, ExpAtom):
        return "exp(" + to_text(f.exponent, explicit) + ")"
    if isinstance(f, Inv):
        return "(" + to_text(f.base, explicit) + ")"
    return repr(f)  # pragma: no cover


def _factor_text(f: Atom, p: int, explicit: bool) -> str:
    if isinstance(f, Inv):
        return atom_text(f, explicit) + f"^-{p}"
    s = atom_text(f, explicit)
    return s if p == 1 else f"{s}^{p}"


def _coeff_text(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _display_key(mc):
    m, _ = mc
    deg = -sum(abs(p) for _, p in m)
    return (deg, _mono_key(m))


def to_text(e: Expr, explicit: bool = False) -> str:
    """Render ``e`` in the syntax accepted by the expression parser."""
    e = as_expr(e)
    if not e._t:
        return "0"
    parts = []
    for i, (m, c) in enumerate(sorted(e._t.items(), key=_display_key)):
        sign = "-" if c < 0 else "+"
        a = abs(c)
        factors = [_factor_text(f, p, explicit) for f, p in m]
        if not factors:
            body = _coeff_text(a)
        elif a == 1:
            body = "*".join(factors)
        else:
            body = _coeff_text(a) + "*" + "*".join(factors)
        if i == 0:
            parts.append(("-" if sign == "-" else "") + body)
        else:
            parts.append(f" {sign} {body}")
    return "".join(parts)


# --------------------------------------------------------------------------
# Cosmetic cancellation of reciprocal atoms


def _divide_exact(num: Expr, den: Expr):
    """Quotient ``num / den`` when the division is exact (bounded Laurent division)."""
    atoms = den.atoms()

    def lead(e):
        return max(e._t.items(), key=lambda mc: (sum(p for f, p in mc[0] if f in atoms), _mono_key(mc[0])))

    q = ZERO
    r = num
    dm, dc = lead(den)
    inv_dm = tuple((f, -p) for f, p in dm)
    for _ in range(4 * (len(num) + 1) * (len(den) + 1)):
        if not r._t:
            return q
        rm, rc = lead(r)
        t = Expr({_mono_mul(rm, inv_dm): rc / dc})
        q = q + t
        r = r - t * den
    return None


def cancel_inverses(e) -> Expr:
    """Rewrite ``e`` so that reciprocal atoms appear only where they do not cancel."""
    e = as_expr(e)
    changed = True
    while changed:
        changed = False
        invs = sorted({f for m in e._t for f, p in m if isinstance(f, Inv)}, key=lambda f: f._key)
        for f in invs:
            groups: dict = {}
            for m, c in e._t.items():
                p = dict(m).get(f, 0)
                rest = tuple((g, q) for g, q in m if g != f)
                groups.setdefault(p, {})[rest] = c
            out = ZERO
            for p, terms in groups.items():
                C = Expr(terms)
                if p > 0:
                    Q = _divide_exact(C, f.base)
                    if Q is not None:
                        out = out + Q * Expr.atom(f, p - 1)
                        changed = True
                        continue
                out = out + C * Expr.atom(f, p) if p else out + C
            e = out
            if changed:
                break
    return e
