"""Euler operators, Frechet derivatives, homotopy inversion of divergences and 2D potentials."""

from __future__ import annotations

from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

from .errors import ArityMismatch, NoRuleApplies, NotADivergence, NotNullDivergence, UnsupportedExpression
from .expr import (
    ONE,
    ZERO,
    ExpAtom,
    Expr,
    Func,
    Indep,
    Inv,
    Jet,
    as_expr,
    cancel_inverses,
    is_zero,
    map_atoms,
    partial_diff,
    reciprocal,
)
from .jet import divergence, total_derivative, total_derivative_multi


def _neg_total(e: Expr, multiindex: dict, order: Sequence[str] | None = None) -> Expr:
    """``(-D)^alpha e``."""
    k = sum(multiindex.values())
    dirs = sorted(multiindex) if order is None else [d for d in order if d in multiindex]
    r = total_derivative_multi(e, [(d, multiindex[d]) for d in dirs])
    return -r if k % 2 else r


def _jets_of(e: Expr, dep: str) -> list:
    return sorted((a for a in e.all_atoms() if isinstance(a, Jet) and a.dep == dep), key=lambda a: a.key)


def euler(e, dep: str) -> Expr:
    """Variational derivative ``E_a(e) = sum (-D)^alpha d e / d u^a_alpha``."""
    e = as_expr(e)
    total = ZERO
    for j in _jets_of(e, dep):
        total = total + _neg_total(partial_diff(e, j), j.multiindex())
    return total


def _ge(big: dict, small: dict) -> bool:
    return all(big.get(n, 0) >= c for n, c in small.items())


def _binom(big: dict, small: dict) -> int:
    r = 1
    for n, c in big.items():
        r *= comb(c, small.get(n, 0))
    return r


def higher_euler(e, dep: str, alpha: dict | None = None) -> Expr:
    """``E_a^alpha(e) = sum_{beta >= alpha} C(beta, alpha) (-D)^{beta-alpha} d e / d u^a_beta``."""
    e = as_expr(e)
    alpha = {n: c for n, c in (alpha or {}).items() if c}
    total = ZERO
    for j in _jets_of(e, dep):
        beta = j.multiindex()
        if not _ge(beta, alpha):
            continue
        rest = {n: beta[n] - alpha.get(n, 0) for n in beta if beta[n] - alpha.get(n, 0)}
        total = total + _binom(beta, alpha) * _neg_total(partial_diff(e, j), rest)
    return total


def frechet(L: Sequence, w: Sequence, deps: Sequence[str], adjoint: bool = False) -> list:
    """Frechet derivative of the tuple ``L`` applied to ``w``, or its formal adjoint.

    Direct mode: ``w`` has one entry per dependent variable and the result one
    entry per component of ``L``.  Adjoint mode: ``w`` pairs with ``L`` and
    the result is indexed by dependent variable.
    """
    L = [as_expr(x) for x in L]
    w = [as_expr(x) for x in w]
    if adjoint:
        if len(w) != len(L):
            raise ArityMismatch(f"adjoint needs {len(L)} multipliers, got {len(w)}")
        out = []
        for a in deps:
            total = ZERO
            for Lm, lm in zip(L, w):
                for j in _jets_of(Lm, a):
                    total = total + _neg_total(partial_diff(Lm, j) * lm, j.multiindex())
            out.append(total)
        return out
    if len(w) != len(deps):
        raise ArityMismatch(f"direct mode needs {len(deps)} components, got {len(w)}")
    out = []
    for Lm in L:
        total = ZERO
        for a, wa in zip(deps, w):
            for j in _jets_of(Lm, a):
                total = total + partial_diff(Lm, j) * total_derivative_multi(wa, sorted(j.multiindex().items()))
        out.append(total)
    return out


def _all_deps(e: Expr) -> list:
    return sorted({a.dep for a in e.all_atoms() if isinstance(a, Jet)})


def is_total_divergence(e, deps: Iterable[str] | None = None) -> bool:
    e = as_expr(e)
    deps = _all_deps(e) if deps is None else list(deps)
    return all(is_zero(euler(e, a)) for a in deps)


# --------------------------------------------------------------------------
# Homotopy


def _check_polynomial(e: Expr):
    for m in e._t:
        for f, p in m:
            if isinstance(f, Jet):
                if p < 0:
                    raise UnsupportedExpression("homotopy needs jet variables with non-negative powers")
            elif f.composite and any(isinstance(a, Jet) for a in Expr.atom(f).all_atoms()):
                raise UnsupportedExpression(
                    "homotopy needs polynomial dependence on jet variables"
                )


class _Fibers:
    """Jets split into fibers: (dep, passive multiindex) and the active multiindex."""

    def __init__(self, active: Sequence[str]):
        self.active = tuple(active)

    def split(self, j: Jet):
        act = tuple((n, c) for n, c in j.orders if n in self.active)
        pas = tuple((n, c) for n, c in j.orders if n not in self.active)
        return (j.dep, pas), dict(act)

    def jet(self, fiber, act: dict) -> Jet:
        dep, pas = fiber
        m = dict(pas)
        for n, c in act.items():
            m[n] = m.get(n, 0) + c
        return Jet(dep, m)


def _fiber_higher_euler(e: Expr, fiber, alpha: dict, fib: _Fibers) -> Expr:
    total = ZERO
    for j in sorted(e.all_atoms(), key=lambda a: a.key):
        if not isinstance(j, Jet):
            continue
        fj, beta = fib.split(j)
        if fj != fiber or not _ge(beta, alpha):
            continue
        rest = {n: beta[n] - alpha.get(n, 0) for n in beta if beta[n] - alpha.get(n, 0)}
        total = total + _binom(beta, alpha) * _neg_total(partial_diff(e, j), rest, fib.active)
    return total


def _kappa_integral(e: Expr) -> Expr:
    """``int_0^1 e[kappa u] d kappa`` for e polynomial in jets: degree-d part gets 1/(d+1)."""
    out = {}
    for m, c in e._t.items():
        d = sum(p for f, p in m if isinstance(f, Jet))
        out[m] = c / (d + 1)
    return Expr(out)


def _x_polynomial(e: Expr, active: Sequence[str]) -> bool:
    act = {Indep(n) for n in active}
    for m in e._t:
        for f, p in m:
            if f in act:
                if p < 0:
                    return False
            elif any(a in act for a in Expr.atom(f).all_atoms()):
                return False
    return True


def _jet_free_part(e: Expr) -> Expr:
    return Expr({m: c for m, c in e._t.items() if not any(isinstance(f, Jet) for f, _ in m)})


def homotopy_divergence(H, directions: Sequence[str], active: Sequence[str] | None = None) -> list:
    """Components ``F`` (indexed like ``directions``) with ``Div F = H`` exactly.

    ``active`` restricts the divergence to a subset of directions; jets are then
    grouped in fibers by their derivatives along the remaining directions, which
    behave as parameters.  Raises NotADivergence if some fiber Euler operator
    does not annihilate ``H``.
    """
    H = as_expr(H)
    directions = tuple(directions)
    active = directions if active is None else tuple(active)
    fib = _Fibers(active)
    _check_polynomial(H)
    jets = [a for a in H.all_atoms() if isinstance(a, Jet)]
    fibers = sorted({fib.split(j)[0] for j in jets})
    for fb in fibers:
        if not is_zero(_fiber_higher_euler(H, fb, {}, fib)):
            raise NotADivergence(f"the Euler operator of fiber {fb[0]} does not vanish")
    comps = {d: ZERO for d in directions}
    for fb in fibers:
        # active multiindices present in this fiber
        present = [fib.split(j)[1] for j in jets if fib.split(j)[0] == fb]
        cands = set()
        for beta in present:
            ranges = [range(beta.get(n, 0) + 1) for n in active]
            stack = [()]
            for r in ranges:
                stack = [s + (k,) for s in stack for k in r]
            for s in stack:
                cands.add(s)
        base = Expr.atom(fib.jet(fb, {}))
        for i, d in enumerate(active):
            for s in sorted(cands):
                if s[i] == 0:
                    continue
                alpha = {n: k for n, k in zip(active, s) if k}
                a_minus = dict(alpha)
                a_minus[d] -= 1
                if not a_minus[d]:
                    del a_minus[d]
                ea = _fiber_higher_euler(H, fb, alpha, fib)
                if not ea._t:
                    continue
                weight = Fraction(s[i], sum(s))  # (alpha_i + 1)/(|alpha| + 1) in shifted indexing
                inner = base * _kappa_integral(ea)
                comps[d] = comps[d] + weight * total_derivative_multi(
                    inner, [(n, a_minus[n]) for n in active if a_minus.get(n)]
                )
    H0 = _jet_free_part(H)
    if H0._t:
        n = len(active)
        if _x_polynomial(H0, active):
            act = {Indep(a) for a in active}
            scaled = {}
            for m, c in H0._t.items():
                deg = sum(p for f, p in m if f in act)
                scaled[m] = c / (n + deg)
            scaled = Expr(scaled)
            for d in active:
                comps[d] = comps[d] + Expr.atom(Indep(d)) * scaled
        else:
            for d in active:
                try:
                    comps[d] = comps[d] + integrate_x(H0, d)
                    break
                except NoRuleApplies:
                    continue
            else:
                raise NoRuleApplies("cannot invert the divergence of the jet-free part")
    F = [comps[d] for d in directions]
    check = divergence([comps[d] for d in active], active)
    if not is_zero(check - H):
        raise NotADivergence("homotopy reconstruction failed the divergence check")
    return F


# --------------------------------------------------------------------------
# Antidifferentiation along one independent variable


def _free_of(e: Expr, var: str) -> bool:
    return is_zero(total_derivative(e, var)) and not any(isinstance(a, Jet) for a in e.all_atoms())


def _exp_rate(f, var: str):
    """Rate ``r`` if the exponential atom ``f`` is ``exp(r * var)``, else None."""
    if not isinstance(f, ExpAtom):
        return None
    st = f.exponent.single_term()
    if st is None:
        return None
    m, c = st
    if m == ((Indep(var), 1),):
        return c
    return None


def _integrate_term(m: tuple, c: Fraction, var: str):
    X = Indep(var)
    k = 0
    rate = Fraction(0)
    rest = {}
    for f, p in m:
        if f == X:
            k = p
            continue
        r = _exp_rate(f, var)
        if r is not None:
            rate += r * p
            continue
        rest[f] = p
    rest_e = Expr({tuple(sorted(rest.items(), key=lambda fp: fp[0].key)): c})
    if not _free_of(rest_e, var):
        return None
    x = Expr.atom(X)
    if rate == 0:
        if k == -1:
            return None
        return rest_e * x ** (k + 1) * Fraction(1, k + 1)
    if k < 0:
        return None
    # int x^k e^{rx} = e^{rx} sum_j (-1)^j k!/(k-j)! x^{k-j} / r^{j+1}
    ex = ONE
    for f, p in m:
        if _exp_rate(f, var) is not None:
            ex = ex * Expr.atom(f, p)
    poly = ZERO
    fall = 1
    for j in range(k + 1):
        if j:
            fall *= k - j + 1
        poly = poly + Fraction((-1) ** j * fall) / rate ** (j + 1) * x ** (k - j)
    return rest_e * ex * poly


def _ratio(S: Expr, D: Expr):
    """Constant ``c`` (free of everything) with ``S == c * D``, else None."""
    if not D._t or not S._t:
        return None
    (m1, c1), = [D.terms()[0]]
    c2 = S._t.get(m1)
    if c2 is None:
        return None
    c = c2 / c1
    return c if is_zero(S - c * D) else None


def integrate_x(e, var: str) -> Expr:
    """Antiderivative ``P`` with ``D_var P = e`` by a small rule table.

    Rules: powers ``var^k`` (k != -1) and ``var^k exp(r var)`` times factors
    free of ``var``; ``f' f^-m`` with ``f`` a sum; ``f' exp(f)``.  The result is
    always checked by differentiation; NoRuleApplies otherwise.
    """
    e = as_expr(e)
    if any(isinstance(a, Jet) for a in e.all_atoms()):
        raise NoRuleApplies("integrate_x handles jet-free expressions only")
    result = ZERO
    pending = {}
    for m, c in e._t.items():
        r = _integrate_term(m, c, var)
        if r is not None:
            result = result + r
        else:
            pending[m] = c
    # composite patterns, grouped by the Inv or exp atom carrying the pattern
    groups: dict = {}
    for m, c in pending.items():
        key = None
        for f, p in m:
            if isinstance(f, Inv) and not _free_of(f.base, var):
                key = (f, p)
                break
        if key is None:
            for f, p in m:
                if isinstance(f, ExpAtom) and p == 1 and not _free_of(f.exponent, var):
                    key = (f, p)
                    break
        if key is None:
            raise NoRuleApplies(f"no integration rule for a term in {var}")
        f, p = key
        rest = tuple((g, q) for g, q in m if g != f)
        groups.setdefault(key, {})[rest] = c
    for (f, p), rest in groups.items():
        S = Expr(rest)
        if isinstance(f, Inv):
            c = _ratio(S, total_derivative(f.base, var))
            if c is None or p == 1:
                raise NoRuleApplies("reciprocal pattern does not match f' f^-m")
            result = result + Fraction(c) / (1 - p) * Expr.atom(f, p - 1)
        else:
            c = _ratio(S, total_derivative(f.exponent, var))
            if c is None:
                raise NoRuleApplies("exponential pattern does not match f' exp(f)")
            result = result + Fraction(c) * Expr.atom(f)
    if not is_zero(total_derivative(result, var) - e):
        raise NoRuleApplies("antiderivative failed the differentiation check")
    return result


# --------------------------------------------------------------------------
# Null divergences in two dimensions


def invert_total_derivative(e, var: str, directions: Sequence[str]) -> Expr:
    """``P`` with ``D_var P = e`` exactly (rules first, then a fiber-wise homotopy)."""
    e = as_expr(e)
    if not e._t:
        return ZERO
    if not any(isinstance(a, Jet) for a in e.all_atoms()):
        try:
            return integrate_x(e, var)
        except NoRuleApplies:
            pass
    F = homotopy_divergence(e, directions, active=(var,))
    return F[list(directions).index(var)]


def solve_null_divergence_2d(alpha, beta, S) -> Expr:
    """``Phi`` with ``D_x Phi = alpha`` and ``D_t Phi = -beta`` (t, x in system order)."""
    alpha, beta = as_expr(alpha), as_expr(beta)
    if len(S.indep) != 2:
        raise ArityMismatch("null-divergence potentials are implemented for two independent variables")
    t, x = S.indep
    div = total_derivative(alpha, t) + total_derivative(beta, x)
    if not is_zero(div) and not is_zero(S.reduce(div)):
        raise NotNullDivergence("D_t alpha + D_x beta does not vanish on solutions")
    try:
        phi1 = invert_total_derivative(alpha, x, S.indep)
    except NotADivergence as exc:
        raise NotNullDivergence(f"alpha is not an x-derivative: {exc}") from exc
    r = -beta - total_derivative(phi1, t)
    if not is_zero(total_derivative(r, x)):
        r = S.reduce(r)
        if not is_zero(total_derivative(r, x)):
            raise NotNullDivergence("the t-equation for Phi is inconsistent with the x-equation")
    phi = phi1
    if not is_zero(r):
        phi = phi + integrate_x(r, t)
    # pin the additive constant to zero
    c = phi.constant_term()
    if c:
        phi = phi - c
    return cancel_inverses(phi)
