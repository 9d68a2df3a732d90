"""Total derivatives, prolonged derivatives on coverings, and jet weights."""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Mapping

from .errors import UnboundAtom, UnsupportedExpression
from .expr import (
    ONE,
    ZERO,
    Atom,
    ExpAtom,
    Expr,
    Func,
    Indep,
    Inv,
    Jet,
    _chain,
    apply_derivation,
    as_expr,
)


@lru_cache(maxsize=400_000)
def _total_atom(f: Atom, direction: str) -> Expr:
    if isinstance(f, Indep):
        return ONE if f.name == direction else ZERO
    if isinstance(f, Jet):
        return Expr.atom(f.derivative(direction))
    if f.composite:
        return _chain(f, lambda inner: total_derivative(inner, direction))
    return ZERO


def total_derivative(e, direction: str) -> Expr:
    """``D_i e``; function symbols are differentiated through their rules and constraints."""
    return apply_derivation(as_expr(e), lambda f: _total_atom(f, direction))


def total_derivative_multi(e, multiindex) -> Expr:
    """``D^alpha e`` with directions applied in the order given."""
    if isinstance(multiindex, Mapping):
        multiindex = multiindex.items()
    e = as_expr(e)
    for direction, count in multiindex:
        for _ in range(count):
            e = total_derivative(e, direction)
    return e


def divergence(components: Iterable, directions: Iterable[str]) -> Expr:
    total = ZERO
    for f, d in zip(components, directions):
        total = total + total_derivative(f, d)
    return total


def has_derivative_of(e: Expr, deps) -> bool:
    """True if ``e`` contains a jet of one of ``deps`` of nonzero order."""
    deps = set(deps)
    return any(isinstance(a, Jet) and a.dep in deps and a.order for a in as_expr(e).all_atoms())


def covering_total_derivative(e, direction: str, fluxes: Mapping[str, Mapping[str, Expr]]) -> Expr:
    """Prolonged total derivative over a covering ``v^s_i = G^{si}``.

    ``fluxes[s][i]`` is ``G^{si}``.  The input may depend on the covering
    variables only at order zero.
    """
    e = as_expr(e)
    if has_derivative_of(e, fluxes):
        raise UnsupportedExpression(
            "covering derivative needs a function of (u|v): reduce potential derivatives first"
        )

    @lru_cache(maxsize=None)
    def delta(f: Atom) -> Expr:
        if isinstance(f, Jet) and f.dep in fluxes:
            return as_expr(fluxes[f.dep].get(direction, ZERO))
        if f.composite:
            return _chain(f, lambda inner: apply_derivation(inner, delta))
        return _total_atom(f, direction)

    return apply_derivation(e, delta)


class Weighting(dict):
    """Base weights of dependent variables (``rho_a``)."""

    def atom_weight(self, f: Atom) -> int:
        if isinstance(f, Jet):
            if f.dep not in self:
                raise UnboundAtom(f"no weight for dependent variable {f.dep!r}")
            return self[f.dep] + f.order
        if f.composite:
            return max((self.weight_of(x) for x in f.inner()), default=0)
        return 0

    def weight_of(self, e) -> int:
        e = as_expr(e)
        return max((self.atom_weight(f) for f in e.atoms()), default=0)

    def copy(self) -> "Weighting":
        return Weighting(self)


def weight_of(e, w: Mapping[str, int]) -> int:
    if not isinstance(w, Weighting):
        w = Weighting(w)
    return w.weight_of(e)
