"""Translation of conslaw expressions into sympy, used as an independent oracle."""

import sympy as sp

from conslaw.expr import ExpAtom, Func, Indep, Inv, Jet

INDEP = ("t", "x", "y")
SYM = {n: sp.Symbol(n) for n in INDEP}


def dep_function(dep, indep=("t", "x")):
    return sp.Function(dep)(*[SYM[d] for d in indep])


def atom_to_sympy(a, indep=("t", "x")):
    if isinstance(a, Indep):
        return SYM.get(a.name, sp.Symbol(a.name))
    if isinstance(a, Jet):
        f = dep_function(a.dep, indep)
        spec = [(SYM[d], c) for d, c in a.orders]
        return sp.Derivative(f, *spec) if spec else f
    if isinstance(a, ExpAtom):
        return sp.exp(to_sympy(a.exponent, indep))
    if isinstance(a, Inv):
        return 1 / to_sympy(a.base, indep)
    if isinstance(a, Func):
        dummies = sp.symbols(f"p0:{len(a.args)}")
        g = sp.Function(a.name)(*dummies)
        for k, n in enumerate(a.derivs):
            if n:
                g = sp.diff(g, dummies[k], n)
        return g.subs({p: to_sympy(arg, indep) for p, arg in zip(dummies, a.args)})
    raise TypeError(a)


def to_sympy(e, indep=("t", "x")):
    total = sp.Integer(0)
    for m, c in e.terms():
        term = sp.Rational(c.numerator, c.denominator)
        for a, p in m:
            term *= atom_to_sympy(a, indep) ** p
        total += term
    return total


def same(a, b) -> bool:
    return sp.simplify(sp.expand((a - b).doit())) == 0
