"""Differential systems in solved form and reduction modulo their prolongations."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ConslawError, ReductionError
from .expr import ZERO, Expr, Func, Jet, as_expr, is_zero, map_atoms, to_text
from .jet import Weighting, total_derivative, total_derivative_multi


def _le(small: tuple, big: tuple) -> bool:
    """Component-wise ``small <= big`` on multiindex pair tuples."""
    bd = dict(big)
    return all(bd.get(n, 0) >= c for n, c in small)


def _minus(big: tuple, small: tuple) -> dict:
    d = dict(big)
    for n, c in small:
        d[n] -= c
    return {n: c for n, c in d.items() if c}


@dataclass(frozen=True)
class Equation:
    """``lead = rhs``, read as the residual ``L = lead - rhs``."""

    lead: Jet
    rhs: Expr
    label: str
    part: str = "base"

    @property
    def lhs(self) -> Expr:
        return Expr.atom(self.lead)

    @property
    def residual(self) -> Expr:
        return Expr.atom(self.lead) - self.rhs

    def __str__(self):
        return f"{to_text(self.lhs)} = {to_text(self.rhs)}"


@dataclass(frozen=True)
class Consequence:
    """``L_dropped = sum coef * D^gamma L_label`` (an exact identity)."""

    coef: Expr
    gamma: tuple
    label: str


class DiffSystem:
    """An oriented system ``lead^mu = rhs^mu``.

    Equation order fixes the rewrite priority: when a jet lies in the cone
    of several leads (the two equations of one potential), the first listed
    equation wins.  ``consequences`` lists equations that are dropped from
    the minimal set together with the identity expressing them through the
    remaining ones; the identity is checked exactly here.
    """

    def __init__(
        self,
        indep: Iterable[str],
        dep: Iterable[str],
        equations: Iterable[Equation],
        weighting: Mapping[str, int] | None = None,
        consequences: Mapping[str, list] | None = None,
        registry=None,
        check_weights: bool = True,
    ):
        self.indep = tuple(indep)
        self.dep = tuple(dep)
        self.equations = tuple(equations)
        self.registry = registry
        w = Weighting(weighting or {})
        for d in self.dep:
            w.setdefault(d, 0)
        self.weighting = w
        self.consequences = {k: [Consequence(as_expr(c.coef), tuple(c.gamma), c.label) if isinstance(c, Consequence)
                                 else Consequence(as_expr(c[0]), tuple(dict(c[1]).items()), c[2]) for c in v]
                             for k, v in (consequences or {}).items()}
        # (label of v_t, label of v_x) pairs whose cross-derivative identity
        # is a syzygy of the minimal set; set by the potential builders
        self.syzygy_pairs: tuple = ()
        # the same equations with other consequence choices (same minimal set)
        self.presentations: tuple = ()
        self._by_label = {}
        for eq in self.equations:
            if eq.label in self._by_label:
                raise ConslawError(f"duplicate equation label {eq.label!r}")
            self._by_label[eq.label] = eq
        self._validate(check_weights)
        self._nf: dict = {}
        self._depth = 0

    # structure ---------------------------------------------------------
    @property
    def labels(self) -> tuple:
        return tuple(eq.label for eq in self.equations)

    @property
    def minimal_labels(self) -> tuple:
        return tuple(eq.label for eq in self.equations if eq.label not in self.consequences)

    @property
    def dropped_labels(self) -> tuple:
        return tuple(eq.label for eq in self.equations if eq.label in self.consequences)

    def equation(self, label: str) -> Equation:
        return self._by_label[label]

    def residual(self, label: str) -> Expr:
        return self._by_label[label].residual

    def _validate(self, check_weights: bool):
        deps = set(self.dep)
        for eq in self.equations:
            if eq.lead.dep not in deps:
                raise ConslawError(f"leading variable of {eq} is not a dependent variable")
            for n, _ in eq.lead.orders:
                if n not in self.indep:
                    raise ConslawError(f"unknown direction {n!r} in {eq}")
            for a in eq.rhs.all_atoms():
                if isinstance(a, Jet) and a.dep == eq.lead.dep and _le(eq.lead.orders, a.orders):
                    raise ConslawError(f"right-hand side of {eq} contains a prolongation of its lead")
        for i, e1 in enumerate(self.equations):
            for e2 in self.equations[i + 1:]:
                if e1.lead.dep != e2.lead.dep:
                    continue
                if e1.lead == e2.lead:
                    raise ConslawError(f"two equations share the lead {to_text(e1.lhs)}")
                nested = _le(e1.lead.orders, e2.lead.orders) or _le(e2.lead.orders, e1.lead.orders)
                if nested and not (e1.part != "base" and e2.part != "base"):
                    raise ConslawError(
                        f"leads {to_text(e1.lhs)} and {to_text(e2.lhs)} have nested cones"
                    )
        if check_weights:
            for eq in self.equations:
                if eq.part == "base":
                    continue
                lw = self.weighting.weight_of(eq.lhs)
                rw = self.weighting.weight_of(eq.rhs)
                if lw < rw:
                    raise ConslawError(
                        f"equation {eq} violates weight admissibility ({lw} < {rw})"
                    )
        for dropped, cons in self.consequences.items():
            if dropped not in self._by_label:
                raise ConslawError(f"consequence given for unknown equation {dropped!r}")
            total = ZERO
            for c in cons:
                if c.label in self.consequences:
                    raise ConslawError("a dropped equation must be expressed through minimal ones")
                total = total + c.coef * total_derivative_multi(self.residual(c.label), c.gamma)
            if not is_zero(self.residual(dropped) - total):
                raise ConslawError(f"equation {dropped!r} is not the stated differential consequence")

    # reduction ---------------------------------------------------------
    def rule_for(self, j: Jet):
        """First equation whose lead cone contains ``j``, or ``None``."""
        for eq in self.equations:
            if eq.lead.dep == j.dep and _le(eq.lead.orders, j.orders):
                return eq
        return None

    def is_principal(self, j) -> bool:
        return isinstance(j, Jet) and self.rule_for(j) is not None

    def _normal_jet(self, j: Jet) -> Expr:
        hit = self._nf.get(j)
        if hit is not None:
            return hit
        eq = self.rule_for(j)
        if eq is None:
            res = Expr.atom(j)
        else:
            self._depth += 1
            try:
                if self._depth > 400:
                    raise ReductionError(f"reduction of {to_text(Expr.atom(j))} does not terminate")
                gamma = _minus(j.orders, eq.lead.orders)
                if not gamma:
                    res = self.reduce(eq.rhs)
                else:
                    # peel the lowest direction (in system order) and reuse the shorter normal form
                    d = next(n for n in self.indep if gamma.get(n))
                    prev = Jet(j.dep, _minus(j.orders, ((d, 1),)))
                    res = self.reduce(total_derivative(self._normal_jet(prev), d))
            finally:
                self._depth -= 1
        self._nf[j] = res
        return res

    def reduce(self, e) -> Expr:
        """Normal form of ``e`` modulo the system and all its prolongations."""
        e = as_expr(e)

        def fn(f, rebuild):
            if isinstance(f, Jet):
                return self._normal_jet(f)
            return None

        limit = sys.getrecursionlimit()
        if limit < 20000:
            sys.setrecursionlimit(20000)
        return map_atoms(e, fn)

    def vanishes_on_solutions(self, e) -> bool:
        return is_zero(self.reduce(e))

    # construction helpers ---------------------------------------------
    def extended(self, dep=(), equations=(), weighting=None, consequences=None, check_weights=True) -> "DiffSystem":
        w = Weighting(self.weighting)
        w.update(weighting or {})
        cons = dict(self.consequences)
        cons.update(consequences or {})
        out = DiffSystem(
            self.indep,
            self.dep + tuple(dep),
            self.equations + tuple(equations),
            w,
            cons,
            self.registry,
            check_weights,
        )
        out.syzygy_pairs = self.syzygy_pairs
        return out

    def __str__(self):
        return "\n".join(str(eq) for eq in self.equations)

    def __repr__(self):
        return f"DiffSystem({'; '.join(str(eq) for eq in self.equations)})"


def reduce(e, S: DiffSystem) -> Expr:
    return S.reduce(e)


def vanishes_on_solutions(e, S: DiffSystem) -> bool:
    return S.vanishes_on_solutions(e)
