"""Conserved vectors and characteristics: verification, extraction and equivalence.

A characteristic is attached to an ordered list of equation labels of a
:class:`DiffSystem`.  The usual flavor uses the minimal labels (equations
without a recorded consequence), the extended flavor uses every equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .diffsys import DiffSystem, _minus
from .errors import ArityMismatch, ConslawError, NotConserved, UnsupportedExpression
from .expr import ZERO, Expr, Jet, as_expr, cancel_inverses, is_zero, to_text
from .jet import divergence, total_derivative, total_derivative_multi
from .variational import frechet, solve_null_divergence_2d


@dataclass(frozen=True)
class Characteristic:
    labels: tuple
    components: tuple
    extended: bool = False

    def __post_init__(self):
        if len(self.labels) != len(self.components):
            raise ArityMismatch("characteristic labels and components differ in length")

    def __getitem__(self, label) -> Expr:
        if isinstance(label, int):
            return self.components[label]
        return self.components[self.labels.index(label)]

    def get(self, label, default=ZERO) -> Expr:
        return self.components[self.labels.index(label)] if label in self.labels else default

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.components))

    def map(self, fn) -> "Characteristic":
        return Characteristic(self.labels, tuple(fn(c) for c in self.components), self.extended)

    def __str__(self):
        return "(" + ", ".join(to_text(c) for c in self.components) + ")"


def as_characteristic(lam, S: DiffSystem, extended: bool = False) -> Characteristic:
    """Accept a Characteristic or a plain sequence ordered like the system's labels."""
    if isinstance(lam, Characteristic):
        return lam
    labels = S.labels if extended else S.minimal_labels
    lam = tuple(as_expr(c) for c in lam)
    if len(lam) != len(labels):
        raise ArityMismatch(
            f"expected {len(labels)} characteristic components ({', '.join(labels)}), got {len(lam)}"
        )
    return Characteristic(tuple(labels), lam, extended)


def _vector(F, S: DiffSystem) -> list:
    F = [as_expr(f) for f in F]
    if len(F) != len(S.indep):
        raise ArityMismatch(f"expected {len(S.indep)} components, got {len(F)}")
    return F


def div(F, S: DiffSystem) -> Expr:
    return divergence(F, S.indep)


def verify_conserved_vector(F, S: DiffSystem) -> bool:
    F = _vector(F, S)
    return S.vanishes_on_solutions(div(F, S))


def characteristic_form_residual(lam, F, S: DiffSystem) -> Expr:
    lam = as_characteristic(lam, S)
    F = _vector(F, S)
    expected = S.labels if lam.extended else S.minimal_labels
    if set(lam.labels) != set(expected) or len(lam.labels) != len(expected):
        raise ArityMismatch(
            f"characteristic labels {lam.labels} do not match the system's {tuple(expected)}"
        )
    total = div(F, S)
    for label, c in zip(lam.labels, lam.components):
        total = total - c * S.residual(label)
    return total


def verify_characteristic(lam, F, S: DiffSystem) -> bool:
    """``Div F == sum lam^mu L^mu`` as an identity on the jet space."""
    return is_zero(characteristic_form_residual(lam, F, S))


def verify_extended_characteristic(lam, F, S: DiffSystem) -> bool:
    lam = as_characteristic(lam, S, extended=True)
    if not lam.extended:
        lam = Characteristic(lam.labels, lam.components, True)
    return verify_characteristic(lam, F, S)


# --------------------------------------------------------------------------
# Extraction


def _principal(e: Expr, S: DiffSystem):
    best = None
    for m in e._t:
        for f, _ in m:
            if isinstance(f, Jet) and S.rule_for(f) is not None:
                k = (f.order, f.key)
                if best is None or k > best[0]:
                    best = (k, f)
    if best is None:
        for f in e.all_atoms():
            if f.composite and any(
                isinstance(a, Jet) and S.rule_for(a) is not None for a in Expr.atom(f).all_atoms()
            ):
                raise UnsupportedExpression(
                    f"a principal derivative occurs inside {to_text(Expr.atom(f))}; reduce it first"
                )
        return None
    return best[1]


def tracked_reduction(H, S: DiffSystem):
    """Write ``H = sum Q_k D^{gamma_k} L^{mu_k} + R`` with ``R`` free of principal jets.

    Returns ``(records, R)`` with records ``(Q, label, gamma)``.
    """
    e = as_expr(H)
    records = []
    while True:
        y = _principal(e, S)
        if y is None:
            return records, e
        eq = S.rule_for(y)
        gamma = _minus(y.orders, eq.lead.orders)
        z = total_derivative_multi(eq.rhs, [(d, gamma[d]) for d in S.indep if gamma.get(d)])
        byk: dict = {}
        for m, c in e._t.items():
            p = 0
            rest = []
            for f, q in m:
                if f == y:
                    p = q
                else:
                    rest.append((f, q))
            if p < 0:
                raise UnsupportedExpression("negative power of a principal derivative")
            byk.setdefault(p, {})[tuple(rest)] = c
        Y = Expr.atom(y)
        new = ZERO
        Q = ZERO
        zp = {0: Expr.const(1)}
        for k in sorted(byk):
            ck = Expr(byk[k])
            while max(zp) < k:
                zp[max(zp) + 1] = zp[max(zp)] * z
            new = new + ck * zp[k]
            if k:
                s = ZERO
                for j in range(k):
                    s = s + Y**j * zp[k - 1 - j]
                Q = Q + ck * s
        records.append((Q, eq.label, tuple((d, gamma[d]) for d in S.indep if gamma.get(d))))
        e = new


def _integrate_by_parts(records, S: DiffSystem, lam: dict, boundary: dict):
    """Move total derivatives off ``D^gamma L`` onto the multipliers."""
    for Q, label, gamma in records:
        dirs = [d for d, c in gamma for _ in range(c)]
        L = S.residual(label)
        q = Q
        while dirs:
            d = dirs.pop(0)
            W = total_derivative_multi(L, [(x, 1) for x in dirs])
            boundary[d] = boundary[d] + q * W
            q = -total_derivative(q, d)
        lam[label] = lam.get(label, ZERO) + q


def extract_characteristic(F, S: DiffSystem, extended: bool = False):
    """Characteristic ``lam`` and an equivalent ``F~`` with ``Div F~ = sum lam L`` exactly.

    With ``extended=False`` the components of dropped equations are folded
    into the minimal ones through the recorded consequences.
    """
    F = _vector(F, S)
    H = div(F, S)
    records, rest = tracked_reduction(H, S)
    if not is_zero(rest):
        raise NotConserved(f"divergence does not vanish on solutions: {to_text(S.reduce(rest))}")
    lam: dict = {}
    boundary = {d: ZERO for d in S.indep}
    _integrate_by_parts(records, S, lam, boundary)
    if not extended:
        for _ in range(len(S.labels) + 1):
            pending = [l for l in S.dropped_labels if not lam.get(l, ZERO).iszero()]
            if not pending:
                break
            for l in pending:
                q = lam.pop(l)
                recs = [(q * c.coef, c.label, c.gamma) for c in S.consequences[l]]
                _integrate_by_parts(recs, S, lam, boundary)
    labels = S.labels if extended else S.minimal_labels
    char = Characteristic(tuple(labels), tuple(lam.get(l, ZERO) for l in labels), extended)
    Ft = [f - boundary[d] for f, d in zip(F, S.indep)]
    if not is_zero(characteristic_form_residual(char, Ft, S) - rest):
        raise NotConserved("characteristic bookkeeping failed")  # pragma: no cover
    return char, Ft


def completely_reduce_characteristic(lam, S: DiffSystem) -> Characteristic:
    lam = as_characteristic(lam, S)
    return lam.map(lambda c: cancel_inverses(S.reduce(c)))


def is_trivial_characteristic(lam, S: DiffSystem) -> bool:
    lam = as_characteristic(lam, S)
    return all(is_zero(S.reduce(c)) for c in lam.components)


def cosymmetry_test(lam, S: DiffSystem) -> bool:
    """Reduced adjoint linearization ``D_L^*(lam)`` vanishes on solutions."""
    lam = as_characteristic(lam, S)
    L = [S.residual(l) for l in lam.labels]
    adj = frechet(L, lam.components, S.dep, adjoint=True)
    return all(is_zero(S.reduce(c)) for c in adj)


def equivalent_conserved_vectors(F1, F2, S: DiffSystem) -> bool:
    """Equal conservation laws, decided by triviality of the characteristic of ``F1 - F2``.

    Assumes a totally nondegenerate system.  Where potentials carry
    cross-derivative identities not used up by dropped equations
    (``S.syzygy_pairs``) the characteristic is unique only up to those
    identities.  The components on each such pair are then removed by adding
    the trivial vector ``Phi (L_{v_x}, -L_{v_t})`` whenever they form a null
    divergence ``(D_x Phi, -D_t Phi)``, in every presentation of ``S``.
    """
    F1, F2 = _vector(F1, S), _vector(F2, S)
    diff = [a - b for a, b in zip(F1, F2)]
    try:
        char, _ = extract_characteristic(diff, S)
    except NotConserved:
        return False
    if is_trivial_characteristic(char, S):
        return True
    systems = (S,) + tuple(S.presentations)
    for _ in range(len(systems) * max(1, len(S.syzygy_pairs))):
        progress = False
        for T in systems:
            for lt, lx in T.syzygy_pairs:
                char, _ = extract_characteristic(diff, T)
                if is_trivial_characteristic(char, T):
                    return True
                alpha, beta = T.reduce(char.get(lt)), T.reduce(char.get(lx))
                if alpha.iszero() and beta.iszero():
                    continue
                try:
                    phi = solve_null_divergence_2d(alpha, beta, T)
                except ConslawError:
                    continue
                diff = [diff[0] + phi * T.residual(lx), diff[1] - phi * T.residual(lt)]
                progress = True
        if not progress:
            break
    return any(is_trivial_characteristic(extract_characteristic(diff, T)[0], T) for T in systems)


def is_trivial_conserved_vector(F, S: DiffSystem) -> bool:
    return equivalent_conserved_vectors(F, [ZERO] * len(S.indep), S)
