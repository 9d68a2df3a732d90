import pytest
from hypothesis import given, settings

from conslaw import (
    ArityMismatch,
    Characteristic,
    DiffSystem,
    Equation,
    FuncDecl,
    Indep,
    Jet,
    NotConserved,
    completely_reduce_characteristic,
    cosymmetry_test,
    divergence,
    equivalent_conserved_vectors,
    exp,
    extract_characteristic,
    indep,
    is_trivial_characteristic,
    is_trivial_conserved_vector,
    is_zero,
    jet,
    total_derivative,
    verify_characteristic,
    verify_conserved_vector,
)
from conslaw.laws import tracked_reduction

from strategies import polynomials

t, x = indep("t"), indep("x")
u, ut, ux, uxx = jet("u"), jet("u", "t"), jet("u", "x"), jet("u", "x", "x")
TX = ("t", "x")
BURGERS = DiffSystem(TX, ("u",), [Equation(Jet("u", {"t": 1}), uxx + 2 * u * ux, "L")])
HEAT = DiffSystem(TX, ("u",), [Equation(Jet("u", {"t": 1}), uxx, "L")])
h = FuncDecl("h", (Indep("t"), Indep("x")), constraint=((1, 0), [(-1, (0, 2))]))


def test_burgers_mass():
    F = [u, -ux - u**2]
    assert verify_conserved_vector(F, BURGERS)
    assert verify_characteristic([1], F, BURGERS)
    assert cosymmetry_test([1], BURGERS)
    assert not verify_conserved_vector([u**2, -ux], BURGERS)


def test_heat_family():
    F = [h() * u, h.apply((t, x), (0, 1)) * u - h() * ux]
    assert verify_conserved_vector(F, HEAT)
    assert verify_characteristic([h()], F, HEAT)
    assert cosymmetry_test([h()], HEAT)
    # x*u is conserved with characteristic x (h = x solves the backward heat equation)
    assert verify_characteristic([x], [x * u, u - x * ux], HEAT)
    assert not cosymmetry_test([u], HEAT)


def test_extract_characteristic_integrates_by_parts():
    # Div F = x D_x L, so the multiplier is -D_x x = -1 after integration by parts
    F = [x * ux, -x * uxx + ux]
    char, Ft = extract_characteristic(F, HEAT)
    assert char[0] == -1
    assert verify_characteristic(char, Ft, HEAT)
    assert not verify_characteristic(char, F, HEAT)
    assert equivalent_conserved_vectors(F, [-u, ux], HEAT)
    with pytest.raises(NotConserved):
        extract_characteristic([u**2, -u * ux], HEAT)


def test_tracked_reduction_bookkeeping():
    H = ut * x + total_derivative(ut, "x")
    records, rest = tracked_reduction(H, HEAT)
    assert {r[1] for r in records} == {"L"}
    assert is_zero(rest - HEAT.reduce(H))


def test_characteristic_arity():
    with pytest.raises(ArityMismatch):
        verify_characteristic([1, 2], [u, -ux], HEAT)
    with pytest.raises(ArityMismatch):
        Characteristic(("L",), ())
    with pytest.raises(ArityMismatch):
        verify_conserved_vector([u], HEAT)


def test_trivial_vectors_and_equivalence():
    # vanishing on solutions
    assert is_trivial_conserved_vector([ut - uxx, 0], HEAT)
    # null divergence
    assert is_trivial_conserved_vector([total_derivative(u * x, "x"), -total_derivative(u * x, "t")], HEAT)
    assert not is_trivial_conserved_vector([u, -ux], HEAT)
    assert equivalent_conserved_vectors([u, -ux], [u + (ut - uxx), -ux + u * 0], HEAT)
    assert equivalent_conserved_vectors([ut, -ux * 0], [uxx, 0], HEAT)
    assert not equivalent_conserved_vectors([u, -ux], [x * u, u - x * ux], HEAT)


def test_complete_reduction():
    lam = completely_reduce_characteristic([ut + exp(x)], HEAT)
    assert lam[0] == uxx + exp(x)
    assert is_trivial_characteristic([ut - uxx], HEAT)
    assert not is_trivial_characteristic([ut], HEAT)


@given(polynomials(), polynomials())
@settings(max_examples=40)
def test_null_divergences_are_trivial(p, q):
    F = [total_derivative(p, "x"), -total_derivative(p, "t")]
    assert is_zero(divergence(F, TX))
    assert is_trivial_conserved_vector(F, BURGERS)
    assert is_trivial_conserved_vector([q * BURGERS.residual("L"), 0 * q], BURGERS)
