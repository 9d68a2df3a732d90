"""Algebraic identities checked on random polynomial differential functions."""

from hypothesis import given

from conslaw import (
    DiffSystem,
    Equation,
    Jet,
    divergence,
    euler,
    higher_euler,
    homotopy_divergence,
    is_zero,
    jet,
    solve_null_divergence_2d,
    total_derivative,
)

from strategies import jet_polynomials, polynomials

TX = ("t", "x")

BURGERS = DiffSystem(TX, ("u",), [Equation(Jet("u", {"t": 1}), jet("u", "x", "x") + 2 * jet("u") * jet("u", "x"), "L")])
HEAT = DiffSystem(TX, ("u",), [Equation(Jet("u", {"t": 1}), jet("u", "x", "x"), "L")])


@given(polynomials(), polynomials())
def test_euler_annihilates_divergences(f1, f2):
    assert is_zero(euler(divergence([f1, f2], TX), "u"))


@given(polynomials(), polynomials())
def test_homotopy_inverts_divergence(f1, f2):
    H = divergence([f1, f2], TX)
    F = homotopy_divergence(H, TX)
    assert is_zero(divergence(F, TX) - H)


@given(polynomials())
def test_total_derivatives_commute(f):
    a = total_derivative(total_derivative(f, "t"), "x")
    b = total_derivative(total_derivative(f, "x"), "t")
    assert is_zero(a - b)


@given(polynomials())
def test_reduce_is_idempotent(f):
    g = total_derivative(total_derivative(f, "t"), "x")
    for S in (BURGERS, HEAT):
        r = S.reduce(g)
        assert is_zero(S.reduce(r) - r)
        assert not any(S.is_principal(j) for j in r.jets())


@given(polynomials())
def test_higher_euler_of_empty_multiindex_is_euler(f):
    f = f * total_derivative(f, "x")
    assert is_zero(higher_euler(f, "u", {}) - euler(f, "u"))


@given(jet_polynomials())
def test_null_divergence_round_trip(phi0):
    alpha = total_derivative(phi0, "x")
    beta = -total_derivative(phi0, "t")
    phi = solve_null_divergence_2d(alpha, beta, HEAT)
    assert (phi - phi0).is_constant()
