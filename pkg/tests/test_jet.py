import pytest
import sympy as sp

from conslaw import (
    FuncDecl,
    Indep,
    Jet,
    Weighting,
    covering_total_derivative,
    divergence,
    exp,
    indep,
    is_zero,
    jet,
    reciprocal,
    total_derivative,
    total_derivative_multi,
    weight_of,
)

from oracle import SYM, same, to_sympy

t, x = indep("t"), indep("x")
u, ux, uxx = jet("u"), jet("u", "x"), jet("u", "x", "x")
U = Jet("u")
A = FuncDecl("A", (U,))


@pytest.mark.parametrize(
    "e",
    [
        u**2 * ux + t * x,
        A() * ux,
        exp(u) * x**3,
        u**-2 * ux,
        reciprocal(exp(x) + u),
        jet("u", "t") * uxx,
    ],
    ids=["poly", "func", "exp", "negpow", "inv", "mixed"],
)
@pytest.mark.parametrize("d", ["t", "x"])
def test_total_derivative_matches_sympy(e, d):
    assert same(to_sympy(total_derivative(e, d)), sp.diff(to_sympy(e), SYM[d]))


def test_multi_and_divergence():
    e = u * ux
    assert total_derivative_multi(e, [("x", 2)]) == total_derivative(total_derivative(e, "x"), "x")
    assert divergence([u, -ux], ("t", "x")) == jet("u", "t") - uxx


def test_parameter_functions_follow_the_chain_rule():
    h = FuncDecl("h", (Indep("t"), Indep("x")), constraint=((1, 0), [(-1, (0, 2))]))
    # D_t h = h_t, rewritten through the backward heat constraint
    assert total_derivative(h(), "t") == -h.apply((t, x), (0, 2))
    assert total_derivative(h(), "x") == h.apply((t, x), (0, 1))


def test_covering_derivative_replaces_pseudopotential_jets():
    w = jet("w")
    G = {"w": {"t": w * u, "x": w}}
    assert covering_total_derivative(w * x, "x", G) == w * x + w
    assert is_zero(covering_total_derivative(w, "t", G) - w * u)


def test_weights():
    W = Weighting({"u": 0, "v": -1})
    assert W.weight_of(uxx) == 2
    assert W.weight_of(jet("v", "x")) == 0
    assert W.weight_of(u * jet("v")) == 0
    assert weight_of(jet("u", "t", "x") + x, {"u": 1}) == 3
    assert W.weight_of(A() * ux) == 1
