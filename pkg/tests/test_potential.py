import pytest

from conslaw import (
    ArityMismatch,
    DiffSystem,
    Equation,
    FuncDecl,
    IncompatibleFluxes,
    Indep,
    Jet,
    Kind,
    NotConserved,
    UnsupportedExpression,
    UnsupportedKind,
    Verdict,
    build_abelian_covering,
    build_general_covering,
    build_potential_system_2d,
    build_standard_potential_system,
    char_components_as_cv,
    covering_residuals,
    equivalent_conserved_vectors,
    exp,
    extract_characteristic,
    indep,
    is_trivial_conserved_vector,
    is_zero,
    jet,
    linear_cv_to_extended_char,
    localize_conserved_vector,
    locality_statements,
    potential_derivative_cv,
    purity_test,
    total_derivative,
    verify_characteristic,
    verify_conserved_vector,
    verify_extended_characteristic,
)
from conslaw.corpus import load

t, x = indep("t"), indep("x")
u, ux, uxx, v = jet("u"), jet("u", "x"), jet("u", "x", "x"), jet("v")
U = Jet("u")
TX = ("t", "x")
A = FuncDecl("A", (U,))
IntA = FuncDecl("IntA", (U,), {0: A()})
B0 = DiffSystem(TX, ("u",), [Equation(Jet("u", {"t": 1}), total_derivative(A() * ux, "x"), "L")])
HEAT = DiffSystem(TX, ("u",), [Equation(Jet("u", {"t": 1}), uxx, "L")])


@pytest.fixture(scope="module")
def b0gen():
    return build_potential_system_2d(B0, [[u, -A() * ux]], ["v"])


def test_2d_potential_system_drops_the_base_equation(b0gen):
    S = b0gen.system
    assert b0gen.kind is Kind.TWO_DIM
    assert S.minimal_labels == ("v_t", "v_x")
    assert S.dropped_labels == ("L",)
    assert S.residual("v_x") == jet("v", "x") - u
    assert S.weighting["v"] == 0
    assert b0gen.labels == {"v": {"t": "v_t", "x": "v_x"}}


def test_builder_rejects_bad_input():
    with pytest.raises(NotConserved):
        build_potential_system_2d(B0, [[u**2, 0]], ["v"])
    with pytest.raises(ArityMismatch):
        build_potential_system_2d(B0, [[u, -A() * ux]], ["v", "w"])
    with pytest.raises(ArityMismatch):
        build_standard_potential_system(HEAT, [[u, -ux]], ["v"])


def test_induced_law_localizes(b0gen):
    F = [v, -IntA()]
    char, _ = extract_characteristic(F, b0gen.system)
    assert char.components == (1, 0)
    r = purity_test(char, b0gen, F)
    assert r.verdict is Verdict.INDUCED
    out = localize_conserved_vector(F, char, b0gen)
    assert not b0gen.potential_atoms(out[0]) and not b0gen.potential_atoms(out[1])
    assert equivalent_conserved_vectors(out, [-x * u, x * A() * ux - IntA()], B0)
    rep = locality_statements(F, b0gen)
    assert rep.consistent and rep.induced


def test_localization_rejects_a_foreign_characteristic(b0gen):
    from conslaw import LocalizationError

    with pytest.raises(LocalizationError):
        localize_conserved_vector([v, -IntA()], [x, 0], b0gen)


def test_purely_potential_law():
    S = DiffSystem(TX, ("u",), [Equation(Jet("u", {"t": 1}), uxx + 2 * u * ux, "L")])
    P = build_potential_system_2d(S, [[u, -ux - u**2]], ["v"])
    h = FuncDecl("h", (Indep("t"), Indep("x")), constraint=((1, 0), [(-1, (0, 2))]))
    F = [h() * exp(v), h.apply((t, x), (0, 1)) * exp(v) - h() * u * exp(v)]
    assert verify_conserved_vector(F, P.system)
    char, _ = extract_characteristic(F, P.system)
    r = purity_test(char, P, F)
    assert r.verdict is Verdict.PURELY_POTENTIAL
    assert r.potential_atoms
    rep = locality_statements(F, P)
    assert rep.consistent and not rep.induced
    # d/dv maps the family to itself
    dF, dl = potential_derivative_cv(F, "v", P, char)
    assert all(is_zero(a - b) for a, b in zip(dF, F))
    cv, plus = char_components_as_cv(char, "v", P)
    assert verify_characteristic(plus, cv, P.system)


def test_standard_potentials_for_three_dimensions():
    heat3 = DiffSystem(("t", "x", "y"), ("u",), [Equation(Jet("u", {"t": 1}), uxx + jet("u", "y", "y"), "L")])
    P = build_standard_potential_system(heat3, [[u, -ux, -jet("u", "y")]], ["v"])
    assert P.kind is Kind.STANDARD
    assert set(P.potentials) == {"vtx", "vty", "vxy"}
    # every solution of the base lifts: the potential equations reduce L to an identity
    assert all(eq.label in P.system.labels for eq in P.system.equations)
    with pytest.raises(UnsupportedKind):
        localize_conserved_vector([u, -ux, -jet("u", "y")], None, P)


def test_abelian_covering_and_incompatibility():
    P = build_abelian_covering(HEAT, {"v": {"x": u, "t": ux}})
    assert P.kind is Kind.ABELIAN
    assert P.system.minimal_labels == ("v_t", "v_x")
    with pytest.raises(IncompatibleFluxes) as info:
        build_abelian_covering(HEAT, {"v": {"x": u, "t": u}})
    assert is_zero(info.value.residual - (uxx - ux))
    with pytest.raises(UnsupportedExpression):
        build_abelian_covering(HEAT, {"v": {"x": v, "t": 0}})


def test_general_covering():
    w = jet("w")
    C = build_general_covering(HEAT, {"w": {"x": 0, "t": w}})
    assert C.kind is Kind.COVERING
    assert C.system.residual("w_t") == jet("w", "t") - w
    with pytest.raises(IncompatibleFluxes) as info:
        build_general_covering(HEAT, {"w": {"x": w, "t": w * u}})
    assert is_zero(info.value.residual + ux * w)
    ((s, i, j, r),) = covering_residuals(HEAT, {"w": {"x": w, "t": w * u}}, ["w"])
    assert s == "w" and is_zero(r + ux * w)


def test_lifted_covering_residual_on_burgers():
    f = load("burgers")
    P = f.structure("P")
    h = f.registry.get("h")
    G = {"w": {"t": h() * u * exp(v) - h.apply((t, x), (0, 1)) * exp(v), "x": h() * exp(v)}}
    ((_, _, _, lifted),) = covering_residuals(P.system, G, ["w"], lift_constraints=True)
    free = h.unconstrained()
    assert is_zero(lifted - (free.apply((t, x), (1, 0)) + free.apply((t, x), (0, 2))) * exp(v))
    ((_, _, _, res),) = covering_residuals(P.system, G, ["w"])
    assert res.iszero()


def test_linear_cv_extended_characteristic(b0gen):
    char, Ft = linear_cv_to_extended_char([v, -IntA()], b0gen)
    assert char.extended
    assert char.as_dict() == {"L": 0, "v_t": 1, "v_x": 0}
    assert verify_extended_characteristic(char, Ft, b0gen.system)


def test_united_system_has_only_trivial_laws():
    f = load("b0")
    P = f.structure("B0united")
    assert P.system.syzygy_pairs == (("v2_t", "v2_x"),)
    assert is_trivial_conserved_vector(f.cv("Fs"), P.system)
    assert is_trivial_conserved_vector(f.cv("Fg"), P.system)
    assert not is_trivial_conserved_vector(f.cv("Fg"), f.structure("B0gen").system)


def test_second_level_potential_system():
    f = load("b0")
    T = f.structure("B0tower")
    assert T.system.minimal_labels == ("v1_x", "w1_t", "w1_x")
    assert set(T.system.dropped_labels) == {"L", "v1_t"}


def test_u2_family_purity_and_the_sigma_equals_v_member():
    f = load("u2diff")
    P = f.structure("P")
    F5v = f.cv("F5v")
    char, _ = extract_characteristic(F5v, P.system)
    r = purity_test(char, P, F5v)
    assert r.verdict is Verdict.INDUCED
    assert equivalent_conserved_vectors(r.witness, [-c for c in f.cv("F1")], P.base)
    F51 = f.cv("F51")
    char, _ = extract_characteristic(F51, P.system)
    assert purity_test(char, P, F51).verdict is Verdict.TRIVIAL
