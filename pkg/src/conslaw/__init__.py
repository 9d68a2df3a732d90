"""Exact jet-space calculus of conservation laws, potential systems and coverings."""

from .diffsys import Consequence, DiffSystem, Equation, reduce, vanishes_on_solutions
from .errors import (
    ArityMismatch,
    ConslawError,
    IncompatibleFluxes,
    LocalizationError,
    NoRuleApplies,
    NotADivergence,
    NotConserved,
    NotNullDivergence,
    ParseError,
    ReductionError,
    UnboundAtom,
    UnsupportedExpression,
    UnsupportedKind,
)
from .expr import (
    Expr,
    FuncDecl,
    FuncRegistry,
    Indep,
    Jet,
    cancel_inverses,
    const,
    equal,
    exp,
    indep,
    instantiate,
    is_zero,
    jet,
    partial_diff,
    reciprocal,
    substitute,
    to_text,
)
from .jet import Weighting, covering_total_derivative, divergence, total_derivative, total_derivative_multi, weight_of
from .laws import (
    Characteristic,
    completely_reduce_characteristic,
    cosymmetry_test,
    equivalent_conserved_vectors,
    extract_characteristic,
    is_trivial_characteristic,
    is_trivial_conserved_vector,
    verify_characteristic,
    verify_conserved_vector,
    verify_extended_characteristic,
)
from .parser import SystemFile, format_expression, format_system_file, parse_expression, parse_system_file
from .potential import (
    Kind,
    PotentialStructure,
    PurityResult,
    Verdict,
    build_abelian_covering,
    build_general_covering,
    build_potential_system_2d,
    build_standard_potential_system,
    char_components_as_cv,
    covering_residuals,
    extend_weighting,
    linear_cv_to_extended_char,
    localize_conserved_vector,
    locality_statements,
    potential_derivative_cv,
    purity_test,
)
from .variational import (
    euler,
    frechet,
    higher_euler,
    homotopy_divergence,
    integrate_x,
    invert_total_derivative,
    is_total_divergence,
    solve_null_divergence_2d,
)

__version__ = "0.1.0"
