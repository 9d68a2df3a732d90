"""Exception hierarchy shared by all conslaw modules.

Every exception carries a short machine-readable ``code`` that the command
line front end reports in ``--json`` mode.
"""


class ConslawError(Exception):
    code = "error"


class UnsupportedExpression(ConslawError):
    """Input lies outside the polynomial-exponential class the kernel handles."""

    code = "unsupported-expression"


class UnboundAtom(ConslawError):
    code = "unbound-atom"


class ArityMismatch(ConslawError):
    code = "arity-mismatch"


class ReductionError(ConslawError):
    code = "reduction"


class NotADivergence(ConslawError):
    code = "not-a-divergence"


class NotNullDivergence(ConslawError):
    code = "not-null-divergence"


class NoRuleApplies(ConslawError):
    code = "no-rule-applies"


class NotConserved(ConslawError):
    code = "not-conserved"


class IncompatibleFluxes(ConslawError):
    """Raised when the cross-derivative compatibility of a potential part fails.

    ``residual`` holds the offending (reduced) expression.
    """

    code = "incompatible-fluxes"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedKind(ConslawError):
    code = "unsupported-kind"


class LocalizationError(ConslawError):
    code = "localization-failed"


class ParseError(ConslawError):
    code = "parse-error"

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: " if column is not None else f"line {line}: "
        elif column is not None:
            where = f"column {column}: "
        super().__init__(where + message)
        self.line = line
        self.column = column
