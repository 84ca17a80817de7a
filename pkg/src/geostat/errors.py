"""Exception hierarchy. Each error carries a short ``code`` used by the CLI."""


class GeostatError(Exception):
    code = "geostat"
    exit_code = 1


class DimensionMismatch(GeostatError, ValueError):
    code = "dimension-mismatch"


class NotPositiveDefinite(GeostatError, ArithmeticError):
    code = "not-positive-definite"


class DomainError(GeostatError, ValueError):
    code = "domain"


class Unbounded(GeostatError):
    """The correlation never drops to the threshold inside the bracket."""

    code = "unbounded"


class BadBracket(GeostatError, ValueError):
    code = "bad-bracket"


class VariableIndexOutOfRange(GeostatError, IndexError):
    code = "variable-index"


class KindMismatch(GeostatError, TypeError):
    code = "kind-mismatch"


class IncompatibleScheme(GeostatError, ValueError):
    code = "incompatible-scheme"
    exit_code = 4


class UnknownPreset(GeostatError, KeyError):
    code = "unknown-preset"
    exit_code = 2

    def __str__(self):
        return Exception.__str__(self)


class DenseCapExceeded(GeostatError):
    code = "dense-cap"
    exit_code = 3


class EmptyInput(GeostatError, ValueError):
    code = "empty-input"


class DuplicateName(GeostatError, ValueError):
    code = "duplicate-name"


class RowKeyMismatch(GeostatError):
    code = "row-key-mismatch"
    exit_code = 5


class UnsupportedKind(GeostatError):
    code = "unsupported-kind"
    exit_code = 6


class MaxEvaluationsExceeded(UserWarning):
    """Optimizer stopped at its evaluation budget; the best point so far is returned."""
