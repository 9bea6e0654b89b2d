"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI can emit
``{code, message, field?}`` records without string matching.
"""

from __future__ import annotations


class CdrmError(Exception):
    code = "error"

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(message)
        self.field = field

    def to_record(self) -> dict:
        rec = {"code": self.code, "message": str(self)}
        if self.field is not None:
            rec["field"] = self.field
        return rec


class DomainError(CdrmError, ValueError):
    code = "domain"


class NotInvertibleError(CdrmError, ValueError):
    code = "not_invertible"


class ShapeError(CdrmError, ValueError):
    code = "shape"


class BoundaryError(CdrmError, ValueError):
    code = "boundary"


class AdmissibilityError(CdrmError, ValueError):
    code = "admissibility"


class TheoremViolationError(CdrmError, ValueError):
    """Composed generator failed the convexity gate.

    ``worst`` holds the grid triple ``(s, t, violation)`` with the largest
    midpoint-convexity violation.
    """

    code = "theorem_violation"

    def __init__(self, message: str, worst: tuple[float, float, float]):
        super().__init__(message)
        self.worst = worst


class DegenerateBoundsError(CdrmError, ValueError):
    code = "degenerate_bounds"


class UnsupportedDimensionError(CdrmError, ValueError):
    code = "unsupported_dimension"


class DivergentMeasureError(CdrmError, ArithmeticError):
    code = "divergent_measure"

    def __init__(self, message: str, exponent: float):
        super().__init__(message)
        self.exponent = exponent


class NonIntegrableError(CdrmError, ArithmeticError):
    code = "non_integrable"


class InfiniteQuantileError(CdrmError, ValueError):
    code = "infinite_quantile"


class SamplerError(CdrmError, RuntimeError):
    code = "sampler"


class ConfigError(CdrmError, ValueError):
    code = "config"
