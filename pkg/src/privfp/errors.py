"""Exception taxonomy shared across the package.

Four categories, mirrored by the CLI exit codes: parameter errors (bad
scalar arguments), structural errors (shape/grid mismatches), model errors
(an assumption on the problem data fails, e.g. a rank-deficient constraint
matrix), and out-of-regime conditions (a closed-form guarantee does not
apply for the given parameters and no silent fallback is taken).
"""


class ParameterError(ValueError):
    """A scalar argument violates its documented range."""


class StructuralError(ValueError):
    """Dimensions, block layouts, or grids do not line up."""


class ModelError(ValueError):
    """The problem data violates a model assumption."""


class ConditionNotMet(Exception):
    """A validity condition of a closed-form guarantee fails.

    Carries the failing clause in ``condition`` so callers can report
    exactly which requirement was violated.
    """

    def __init__(self, condition: str, message: str | None = None):
        self.condition = condition
        super().__init__(message or condition)
