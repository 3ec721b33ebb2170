from typing import Optional


class HDGameError(ValueError):
    """Base error for every domain failure in the game library"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field

    def __str__(self) -> str:
        message = super().__str__()
        if self.field:
            return f"{self.field}: {message}"
        return message


class InputError(HDGameError):
    """Malformed or out-of-range input"""


class NumericError(HDGameError):
    """Ill-conditioned solve, underflow, or other floating-point failure"""


class AssumptionViolation(HDGameError):
    """A regularity or dominance assumption the construction relies on fails"""


class InfeasibleError(HDGameError):
    """No construction exists for the requested parameters"""


class TheoremContradiction(HDGameError):
    """A grid result contradicts a guaranteed existence result (usually a coarse grid)"""
