"""Exception hierarchy shared by the numerical modules."""


class SpectralDgaError(Exception):
    """Base error. Carries the module and stage where a computation failed."""

    def __init__(self, message: str, module: str = "", stage: str = ""):
        super().__init__(message)
        self.message = message
        self.module = module
        self.stage = stage

    def __str__(self) -> str:
        where = "/".join(part for part in (self.module, self.stage) if part)
        return f"[{where}] {self.message}" if where else self.message


class InhomogeneousSpanError(SpectralDgaError):
    """Members of a span do not share one shape."""


class ContainmentError(SpectralDgaError):
    """A subspace expected inside a span is not contained in it."""


class BudgetError(SpectralDgaError):
    """A word or degree budget is inconsistent with the truncation or too large to enumerate."""


class InsufficientTruncationError(SpectralDgaError):
    """No admissible truncation level satisfies the heat-trace tail criterion."""


class ScheduleError(SpectralDgaError):
    """Extrapolation iterates do not settle on the given schedule."""


class JunkInstabilityError(SpectralDgaError):
    """A kernel found at the largest level does not vanish at smaller levels."""


class FunctionalError(SpectralDgaError):
    """A heat-functional Gram matrix fails Hermiticity or positivity."""


class ResourceGuardError(SpectralDgaError):
    """A dense realization would exceed the configured ambient dimension cap."""


class ScenarioValidationError(SpectralDgaError):
    """A scenario violates a precondition of a downstream operation."""
