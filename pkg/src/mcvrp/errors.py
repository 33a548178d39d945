"""Exception types shared across the package."""


class McvrpError(Exception):
    """Base class for all package errors."""


class InvalidInstanceError(McvrpError, ValueError):
    """Instance data is structurally broken or violates a model invariant."""


class InfeasibleInstanceError(McvrpError, ValueError):
    """No feasible solution exists (e.g. an unsplittable demand above capacity)."""


class BudgetExceededError(McvrpError, ValueError):
    """An exact oracle or enumeration was asked for more than its size budget."""

    def __init__(self, message: str, size: int | None = None, budget: int | None = None):
        super().__init__(message)
        self.size = size
        self.budget = budget
