"""
Error Types

Exception hierarchy shared by every recsteal service. Each failure class
carries the context a caller needs to report it without re-deriving it.
"""
from typing import Any, Dict, Optional


class RecStealError(Exception):
    """Base class for all recsteal failures."""
    pass


class ConfigError(RecStealError):
    """Invalid or missing experiment configuration."""
    pass


class DataError(RecStealError):
    """Ingest, filtering or sampling failure."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"{message} (line {line_number})"
        super().__init__(message)
        self.line_number = line_number


class ModelError(RecStealError, ValueError):
    """Shape, index or list-length violation on a recommender model."""
    pass


class OptimizerError(RecStealError, ValueError):
    """Optimizer state does not match the parameter set."""
    pass


class GradientCheckError(RecStealError):
    """Finite-difference check could not be evaluated."""
    pass


class TrainingDivergedError(RecStealError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, last_finite_loss: Optional[float]):
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch} "
            f"(last finite loss: {last_finite_loss})"
        )
        self.epoch = epoch
        self.batch = batch
        self.last_finite_loss = last_finite_loss


class BudgetExhaustedError(RecStealError):
    """The query oracle refused a query because its budget is spent."""

    def __init__(self, budget: int, user: int):
        super().__init__(f"Query budget of {budget} exhausted (refused user {user})")
        self.budget = budget
        self.user = user


class DefenseError(RecStealError):
    """Popularity pool cannot supply the requested replacements."""
    pass


class AttackAbortedError(RecStealError):
    """An attack stopped early; `progress` describes how far it got."""

    def __init__(self, message: str, progress: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.progress = progress or {}


class MetricError(RecStealError, ValueError):
    """Metric inputs violate the metric's preconditions."""
    pass
