"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of a formula (non-finite, negative time, ...)."""


class PreconditionError(ValueError):
    """A modelling assumption required by a formula does not hold."""


class InputError(ValueError):
    """Malformed user data (CSV rows, grids, panels)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its target accuracy."""


class EstimationError(RuntimeError):
    """An estimation stage failed.

    Parameters
    ----------
    stage : str
        Name of the pipeline stage that failed (``"theta"``, ``"kappa"``, ...).
    message : str
        Human readable description.
    """

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
