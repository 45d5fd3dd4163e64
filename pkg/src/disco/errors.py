"""Exception hierarchy shared by every module."""


class DiscoError(Exception):
    """Base class for all errors raised by the package."""


class InvalidInputError(DiscoError, ValueError):
    """An argument is malformed, non-finite or has the wrong shape."""


class ConfigError(DiscoError, ValueError):
    """A configuration value violates its contract."""


class NumericError(DiscoError, ArithmeticError):
    """A numerical procedure failed (factorisation, non-finite activations)."""


class InferenceError(DiscoError):
    """Posterior construction failed, e.g. no mass inside the prior support."""


class TrainingError(DiscoError):
    """Network training diverged."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class StepError(DiscoError):
    """A dynamics step failed while rolling out a trajectory."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step
