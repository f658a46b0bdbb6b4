"""
Exception types shared across the toolkit.
The CLI maps UsageError to exit code 2 and every other error here to exit code 1.
"""


class UsageError(ValueError):
    """Bad command-line usage (unknown variant, missing flag combination)."""


class ConfigurationError(ValueError):
    """Invalid or unreadable configuration."""


class InfeasibleProtocolError(ValueError):
    """A cross-validation protocol cannot run on the given cohort."""


class MissingArtifactError(ValueError):
    """An expected input artifact or manifest does not exist."""


class InconsistentRunsError(ValueError):
    """Runs being combined into one report disagree on their fold sets."""


class CheckpointError(ValueError):
    """A checkpoint does not match its declared configuration."""


class UndefinedStatisticError(ValueError):
    """A test statistic is undefined for the given data (e.g. no nonzero differences)."""


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""

    def __init__(self, epoch: int, step: int, last_finite_loss: float):
        self.epoch = epoch
        self.step = step
        self.last_finite_loss = last_finite_loss
        super().__init__(
            f"Training diverged at epoch {epoch}, step {step} "
            f"(last finite loss {last_finite_loss:.6g})"
        )
