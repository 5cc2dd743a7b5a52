"""Exception hierarchy for the workbench."""


class EmbDiffError(Exception):
    """Base class for all workbench errors."""


class ConfigurationError(EmbDiffError):
    """Invalid configuration value (unknown schedule kind, bad sizes, ...)."""


class ShapeError(EmbDiffError):
    """Array shape or index does not match the declared contract."""


class CheckpointError(EmbDiffError):
    """Checkpoint file is corrupt, truncated, or of an unsupported version."""


class TrainingError(EmbDiffError):
    """Training diverged or produced a non-finite loss."""
