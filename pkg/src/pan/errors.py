"""Error taxonomy shared across modules."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class TrainingDiverged(RuntimeError):
    """A stage loss went non-finite; message names the stage and epoch."""


class FormatError(ValueError):
    """Corrupt or malformed binary model file."""
