"""Exception types shared across the package."""


class DegenerateGeometryError(ValueError):
    """Raised when a geometric configuration has no valid normalization
    (e.g. the face center sits at the camera origin)."""


class AnnotationParseError(ValueError):
    """A malformed annotation line, carrying the file and line number."""

    def __init__(self, path, line_number: int, reason: str):
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{self.path}:{line_number}: {reason}")


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field path."""


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite. Carries the epoch/step where it
    happened and, when checkpointing is enabled, the diagnostic snapshot."""

    def __init__(self, epoch: int, step: int, loss_value: float,
                 snapshot_path=None):
        self.epoch = epoch
        self.step = step
        self.loss_value = loss_value
        self.snapshot_path = snapshot_path
        msg = (f"training diverged at epoch {epoch}, step {step}: "
               f"loss={loss_value!r}")
        if snapshot_path is not None:
            msg += f" (diagnostic snapshot: {snapshot_path})"
        super().__init__(msg)
