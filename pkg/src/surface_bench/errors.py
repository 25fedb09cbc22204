"""Exception hierarchy shared across the workbench.

Everything raised for bad data or bad configuration derives from
SurfaceBenchError so the CLI can map it to a single exit code.
"""


class SurfaceBenchError(Exception):
    """Base class for all data/validation errors raised by this package."""


class ManifestError(SurfaceBenchError):
    """Malformed or inconsistent manifest (bad row, duplicate path, ...)."""


class SplitError(SurfaceBenchError):
    """Dataset split cannot be satisfied (class shortfall, zero-count class)."""


class RoiError(SurfaceBenchError):
    """Region-of-interest rectangle invalid or outside the image."""


class ShapeError(SurfaceBenchError):
    """Tensor shape mismatch in the neural network stack."""


class CheckpointError(SurfaceBenchError):
    """Unreadable, truncated, or mismatched checkpoint file."""


class TrainingError(SurfaceBenchError):
    """Training cannot proceed (empty split, oversized batch, ...)."""


class EvalError(SurfaceBenchError):
    """Evaluation input invalid (length mismatch, empty sequence, ...)."""
