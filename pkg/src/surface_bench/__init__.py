"""Road-surface classification workbench.

Dataset curation (manifests, imbalance handling, sequence-aware splits),
ROI extraction, geometric augmentation, a small numpy CNN stack with exact
backpropagation, residual/inception model families, a seeded training
harness with early stopping, and confusion-matrix / sequence-stability
evaluation — all verifiable at desk scale on procedurally generated
texture data.
"""

from .errors import SurfaceBenchError
from .taxonomy import (
    Manifest,
    SampleRecord,
    SourceId,
    SurfaceClass,
    class_counts,
    imbalance_ratio,
    load_manifest,
    save_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "Manifest",
    "SampleRecord",
    "SourceId",
    "SurfaceBenchError",
    "SurfaceClass",
    "class_counts",
    "imbalance_ratio",
    "load_manifest",
    "save_manifest",
    "__version__",
]
