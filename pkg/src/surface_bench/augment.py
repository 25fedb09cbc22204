"""Per-batch geometric augmentation: mirror, bounded rotation, bounded scale.

Parameter draws are counter-based: the triple for a sample is a pure
function of (master_seed, epoch, sample_index), so augmentation output is
identical no matter how a loader schedules or parallelizes the work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .imaging import bilinear_sample


@dataclass(frozen=True)
class AugmentSpec:
    mirror_probability: float = 0.5
    rotation_bound: float = 40.0  # degrees
    scale_range: tuple[float, float] = (0.9, 1.1)
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.mirror_probability <= 1.0:
            raise ValueError("mirror_probability must be in [0, 1]")
        if self.rotation_bound < 0.0:
            raise ValueError("rotation_bound must be >= 0")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi):
            raise ValueError("scale_range must satisfy 0 < min <= max")


class AugmentKey(NamedTuple):
    epoch: int
    sample_index: int


class AugmentParams(NamedTuple):
    mirror: bool
    angle: float  # degrees
    scale: float


IDENTITY_PARAMS = AugmentParams(mirror=False, angle=0.0, scale=1.0)


def draw_params(spec: AugmentSpec, key: AugmentKey) -> AugmentParams:
    """Draw (mirror, angle, scale) for one sample; deterministic per key."""
    rng = np.random.default_rng((spec.master_seed, key.epoch, key.sample_index))
    mirror = bool(rng.random() < spec.mirror_probability)
    angle = float(rng.uniform(-spec.rotation_bound, spec.rotation_bound))
    scale = float(rng.uniform(spec.scale_range[0], spec.scale_range[1]))
    return AugmentParams(mirror, angle, scale)


def apply(patch: np.ndarray, params: AugmentParams) -> np.ndarray:
    """Transform an 8-bit HxWx3 patch: scale, rotate about the center, mirror.

    A positive angle rotates content so that the point at (x, y) relative
    to the center maps to (x cos t - y sin t, x sin t + y cos t), with y
    the downward row axis.  Sampling is bilinear; pixels that fall outside
    the source are filled by edge replication.  Identity parameters
    reproduce the patch bitwise.
    """
    if patch.ndim != 3 or patch.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 patch, got shape {patch.shape}")
    if params == IDENTITY_PARAMS:
        return patch.copy()
    h, w = patch.shape[:2]
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    dst_y, dst_x = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    qx = dst_x - cx
    qy = dst_y - cy
    if params.mirror:
        qx = -qx
    theta = math.radians(params.angle)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    # inverse rotation, then inverse scale
    sx = (cos_t * qx + sin_t * qy) / params.scale
    sy = (-sin_t * qx + cos_t * qy) / params.scale
    values = bilinear_sample(patch, sy + cy, sx + cx)
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def augment(patch: np.ndarray, spec: AugmentSpec, key: AugmentKey) -> np.ndarray:
    """Draw parameters for ``key`` and apply them."""
    return apply(patch, draw_params(spec, key))
