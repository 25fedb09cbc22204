"""ROI extraction, resizing, and image-to-tensor conditioning.

All resampling is bilinear with half-pixel-center alignment: output pixel
(j) samples source coordinate ``x0 + (j + 0.5) * scale - 0.5``, clamped to
the image border.  A full-frame ROI at matching resolution is therefore a
bitwise identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import RoiError
from .taxonomy import Manifest, SourceId

FULL_FRAME = (0.0, 0.0, 1.0, 1.0)

# lower-central default: bottom 40% of the frame, central 60% of the width
DEFAULT_RECT = (0.2, 0.6, 0.6, 0.4)


def _check_rect(rect: tuple[float, float, float, float], label: str) -> None:
    x, y, w, h = rect
    if w <= 0 or h <= 0:
        raise RoiError(f"{label}: zero-area roi {rect}")
    if x < 0 or y < 0 or x + w > 1 + 1e-9 or y + h > 1 + 1e-9:
        raise RoiError(f"{label}: roi {rect} outside the unit square")


@dataclass(frozen=True)
class RoiSpec:
    """Per-source ROI rectangles in normalized (x, y, width, height) coords."""

    rects: dict[SourceId, tuple[float, float, float, float]] = field(
        default_factory=dict
    )

    def __post_init__(self) -> None:
        for source, rect in self.rects.items():
            _check_rect(rect, f"roi[{source.value}]")

    @classmethod
    def default(cls) -> "RoiSpec":
        return cls({source: DEFAULT_RECT for source in SourceId})

    @classmethod
    def full_frame(cls) -> "RoiSpec":
        return cls({source: FULL_FRAME for source in SourceId})

    def rect_for(self, source: SourceId) -> tuple[float, float, float, float]:
        try:
            return self.rects[source]
        except KeyError:
            raise RoiError(f"no roi configured for source {source.value!r}") from None

    @classmethod
    def from_json(cls, path: str | Path) -> "RoiSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        rects = {}
        for name, rect in raw.items():
            rects[SourceId.from_name(name)] = (
                float(rect["x"]),
                float(rect["y"]),
                float(rect["w"]),
                float(rect["h"]),
            )
        return cls(rects)

    def to_json(self, path: str | Path) -> None:
        raw = {
            source.value: {"x": r[0], "y": r[1], "w": r[2], "h": r[3]}
            for source, r in sorted(self.rects.items(), key=lambda kv: kv[0].value)
        }
        Path(path).write_text(json.dumps(raw, indent=2) + "\n", encoding="utf-8")


def bilinear_sample(image: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample ``image`` (H, W, C) at float coordinate grids (h', w').

    Coordinates outside the support are clamped to the border (edge
    replication).  Returns float64 (h', w', C).
    """
    h, w = image.shape[:2]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[..., None]
    fx = (xs - x0)[..., None]
    img = image.astype(np.float64, copy=False)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def crop_and_resize(
    image: np.ndarray,
    roi: tuple[float, float, float, float],
    out: int = 224,
) -> np.ndarray:
    """Crop the normalized ``roi`` rectangle and resize to ``out`` x ``out``.

    The identity case (full-frame ROI at matching resolution) reproduces
    the input bitwise.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise RoiError(f"expected an HxWx3 image, got shape {image.shape}")
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise RoiError(f"image too small: {image.shape}")
    _check_rect(roi, "roi")
    h, w = image.shape[:2]
    x, y, rw, rh = roi
    if roi == FULL_FRAME and h == out and w == out:
        return image.copy()
    scale_x = rw * w / out
    scale_y = rh * h / out
    xs = x * w + (np.arange(out) + 0.5) * scale_x - 0.5
    ys = y * h + (np.arange(out) + 0.5) * scale_y - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    values = bilinear_sample(image, grid_y, grid_x)
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def normalize(
    patch: np.ndarray,
    mean: np.ndarray | None = None,
    std: np.ndarray | None = None,
) -> np.ndarray:
    """8-bit HxWx3 patch -> standardized float32 tensor (3, H, W).

    Values are scaled to [0, 1] and then shifted/scaled per channel; the
    defaults (mean 0, std 1) leave the pure [0, 1] scaling.
    """
    mean = np.zeros(3) if mean is None else np.asarray(mean, dtype=np.float64)
    std = np.ones(3) if std is None else np.asarray(std, dtype=np.float64)
    x = patch.astype(np.float64) / 255.0
    x = (x - mean) / std
    return np.ascontiguousarray(x.transpose(2, 0, 1)).astype(np.float32)


def channel_stats(images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean/std of a u8 image stack (N, H, W, 3) on the [0,1] scale."""
    x = images.astype(np.float64) / 255.0
    mean = x.mean(axis=(0, 1, 2))
    std = np.maximum(x.std(axis=(0, 1, 2)), 1e-6)
    return mean, std


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG file into an RGB u8 array (H, W, 3)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(array: np.ndarray, path: str | Path) -> None:
    Image.fromarray(array, mode="RGB").save(path)


@dataclass
class PatchStore:
    """Decoded dataset split: 8-bit patches at rest, tensors on demand."""

    images: np.ndarray  # (N, S, S, 3) uint8
    labels: np.ndarray  # (N,) int64 class codes
    sequence_ids: tuple[str, ...]
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.labels)

    def tensor(self, index: int) -> np.ndarray:
        return normalize(self.images[index], self.mean, self.std)

    def tensor_batch(self, indices) -> np.ndarray:
        return np.stack([self.tensor(i) for i in indices])

    def subset(self, indices) -> "PatchStore":
        indices = list(indices)
        return PatchStore(
            images=self.images[indices],
            labels=self.labels[indices],
            sequence_ids=tuple(self.sequence_ids[i] for i in indices),
            mean=self.mean,
            std=self.std,
        )


def load_patches(
    manifest: Manifest,
    root: str | Path,
    out_size: int,
    roi: RoiSpec | None = None,
) -> PatchStore:
    """Decode every manifest record into a PatchStore.

    ``roi=None`` uses the full frame.  Image paths are resolved relative
    to ``root``.
    """
    root = Path(root)
    n = len(manifest.records)
    images = np.empty((n, out_size, out_size, 3), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    for i, rec in enumerate(manifest.records):
        img = load_image(root / rec.image_path)
        rect = roi.rect_for(rec.source) if roi is not None else FULL_FRAME
        images[i] = crop_and_resize(img, rect, out_size)
        labels[i] = int(rec.label)
    return PatchStore(
        images=images,
        labels=labels,
        sequence_ids=tuple(r.sequence_id for r in manifest.records),
    )
