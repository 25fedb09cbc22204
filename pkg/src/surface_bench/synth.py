"""Procedural six-class texture dataset with temporally correlated sequences.

Each class has a distinct recipe; classes differ either by color (grass,
snow, dirt's brown cast) or by brightness/texture statistics only (asphalt
vs wet asphalt vs cobblestone), so a learner needs more than hue to
separate everything.  Frames within a sequence are sub-pixel to few-pixel
warps of one shared base texture, which gives adjacent frames far more
similarity than frames from different sequences.

All randomness is keyed by (seed, class, sequence[, frame]), so output is
bitwise reproducible regardless of generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import bilinear_sample, save_image
from .taxonomy import (
    Manifest,
    SampleRecord,
    SourceId,
    SurfaceClass,
    save_manifest,
)

_MARGIN = 4  # extra border on base textures so warps never hit the edge


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    sequences_per_class: int = 2
    frames_per_sequence: int = 10
    image_size: int = 64
    classes: tuple[SurfaceClass, ...] = field(
        default_factory=lambda: tuple(SurfaceClass)
    )

    def __post_init__(self) -> None:
        if self.sequences_per_class < 1 or self.frames_per_sequence < 1:
            raise ValueError("sequence and frame counts must be >= 1")
        if self.image_size < 8:
            raise ValueError("image_size must be >= 8")


def _box1d(a: np.ndarray, r: int, axis: int) -> np.ndarray:
    if r <= 0:
        return a
    width = 2 * r + 1
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    ap = np.pad(a, pad, mode="edge")
    c = ap.cumsum(axis=axis, dtype=np.float64)
    zeros_shape = list(c.shape)
    zeros_shape[axis] = 1
    c = np.concatenate([np.zeros(zeros_shape), c], axis=axis)
    n = a.shape[axis]
    upper = np.take(c, np.arange(width, width + n), axis=axis)
    lower = np.take(c, np.arange(0, n), axis=axis)
    return (upper - lower) / width


def box_blur(field: np.ndarray, radius: int, passes: int = 2, axes=(0, 1)) -> np.ndarray:
    """Separable box blur with edge-replicated borders."""
    out = field.astype(np.float64, copy=False)
    for _ in range(passes):
        for axis in axes:
            out = _box1d(out, radius, axis)
    return out


def _unit(field: np.ndarray) -> np.ndarray:
    lo, hi = field.min(), field.max()
    if hi - lo < 1e-12:
        return np.zeros_like(field)
    return (field - lo) / (hi - lo)


def _gray_to_rgb(gray: np.ndarray) -> np.ndarray:
    return np.repeat(gray[:, :, None], 3, axis=2)


def _asphalt(rng: np.random.Generator, size: int) -> np.ndarray:
    tone = rng.uniform(0.46, 0.54)
    ramp = np.linspace(-1.0, 1.0, size)[:, None] * rng.uniform(-0.04, 0.04)
    gray = tone + ramp + rng.normal(0.0, 0.022, (size, size))
    rgb = _gray_to_rgb(gray)
    return rgb + rng.normal(0.0, 0.004, 3)


def _wet_asphalt(rng: np.random.Generator, size: int) -> np.ndarray:
    tone = rng.uniform(0.27, 0.33)
    gray = tone + rng.normal(0.0, 0.02, (size, size))
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    for _ in range(rng.integers(3, 6)):
        center = rng.uniform(0, size)
        slope = rng.uniform(-0.25, 0.25)
        sigma = rng.uniform(0.8, 1.8)
        amp = rng.uniform(0.18, 0.30)
        dist = xs - (center + slope * ys)
        gray = gray + amp * np.exp(-0.5 * (dist / sigma) ** 2)
    rgb = _gray_to_rgb(gray)
    rgb[:, :, 2] += 0.015  # faint sky reflection
    return rgb


def _cobblestone(rng: np.random.Generator, size: int) -> np.ndarray:
    cell = int(rng.integers(8, 13))
    gap = 2
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    rows = ys // cell
    xoff = xs + (rows % 2) * (cell // 2)
    cols = xoff // cell
    jitter = rng.uniform(-1.0, 1.0, (size // cell + 3, size // cell + 3))
    brick = rng.uniform(0.52, 0.58) + 0.07 * jitter[rows, cols]
    mortar = (ys % cell < gap) | (xoff % cell < gap)
    gray = np.where(mortar, 0.28, brick) + rng.normal(0.0, 0.015, (size, size))
    return _gray_to_rgb(gray)


def _dirt(rng: np.random.Generator, size: int) -> np.ndarray:
    blotch = _unit(box_blur(rng.random((size, size)), 3, passes=2))
    rgb = np.empty((size, size, 3))
    rgb[:, :, 0] = 0.33 + 0.22 * blotch
    rgb[:, :, 1] = 0.25 + 0.16 * blotch
    rgb[:, :, 2] = 0.16 + 0.09 * blotch
    return rgb + rng.normal(0.0, 0.03, (size, size, 3))


def _grass(rng: np.random.Generator, size: int) -> np.ndarray:
    band = _unit(box_blur(rng.random((size, size)), 1, passes=1))
    rgb = np.empty((size, size, 3))
    rgb[:, :, 0] = 0.16 + 0.14 * band
    rgb[:, :, 1] = 0.32 + 0.28 * band
    rgb[:, :, 2] = 0.10 + 0.10 * band
    return rgb + rng.normal(0.0, 0.02, (size, size, 3))


def _snow(rng: np.random.Generator, size: int) -> np.ndarray:
    tone = rng.uniform(0.85, 0.90)
    gray = tone + rng.normal(0.0, 0.012, (size, size))
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    for _ in range(rng.integers(2, 5)):
        cy, cx = rng.uniform(0, size, 2)
        sigma = rng.uniform(5.0, 10.0)
        depth = rng.uniform(0.10, 0.18)
        gray = gray - depth * np.exp(
            -((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * sigma**2)
        )
    return _gray_to_rgb(gray)


_RECIPES = {
    SurfaceClass.asphalt: _asphalt,
    SurfaceClass.dirt: _dirt,
    SurfaceClass.grass: _grass,
    SurfaceClass.wet_asphalt: _wet_asphalt,
    SurfaceClass.cobblestone: _cobblestone,
    SurfaceClass.snow: _snow,
}


def _to_u8(rgb: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def base_texture(cls: SurfaceClass, seed: int, sequence: int, size: int) -> np.ndarray:
    """Base float texture for one sequence, with warp margin included."""
    rng = np.random.default_rng((int(seed), int(cls.value), int(sequence)))
    return _RECIPES[cls](rng, size + 2 * _MARGIN)


def _motion(seed: int, cls: SurfaceClass, sequence: int):
    """Smooth bounded camera drift: per-frame shift is a pure function of t."""
    rng = np.random.default_rng((int(seed), int(cls.value), int(sequence), 1))
    amp = rng.uniform(1.5, 3.0, 2)
    freq = rng.uniform(0.02, 0.06, 2)
    phase = rng.uniform(0.0, 1.0, 2)

    def shift(t: int) -> tuple[float, float]:
        dy = amp[0] * math.sin(2 * math.pi * (freq[0] * t + phase[0]))
        dx = amp[1] * math.sin(2 * math.pi * (freq[1] * t + phase[1]))
        return dy, dx

    return shift


def render_frame(base: np.ndarray, shift: tuple[float, float], size: int) -> np.ndarray:
    """Extract a shifted window from the oversized base, bilinear, as u8."""
    dy, dx = shift
    ys = np.arange(size) + _MARGIN + dy
    xs = np.arange(size) + _MARGIN + dx
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return _to_u8(bilinear_sample(base, grid_y, grid_x))


def generate(spec: SynthSpec, out_dir: str | Path) -> Manifest:
    """Write PNG frame sequences plus ``manifest.csv``; returns the manifest."""
    out_dir = Path(out_dir)
    records = []
    for cls in spec.classes:
        for seq in range(spec.sequences_per_class):
            base = base_texture(cls, spec.seed, seq, spec.image_size)
            shift = _motion(spec.seed, cls, seq)
            seq_id = f"{cls.name}_seq{seq:03d}"
            seq_dir = out_dir / cls.name / f"seq{seq:03d}"
            seq_dir.mkdir(parents=True, exist_ok=True)
            for t in range(spec.frames_per_sequence):
                frame = render_frame(base, shift(t), spec.image_size)
                rel = f"{cls.name}/seq{seq:03d}/frame{t:03d}.png"
                save_image(frame, out_dir / rel)
                records.append(
                    SampleRecord(rel, cls, SourceId.synthetic, seq_id, t)
                )
    manifest = Manifest(name="synthetic", records=tuple(records))
    save_manifest(manifest, out_dir / "manifest.csv")
    return manifest


def generate_websearch(spec: SynthSpec, out_dir: str | Path, per_class: int) -> Manifest:
    """Singleton-sequence images standing in for web-search results.

    Every image is an independent base texture; sequence_id equals the
    image path and frame_index is 0, like any websearch sample.
    """
    out_dir = Path(out_dir)
    records = []
    for cls in spec.classes:
        img_dir = out_dir / "websearch" / cls.name
        img_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            rng_key = 100_000 + i
            base = base_texture(cls, spec.seed, rng_key, spec.image_size)
            frame = render_frame(base, (0.0, 0.0), spec.image_size)
            rel = f"websearch/{cls.name}/img{i:04d}.png"
            save_image(frame, out_dir / rel)
            records.append(SampleRecord(rel, cls, SourceId.websearch, rel, 0))
    manifest = Manifest(name="websearch", records=tuple(records))
    save_manifest(manifest, out_dir / "websearch.csv")
    return manifest


def texture_features(images: np.ndarray) -> np.ndarray:
    """Per-image (R, G, B mean, high-frequency energy) on the [0, 1] scale.

    High-frequency energy is the mean absolute residual of the gray image
    against its own 3x3 box blur.
    """
    x = images.astype(np.float64) / 255.0
    means = x.mean(axis=(1, 2))
    gray = x.mean(axis=3)
    smooth = box_blur(gray, 1, passes=1, axes=(1, 2))
    hf = np.abs(gray - smooth).mean(axis=(1, 2))
    return np.column_stack([means, hf])


class NearestCentroidBaseline:
    """Nearest-centroid classifier on standardized pixel statistics.

    Deliberately simple: if this separates the classes, any confusion a
    CNN shows is the network's fault, not the data's.
    """

    def fit(self, images: np.ndarray, labels: np.ndarray) -> "NearestCentroidBaseline":
        feats = texture_features(images)
        self.mu = feats.mean(axis=0)
        self.sigma = np.maximum(feats.std(axis=0), 1e-9)
        z = (feats - self.mu) / self.sigma
        classes = np.unique(labels)
        self.classes = classes
        self.centroids = np.stack([z[labels == c].mean(axis=0) for c in classes])
        return self

    def predict(self, images: np.ndarray) -> np.ndarray:
        z = (texture_features(images) - self.mu) / self.sigma
        dists = ((z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return self.classes[dists.argmin(axis=1)]

    def score(self, images: np.ndarray, labels: np.ndarray) -> float:
        return float((self.predict(images) == labels).mean())
