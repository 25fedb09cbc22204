"""Shared test oracles, independent of the library's implementation paths."""

from __future__ import annotations

import numpy as np

from surface_bench.taxonomy import Manifest, SampleRecord, SourceId, SurfaceClass

# Composed-dataset per-class totals used as the reference imbalanced shape.
REFERENCE_COUNTS = {
    SurfaceClass.asphalt: 10273,
    SurfaceClass.dirt: 8547,
    SurfaceClass.grass: 2887,
    SurfaceClass.wet_asphalt: 3668,
    SurfaceClass.cobblestone: 1082,
    SurfaceClass.snow: 3075,
}


def numeric_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar-valued callable, elementwise.

    ``x`` is perturbed in place and restored; ``f`` takes no arguments and
    must read the live array.
    """
    g = np.zeros(x.shape, dtype=np.float64)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute difference, normalized by the larger gradient scale."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(1.0, np.abs(analytic).max(), np.abs(numeric).max())
    return float(np.abs(analytic - numeric).max() / scale)


def naive_conv2d(x, weight, bias, stride, padding):
    """Direct six-nested-loop convolution, the definitional oracle."""
    n, c, h, w = x.shape
    f, _, kh, kw = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, f, oh, ow), dtype=np.float64)
    for ni in range(n):
        for fi in range(f):
            for oi in range(oh):
                for oj in range(ow):
                    acc = float(bias[fi])
                    for ci in range(c):
                        for i in range(kh):
                            for j in range(kw):
                                acc += (
                                    weight[fi, ci, i, j]
                                    * xp[ni, ci, oi * stride + i, oj * stride + j]
                                )
                    out[ni, fi, oi, oj] = acc
    return out


def reference_bilinear(image, x0, y0, w_px, h_px, out):
    """Dense per-pixel bilinear crop+resize with half-pixel centers and
    edge clamping; float output (no rounding)."""
    h, w = image.shape[:2]
    img = image.astype(np.float64)
    result = np.zeros((out, out, image.shape[2]), dtype=np.float64)
    for r in range(out):
        for c in range(out):
            sx = x0 + (c + 0.5) * (w_px / out) - 0.5
            sy = y0 + (r + 0.5) * (h_px / out) - 0.5
            sx = min(max(sx, 0.0), w - 1.0)
            sy = min(max(sy, 0.0), h - 1.0)
            ix, iy = int(np.floor(sx)), int(np.floor(sy))
            ix1, iy1 = min(ix + 1, w - 1), min(iy + 1, h - 1)
            fx, fy = sx - ix, sy - iy
            top = img[iy, ix] * (1 - fx) + img[iy, ix1] * fx
            bot = img[iy1, ix] * (1 - fx) + img[iy1, ix1] * fx
            result[r, c] = top * (1 - fy) + bot * fy
    return result


def forward_transform_point(xy, center, mirror, angle_deg, scale):
    """Where a source point lands under scale -> rotate -> mirror.

    Mirrors the stated transform convention: positive angle maps the point
    (x, y) relative to the center to (x cos t - y sin t, x sin t + y cos t),
    with y the downward row axis.
    """
    theta = np.radians(angle_deg)
    px = (xy[0] - center[0]) * scale
    py = (xy[1] - center[1]) * scale
    rx = np.cos(theta) * px - np.sin(theta) * py
    ry = np.sin(theta) * px + np.cos(theta) * py
    if mirror:
        rx = -rx
    return rx + center[0], ry + center[1]


def make_manifest(
    counts: dict[SurfaceClass, int],
    sequences_per_class: int = 3,
    source: SourceId = SourceId.synthetic,
    name: str = "fixture",
) -> Manifest:
    """Synthetic manifest with the requested per-class totals, spread over
    the requested number of sequences (frames only, no image files)."""
    records = []
    for cls, total in counts.items():
        seqs = min(sequences_per_class, total)
        base, extra = divmod(total, seqs)
        for s in range(seqs):
            length = base + (1 if s < extra else 0)
            seq_id = f"{cls.name}_s{s:02d}"
            for t in range(length):
                records.append(
                    SampleRecord(
                        image_path=f"{cls.name}/s{s:02d}/f{t:05d}.png",
                        label=cls,
                        source=source,
                        sequence_id=seq_id,
                        frame_index=t,
                    )
                )
    return Manifest(name=name, records=tuple(records))


def reference_manifest(scale: int = 1) -> Manifest:
    """Manifest shaped like the composed six-class dataset's totals.

    ``scale=1`` reproduces the exact per-class totals (for count/ratio
    checks).  At those exact totals the smallest class cannot supply
    300 test + 300 val + 700 train disjoint samples, so recipe tests use
    ``scale=2``, which preserves the class proportions (and therefore the
    imbalance ratio bit-for-bit) at a feasible size.
    """
    counts = {cls: n * scale for cls, n in REFERENCE_COUNTS.items()}
    return make_manifest(counts, sequences_per_class=5, name="reference")


def websearch_manifest(per_class: int, name: str = "websearch") -> Manifest:
    records = []
    for cls in SurfaceClass:
        for i in range(per_class):
            path = f"web/{cls.name}/{i:04d}.png"
            records.append(SampleRecord(path, cls, SourceId.websearch, path, 0))
    return Manifest(name=name, records=tuple(records))
