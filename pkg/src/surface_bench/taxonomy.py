"""Surface-class taxonomy and the sample manifest format.

A manifest is the unit of all dataset engineering here: one CSV row per
labeled image, carrying the source dataset and the recorded sequence the
frame belongs to.  Manifests are immutable after loading and safe to share
read-only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

MANIFEST_HEADER = "path,class,source,sequence_id,frame_index"


class SurfaceClass(enum.IntEnum):
    """The six road-surface classes, with stable integer codes."""

    asphalt = 0
    dirt = 1
    grass = 2
    wet_asphalt = 3
    cobblestone = 4
    snow = 5

    @classmethod
    def from_name(cls, name: str) -> "SurfaceClass":
        try:
            return cls[name]
        except KeyError:
            raise ManifestError(f"unknown surface class {name!r}") from None


class SourceId(enum.Enum):
    """Origin dataset of a sample.

    websearch and synthetic samples carry singleton sequences: one frame
    per sequence_id.
    """

    robocar = "robocar"
    stadtpilot = "stadtpilot"
    nrec = "nrec"
    new_college = "new_college"
    giusti = "giusti"
    kitti = "kitti"
    websearch = "websearch"
    synthetic = "synthetic"

    @classmethod
    def from_name(cls, name: str) -> "SourceId":
        try:
            return cls(name)
        except ValueError:
            raise ManifestError(f"unknown source {name!r}") from None


@dataclass(frozen=True)
class SampleRecord:
    """One labeled image with its provenance."""

    image_path: str
    label: SurfaceClass
    source: SourceId
    sequence_id: str
    frame_index: int


@dataclass(frozen=True)
class Manifest:
    """Named, ordered collection of sample records."""

    name: str
    records: tuple[SampleRecord, ...]

    def __post_init__(self) -> None:
        _validate_records(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _validate_records(records: tuple[SampleRecord, ...]) -> None:
    seen_paths: set[str] = set()
    seen_keys: set[tuple[str, int]] = set()
    last_frame: dict[str, int] = {}
    for i, rec in enumerate(records):
        where = f"record {i}"
        if not rec.image_path:
            raise ManifestError(f"{where}: empty image path")
        if "," in rec.image_path:
            raise ManifestError(f"{where}: path contains a comma: {rec.image_path!r}")
        if rec.frame_index < 0:
            raise ManifestError(f"{where}: negative frame_index {rec.frame_index}")
        if rec.image_path in seen_paths:
            raise ManifestError(f"{where}: duplicate path {rec.image_path!r}")
        seen_paths.add(rec.image_path)
        key = (rec.sequence_id, rec.frame_index)
        if key in seen_keys:
            raise ManifestError(
                f"{where}: duplicate (sequence_id, frame_index) {key!r}"
            )
        seen_keys.add(key)
        prev = last_frame.get(rec.sequence_id)
        if prev is not None and rec.frame_index <= prev:
            raise ManifestError(
                f"{where}: frame_index {rec.frame_index} not increasing within "
                f"sequence {rec.sequence_id!r} (previous {prev})"
            )
        last_frame[rec.sequence_id] = rec.frame_index


def load_manifest(path: str | Path) -> Manifest:
    """Parse a manifest CSV, checking every invariant.

    Format: UTF-8, LF line endings, header ``path,class,source,sequence_id,
    frame_index``.  Paths must not contain commas (no quoting is supported).
    Errors report the offending 1-based line number.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise ManifestError(f"{path}: missing or malformed header line")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 5:
            raise ManifestError(
                f"{path}:{lineno}: expected 5 comma-separated fields, got {len(parts)}"
            )
        image_path, cls_name, src_name, seq_id, frame_str = parts
        try:
            label = SurfaceClass.from_name(cls_name)
            source = SourceId.from_name(src_name)
        except ManifestError as e:
            raise ManifestError(f"{path}:{lineno}: {e}") from None
        try:
            frame_index = int(frame_str)
        except ValueError:
            raise ManifestError(
                f"{path}:{lineno}: frame_index {frame_str!r} is not an integer"
            ) from None
        records.append(SampleRecord(image_path, label, source, seq_id, frame_index))
    try:
        return Manifest(name=path.stem, records=tuple(records))
    except ManifestError as e:
        raise ManifestError(f"{path}: {e}") from None


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write a manifest CSV; output bytes are stable across runs."""
    path = Path(path)
    lines = [MANIFEST_HEADER]
    for rec in manifest.records:
        lines.append(
            f"{rec.image_path},{rec.label.name},{rec.source.value},"
            f"{rec.sequence_id},{rec.frame_index}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def class_counts(manifest: Manifest) -> dict[SurfaceClass, int]:
    """Per-class sample counts; classes absent from the manifest report 0."""
    counts = {cls: 0 for cls in SurfaceClass}
    for rec in manifest.records:
        counts[rec.label] += 1
    return counts


def imbalance_ratio(manifest: Manifest) -> float:
    """Majority count divided by minority count over the six classes."""
    counts = class_counts(manifest)
    for cls, n in counts.items():
        if n == 0:
            raise ManifestError(f"class {cls.name} has zero samples")
    return max(counts.values()) / min(counts.values())
