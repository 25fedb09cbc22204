"""Dataset recipes: per-sequence subsampling and sequence-aware splits.

Randomness is rank-based: records are first brought into a canonical order
(sorted by sequence id and frame index), then shuffled with a seeded
generator, so a recipe's output depends only on the manifest *contents*
and the seed, never on record order in the source file.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SplitError
from .taxonomy import (
    Manifest,
    SampleRecord,
    SurfaceClass,
    class_counts,
    load_manifest,
    save_manifest,
)


@dataclass(frozen=True)
class SubsampleSpec:
    """Thin every sequence to roughly this many frames."""

    target_frames_per_sequence: int

    def __post_init__(self) -> None:
        if self.target_frames_per_sequence < 1:
            raise ValueError("target_frames_per_sequence must be >= 1")


@dataclass(frozen=True)
class SplitSpec:
    """Per-class sample budgets for the three splits, plus the split seed."""

    test_per_class: int = 300
    val_per_class: int = 300
    train_per_class: int = 700
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.test_per_class, self.val_per_class, self.train_per_class) < 0:
            raise ValueError("split counts must be >= 0")


class RecipeId(enum.Enum):
    basic = "basic"
    minority_augmented = "minority_augmented"
    all_augmented = "all_augmented"


@dataclass(frozen=True)
class DatasetBundle:
    """Disjoint train/val/test manifests produced by one recipe."""

    train: Manifest
    val: Manifest
    test: Manifest
    recipe: RecipeId
    seed: int

    def __post_init__(self) -> None:
        paths = [
            {r.image_path for r in m.records} for m in (self.train, self.val, self.test)
        ]
        for i, j in ((0, 1), (0, 2), (1, 2)):
            overlap = paths[i] & paths[j]
            if overlap:
                raise SplitError(
                    f"splits share {len(overlap)} image paths, e.g. "
                    f"{sorted(overlap)[0]!r}"
                )


def _canonical(records) -> list[SampleRecord]:
    return sorted(records, key=lambda r: (r.sequence_id, r.frame_index))


def _sorted_manifest(name: str, records) -> Manifest:
    return Manifest(name=name, records=tuple(_canonical(records)))


def subsample(manifest: Manifest, spec: SubsampleSpec) -> Manifest:
    """Keep every n-th frame of each sequence, n = ceil(length / target).

    Retained positions are 0, n, 2n, ... in frame order; relative record
    order is preserved.
    """
    lengths: dict[str, int] = {}
    for rec in manifest.records:
        lengths[rec.sequence_id] = lengths.get(rec.sequence_id, 0) + 1
    strides = {
        seq: math.ceil(n / spec.target_frames_per_sequence)
        for seq, n in lengths.items()
    }
    position: dict[str, int] = {}
    kept = []
    for rec in manifest.records:
        pos = position.get(rec.sequence_id, 0)
        position[rec.sequence_id] = pos + 1
        if pos % strides[rec.sequence_id] == 0:
            kept.append(rec)
    return Manifest(name=f"{manifest.name}_subsampled", records=tuple(kept))


def _class_sequences(manifest: Manifest, cls: SurfaceClass):
    """Frames of one class grouped by sequence, in canonical order."""
    groups: dict[str, list[SampleRecord]] = {}
    for rec in manifest.records:
        if rec.label is cls:
            groups.setdefault(rec.sequence_id, []).append(rec)
    for seq in groups:
        groups[seq].sort(key=lambda r: r.frame_index)
    return groups


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng((int(seed),) + tuple(int(k) for k in key))


def _shuffled(items: list, rng: np.random.Generator) -> list:
    order = rng.permutation(len(items))
    return [items[i] for i in order]


def split(manifest: Manifest, spec: SplitSpec) -> DatasetBundle:
    """Split a manifest into sequence-disjoint test and train/val parts.

    Per class: sequence ids are shuffled and whole sequences assigned to
    test until ``test_per_class`` is reached (the last sequence is trimmed
    with a seeded frame shuffle).  When the class has more than one
    sequence, the remainder of a trimmed sequence is dropped so no test
    sequence leaks into train or val.  Validation and training samples are
    then drawn from a seeded shuffle of the remaining frames.
    """
    test, val, train = [], [], []
    for cls in SurfaceClass:
        groups = _class_sequences(manifest, cls)
        total = sum(len(v) for v in groups.values())
        needed = spec.test_per_class + spec.val_per_class + spec.train_per_class
        if total < needed:
            raise SplitError(
                f"class {cls.name}: need {needed} samples "
                f"({spec.test_per_class} test / {spec.val_per_class} val / "
                f"{spec.train_per_class} train), manifest has {total} "
                f"(short by {needed - total})"
            )
        multi_sequence = len(groups) >= 2
        seq_ids = _shuffled(sorted(groups), _rng(spec.seed, cls.value, 0))

        remaining = spec.test_per_class
        pool: list[SampleRecord] = []
        for rank, seq in enumerate(seq_ids):
            frames = groups[seq]
            if remaining <= 0:
                pool.extend(frames)
            elif len(frames) <= remaining:
                test.extend(frames)
                remaining -= len(frames)
            else:
                chosen = _shuffled(frames, _rng(spec.seed, cls.value, 1, rank))
                test.extend(chosen[:remaining])
                # leftovers of a split test sequence are only reusable when
                # the class has no other sequence to draw from
                if not multi_sequence:
                    pool.extend(chosen[remaining:])
                remaining = 0
        if remaining > 0:
            raise SplitError(
                f"class {cls.name}: test split short by {remaining} samples"
            )

        pool = _shuffled(_canonical(pool), _rng(spec.seed, cls.value, 2))
        if len(pool) < spec.val_per_class + spec.train_per_class:
            raise SplitError(
                f"class {cls.name}: train/val pool has {len(pool)} samples after "
                f"reserving test sequences, short by "
                f"{spec.val_per_class + spec.train_per_class - len(pool)}"
            )
        val.extend(pool[: spec.val_per_class])
        train.extend(pool[spec.val_per_class : spec.val_per_class + spec.train_per_class])

    return DatasetBundle(
        train=_sorted_manifest("train", train),
        val=_sorted_manifest("val", val),
        test=_sorted_manifest("test", test),
        recipe=RecipeId.basic,
        seed=spec.seed,
    )


def _websearch_pick(
    websearch: Manifest, cls: SurfaceClass, count: int | None, seed: int
) -> list[SampleRecord]:
    """Seeded rank-based pick of websearch records for one class.

    ``count=None`` takes everything available.
    """
    candidates = _canonical(r for r in websearch.records if r.label is cls)
    if count is None or count >= len(candidates):
        return candidates
    return _shuffled(candidates, _rng(seed, cls.value, 3))[:count]


def build_recipe(
    source: Manifest,
    websearch: Manifest,
    recipe: RecipeId,
    seed: int,
    *,
    test_per_class: int = 300,
    train_per_class: int = 700,
    val_per_class: int = 300,
    val_per_class_minority: int = 500,
    cobblestone_target: int = 2500,
    websearch_per_class: int = 300,
) -> DatasetBundle:
    """Build one of the three training datasets.

    basic: 700 train / 300 val / 300 test per class from the source
    manifest alone.  minority_augmented: the basic pool with 500 validation
    images per class, the cobblestone training set topped up from websearch
    to ``cobblestone_target`` images and wet_asphalt extended with every
    available websearch record.  all_augmented: the basic pool plus up to
    ``websearch_per_class`` websearch records for every class.
    """
    val_count = (
        val_per_class_minority if recipe is RecipeId.minority_augmented else val_per_class
    )
    bundle = split(
        source,
        SplitSpec(
            test_per_class=test_per_class,
            val_per_class=val_count,
            train_per_class=train_per_class,
            seed=seed,
        ),
    )

    extra: list[SampleRecord] = []
    if recipe is RecipeId.minority_augmented:
        cobble_have = class_counts(bundle.train)[SurfaceClass.cobblestone]
        extra += _websearch_pick(
            websearch,
            SurfaceClass.cobblestone,
            max(0, cobblestone_target - cobble_have),
            seed,
        )
        extra += _websearch_pick(websearch, SurfaceClass.wet_asphalt, None, seed)
    elif recipe is RecipeId.all_augmented:
        for cls in SurfaceClass:
            extra += _websearch_pick(websearch, cls, websearch_per_class, seed)

    train = bundle.train
    if extra:
        train = _sorted_manifest("train", list(bundle.train.records) + extra)
    return DatasetBundle(
        train=train, val=bundle.val, test=bundle.test, recipe=recipe, seed=seed
    )


def sequence_leaks(bundle: DatasetBundle, source: Manifest) -> dict[SurfaceClass, set[str]]:
    """Test-vs-train/val sequence overlaps, per class with >= 2 source sequences."""
    leaks: dict[SurfaceClass, set[str]] = {}
    for cls in SurfaceClass:
        if len(_class_sequences(source, cls)) < 2:
            continue
        test_seqs = {r.sequence_id for r in bundle.test.records if r.label is cls}
        rest_seqs = {
            r.sequence_id
            for m in (bundle.train, bundle.val)
            for r in m.records
            if r.label is cls
        }
        overlap = test_seqs & rest_seqs
        if overlap:
            leaks[cls] = overlap
    return leaks


def save_bundle(bundle: DatasetBundle, out_dir: str | Path) -> None:
    """Persist a bundle as three manifest CSVs plus a JSON sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for split_name in ("train", "val", "test"):
        save_manifest(getattr(bundle, split_name), out_dir / f"{split_name}.csv")
    sidecar = {
        "recipe": bundle.recipe.value,
        "seed": bundle.seed,
        "counts": {
            split_name: {
                cls.name: n
                for cls, n in class_counts(getattr(bundle, split_name)).items()
            }
            for split_name in ("train", "val", "test")
        },
    }
    (out_dir / "bundle.json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )


def load_bundle(out_dir: str | Path) -> DatasetBundle:
    """Load a bundle persisted by :func:`save_bundle`."""
    out_dir = Path(out_dir)
    sidecar = json.loads((out_dir / "bundle.json").read_text(encoding="utf-8"))
    return DatasetBundle(
        train=load_manifest(out_dir / "train.csv"),
        val=load_manifest(out_dir / "val.csv"),
        test=load_manifest(out_dir / "test.csv"),
        recipe=RecipeId(sidecar["recipe"]),
        seed=int(sidecar["seed"]),
    )
