"""Dataset engineering walkthrough: imbalance, subsampling, the three recipes.

Builds a manifest shaped like the real composed dataset (10273 asphalt
down to 1082 cobblestone), shows the imbalance ratio, demonstrates
per-sequence subsampling, and assembles the three training recipes with
sequence-aware splits.

Usage: python demos/02_dataset_recipes.py
"""

from surface_bench.recipes import (
    RecipeId,
    SubsampleSpec,
    build_recipe,
    sequence_leaks,
    subsample,
)
from surface_bench.taxonomy import (
    Manifest,
    SampleRecord,
    SourceId,
    SurfaceClass,
    class_counts,
    imbalance_ratio,
)


def shaped_manifest(counts, sequences_per_class=5, name="demo"):
    records = []
    for cls, total in counts.items():
        per_seq, extra = divmod(total, sequences_per_class)
        for s in range(sequences_per_class):
            seq_id = f"{cls.name}_s{s}"
            for t in range(per_seq + (1 if s < extra else 0)):
                records.append(
                    SampleRecord(f"{cls.name}/s{s}/{t:05d}.png", cls, SourceId.kitti, seq_id, t)
                )
    return Manifest(name, tuple(records))


# The composed multi-source dataset is heavily imbalanced: the majority
# class has ~9.5x the samples of the minority class.
totals = {
    SurfaceClass.asphalt: 10273,
    SurfaceClass.dirt: 8547,
    SurfaceClass.grass: 2887,
    SurfaceClass.wet_asphalt: 3668,
    SurfaceClass.cobblestone: 1082,
    SurfaceClass.snow: 3075,
}
source = shaped_manifest(totals)
print("class counts:", {c.name: n for c, n in class_counts(source).items()})
print(f"imbalance ratio: {imbalance_ratio(source):.4f}  (~10:1)")

# Consecutive frames of one recording barely differ, so sequences are
# thinned to every n-th frame before any split.
ten_frames = shaped_manifest({SurfaceClass.asphalt: 10}, sequences_per_class=1)
thinned = subsample(ten_frames, SubsampleSpec(target_frames_per_sequence=5))
print("\nsubsample 10-frame sequence to ~5:", [r.frame_index for r in thinned.records])

# Recipes.  At the exact published totals the smallest class cannot fill
# 300 test + 300 val + 700 train, so this demo doubles every class
# proportionally (same shape, same ratio).
source2 = shaped_manifest({c: 2 * n for c, n in totals.items()})
websearch = Manifest(
    "websearch",
    tuple(
        SampleRecord(f"web/{cls.name}/{i:04d}.png", cls, SourceId.websearch, f"web/{cls.name}/{i:04d}.png", 0)
        for cls in SurfaceClass
        for i in range(2000)
    ),
)

for recipe in RecipeId:
    bundle = build_recipe(source2, websearch, recipe, seed=0)
    train_counts = class_counts(bundle.train)
    val_counts = class_counts(bundle.val)
    leaks = sequence_leaks(bundle, source2)
    print(f"\n{recipe.value}:")
    print("  train:", {c.name: n for c, n in train_counts.items()})
    print(f"  val per class: {val_counts[SurfaceClass.asphalt]},  test per class: 300")
    print(f"  test/train sequence leaks: {len(leaks)}")
