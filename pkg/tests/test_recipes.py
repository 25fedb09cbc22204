import math

import pytest

from helpers import make_manifest, reference_manifest, websearch_manifest
from surface_bench.errors import SplitError
from surface_bench.recipes import (
    DatasetBundle,
    RecipeId,
    SplitSpec,
    SubsampleSpec,
    build_recipe,
    load_bundle,
    save_bundle,
    sequence_leaks,
    split,
    subsample,
)
from surface_bench.taxonomy import (
    Manifest,
    SampleRecord,
    SourceId,
    SurfaceClass,
    class_counts,
)


def single_sequence(length, cls=SurfaceClass.asphalt, seq="s0"):
    return Manifest(
        "m",
        tuple(
            SampleRecord(f"{seq}/f{t:03d}.png", cls, SourceId.kitti, seq, t)
            for t in range(length)
        ),
    )


def stride_rule(length, target):
    n = math.ceil(length / target)
    return [i for i in range(length) if i % n == 0]


class TestSubsample:
    def test_ten_frames_target_five(self):
        kept = subsample(single_sequence(10), SubsampleSpec(5))
        assert [r.frame_index for r in kept.records] == [0, 2, 4, 6, 8]

    def test_target_at_least_length_is_identity(self):
        manifest = single_sequence(7)
        kept = subsample(manifest, SubsampleSpec(7))
        assert kept.records == manifest.records
        kept = subsample(manifest, SubsampleSpec(50))
        assert kept.records == manifest.records

    def test_seven_frames_target_three(self):
        kept = subsample(single_sequence(7), SubsampleSpec(3))
        assert [r.frame_index for r in kept.records] == [0, 3, 6]

    @pytest.mark.parametrize("length", [7, 10, 100])
    @pytest.mark.parametrize("target", [3, 5, 10])
    def test_matches_stride_rule(self, length, target):
        kept = subsample(single_sequence(length), SubsampleSpec(target))
        assert [r.frame_index for r in kept.records] == stride_rule(length, target)

    def test_order_preserved_across_sequences(self):
        manifest = make_manifest({cls: 12 for cls in SurfaceClass}, 2)
        kept = subsample(manifest, SubsampleSpec(3))
        positions = {r.image_path: i for i, r in enumerate(manifest.records)}
        ranks = [positions[r.image_path] for r in kept.records]
        assert ranks == sorted(ranks)


class TestSplit:
    def test_two_long_sequences_test_from_one(self):
        records = []
        for seq in ("A", "B"):
            for t in range(400):
                records.append(
                    SampleRecord(
                        f"{seq}/{t:04d}.png",
                        SurfaceClass.asphalt,
                        SourceId.robocar,
                        seq,
                        t,
                    )
                )
        others = make_manifest(
            {cls: 800 for cls in SurfaceClass if cls is not SurfaceClass.asphalt}, 4
        )
        manifest = Manifest("m", tuple(records) + others.records)
        spec = SplitSpec(test_per_class=300, val_per_class=0, train_per_class=100, seed=3)
        bundle = split(manifest, spec)
        test_seqs = {r.sequence_id for r in bundle.test.records if r.label is SurfaceClass.asphalt}
        train_seqs = {r.sequence_id for r in bundle.train.records if r.label is SurfaceClass.asphalt}
        assert len(test_seqs) == 1
        assert test_seqs.isdisjoint(train_seqs)

    def test_deterministic_under_seed(self):
        manifest = make_manifest({cls: 60 for cls in SurfaceClass}, 3)
        spec = SplitSpec(20, 10, 20, seed=11)
        a = split(manifest, spec)
        b = split(manifest, spec)
        assert a.train.records == b.train.records
        assert a.val.records == b.val.records
        assert a.test.records == b.test.records

    def test_different_seed_changes_split(self):
        manifest = make_manifest({cls: 60 for cls in SurfaceClass}, 3)
        a = split(manifest, SplitSpec(20, 10, 20, seed=1))
        b = split(manifest, SplitSpec(20, 10, 20, seed=2))
        assert a.train.records != b.train.records

    def test_shortfall_names_class_and_amount(self):
        counts = {cls: 400 for cls in SurfaceClass}
        counts[SurfaceClass.snow] = 250
        manifest = make_manifest(counts, 2)
        with pytest.raises(SplitError, match="snow") as err:
            split(manifest, SplitSpec(300, 0, 0, seed=0))
        assert "50" in str(err.value)

    def test_record_order_invariance(self):
        manifest = make_manifest({cls: 50 for cls in SurfaceClass}, 3)
        shuffled = Manifest(
            manifest.name,
            tuple(sorted(manifest.records, key=lambda r: (r.frame_index, r.sequence_id))),
        )
        spec = SplitSpec(15, 10, 20, seed=5)
        a = split(manifest, spec)
        b = split(shuffled, spec)
        assert a.train.records == b.train.records
        assert a.test.records == b.test.records

    def test_exact_counts_and_disjoint_paths(self):
        manifest = make_manifest({cls: 80 for cls in SurfaceClass}, 4)
        bundle = split(manifest, SplitSpec(20, 15, 30, seed=9))
        for split_name, expected in (("test", 20), ("val", 15), ("train", 30)):
            counts = class_counts(getattr(bundle, split_name))
            assert all(v == expected for v in counts.values()), split_name
        paths = [
            {r.image_path for r in m.records}
            for m in (bundle.train, bundle.val, bundle.test)
        ]
        assert not (paths[0] & paths[1] or paths[0] & paths[2] or paths[1] & paths[2])

    def test_no_sequence_leaks_with_multiple_sequences(self):
        manifest = make_manifest({cls: 90 for cls in SurfaceClass}, 5)
        bundle = split(manifest, SplitSpec(25, 20, 30, seed=2))
        assert sequence_leaks(bundle, manifest) == {}

    def test_single_sequence_class_splits_within_sequence(self):
        manifest = single_sequence(100)
        counts = {cls: 60 for cls in SurfaceClass if cls is not SurfaceClass.asphalt}
        other = make_manifest(counts, 2)
        merged = Manifest("m", manifest.records + other.records)
        bundle = split(merged, SplitSpec(20, 10, 20, seed=0))
        assert class_counts(bundle.test)[SurfaceClass.asphalt] == 20
        # the one asphalt sequence necessarily appears on both sides
        assert sequence_leaks(bundle, merged) == {}


class TestBuildRecipe:
    def test_exact_reference_totals_are_infeasible_for_basic(self):
        # at the published totals the smallest class (1082 samples) cannot
        # fill 300 test + 300 val + 700 train; the honest outcome is a
        # shortfall error naming it
        with pytest.raises(SplitError, match="cobblestone"):
            build_recipe(
                reference_manifest(scale=1), websearch_manifest(0), RecipeId.basic, seed=1
            )

    def test_basic_reference_counts(self):
        bundle = build_recipe(
            reference_manifest(scale=2), websearch_manifest(0), RecipeId.basic, seed=1
        )
        assert all(v == 700 for v in class_counts(bundle.train).values())
        assert all(v == 300 for v in class_counts(bundle.val).values())
        assert all(v == 300 for v in class_counts(bundle.test).values())

    def test_all_augmented_adds_300_per_class(self):
        source = reference_manifest(scale=2)
        basic = build_recipe(source, websearch_manifest(0), RecipeId.basic, seed=1)
        extended = build_recipe(
            source, websearch_manifest(300), RecipeId.all_augmented, seed=1
        )
        base_counts = class_counts(basic.train)
        ext_counts = class_counts(extended.train)
        for cls in SurfaceClass:
            assert ext_counts[cls] == base_counts[cls] + 300
        websearch_in_train = [
            r for r in extended.train.records if r.source is SourceId.websearch
        ]
        assert len(websearch_in_train) == 1800

    def test_all_augmented_caps_at_available(self):
        extended = build_recipe(
            reference_manifest(scale=2), websearch_manifest(120), RecipeId.all_augmented, seed=1
        )
        assert all(v == 820 for v in class_counts(extended.train).values())

    def test_minority_augmented_targets(self):
        ws = websearch_manifest(2000)
        bundle = build_recipe(reference_manifest(scale=2), ws, RecipeId.minority_augmented, seed=4)
        counts = class_counts(bundle.train)
        assert counts[SurfaceClass.cobblestone] == 2500
        assert counts[SurfaceClass.wet_asphalt] == 700 + 2000  # all available
        for cls in (SurfaceClass.asphalt, SurfaceClass.dirt, SurfaceClass.grass, SurfaceClass.snow):
            assert counts[cls] == 700
        assert all(v == 500 for v in class_counts(bundle.val).values())

    def test_minority_augmented_empty_websearch_matches_basic_but_val(self):
        source = reference_manifest(scale=2)
        basic = build_recipe(source, websearch_manifest(0), RecipeId.basic, seed=2)
        minority = build_recipe(
            source, websearch_manifest(0), RecipeId.minority_augmented, seed=2
        )
        assert class_counts(minority.train) == class_counts(basic.train)
        assert all(v == 500 for v in class_counts(minority.val).values())
        assert all(v == 300 for v in class_counts(basic.val).values())

    def test_same_seed_same_test_set_across_recipes(self):
        source = reference_manifest(scale=2)
        a = build_recipe(source, websearch_manifest(0), RecipeId.basic, seed=6)
        b = build_recipe(source, websearch_manifest(300), RecipeId.all_augmented, seed=6)
        assert a.test.records == b.test.records


def test_bundle_rejects_overlapping_paths():
    manifest = make_manifest({cls: 10 for cls in SurfaceClass}, 1)
    with pytest.raises(SplitError, match="share"):
        DatasetBundle(
            train=manifest, val=manifest, test=Manifest("t", ()), recipe=RecipeId.basic, seed=0
        )


def test_bundle_save_load_round_trip(tmp_path):
    bundle = build_recipe(
        make_manifest({cls: 50 for cls in SurfaceClass}, 3),
        websearch_manifest(5),
        RecipeId.all_augmented,
        seed=3,
        test_per_class=10,
        val_per_class=10,
        train_per_class=20,
        websearch_per_class=5,
    )
    save_bundle(bundle, tmp_path / "bundle")
    loaded = load_bundle(tmp_path / "bundle")
    assert loaded.train.records == bundle.train.records
    assert loaded.val.records == bundle.val.records
    assert loaded.test.records == bundle.test.records
    assert loaded.recipe is bundle.recipe
    assert loaded.seed == bundle.seed
    sidecar = (tmp_path / "bundle" / "bundle.json").read_text()
    assert '"recipe": "all_augmented"' in sidecar
