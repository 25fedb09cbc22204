"""Train both mini architectures on synthetic textures and compare them.

The full pipeline at desk scale: generate data, build a sequence-aware
bundle, train with per-batch geometric augmentation, label smoothing, and
early stopping, then report confusion matrices and per-class
precision/recall on the held-out test split.

Expect a few minutes per model on a laptop CPU.

Usage: python demos/03_train_and_evaluate.py [out_dir]
"""

import sys
import time
from pathlib import Path

from surface_bench import imaging, metrics, models, recipes, synth, training
from surface_bench.augment import AugmentSpec

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/demo_train")
SEED = 42

spec = synth.SynthSpec(seed=SEED, sequences_per_class=6, frames_per_sequence=60, image_size=64)
manifest = synth.generate(spec, out_dir / "data")
bundle = recipes.split(
    manifest,
    recipes.SplitSpec(test_per_class=60, val_per_class=60, train_per_class=200, seed=SEED),
)
recipes.save_bundle(bundle, out_dir / "bundle")

stores = {
    name: imaging.load_patches(getattr(bundle, name), out_dir / "data", 64)
    for name in ("train", "val", "test")
}
mean, std = imaging.channel_stats(stores["train"].images)
for store in stores.values():
    store.mean, store.std = mean, std
print(f"data ready: {len(stores['train'])} train / {len(stores['val'])} val / {len(stores['test'])} test")

config = training.TrainConfig(
    learning_rate=0.02,
    momentum=0.9,
    batch_size=48,
    max_epochs=8,
    patience=3,
    seed=SEED,
    augment=AugmentSpec(master_seed=SEED),
)

for family in (models.ModelSpec.mini_resnet, models.ModelSpec.mini_inception):
    model_spec = family(init_seed=SEED)
    model = models.build_model(model_spec)
    print(f"\n=== {model_spec.family} ({model.num_parameters()} parameters) ===")
    start = time.time()
    model, history = training.train(model, stores["train"], stores["val"], config)
    print(f"trained {history.stopped_epoch} epochs in {time.time() - start:.0f}s, best epoch {history.best_epoch}")
    for e in history.epochs:
        print(f"  epoch {e.epoch}: train {e.train_acc:.3f}  loss {e.train_loss:.3f}  val {e.val_acc:.3f}")

    ckpt = out_dir / f"{model_spec.family}.ckpt"
    models.save_checkpoint(
        model,
        ckpt,
        extra_meta={"normalization": {"mean": mean.tolist(), "std": std.tolist()}, "image_size": 64},
    )
    history.to_csv(out_dir / f"{model_spec.family}_history.csv")

    report = metrics.build_eval_report(model, stores["test"], batch_size=48)
    print(report.text_table())
    report.to_json(out_dir / f"{model_spec.family}_report.json")
    report.confusion.to_csv(out_dir / f"{model_spec.family}_confusion.csv")

print(f"\nartifacts in {out_dir}")
