"""Command-line entry point chaining all pipeline stages.

Subcommands: synth, stats, recipe, train, eval, seq-eval, infer.  Exit
codes: 0 success, 1 usage error, 2 data/validation error.  Flag values
override the JSON config file (--config), which overrides the built-in
defaults (the published training parameters: lr 3e-5, batch 48, smoothing
0.1, rotation bound 40 degrees, scale 0.9-1.1, 300 test images per class).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import imaging, metrics, models, recipes, synth, taxonomy, training
from .augment import AugmentSpec
from .errors import SurfaceBenchError
from .nn.checkpoint import read_checkpoint
from .recipes import RecipeId
from .taxonomy import SourceId, SurfaceClass

RECIPE_NAMES = {
    "basic": RecipeId.basic,
    "minority": RecipeId.minority_augmented,
    "all": RecipeId.all_augmented,
}

THREADS_ENV = "SURFACE_BENCH_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit code 1, not argparse's 2
        raise UsageError(message)


def _default_config() -> dict:
    return {
        "seed": 0,
        "recipe": "basic",
        "image_size": 64,
        "manifest": None,
        "websearch_manifest": None,
        "roi": None,
        "model": models.ModelSpec.mini_resnet().to_dict(),
        "train": {
            "learning_rate": 3e-5,
            "momentum": 0.0,
            "batch_size": 48,
            "smoothing_epsilon": 0.1,
            "max_epochs": 20,
            "patience": 5,
            "min_delta": 0.001,
            "seed": 0,
            "augment": {
                "mirror_probability": 0.5,
                "rotation_bound": 40.0,
                "scale_range": [0.9, 1.1],
                "master_seed": 0,
            },
        },
        "split": {"test_per_class": 300, "val_per_class": 300, "train_per_class": 700},
    }


def _deep_update(base: dict, overrides: dict) -> dict:
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _resolve_config(args: argparse.Namespace) -> dict:
    cfg = _default_config()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise SurfaceBenchError(f"config file not found: {path}")
        _deep_update(cfg, json.loads(path.read_text(encoding="utf-8")))
    if getattr(args, "model", None):
        if cfg["model"]["family"] != args.model:
            if args.model == models.MINI_RESNET:
                cfg["model"] = models.ModelSpec.mini_resnet().to_dict()
            else:
                cfg["model"] = models.ModelSpec.mini_inception().to_dict()
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
        cfg["train"]["seed"] = args.seed
        cfg["train"]["augment"]["master_seed"] = args.seed
        cfg["model"]["init_seed"] = args.seed
    for attr, path_keys in (
        ("manifest", ("manifest",)),
        ("websearch_manifest", ("websearch_manifest",)),
        ("recipe", ("recipe",)),
        ("image_size", ("image_size",)),
        ("lr", ("train", "learning_rate")),
        ("momentum", ("train", "momentum")),
        ("batch_size", ("train", "batch_size")),
        ("epochs", ("train", "max_epochs")),
        ("test_per_class", ("split", "test_per_class")),
        ("val_per_class", ("split", "val_per_class")),
        ("train_per_class", ("split", "train_per_class")),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            target = cfg
            for key in path_keys[:-1]:
                target = target[key]
            target[path_keys[-1]] = value
    return cfg


def _train_config(cfg: dict) -> training.TrainConfig:
    t = cfg["train"]
    a = t["augment"]
    return training.TrainConfig(
        learning_rate=float(t["learning_rate"]),
        momentum=float(t["momentum"]),
        batch_size=int(t["batch_size"]),
        smoothing_epsilon=float(t["smoothing_epsilon"]),
        max_epochs=int(t["max_epochs"]),
        patience=int(t["patience"]),
        min_delta=float(t["min_delta"]),
        seed=int(t["seed"]),
        augment=AugmentSpec(
            mirror_probability=float(a["mirror_probability"]),
            rotation_bound=float(a["rotation_bound"]),
            scale_range=(float(a["scale_range"][0]), float(a["scale_range"][1])),
            master_seed=int(a["master_seed"]),
        ),
    )


def _roi_spec(cfg: dict) -> imaging.RoiSpec | None:
    if cfg.get("roi") is None:
        return None
    rects = {
        SourceId.from_name(name): (
            float(r["x"]),
            float(r["y"]),
            float(r["w"]),
            float(r["h"]),
        )
        for name, r in cfg["roi"].items()
    }
    return imaging.RoiSpec(rects)


def _load_split_stores(cfg: dict, bundle: recipes.DatasetBundle, root: Path):
    roi = _roi_spec(cfg)
    size = int(cfg["image_size"])
    train_store = imaging.load_patches(bundle.train, root, size, roi)
    val_store = imaging.load_patches(bundle.val, root, size, roi)
    test_store = imaging.load_patches(bundle.test, root, size, roi)
    mean, std = imaging.channel_stats(train_store.images)
    for store in (train_store, val_store, test_store):
        store.mean = mean
        store.std = std
    return train_store, val_store, test_store, mean, std


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = synth.SynthSpec(
        seed=args.seed if args.seed is not None else 0,
        sequences_per_class=args.sequences_per_class,
        frames_per_sequence=args.frames_per_sequence,
        image_size=args.image_size if args.image_size is not None else 64,
    )
    manifest = synth.generate(spec, args.out)
    print(f"wrote {len(manifest)} frames to {args.out}")
    if args.websearch_per_class > 0:
        ws = synth.generate_websearch(spec, args.out, args.websearch_per_class)
        print(f"wrote {len(ws)} websearch images to {args.out}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    manifest = taxonomy.load_manifest(args.manifest_path)
    counts = taxonomy.class_counts(manifest)
    for cls in SurfaceClass:
        print(f"{cls.name:<14}{counts[cls]:>8}")
    print(f"{'total':<14}{len(manifest):>8}")
    ratio = taxonomy.imbalance_ratio(manifest)
    print(f"imbalance ratio: {ratio:.2f}")
    return 0


def _empty_websearch() -> taxonomy.Manifest:
    return taxonomy.Manifest(name="websearch", records=())


def _build_bundle(cfg: dict) -> recipes.DatasetBundle:
    if not cfg.get("manifest"):
        raise UsageError("--manifest is required")
    source = taxonomy.load_manifest(cfg["manifest"])
    websearch = (
        taxonomy.load_manifest(cfg["websearch_manifest"])
        if cfg.get("websearch_manifest")
        else _empty_websearch()
    )
    split = cfg["split"]
    return recipes.build_recipe(
        source,
        websearch,
        RECIPE_NAMES[cfg["recipe"]],
        int(cfg["seed"]),
        test_per_class=int(split["test_per_class"]),
        val_per_class=int(split["val_per_class"]),
        train_per_class=int(split["train_per_class"]),
    )


def _cmd_recipe(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    cfg["recipe"] = args.recipe_name
    bundle = _build_bundle(cfg)
    recipes.save_bundle(bundle, args.out)
    for split_name in ("train", "val", "test"):
        counts = taxonomy.class_counts(getattr(bundle, split_name))
        summary = ", ".join(f"{c.name}={n}" for c, n in counts.items())
        print(f"{split_name}: {summary}")
    print(f"bundle written to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = _build_bundle(cfg)
    recipes.save_bundle(bundle, out / "bundle")
    root = Path(cfg["manifest"]).parent
    train_store, val_store, test_store, mean, std = _load_split_stores(cfg, bundle, root)

    spec = models.ModelSpec.from_dict(cfg["model"])
    model = models.build_model(spec)
    config = _train_config(cfg)
    model, history = training.train(model, train_store, val_store, config)

    cfg["normalization"] = {"mean": mean.tolist(), "std": std.tolist()}
    (out / "runconfig.json").write_text(
        json.dumps(cfg, indent=2) + "\n", encoding="utf-8"
    )
    history.to_csv(out / "history.csv")
    models.save_checkpoint(
        model,
        out / "model.ckpt",
        extra_meta={
            "normalization": cfg["normalization"],
            "image_size": int(cfg["image_size"]),
        },
    )
    test_acc = training.evaluate_split(model, test_store, config.batch_size)
    print(
        f"stopped after epoch {history.stopped_epoch}, best epoch "
        f"{history.best_epoch} (val acc {history.epochs[history.best_epoch - 1].val_acc:.4f})"
    )
    print(f"test accuracy: {test_acc:.4f}")
    print(f"run artifacts in {out}")
    return 0


def _load_model_and_stats(
    checkpoint: str,
) -> tuple[models.Model, np.ndarray | None, np.ndarray | None, int]:
    meta, _ = read_checkpoint(checkpoint)
    model = models.load_checkpoint(checkpoint)
    norm = meta.get("normalization") or {}
    mean = np.asarray(norm["mean"]) if "mean" in norm else None
    std = np.asarray(norm["std"]) if "std" in norm else None
    return model, mean, std, int(meta.get("image_size", 224))


def _load_eval_store(args, cfg, model_size: int) -> imaging.PatchStore:
    manifest = taxonomy.load_manifest(args.manifest)
    root = Path(args.data_root) if args.data_root else Path(args.manifest).parent
    size = args.image_size if args.image_size is not None else model_size
    return imaging.load_patches(manifest, root, size, _roi_spec(cfg))


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    model, mean, std, size = _load_model_and_stats(args.checkpoint)
    store = _load_eval_store(args, cfg, size)
    store.mean, store.std = mean, std
    report = metrics.build_eval_report(model, store, batch_size=args.batch_size or 48)
    print(report.text_table())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.to_json(out / "report.json")
        report.confusion.to_csv(out / "confusion.csv")
        print(f"report written to {out}")
    return 0


def _cmd_seq_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    model, mean, std, size = _load_model_and_stats(args.checkpoint)
    store = _load_eval_store(args, cfg, size)
    store.mean, store.std = mean, std
    order = {}
    for i, seq in enumerate(store.sequence_ids):
        order.setdefault(seq, []).append(i)
    reports = []
    for seq, indices in sorted(order.items()):
        sub = store.subset(indices)
        rep = metrics.sequence_report(model, sub, batch_size=args.batch_size or 48)
        reports.append(rep)
        runs = ", ".join(f"{k}x{v}" for k, v in sorted(rep.error_runs.items())) or "none"
        print(
            f"{seq}: frames={rep.frames} switches={rep.switch_count} "
            f"errors={rep.error_frames} error-runs=[{runs}]"
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = [
            {
                "sequence_id": r.sequence_id,
                "truth": r.truth,
                "predictions": list(r.predictions),
                "confidences": list(r.confidences),
                "switch_count": r.switch_count,
                "error_runs": {str(k): v for k, v in sorted(r.error_runs.items())},
            }
            for r in reports
        ]
        (out / "sequences.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
        print(f"sequence report written to {out}")
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    model, mean, std, size = _load_model_and_stats(args.checkpoint)
    image = imaging.load_image(args.image)
    roi = _roi_spec(cfg)
    source = SourceId.from_name(args.source)
    rect = roi.rect_for(source) if roi is not None else imaging.FULL_FRAME
    patch = imaging.crop_and_resize(image, rect, size)
    x = imaging.normalize(patch, mean, std)[None]
    from .nn.loss import softmax

    probs = softmax(model.forward(x, train=False))[0]
    code = int(probs.argmax())
    print(f"{SurfaceClass(code).name} (confidence {probs[code]:.4f})")
    return 0


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "config": lambda: p.add_argument("--config", help="JSON config file"),
        "seed": lambda: p.add_argument("--seed", type=int),
        "manifest": lambda: p.add_argument("--manifest", help="source manifest CSV"),
        "websearch": lambda: p.add_argument(
            "--websearch-manifest", dest="websearch_manifest"
        ),
        "recipe": lambda: p.add_argument("--recipe", choices=sorted(RECIPE_NAMES)),
        "model": lambda: p.add_argument(
            "--model", choices=[models.MINI_RESNET, models.MINI_INCEPTION]
        ),
        "out": lambda: p.add_argument("--out", help="output directory"),
        "epochs": lambda: p.add_argument("--epochs", type=int),
        "batch_size": lambda: p.add_argument("--batch-size", dest="batch_size", type=int),
        "lr": lambda: p.add_argument("--lr", type=float),
        "image_size": lambda: p.add_argument(
            "--image-size", dest="image_size", type=int
        ),
        "splits": lambda: (
            p.add_argument("--test-per-class", dest="test_per_class", type=int),
            p.add_argument("--val-per-class", dest="val_per_class", type=int),
            p.add_argument("--train-per-class", dest="train_per_class", type=int),
        ),
    }
    for name in names:
        flags[name]()


def build_parser() -> _Parser:
    parser = _Parser(prog="surface-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic texture dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--sequences-per-class", type=int, default=2)
    p.add_argument("--frames-per-sequence", type=int, default=10)
    p.add_argument("--websearch-per-class", type=int, default=0)
    _add_common(p, "seed", "image_size")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("stats", help="class counts and imbalance ratio")
    p.add_argument("manifest_path", help="manifest CSV")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("recipe", help="build one of the three dataset recipes")
    p.add_argument("recipe_name", choices=sorted(RECIPE_NAMES))
    p.add_argument("--out", required=True)
    _add_common(p, "config", "seed", "manifest", "websearch", "splits")
    p.set_defaults(func=_cmd_recipe)

    p = sub.add_parser("train", help="build a recipe and train a model on it")
    p.add_argument("--out", required=True)
    _add_common(
        p,
        "config",
        "seed",
        "manifest",
        "websearch",
        "recipe",
        "model",
        "epochs",
        "batch_size",
        "lr",
        "image_size",
        "splits",
    )
    p.add_argument("--momentum", type=float)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="confusion matrix and precision/recall")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", dest="data_root", help="image root if not the manifest's directory")
    _add_common(p, "config", "out", "batch_size", "image_size")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("seq-eval", help="per-sequence stability report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", dest="data_root", help="image root if not the manifest's directory")
    _add_common(p, "config", "out", "batch_size", "image_size")
    p.set_defaults(func=_cmd_seq_eval)

    p = sub.add_parser("infer", help="classify a single image")
    p.add_argument("image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", default="synthetic", help="roi table entry to apply")
    _add_common(p, "config")
    p.set_defaults(func=_cmd_infer)

    return parser


def _apply_thread_cap() -> None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return
    try:
        limit = max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    import threadpoolctl

    threadpoolctl.threadpool_limits(limits=limit)


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        _apply_thread_cap()
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)
    except SurfaceBenchError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
