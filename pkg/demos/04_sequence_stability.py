"""Per-sequence stability analysis of a trained classifier.

Frame-by-frame classification of whole recorded sequences (no tracking,
no temporal smoothing), reporting prediction switches and how
misclassifications cluster into runs of consecutive frames — the failure
mode that matters when a controller consumes the predictions.

Runs demo 03 first if its checkpoint is missing.

Usage: python demos/04_sequence_stability.py [out_dir_of_demo_03]
"""

import subprocess
import sys
from pathlib import Path

import numpy as np

from surface_bench import imaging, metrics, models
from surface_bench.nn.checkpoint import read_checkpoint
from surface_bench.taxonomy import SurfaceClass, load_manifest

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/demo_train")
ckpt = out_dir / "mini_resnet.ckpt"
if not ckpt.is_file():
    print("checkpoint missing; running demo 03 first...")
    subprocess.run([sys.executable, "demos/03_train_and_evaluate.py", str(out_dir)], check=True)

model = models.load_checkpoint(ckpt)
manifest = load_manifest(out_dir / "bundle" / "test.csv")
store = imaging.load_patches(manifest, out_dir / "data", 64)

# normalization statistics travel with the training run
run_meta, _ = read_checkpoint(ckpt)
norm = run_meta.get("normalization")
if norm:
    store.mean = np.asarray(norm["mean"])
    store.std = np.asarray(norm["std"])

by_sequence: dict[str, list[int]] = {}
for i, seq in enumerate(store.sequence_ids):
    by_sequence.setdefault(seq, []).append(i)

print(f"{'sequence':<22}{'truth':<13}{'frames':>7}{'switches':>9}{'errors':>8}  error runs")
worst = []
for seq_id, indices in sorted(by_sequence.items()):
    report = metrics.sequence_report(model, store.subset(indices))
    runs = ", ".join(f"{length}x{count}" for length, count in sorted(report.error_runs.items())) or "-"
    print(
        f"{seq_id:<22}{SurfaceClass(report.truth).name:<13}{report.frames:>7}"
        f"{report.switch_count:>9}{report.error_frames:>8}  {runs}"
    )
    worst.append((report.error_frames, seq_id, report))

worst.sort(reverse=True)
errors, seq_id, report = worst[0]
print(f"\nleast stable sequence: {seq_id} ({errors} misclassified frames)")
print("frame-by-frame:", " ".join(SurfaceClass(p).name[:2] for p in report.predictions))
if errors:
    print("(misclassification clusters into groups of adjacent frames rather than flickering at random)")
else:
    print("(every sequence classified perfectly on this run; crank down training epochs to see error runs)")
