"""Desk-scale datasets, the balanced split rule, and binary image readers.

Run: python notebooks/04_data.py
"""

import tempfile
from pathlib import Path

import numpy as np

from actevo.data import default_task, generate_synthetic, load_image_binary, second_task, split_balanced
from actevo.rng import make_rng

d = default_task(0)
print("default task:", {k: len(v) for k, v in d.splits.items()}, "classes", d.num_classes)
print("val labels:", np.bincount(d.labels[d.splits["val"]]))
print("second task classes:", second_task(0).num_classes)

moons = split_balanced(generate_synthetic("moons", 200, 2, 0.1, make_rng(1)), 20, 0, make_rng(2))
X, y = moons.split("train")
print("moons train mean/std:", X.mean(axis=0).round(12), X.std(axis=0).round(6))

# A CIFAR-style batch: one label byte then 3,072 pixel bytes per record.
with tempfile.TemporaryDirectory() as tmp:
    rec = make_rng(0).integers(0, 256, size=(5, 3073), dtype=np.uint8)
    rec[:, 0] %= 10
    path = Path(tmp) / "batch.bin"
    path.write_bytes(rec.tobytes())
    cifar = load_image_binary(path, "cifar-batch")
    print("cifar batch:", cifar.features.shape, "labels", cifar.labels)
