"""Datasets: synthetic 2-D classification tasks, balanced splits, and readers
for the CIFAR binary batch and IDX file layouts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .rng import Rng

CIFAR_RECORD = 3073
CIFAR_PIXELS = 3072


class InsufficientData(ValueError):
    pass


class FormatError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    splits: dict[str, np.ndarray] = field(default_factory=dict)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def standardize(self, X: np.ndarray) -> np.ndarray:
        if self.mean is None:
            return X
        return (X - self.mean) / self.std

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Standardized features and labels of one split."""
        idx = self.splits[name]
        return self.standardize(self.features[idx]), self.labels[idx]


def generate_synthetic(kind: str, n_per_class: int, classes: int, noise: float,
                       rng: Rng, radius: float = 3.0, turns: float = 1.0) -> Dataset:
    """2-D point clouds with isotropic gaussian noise of std ``noise``.

    ``spirals``: ``classes`` interleaved Archimedean arms, each sweeping
    ``turns`` revolutions out to ``radius``. ``gaussians``: one blob per class
    with centroids on a circle of ``radius``. ``moons``: two interleaved
    half circles of ``radius``.
    """
    if n_per_class < 1 or classes < 1:
        raise ConfigError("n_per_class and classes must be >= 1")
    if noise < 0:
        raise ConfigError("noise must be >= 0")
    if kind == "moons" and classes != 2:
        raise ConfigError("moons requires exactly 2 classes")
    if kind not in ("spirals", "gaussians", "moons"):
        raise ConfigError(f"unknown dataset kind {kind!r}")

    pts, labels = [], []
    for c in range(classes):
        if kind == "spirals":
            t = rng.uniform(0.0, 1.0, n_per_class)
            angle = 2 * np.pi * (c / classes + turns * t)
            xy = radius * np.column_stack([t * np.cos(angle), t * np.sin(angle)])
        elif kind == "gaussians":
            angle = 2 * np.pi * c / classes
            xy = radius * np.tile([np.cos(angle), np.sin(angle)], (n_per_class, 1))
        else:
            t = rng.uniform(0.0, np.pi, n_per_class)
            if c == 0:
                xy = radius * np.column_stack([np.cos(t), np.sin(t)])
            else:
                xy = radius * np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
        xy = xy + noise * rng.standard_normal(xy.shape)
        pts.append(xy)
        labels.append(np.full(n_per_class, c))
    return Dataset(np.concatenate(pts), np.concatenate(labels).astype(np.int64))


def split_balanced(data: Dataset, val_per_class: int, test_per_class: int, rng: Rng) -> Dataset:
    """Draw exactly ``val_per_class`` (and ``test_per_class``) examples of every
    class without replacement; the rest is the training split. Standardization
    statistics come from the training split only."""
    val, test, train = [], [], []
    for c in range(data.num_classes):
        idx = np.flatnonzero(data.labels == c)
        need = val_per_class + test_per_class
        if len(idx) < need + 1:
            raise InsufficientData(
                f"class {c} has {len(idx)} examples; need at least {need + 1}")
        perm = rng.permutation(idx)
        val.append(perm[:val_per_class])
        test.append(perm[val_per_class:need])
        train.append(perm[need:])
    splits = {name: np.sort(np.concatenate(parts)).astype(np.int64)
              for name, parts in (("train", train), ("val", val), ("test", test))}
    tr = data.features[splits["train"]]
    mean = tr.mean(axis=0)
    std = tr.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return replace(data, splits=splits, mean=mean, std=std)


def default_task(seed: int = 0) -> Dataset:
    """3-class spirals, 500 train + 100 val + 100 test per class, noise 0.15."""
    from .rng import derive_seed, make_rng

    raw = generate_synthetic("spirals", 700, 3, 0.15, make_rng(derive_seed(seed, "points")))
    return split_balanced(raw, 100, 100, make_rng(derive_seed(seed, "split")))


def second_task(seed: int = 0) -> Dataset:
    """A different task for the same harness: 4 noisy gaussian blobs."""
    from .rng import derive_seed, make_rng

    raw = generate_synthetic("gaussians", 700, 4, 1.5, make_rng(derive_seed(seed, "points")))
    return split_balanced(raw, 100, 100, make_rng(derive_seed(seed, "split")))


# -- binary image formats -----------------------------------------------------

_IDX_TYPES = {
    0x08: np.dtype(">u1"), 0x09: np.dtype(">i1"), 0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"), 0x0D: np.dtype(">f4"), 0x0E: np.dtype(">f8"),
}


def read_idx(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError("file shorter than the IDX magic number", len(raw))
    if raw[0] != 0 or raw[1] != 0:
        raise FormatError("IDX magic must start with two zero bytes", 0)
    if raw[2] not in _IDX_TYPES:
        raise FormatError(f"unknown IDX element type 0x{raw[2]:02x}", 2)
    dtype = _IDX_TYPES[raw[2]]
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"truncated IDX header for {ndim} dimensions", len(raw))
    dims = tuple(int.from_bytes(raw[4 + 4 * i:8 + 4 * i], "big") for i in range(ndim))
    expected = header + int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(f"IDX payload length mismatch: expected {expected} bytes, got {len(raw)}",
                          min(len(raw), expected))
    return np.frombuffer(raw, dtype=dtype, offset=header).reshape(dims)


def load_image_binary(path: str | Path, format: str, labels_path: str | Path | None = None) -> Dataset:
    """Read images as flattened features in [0, 1].

    ``format="cifar-batch"``: records of 1 label byte + 3,072 pixel bytes.
    ``format="idx"``: an IDX image file; labels come from ``labels_path`` (an
    IDX vector) when given, else all zero.
    """
    if format == "cifar-batch":
        raw = Path(path).read_bytes()
        if len(raw) == 0 or len(raw) % CIFAR_RECORD:
            whole = len(raw) - len(raw) % CIFAR_RECORD
            raise FormatError(f"length {len(raw)} is not a multiple of {CIFAR_RECORD}", whole)
        rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        labels = rec[:, 0].astype(np.int64)
        return Dataset(rec[:, 1:].astype(np.float64) / 255.0, labels)
    if format == "idx":
        images = read_idx(path)
        if images.ndim < 2:
            raise FormatError("IDX image file needs at least 2 dimensions", 3)
        feats = images.reshape(images.shape[0], -1).astype(np.float64)
        if images.dtype.kind == "u" and images.dtype.itemsize == 1:
            feats /= 255.0
        if labels_path is not None:
            labels = read_idx(labels_path).astype(np.int64).ravel()
            if len(labels) != len(feats):
                raise FormatError(f"{len(labels)} labels for {len(feats)} images", 4)
        else:
            labels = np.zeros(len(feats), dtype=np.int64)
        return Dataset(feats, labels)
    raise ConfigError(f"unknown image format {format!r}")
