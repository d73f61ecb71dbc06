"""Datasets: a synthetic cluster generator and an IDX file reader."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from ..seeding import derive_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, dim)
    labels: np.ndarray  # (n,) integer class ids
    provenance: str = "synthetic"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.inputs.ndim != 2 or len(self.labels) != len(self.inputs):
            raise InputError("inputs must be (n, dim) with one label per row")
        if len(self.inputs) < 1:
            raise InputError("dataset must not be empty")
        if self.labels.min() < 0:
            raise InputError("labels must be nonnegative class ids")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


def generate_cluster_data(n_per_class: int, n_classes: int, dim: int, seed: int = 0) -> Dataset:
    """Gaussian blobs: per class, a center uniform in [0, 10)^dim and
    samples center + 0.5 * standard normal noise."""
    if n_per_class < 1 or n_classes < 1 or dim < 1:
        raise InputError("n_per_class, n_classes and dim must all be positive")
    rng = derive_rng(seed, "cluster-data")
    xs, ys = [], []
    for i in range(n_classes):
        center = rng.uniform(0.0, 10.0, dim)
        xs.append(rng.standard_normal((n_per_class, dim)) * 0.5 + center)
        ys.extend([i] * n_per_class)
    return Dataset(np.vstack(xs), np.asarray(ys), provenance=f"synthetic-clusters(seed={seed})")


class IdxBadMagic(InputError):
    pass


class IdxTruncated(InputError):
    pass


class IdxCountMismatch(InputError):
    pass


def _read_exact(fh, count: int, path, what: str) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise IdxTruncated(f"{path}: truncated {what} (wanted {count} bytes, got {len(buf)})")
    return buf


def load_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image/label file pair (big-endian headers, byte payload).

    Images: magic 0x00000803, then count/rows/cols as 32-bit big-endian, then
    unsigned pixel bytes in row-major order, scaled here to [0, 1]. Labels:
    magic 0x00000801, count, label bytes. The two counts must agree.
    """
    with open(images_path, "rb") as fh:
        header = _read_exact(fh, 16, images_path, "image header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise IdxBadMagic(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        payload = _read_exact(fh, count * rows * cols, images_path, "pixel payload")
    images = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)

    with open(labels_path, "rb") as fh:
        header = _read_exact(fh, 8, labels_path, "label header")
        magic, label_count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise IdxBadMagic(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        labels = _read_exact(fh, label_count, labels_path, "label payload")

    if label_count != count:
        raise IdxCountMismatch(
            f"count mismatch: {count} images in {images_path} but "
            f"{label_count} labels in {labels_path}"
        )
    return Dataset(
        images.astype(float) / 255.0,
        np.frombuffer(labels, dtype=np.uint8).astype(int),
        provenance=f"idx({images_path})",
    )
