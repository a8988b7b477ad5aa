"""Dataset ingestion: IDX image files, dense text matrices, and generators."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import model
from .exceptions import CapacityError, ConfigurationError, DataFormatError
from .model import RbmParams
from .validation import as_rng, check_binary_matrix

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class BinaryDataset:
    """A matrix of {0,1} visible vectors with provenance metadata."""

    rows: np.ndarray
    source: str = ""
    binarize_threshold: float | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.rows = check_binary_matrix(self.rows, "rows")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape[0] != self.rows.shape[0]:
                raise ValueError("labels length does not match the number of rows")

    @property
    def n_examples(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def subset(self, idx) -> "BinaryDataset":
        labels = None if self.labels is None else self.labels[idx]
        return BinaryDataset(self.rows[idx], self.source, self.binarize_threshold, labels)


def _read_be32(data: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(data):
        raise DataFormatError(f"{path}: truncated at byte {offset}, expected a 32-bit field")
    return struct.unpack_from(">i", data, offset)[0]


def load_idx(images_path, labels_path=None, threshold: float = 0.5) -> BinaryDataset:
    """Load an IDX image file (big-endian), binarizing pixels at ``threshold``.

    Pixels are scaled to [0, 1] and a bit is set where the value is strictly
    greater than the threshold.  When ``labels_path`` is given, the label
    file is parsed, its count checked against the images, and the labels are
    attached to the dataset.
    """
    if not (0.0 <= threshold < 1.0):
        raise ConfigurationError(f"threshold must be in [0, 1), got {threshold}")
    images_path = str(images_path)
    with open(images_path, "rb") as fh:
        blob = fh.read()
    magic = _read_be32(blob, 0, images_path)
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad magic 0x{magic & 0xffffffff:08x} at byte 0, "
            f"expected 0x{IDX_IMAGE_MAGIC:08x}")
    count = _read_be32(blob, 4, images_path)
    n_rows = _read_be32(blob, 8, images_path)
    n_cols = _read_be32(blob, 12, images_path)
    if min(count, n_rows, n_cols) < 0:
        raise DataFormatError(f"{images_path}: negative dimension in header")
    expected = 16 + count * n_rows * n_cols
    if len(blob) != expected:
        raise DataFormatError(
            f"{images_path}: payload is {len(blob) - 16} bytes from byte 16, "
            f"expected {count * n_rows * n_cols}")
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=16).reshape(count, n_rows * n_cols)
    bits = (pixels / 255.0 > threshold).astype(np.uint8)

    labels = None
    if labels_path is not None:
        labels = load_idx_labels(labels_path)
        if labels.shape[0] != count:
            raise DataFormatError(
                f"{labels_path}: {labels.shape[0]} labels for {count} images")
    return BinaryDataset(bits, source=images_path, binarize_threshold=threshold,
                         labels=labels)


def load_idx_labels(path) -> np.ndarray:
    path = str(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    magic = _read_be32(blob, 0, path)
    if magic != IDX_LABEL_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic & 0xffffffff:08x} at byte 0, "
            f"expected 0x{IDX_LABEL_MAGIC:08x}")
    count = _read_be32(blob, 4, path)
    if len(blob) != 8 + count:
        raise DataFormatError(
            f"{path}: payload is {len(blob) - 8} bytes from byte 8, expected {count}")
    return np.frombuffer(blob, dtype=np.uint8, offset=8).copy()


def save_dense_text(path, dataset: BinaryDataset):
    """Write the plain text format: an ``N D`` header, then one digit row per line."""
    rows = dataset.rows
    with open(path, "w") as fh:
        fh.write(f"{rows.shape[0]} {rows.shape[1]}\n")
        for row in rows:
            fh.write("".join("1" if bit else "0" for bit in row))
            fh.write("\n")


def load_dense_text(path) -> BinaryDataset:
    """Read the ``N D`` header plus rows of {0,1} digits (whitespace ignored)."""
    path = str(path)
    with open(path) as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise DataFormatError(f"{path}:1: header must be 'N D', got {header!r}")
        try:
            n, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataFormatError(f"{path}:1: non-integer header {header!r}") from None
        if n < 1 or d < 1:
            raise DataFormatError(f"{path}:1: dimensions must be positive")
        rows = np.empty((n, d), dtype=np.uint8)
        for i in range(n):
            line = fh.readline()
            if not line:
                raise DataFormatError(f"{path}:{i + 2}: expected {n} rows, found {i}")
            digits = line.split() if " " in line.strip() else [line.strip()]
            flat = "".join(digits)
            if len(flat) != d or set(flat) - {"0", "1"}:
                raise DataFormatError(
                    f"{path}:{i + 2}: expected {d} binary digits, got {line.strip()!r}")
            rows[i] = np.frombuffer(flat.encode(), dtype=np.uint8) - ord("0")
    return BinaryDataset(rows, source=path)


@dataclass
class SyntheticSpec:
    """Recipe for a generated dataset.

    ``bars`` draws one random horizontal or vertical bar on a ``side x side``
    grid; ``parity`` draws uniform bit vectors with even parity over
    ``n_bits``; ``teacher_rbm`` samples exactly from a small model's visible
    distribution.
    """

    generator: str
    n_samples: int
    seed: int = 0
    side: int | None = None
    n_bits: int | None = None
    params: RbmParams | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")
        if self.generator == "bars":
            if self.side is None or self.side < 2:
                raise ConfigurationError("bars requires side >= 2")
        elif self.generator == "parity":
            if self.n_bits is None or self.n_bits < 2:
                raise ConfigurationError("parity requires n_bits >= 2")
        elif self.generator == "teacher_rbm":
            if self.params is None:
                raise ConfigurationError("teacher_rbm requires params")
        else:
            raise ConfigurationError(f"unknown generator {self.generator!r}")


def generate_synthetic(spec: SyntheticSpec) -> BinaryDataset:
    rng = as_rng(spec.seed)
    if spec.generator == "bars":
        side = spec.side
        rows = np.zeros((spec.n_samples, side * side), dtype=np.uint8)
        horizontal = rng.integers(0, 2, size=spec.n_samples).astype(bool)
        index = rng.integers(0, side, size=spec.n_samples)
        for i in range(spec.n_samples):
            grid = rows[i].reshape(side, side)
            if horizontal[i]:
                grid[index[i], :] = 1
            else:
                grid[:, index[i]] = 1
        return BinaryDataset(rows, source=f"bars({side})")
    if spec.generator == "parity":
        d = spec.n_bits
        rows = np.zeros((spec.n_samples, d), dtype=np.uint8)
        rows[:, :d - 1] = rng.integers(0, 2, size=(spec.n_samples, d - 1), dtype=np.uint8)
        rows[:, d - 1] = rows[:, :d - 1].sum(axis=1) % 2
        return BinaryDataset(rows, source=f"parity({d})")
    # teacher_rbm: exact enumeration sampling
    params = spec.params
    if params.d > 12:
        raise CapacityError(
            f"teacher_rbm sampling enumerates 2^D states; D = {params.d} exceeds 12")
    probs = np.exp(model.exact_visible_log_probs(params))
    idx = rng.choice(probs.shape[0], size=spec.n_samples, p=probs)
    rows = model.enumerate_states(params.d)[idx]
    return BinaryDataset(rows, source=f"teacher_rbm(D={params.d},H={params.h})")
