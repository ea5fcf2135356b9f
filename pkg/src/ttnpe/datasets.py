"""Dataset ingestion (IDX binary and CSV) and Gaussian noise injection."""

from __future__ import annotations

import csv
import struct

import numpy as np

from ttnpe.errors import DataError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _read_idx(path, expected_magic: int) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    header = 4 * (1 + (expected_magic & 0xFF))
    if len(raw) < 8:
        raise DataError(f"{path}: truncated header")
    magic = struct.unpack(">i", raw[:4])[0]
    if magic != expected_magic:
        raise DataError(f"{path}: wrong magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = expected_magic & 0xFF
    if len(raw) < 4 + 4 * ndim:
        raise DataError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}i", raw[4:4 + 4 * ndim])
    count = int(np.prod(dims))
    payload = raw[4 + 4 * ndim:]
    if len(payload) < count:
        raise DataError(f"{path}: truncated payload, expected {count} bytes, got {len(payload)}")
    data = np.frombuffer(payload[:count], dtype=np.uint8)
    return data.reshape(dims)  # row-major, as stored


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Parse an IDX image/label pair.

    Returns (images, labels) with images of shape (N, rows, cols) scaled to
    [0, 1] as float64 and labels as an int array of length N.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataError(
            f"image/label count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)


def load_csv(path, label_column: int) -> tuple[np.ndarray, np.ndarray]:
    """Load a rectangular numeric CSV, one sample per row.

    The label column is extracted; remaining values become float64 features
    (no scaling). A non-numeric first row is treated as a header.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"{path}: empty CSV")

    def _numeric(row):
        try:
            [float(x) for x in row]
            return True
        except ValueError:
            return False

    if not _numeric(rows[0]):
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: CSV contains only a header")
    width = len(rows[0])
    if not 0 <= label_column < width:
        raise DataError(f"label column {label_column} out of range for {width} columns")
    features = []
    labels = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"{path}: ragged row {lineno} has {len(row)} cells, expected {width}")
        try:
            values = [float(x) for x in row]
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric cell in row {lineno}: {exc}") from exc
        labels.append(values[label_column])
        features.append(values[:label_column] + values[label_column + 1:])
    return np.asarray(features, dtype=np.float64), np.asarray(labels)


def add_noise(samples: np.ndarray, snr_db: float | None, seed: int) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise at the given SNR (dB).

    Noise variance is the dataset-average per-entry signal power
    mean_i(||X_i||_F^2 / d) divided by 10^(snr_db/10). ``snr_db=None``
    returns the input unchanged.
    """
    if snr_db is None:
        return samples
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[-1]
    d = samples.size // n
    flat = samples.reshape(-1, n, order="F")
    signal_power = float(np.mean(np.sum(flat * flat, axis=0)) / d)
    sigma = np.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return samples + sigma * rng.standard_normal(samples.shape)
