"""KNN classification in the embedded space plus evaluation metrics.

Tie rules are total so predictions are deterministic: equal distances break
toward the smaller training index, and vote ties break toward the class of
the nearest neighbor among the tied classes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ttnpe.tt_subspace import TTChain, compression_ratio, project_many


@dataclass
class EvalResult:
    error_rate: float
    n_test: int
    n_wrong: int
    confusion: dict
    compression_ratio: float
    embed_seconds: float
    classify_seconds: float


def knn_classify(train_coords: np.ndarray, train_labels: np.ndarray,
                 test_coords: np.ndarray, k: int) -> np.ndarray:
    """Euclidean K-NN majority vote; returns predicted labels."""
    train_coords = np.asarray(train_coords, dtype=np.float64)
    test_coords = np.asarray(test_coords, dtype=np.float64)
    train_labels = np.asarray(train_labels)
    n_train = train_coords.shape[0]
    if k > n_train:
        raise ValueError(f"K must be <= number of training points, got K={k}, N={n_train}")
    idx = np.arange(n_train)
    preds = np.empty(test_coords.shape[0], dtype=train_labels.dtype)
    for t in range(test_coords.shape[0]):
        diff = train_coords - test_coords[t]
        dists = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((idx, dists))[:k]
        votes = train_labels[order]
        labels, counts = np.unique(votes, return_counts=True)
        best = counts.max()
        tied = set(labels[counts == best])
        if len(tied) == 1:
            preds[t] = tied.pop()
        else:
            for neighbor_label in votes:
                if neighbor_label in tied:
                    preds[t] = neighbor_label
                    break
    return preds


def _embed(chain: TTChain | None, data: np.ndarray) -> np.ndarray:
    if chain is None:
        n = data.shape[-1]
        return data.reshape(-1, n, order="F").T
    return project_many(chain, data)


def evaluate(chain: TTChain | None, train_data: np.ndarray, train_labels: np.ndarray,
             test_data: np.ndarray, test_labels: np.ndarray, k: int) -> EvalResult:
    """Embed, classify, and score.

    ``chain=None`` is the raw-KNN baseline: no compression (ratio 1),
    classification on the vectorized samples directly. Data arrays stack
    samples along the last mode.
    """
    n_train = train_data.shape[-1]
    t0 = time.perf_counter()
    train_coords = _embed(chain, train_data)
    test_coords = _embed(chain, test_data)
    embed_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    preds = knn_classify(train_coords, np.asarray(train_labels), test_coords, k)
    classify_seconds = time.perf_counter() - t0

    test_labels = np.asarray(test_labels)
    wrong = int(np.count_nonzero(preds != test_labels))
    confusion: dict = {}
    for truth, pred in zip(test_labels.tolist(), preds.tolist()):
        key = (truth, pred)
        confusion[key] = confusion.get(key, 0) + 1
    rho = 1.0 if chain is None else compression_ratio(chain, n_train)
    return EvalResult(
        error_rate=wrong / len(test_labels),
        n_test=len(test_labels),
        n_wrong=wrong,
        confusion=confusion,
        compression_ratio=rho,
        embed_seconds=embed_seconds,
        classify_seconds=classify_seconds,
    )
