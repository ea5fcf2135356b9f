"""K-nearest-neighbor affinity graph, the row-normalized weight matrix S,
the residual matrix Y, and the Gram target Z = Y Y^T.

Samples enter as columns of the d x N data matrix D (each column a
vectorized tensor). Weight matrices are kept dense: the downstream Gram
target is a dense d x d matrix anyway at the problem scales this library
targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ttnpe.errors import DataError


@dataclass
class AffinityConfig:
    """Graph parameters: K neighbors and heat-kernel scale epsilon.

    ``epsilon`` is either a fixed positive scale or the policy
    "median-knn-sq-dist": the median squared Frobenius distance over all
    retained (i, j in knn(i)) pairs.
    """

    k_neighbors: int
    epsilon: float | str = "median-knn-sq-dist"

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if isinstance(self.epsilon, str):
            if self.epsilon not in ("median-knn-sq-dist", "median"):
                raise ValueError(f"unknown epsilon policy {self.epsilon!r}")
        elif self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def pairwise_sq_dists(d_mat: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between columns of ``d_mat``.

    Computed column-against-all to keep results deterministic and accurate;
    the diagonal is exactly zero.
    """
    d_mat = np.asarray(d_mat, dtype=np.float64)
    n = d_mat.shape[1]
    out = np.empty((n, n))
    for i in range(n):
        diff = d_mat - d_mat[:, i:i + 1]
        out[i] = np.einsum("dj,dj->j", diff, diff)
        out[i, i] = 0.0
    return out


def knn_sets(sq_dists: np.ndarray, k: int) -> np.ndarray:
    """Indices of the K nearest neighbors of each sample, self excluded.

    Ties are broken by smaller index. Returns an (N, K) integer array.
    """
    n = sq_dists.shape[0]
    if k >= n:
        raise ValueError(f"K must be < number of samples, got K={k}, N={n}")
    neighbors = np.empty((n, k), dtype=np.intp)
    idx = np.arange(n)
    for i in range(n):
        row = sq_dists[i].copy()
        row[i] = np.inf
        order = np.lexsort((idx, row))
        neighbors[i] = order[:k]
    return neighbors


def resolve_epsilon(sq_dists: np.ndarray, neighbors: np.ndarray, config: AffinityConfig) -> float:
    """Fixed epsilon, or the median squared distance over retained KNN pairs."""
    if not isinstance(config.epsilon, str):
        return float(config.epsilon)
    knn_d = sq_dists[np.arange(sq_dists.shape[0])[:, None], neighbors]
    eps = float(np.median(knn_d))
    if eps <= 0:
        raise DataError("median KNN distance is zero; supply an explicit epsilon")
    return eps


def affinity(sq_dists: np.ndarray, neighbors: np.ndarray, epsilon: float) -> np.ndarray:
    """Unnormalized heat-kernel affinity F with F_ij = exp(-d_ij^2/eps) on KNN pairs."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = sq_dists.shape[0]
    f = np.zeros((n, n))
    rows = np.repeat(np.arange(n), neighbors.shape[1])
    cols = neighbors.reshape(-1)
    f[rows, cols] = np.exp(-sq_dists[rows, cols] / epsilon)
    np.fill_diagonal(f, 0.0)
    return f


def symmetrize_normalize(f: np.ndarray) -> np.ndarray:
    """S = F + F^T with each row divided by its sum."""
    s = f + f.T
    row_sums = s.sum(axis=1)
    if np.any(row_sums <= 0):
        raise DataError("weight matrix has a zero row sum; graph is disconnected at a sample")
    return s / row_sums[:, None]


def build_weight_matrix(d_mat: np.ndarray, config: AffinityConfig) -> np.ndarray:
    """Full pipeline: KNN sets -> affinity F -> row-normalized S."""
    sq = pairwise_sq_dists(d_mat)
    neighbors = knn_sets(sq, config.k_neighbors)
    eps = resolve_epsilon(sq, neighbors, config)
    return symmetrize_normalize(affinity(sq, neighbors, eps))


def build_residual(d_mat: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Y = D - D S^T: each column is a sample minus its weighted neighbors."""
    return d_mat - d_mat @ s.T


def build_gram(y: np.ndarray) -> np.ndarray:
    """Z = Y Y^T, explicitly symmetrized to kill roundoff asymmetry."""
    z = y @ y.T
    return (z + z.T) / 2.0
