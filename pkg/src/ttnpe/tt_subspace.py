"""Tensor-train chains: TT-SVD initialization, orthogonalization, contraction,
projection, storage accounting, and model persistence.

A chain is an ordered list of 3-mode cores U_k of shape (R_{k-1}, I_k, R_k)
with R_0 = 1. With every core left-orthonormal, the contracted matrix
E = L(U_1 x ... x U_n) has orthonormal columns and spans an R_n-dimensional
subspace of R^{I_1...I_n}.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ttnpe.errors import DataError
from ttnpe.tensor_core import left_unfold, vectorize

MODEL_FORMAT_VERSION = 1


@dataclass
class TTChain:
    """Ordered sequence of 3-mode TT cores."""

    cores: list[np.ndarray]
    tau: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.cores:
            raise ValueError("a TT chain needs at least one core")
        self.cores = [np.asarray(c, dtype=np.float64) for c in self.cores]
        for k, c in enumerate(self.cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} has {c.ndim} modes, expected 3")
        if self.cores[0].shape[0] != 1:
            raise ValueError("first core must have leading rank 1")
        for k in range(len(self.cores) - 1):
            if self.cores[k].shape[2] != self.cores[k + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{self.cores[k].shape[2]} != {self.cores[k + 1].shape[0]}"
                )

    @property
    def n_modes(self) -> int:
        return len(self.cores)

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores)

    @property
    def embedding_dim(self) -> int:
        return self.cores[-1].shape[2]

    def replace_core(self, k: int, core: np.ndarray) -> "TTChain":
        cores = list(self.cores)
        cores[k] = core
        return TTChain(cores, tau=self.tau)

    def orthonormality_defect(self) -> float:
        """Max deviation of any core's left unfolding from orthonormal columns."""
        defect = 0.0
        for c in self.cores:
            l = left_unfold(c)
            defect = max(defect, float(np.max(np.abs(l.T @ l - np.eye(l.shape[1])))))
        return defect


def _fix_svd_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Largest-magnitude entry of each left singular vector made positive,
    # so decompositions are deterministic across runs.
    for c in range(u.shape[1]):
        j = int(np.argmax(np.abs(u[:, c])))
        if u[j, c] < 0:
            u[:, c] = -u[:, c]
            vt[c, :] = -vt[c, :]
    return u, vt


def tt_svd(dataset: np.ndarray, tau: float, rank_cap=None) -> TTChain:
    """Sequential-SVD TT decomposition of a dataset stacked along the last mode.

    ``dataset`` has shape (I_1, ..., I_n, N). At each of the n splits,
    singular values sigma_j >= tau * sigma_max are kept (at least one).
    The trailing R_n x N coefficient factor is discarded; only the
    left-orthonormal cores (the subspace) are returned.

    ``rank_cap`` optionally caps the rank at each split: an int applies to
    every split, a sequence gives per-split caps.
    """
    dataset = np.asarray(dataset, dtype=np.float64)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if dataset.ndim < 2 or dataset.size == 0:
        raise DataError("dataset must be a nonempty (I_1, ..., I_n, N) array")
    n = dataset.ndim - 1
    dims = dataset.shape[:n]
    if rank_cap is None:
        caps = [None] * n
    elif np.isscalar(rank_cap):
        caps = [int(rank_cap)] * n
    else:
        caps = [None if c is None else int(c) for c in rank_cap]
        if len(caps) != n:
            raise ValueError(f"rank_cap needs {n} entries, got {len(caps)}")

    cores = []
    r_prev = 1
    mat = dataset.reshape(r_prev * dims[0], -1, order="F")
    for k in range(n):
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        if s[0] > 0:
            r = max(1, int(np.count_nonzero(s >= tau * s[0])))
        else:
            r = 1
        if caps[k] is not None:
            r = min(r, max(1, caps[k]))
        u, vt = _fix_svd_signs(u[:, :r], vt[:r, :])
        cores.append(u.reshape(r_prev, dims[k], r, order="F"))
        carry = s[:r, None] * vt
        if k + 1 < n:
            mat = carry.reshape(r * dims[k + 1], -1, order="F")
        r_prev = r
    return TTChain(cores, tau=float(tau))


def left_orthogonalize(chain: TTChain) -> TTChain:
    """Return an equivalent chain whose cores all have orthonormal left unfoldings.

    Sweeps QR factorizations left to right, absorbing each R factor into the
    next core. The final R factor is discarded: only the contracted column
    span matters downstream, not tensor values. Numerically rank-deficient
    unfoldings reduce the rank with a warning.
    """
    cores = []
    carry = None
    for k, core in enumerate(chain.cores):
        if carry is not None:
            core = np.tensordot(carry, core, axes=([1], [0]))
        l = left_unfold(core)
        q, r = np.linalg.qr(l)
        # Fix signs so an already-orthonormal input maps to itself.
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        q = q * signs
        r = signs[:, None] * r
        diag = np.abs(np.diag(r))
        tol = max(l.shape) * np.finfo(np.float64).eps * (diag.max() if diag.size else 0.0)
        keep = int(np.count_nonzero(diag > tol))
        keep = max(keep, 1)
        if keep < q.shape[1]:
            warnings.warn(
                f"rank-deficient unfolding at core {k}: reducing rank {q.shape[1]} -> {keep}",
                RuntimeWarning,
            )
            q = q[:, :keep]
            r = r[:keep, :]
        cores.append(q.reshape(core.shape[0], core.shape[1], keep, order="F"))
        carry = r
    return TTChain(cores, tau=chain.tau)


def contract_chain(chain: TTChain, upto: int | None = None) -> np.ndarray:
    """Contract the first ``upto`` cores into the matrix L(U_1 x ... x U_k).

    Uses the Kronecker-structure recursion B_{j+1} = (I_{I_{j+1}} (x) B_j) L(U_{j+1})
    without materializing the Kronecker factor. ``upto=0`` returns the 1x1
    identity (empty prefix). Default contracts the whole chain to E.
    """
    k = chain.n_modes if upto is None else int(upto)
    if not 0 <= k <= chain.n_modes:
        raise ValueError(f"upto must lie in [0, {chain.n_modes}], got {k}")
    b = np.ones((1, 1))
    for core in chain.cores[:k]:
        b = np.einsum("xr,riq->xiq", b, core).reshape(-1, core.shape[2], order="F")
    return b


def suffix_tensor(chain: TTChain, k: int) -> np.ndarray:
    """Contract cores k+1..n (1-based k) into a (R_k, I_{k+1}, ..., I_n, R_n) tensor.

    For k = n the suffix is empty and the R_n x R_n identity is returned as a
    2-mode tensor.
    """
    if not 1 <= k <= chain.n_modes:
        raise ValueError(f"k must lie in [1, {chain.n_modes}], got {k}")
    if k == chain.n_modes:
        r = chain.embedding_dim
        return np.eye(r)
    t = chain.cores[k]
    for core in chain.cores[k + 1:]:
        t = np.tensordot(t, core, axes=([t.ndim - 1], [0]))
    return t


def project(chain: TTChain, sample: np.ndarray) -> np.ndarray:
    """Embed a sample: t = E^T V(sample), via sequential core contractions."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.shape != chain.mode_dims:
        raise ValueError(f"sample shape {sample.shape} does not match mode dims {chain.mode_dims}")
    w = vectorize(sample)[None, :]
    for core in chain.cores:
        r_prev, i_k, _ = core.shape
        w = left_unfold(core).T @ w.reshape(r_prev * i_k, -1, order="F")
    return w.reshape(-1)


def project_many(chain: TTChain, samples: np.ndarray) -> np.ndarray:
    """Embed samples stacked along the last mode; returns an (N, R_n) array."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[:-1] != chain.mode_dims:
        raise ValueError(
            f"sample dims {samples.shape[:-1]} do not match mode dims {chain.mode_dims}"
        )
    n_samples = samples.shape[-1]
    cur = samples.reshape(-1, n_samples, order="F")  # (d, N), rank index fastest
    for core in chain.cores:
        r_prev, i_k, r_next = core.shape
        d_rest = cur.shape[0] // (r_prev * i_k)
        cur = cur.reshape(r_prev * i_k, d_rest * n_samples, order="F")
        cur = left_unfold(core).T @ cur
        cur = cur.reshape(r_next * d_rest, n_samples, order="F")
    return cur.T


def storage_count(chain: TTChain, n_train: int) -> dict:
    """Parameter counts for storing the subspace factors plus embedded data.

    ``paper_formula_total`` reports the uniform-dimension closed form
    (n-1)(m r^2 - r^2) + (m r - r^2) + r N_tr when all mode dims and all
    ranks are equal, else None.
    """
    dims = chain.mode_dims
    ranks = chain.ranks
    factor_params = int(sum(c.size for c in chain.cores))
    embedded_params = int(chain.embedding_dim * n_train)
    total = factor_params + embedded_params
    formula = None
    if len(set(dims)) == 1 and len(set(ranks)) == 1:
        n = chain.n_modes
        m = dims[0]
        r = ranks[0]
        formula = int((n - 1) * (m * r * r - r * r) + (m * r - r * r) + r * n_train)
    return {
        "factor_params": factor_params,
        "embedded_params": embedded_params,
        "total": total,
        "paper_formula_total": formula,
    }


def compression_ratio(chain: TTChain, n_train: int) -> float:
    """Stored parameters divided by raw storage d * N_tr."""
    d = int(np.prod(chain.mode_dims))
    return storage_count(chain, n_train)["total"] / float(d * n_train)


def save_chain(chain: TTChain, path) -> None:
    """Persist a chain as a JSON document; numeric payload round-trips bit-exactly."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "mode_dims": list(chain.mode_dims),
        "ranks": list(chain.ranks),
        "tau": chain.tau,
        "cores": [
            {
                "shape": list(c.shape),
                "data": vectorize(c).tolist(),
                "order": "mode1-fastest",
            }
            for c in chain.cores
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_chain(path) -> TTChain:
    """Load a chain saved by :func:`save_chain`."""
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format_version {version!r}")
    cores = []
    for entry in doc["cores"]:
        if entry.get("order") != "mode1-fastest":
            raise DataError(f"unsupported core data order {entry.get('order')!r}")
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise DataError(f"core payload size {data.size} inconsistent with shape {shape}")
        cores.append(data.reshape(shape, order="F"))
    chain = TTChain(cores, tau=doc.get("tau"))
    if list(chain.mode_dims) != list(doc["mode_dims"]) or list(chain.ranks) != list(doc["ranks"]):
        raise DataError("model metadata inconsistent with core shapes")
    return chain
