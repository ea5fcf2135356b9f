import itertools

import numpy as np
import pytest

from ttnpe.tt_subspace import TTChain, left_orthogonalize


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_merge(a, b, g1, g2):
    """Naive loop implementation of the tensor merging product (test oracle)."""
    a = np.asarray(a)
    b = np.asarray(b)
    free_a = [m for m in range(a.ndim) if m + 1 not in g1]
    free_b = [m for m in range(b.ndim) if m + 1 not in g2]
    out_shape = [a.shape[m] for m in free_a] + [b.shape[m] for m in free_b]
    out = np.zeros(out_shape if out_shape else (1,))
    shared_dims = [a.shape[p - 1] for p in g1]
    for free_idx in itertools.product(*(range(s) for s in out_shape)):
        ia_free = free_idx[:len(free_a)]
        ib_free = free_idx[len(free_a):]
        total = 0.0
        for shared in itertools.product(*(range(s) for s in shared_dims)):
            ia = [0] * a.ndim
            ib = [0] * b.ndim
            for m, v in zip(free_a, ia_free):
                ia[m] = v
            for m, v in zip(free_b, ib_free):
                ib[m] = v
            for p, q, v in zip(g1, g2, shared):
                ia[p - 1] = v
                ib[q - 1] = v
            total += a[tuple(ia)] * b[tuple(ib)]
        if out_shape:
            out[free_idx] = total
        else:
            out[0] = total
    return out if out_shape else out.reshape(())


def brute_partial_trace(t, i, j):
    """Loop oracle for the partial trace over 1-based modes i and j."""
    t = np.asarray(t)
    keep = [m for m in range(t.ndim) if m not in (i - 1, j - 1)]
    out = np.zeros([t.shape[m] for m in keep])
    for idx in itertools.product(*(range(t.shape[m]) for m in keep)):
        total = 0.0
        for d in range(t.shape[i - 1]):
            full = [0] * t.ndim
            for m, v in zip(keep, idx):
                full[m] = v
            full[i - 1] = d
            full[j - 1] = d
            total += t[tuple(full)]
        out[idx] = total
    return out


def random_orthonormal_chain(rng, dims, ranks):
    """Random TT chain with left-orthonormal cores and the given bond ranks."""
    cores = []
    r_prev = 1
    for i_k, r_k in zip(dims, ranks):
        cores.append(rng.standard_normal((r_prev, i_k, r_k)))
        r_prev = r_k
    return left_orthogonalize(TTChain(cores))


def random_psd(rng, d, rank=None):
    y = rng.standard_normal((d, rank or d))
    z = y @ y.T
    return (z + z.T) / 2.0


def feasible_ranks(dims, target):
    """Clip a uniform target rank to TT feasibility for the given dims."""
    n = len(dims)
    ranks = []
    for k in range(1, n + 1):
        left = int(np.prod(dims[:k]))
        ranks.append(min(target, left))
    for k in range(n - 2, -1, -1):
        ranks[k] = min(ranks[k], ranks[k + 1] * dims[k + 1])
    return ranks
