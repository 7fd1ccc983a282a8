"""Exact nearest-neighbor distance engine.

Two metrics are supported over float32 vectors, with all per-pair math in
float64:

* ``l2``     -- Euclidean distance ``sqrt(sum_k (a_k - b_k)^2)``.
* ``cosine`` -- ``1 - dot(a, b) / (norm(a) * norm(b))``; zero vectors are
  rejected before any cosine computation.

Reference recipe (the reproducibility contract)
-----------------------------------------------
The *exact* kernels accumulate strictly sequentially: each component is
widened to float64, combined, and added to a single accumulator in index
order. A naive per-pair reimplementation of that recipe (for example a
plain Python double loop) produces bit-identical distances, minima, and
ratios. Small jobs are routed to the exact kernels automatically.

Large jobs (above ``EXACT_PATH_MAX_OPS`` elementwise operations) switch to
SIMD-friendly kernels that reassociate the accumulation. Those are still
exact nearest neighbor -- every pair is evaluated in float64, only the
rounding of the sum differs in the last bits -- and they are deterministic
for a fixed input at any thread count: per-row results are independent and
cross-thread combination only uses ``min``, which is associative exactly.

All self-distance queries exclude the query index itself, not coordinate
duplicates: a second point with identical coordinates yields distance 0.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .errors import DataError

L2 = "l2"
COSINE = "cosine"
METRICS = (L2, COSINE)

_METRIC_IDS = {L2: 0, COSINE: 1}

# Elementwise-op budget under which the sequential exact kernels are used.
EXACT_PATH_MAX_OPS = 256_000_000

# Fixed chunk count for partial-minima buffers; independent of thread count
# so results cannot depend on scheduling.
_N_CHUNKS = 64

# Reassociation/FMA only; no nnan/ninf assumptions (inf sentinels stay valid).
_FAST_FLAGS = {"reassoc", "contract", "nsz"}


def metric_id(metric: str) -> int:
    if metric not in _METRIC_IDS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return _METRIC_IDS[metric]


def as_vectors(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a C-contiguous float32 matrix, optionally checking width."""
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected a vector matrix, got ndim={arr.ndim}")
    if dim is not None and arr.shape[1] != dim:
        raise DataError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    return arr


# ---------------------------------------------------------------------------
# scalar building blocks (sequential float64 accumulation, reference recipe)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _sq_l2_scalar(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        diff = np.float64(a[k]) - np.float64(b[k])
        acc += diff * diff
    return acc


@njit(cache=True)
def _dot_scalar(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        acc += np.float64(a[k]) * np.float64(b[k])
    return acc


@njit(cache=True)
def _norm_scalar(a):
    return np.sqrt(_dot_scalar(a, a))


@njit(cache=True)
def row_norms(X):
    out = np.empty(X.shape[0], dtype=np.float64)
    for i in range(X.shape[0]):
        out[i] = _norm_scalar(X[i])
    return out


@njit(cache=True)
def _pair_distance(a, b, na, nb, mid):
    """Metric distance between two vectors; norms only used for cosine."""
    if mid == 0:
        return np.sqrt(_sq_l2_scalar(a, b))
    return 1.0 - _dot_scalar(a, b) / (na * nb)


# ---------------------------------------------------------------------------
# nearest center over a small set of rows (proxy queries)
# ---------------------------------------------------------------------------

@njit(cache=True)
def nearest_masked(x, C, active, norms_c, mid):
    """Index and distance of the nearest active row of C; ties -> lowest index.

    Cosine rows with zero norm are never selected (distance +inf).
    """
    nx = 1.0
    if mid == 1:
        nx = _norm_scalar(x)
    best = np.inf
    best_idx = -1
    for j in range(C.shape[0]):
        if not active[j]:
            continue
        if mid == 0:
            d = np.sqrt(_sq_l2_scalar(x, C[j]))
        else:
            if norms_c[j] == 0.0 or nx == 0.0:
                continue
            d = 1.0 - _dot_scalar(x, C[j]) / (nx * norms_c[j])
        if d < best:
            best = d
            best_idx = j
    return best_idx, best


@njit(parallel=True, cache=True)
def nearest_masked_batch(X, C, active, norms_c, mid):
    n = X.shape[0]
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    for i in prange(n):
        j, d = nearest_masked(X[i], C, active, norms_c, mid)
        idx[i] = j
        dist[i] = d
    return idx, dist


# ---------------------------------------------------------------------------
# exact overlap kernels (sequential accumulation per pair)
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _self_min_exact(A, norms, mid):
    n = A.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in prange(n):
        a = A[i]
        best = np.inf
        for j in range(n):
            if j == i:
                continue
            if mid == 0:
                d = _sq_l2_scalar(a, A[j])
            else:
                d = 1.0 - _dot_scalar(a, A[j]) / (norms[i] * norms[j])
            if d < best:
                best = d
        out[i] = best
    return out


@njit(parallel=True, cache=True)
def _cross_min_exact(A, B, norms_a, norms_b, mid):
    na = A.shape[0]
    out = np.empty(na, dtype=np.float64)
    for i in prange(na):
        a = A[i]
        best = np.inf
        for j in range(B.shape[0]):
            if mid == 0:
                d = _sq_l2_scalar(a, B[j])
            else:
                d = 1.0 - _dot_scalar(a, B[j]) / (norms_a[i] * norms_b[j])
            if d < best:
                best = d
        out[i] = best
    return out


# ---------------------------------------------------------------------------
# fast overlap kernels (reassociated accumulation, chunked partial minima)
# ---------------------------------------------------------------------------

@njit(parallel=True, fastmath=_FAST_FLAGS, cache=True)
def _self_min_fast(A, norms, mid):
    # Upper-triangle scan; chunk c owns rows c, c + _N_CHUNKS, ... so the
    # per-chunk partial minima are race-free and the merge is an exact min.
    # Owned rows are processed four at a time so each scanned row of A is
    # loaded once per group instead of once per row (the scan is memory
    # bound at realistic dims).
    n = A.shape[0]
    d = A.shape[1]
    part = np.full((_N_CHUNKS, n), np.inf, dtype=np.float64)
    for c in prange(_N_CHUNKS):
        owned = np.arange(c, n, _N_CHUNKS)
        m = owned.shape[0]
        g = 0
        while g + 4 <= m:
            i0, i1, i2, i3 = owned[g], owned[g + 1], owned[g + 2], owned[g + 3]
            # pairs below the shared region, row by row
            for x in range(3):
                i = owned[g + x]
                a = A[i]
                for j in range(i + 1, i3 + 1):
                    acc = 0.0
                    if mid == 0:
                        for k in range(d):
                            diff = np.float64(a[k]) - np.float64(A[j, k])
                            acc += diff * diff
                    else:
                        for k in range(d):
                            acc += np.float64(a[k]) * np.float64(A[j, k])
                        acc = 1.0 - acc / (norms[i] * norms[j])
                    if acc < part[c, i]:
                        part[c, i] = acc
                    if acc < part[c, j]:
                        part[c, j] = acc
            a0, a1, a2, a3 = A[i0], A[i1], A[i2], A[i3]
            b0 = part[c, i0]
            b1 = part[c, i1]
            b2 = part[c, i2]
            b3 = part[c, i3]
            for j in range(i3 + 1, n):
                bj = A[j]
                acc0 = 0.0
                acc1 = 0.0
                acc2 = 0.0
                acc3 = 0.0
                if mid == 0:
                    for k in range(d):
                        bb = np.float64(bj[k])
                        t0 = np.float64(a0[k]) - bb
                        acc0 += t0 * t0
                        t1 = np.float64(a1[k]) - bb
                        acc1 += t1 * t1
                        t2 = np.float64(a2[k]) - bb
                        acc2 += t2 * t2
                        t3 = np.float64(a3[k]) - bb
                        acc3 += t3 * t3
                else:
                    for k in range(d):
                        bb = np.float64(bj[k])
                        acc0 += np.float64(a0[k]) * bb
                        acc1 += np.float64(a1[k]) * bb
                        acc2 += np.float64(a2[k]) * bb
                        acc3 += np.float64(a3[k]) * bb
                    nj = norms[j]
                    acc0 = 1.0 - acc0 / (norms[i0] * nj)
                    acc1 = 1.0 - acc1 / (norms[i1] * nj)
                    acc2 = 1.0 - acc2 / (norms[i2] * nj)
                    acc3 = 1.0 - acc3 / (norms[i3] * nj)
                if acc0 < b0:
                    b0 = acc0
                if acc1 < b1:
                    b1 = acc1
                if acc2 < b2:
                    b2 = acc2
                if acc3 < b3:
                    b3 = acc3
                lo = min(min(acc0, acc1), min(acc2, acc3))
                if lo < part[c, j]:
                    part[c, j] = lo
            part[c, i0] = b0
            part[c, i1] = b1
            part[c, i2] = b2
            part[c, i3] = b3
            g += 4
        while g < m:
            i = owned[g]
            a = A[i]
            best = part[c, i]
            for j in range(i + 1, n):
                acc = 0.0
                if mid == 0:
                    for k in range(d):
                        diff = np.float64(a[k]) - np.float64(A[j, k])
                        acc += diff * diff
                else:
                    for k in range(d):
                        acc += np.float64(a[k]) * np.float64(A[j, k])
                    acc = 1.0 - acc / (norms[i] * norms[j])
                if acc < best:
                    best = acc
                if acc < part[c, j]:
                    part[c, j] = acc
            part[c, i] = best
            g += 1
    out = np.full(n, np.inf, dtype=np.float64)
    for c in range(_N_CHUNKS):
        for i in range(n):
            if part[c, i] < out[i]:
                out[i] = part[c, i]
    return out


@njit(parallel=True, fastmath=_FAST_FLAGS, cache=True)
def _cross_min_dual_fast(A, B, norms_a, norms_b, mid):
    # One pass produces row minima (A against B) and column minima (B
    # against A); column partials are chunk-indexed for determinism.
    # A-rows go four at a time so each B-row load is amortized.
    na = A.shape[0]
    nb = B.shape[0]
    d = A.shape[1]
    rows = np.empty(na, dtype=np.float64)
    part = np.full((_N_CHUNKS, nb), np.inf, dtype=np.float64)
    for c in prange(_N_CHUNKS):
        owned = np.arange(c, na, _N_CHUNKS)
        m = owned.shape[0]
        g = 0
        while g + 4 <= m:
            i0, i1, i2, i3 = owned[g], owned[g + 1], owned[g + 2], owned[g + 3]
            a0, a1, a2, a3 = A[i0], A[i1], A[i2], A[i3]
            b0 = np.inf
            b1 = np.inf
            b2 = np.inf
            b3 = np.inf
            for j in range(nb):
                bj = B[j]
                acc0 = 0.0
                acc1 = 0.0
                acc2 = 0.0
                acc3 = 0.0
                if mid == 0:
                    for k in range(d):
                        bb = np.float64(bj[k])
                        t0 = np.float64(a0[k]) - bb
                        acc0 += t0 * t0
                        t1 = np.float64(a1[k]) - bb
                        acc1 += t1 * t1
                        t2 = np.float64(a2[k]) - bb
                        acc2 += t2 * t2
                        t3 = np.float64(a3[k]) - bb
                        acc3 += t3 * t3
                else:
                    for k in range(d):
                        bb = np.float64(bj[k])
                        acc0 += np.float64(a0[k]) * bb
                        acc1 += np.float64(a1[k]) * bb
                        acc2 += np.float64(a2[k]) * bb
                        acc3 += np.float64(a3[k]) * bb
                    nbj = norms_b[j]
                    acc0 = 1.0 - acc0 / (norms_a[i0] * nbj)
                    acc1 = 1.0 - acc1 / (norms_a[i1] * nbj)
                    acc2 = 1.0 - acc2 / (norms_a[i2] * nbj)
                    acc3 = 1.0 - acc3 / (norms_a[i3] * nbj)
                if acc0 < b0:
                    b0 = acc0
                if acc1 < b1:
                    b1 = acc1
                if acc2 < b2:
                    b2 = acc2
                if acc3 < b3:
                    b3 = acc3
                lo = min(min(acc0, acc1), min(acc2, acc3))
                if lo < part[c, j]:
                    part[c, j] = lo
            rows[i0] = b0
            rows[i1] = b1
            rows[i2] = b2
            rows[i3] = b3
            g += 4
        while g < m:
            i = owned[g]
            a = A[i]
            best = np.inf
            for j in range(nb):
                acc = 0.0
                if mid == 0:
                    for k in range(d):
                        diff = np.float64(a[k]) - np.float64(B[j, k])
                        acc += diff * diff
                else:
                    for k in range(d):
                        acc += np.float64(a[k]) * np.float64(B[j, k])
                    acc = 1.0 - acc / (norms_a[i] * norms_b[j])
                if acc < best:
                    best = acc
                if acc < part[c, j]:
                    part[c, j] = acc
            rows[i] = best
            g += 1
    cols = np.full(nb, np.inf, dtype=np.float64)
    for c in range(_N_CHUNKS):
        for j in range(nb):
            if part[c, j] < cols[j]:
                cols[j] = part[c, j]
    return rows, cols


# ---------------------------------------------------------------------------
# public wrappers
# ---------------------------------------------------------------------------

def _norms_for(X: np.ndarray, metric: str, label: str) -> np.ndarray:
    if metric != COSINE:
        return np.empty(0, dtype=np.float64)
    norms = row_norms(X)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise DataError(f"zero vector at row {bad} of {label}: cosine distance undefined")
    return norms


def _use_exact(ops: int, exact: bool | None) -> bool:
    if exact is None:
        return ops <= EXACT_PATH_MAX_OPS
    return exact


def self_nearest(A: np.ndarray, metric: str, *, exact: bool | None = None) -> np.ndarray:
    """Distance from each row of A to its nearest other row (by index)."""
    A = as_vectors(A)
    n, d = A.shape
    if n < 2:
        raise DataError("self nearest-neighbor needs at least 2 rows")
    mid = metric_id(metric)
    norms = _norms_for(A, metric, "dataset")
    if _use_exact(n * n * d, exact):
        out = _self_min_exact(A, norms, mid)
    else:
        out = _self_min_fast(A, norms, mid)
    return np.sqrt(out) if metric == L2 else out


def cross_nearest(
    A: np.ndarray, B: np.ndarray, metric: str, *, exact: bool | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(distance of each A-row to nearest B-row, and of each B-row to nearest A-row)."""
    A = as_vectors(A)
    B = as_vectors(B, dim=A.shape[1])
    mid = metric_id(metric)
    norms_a = _norms_for(A, metric, "first dataset")
    norms_b = _norms_for(B, metric, "second dataset")
    if _use_exact(A.shape[0] * B.shape[0] * A.shape[1], exact):
        a_to_b = _cross_min_exact(A, B, norms_a, norms_b, mid)
        b_to_a = _cross_min_exact(B, A, norms_b, norms_a, mid)
    else:
        a_to_b, b_to_a = _cross_min_dual_fast(A, B, norms_a, norms_b, mid)
    if metric == L2:
        a_to_b = np.sqrt(a_to_b)
        b_to_a = np.sqrt(b_to_a)
    return a_to_b, b_to_a
