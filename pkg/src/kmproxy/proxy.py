"""Per-class proxy centers with coverage radii.

A model holds k centers ("proxies") for each of c classes, k*c in total;
center j belongs to class j // k. Training is online and order-dependent:
each sample seeds the first unused center of its class, or folds into the
nearest already-seeded same-class center by an incremental mean with rate
1/count. A second pass over the training data assigns every sample to its
nearest active same-class center and accumulates distance statistics; each
center's coverage radius is then mean + one population standard deviation
of its assigned distances.

Centers are stored as float32; the per-step mean update runs in float64
and is rounded back, so a model saved and reloaded mid-training resumes
bit-exactly. All training kernels are sequential, making results
independent of thread count.

Model file (``.kmpx``), little-endian, no padding: magic ``KMPX``,
version u32 = 1, metric u8 (0 = l2, 1 = cosine), finalized u8, k u32,
c u32, dim u32, then centers (k*c*dim f32), counts (k*c u64), per-center
distance stats count (u64) / mean (f64) / M2 (f64), radii (k*c f64).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numba import njit

from . import distances
from .distances import COSINE, L2, as_vectors, metric_id
from .errors import DataError
from .store import EmbeddingDataset

_MAGIC = b"KMPX"
_VERSION = 1


@dataclass
class ProxyModel:
    metric: str
    proxy_factor: int  # k: proxies per class
    num_classes: int
    dim: int
    centers: np.ndarray  # float32, shape (k*c, dim)
    counts: np.ndarray  # int64, shape (k*c); 0 = never seeded
    stats_count: np.ndarray  # int64, assignment-distance sample counts
    stats_mean: np.ndarray  # float64, running means (Welford)
    stats_m2: np.ndarray  # float64, running sum of squared deviations
    radii: np.ndarray  # float64; NaN until finalized / for inactive centers
    finalized: bool = False

    @property
    def n_centers(self) -> int:
        return self.proxy_factor * self.num_classes

    @property
    def active(self) -> np.ndarray:
        return self.counts > 0

    def proxy_label(self, j: int) -> int:
        return j // self.proxy_factor

    @property
    def proxy_labels(self) -> np.ndarray:
        return np.arange(self.n_centers, dtype=np.int64) // self.proxy_factor


class ProxyQuery(NamedTuple):
    proxy_index: int
    proxy_label: int
    distance: float
    within_radius: bool


def new_model(proxy_factor: int, num_classes: int, dim: int, metric: str = L2) -> ProxyModel:
    if proxy_factor < 1:
        raise ValueError(f"proxy_factor must be >= 1, got {proxy_factor}")
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    metric_id(metric)  # validates
    n = proxy_factor * num_classes
    return ProxyModel(
        metric=metric,
        proxy_factor=proxy_factor,
        num_classes=num_classes,
        dim=dim,
        centers=np.zeros((n, dim), dtype=np.float32),
        counts=np.zeros(n, dtype=np.int64),
        stats_count=np.zeros(n, dtype=np.int64),
        stats_mean=np.zeros(n, dtype=np.float64),
        stats_m2=np.zeros(n, dtype=np.float64),
        radii=np.full(n, np.nan, dtype=np.float64),
    )


@njit(cache=True)
def _nearest_in_class(x, centers, counts, base, k, mid):
    """Nearest seeded center among [base, base+k); ties break low. -1 if none."""
    best = np.inf
    best_j = -1
    if mid == 1:
        nx = math.sqrt(distances._dot_scalar(x, x))
    for j in range(base, base + k):
        if counts[j] == 0:
            continue
        cj = centers[j]
        if mid == 0:
            d = distances._sq_l2_scalar(x, cj)
        else:
            nc = math.sqrt(distances._dot_scalar(cj, cj))
            if nc == 0.0:
                continue
            d = 1.0 - distances._dot_scalar(x, cj) / (nx * nc)
        if d < best:
            best = d
            best_j = j
    return best_j


@njit(cache=True)
def _update_kernel(vectors, labels, centers, counts, k, mid):
    n, d = vectors.shape
    for i in range(n):
        x = vectors[i]
        base = labels[i] * k
        slot = -1
        for j in range(base, base + k):
            if counts[j] == 0:
                slot = j
                break
        if slot >= 0:
            for t in range(d):
                centers[slot, t] = x[t]
            counts[slot] = 1
            continue
        j = _nearest_in_class(x, centers, counts, base, k, mid)
        if j < 0:
            j = base  # all same-class centers degenerate; fold into the first
        counts[j] += 1
        inv = 1.0 / counts[j]
        for t in range(d):
            cj = np.float64(centers[j, t])
            centers[j, t] = np.float32(cj + (np.float64(x[t]) - cj) * inv)


@njit(cache=True)
def _finalize_kernel(vectors, labels, centers, counts, k, mid, stats_count, stats_mean, stats_m2):
    n = vectors.shape[0]
    for i in range(n):
        x = vectors[i]
        base = labels[i] * k
        j = _nearest_in_class(x, centers, counts, base, k, mid)
        if j < 0:
            return i  # no seeded center for this sample's class
        if mid == 0:
            dist = math.sqrt(distances._sq_l2_scalar(x, centers[j]))
        else:
            nx = math.sqrt(distances._dot_scalar(x, x))
            nc = math.sqrt(distances._dot_scalar(centers[j], centers[j]))
            dist = 1.0 - distances._dot_scalar(x, centers[j]) / (nx * nc)
        stats_count[j] += 1
        delta = dist - stats_mean[j]
        stats_mean[j] += delta / stats_count[j]
        stats_m2[j] += delta * (dist - stats_mean[j])
    return -1


def _check_batch(model: ProxyModel, vectors: np.ndarray, labels: np.ndarray):
    vectors = as_vectors(vectors, model.dim)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != vectors.shape[0]:
        raise DataError("vectors and labels must have matching length")
    if labels.size and (labels.min() < 0 or labels.max() >= model.num_classes):
        bad = int(labels[(labels < 0) | (labels >= model.num_classes)][0])
        raise DataError(f"label {bad} out of range [0, {model.num_classes})")
    if model.metric == COSINE and labels.size:
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            row = int(np.argmax(norms == 0.0))
            raise DataError(f"zero vector at row {row}: cosine distance undefined")
    return vectors, labels


def update_proxies(model: ProxyModel, vectors: np.ndarray, labels: np.ndarray) -> None:
    """Stream a batch of (vector, label) samples through the model, in order."""
    if model.finalized:
        raise DataError("model already finalized; cannot update proxies")
    vectors, labels = _check_batch(model, vectors, labels)
    if labels.size == 0:
        return
    _update_kernel(vectors, labels, model.centers, model.counts,
                   model.proxy_factor, metric_id(model.metric))


def finalize_radii(model: ProxyModel, train: EmbeddingDataset) -> None:
    """Second pass over the training data; freezes coverage radii.

    Centers with fewer than 2 assigned samples get radius = mean of their
    assigned distances (0.0 when nothing was assigned); inactive centers
    keep NaN.
    """
    if model.finalized:
        raise DataError("model already finalized")
    if train.dim != model.dim:
        raise DataError(f"dim mismatch: model {model.dim}, train {train.dim}")
    if train.num_classes != model.num_classes:
        raise DataError(
            f"class-count mismatch: model {model.num_classes}, train {train.num_classes}"
        )
    if len(train) == 0:
        raise DataError("cannot finalize on an empty training set")
    seeded_classes = np.unique(model.proxy_labels[model.active])
    for cls in np.unique(train.labels):
        if int(cls) not in seeded_classes:
            raise DataError(f"class {int(cls)} has no active center; update proxies first")
    vectors, labels = _check_batch(model, train.vectors, train.labels)
    bad = _finalize_kernel(
        vectors, labels, model.centers, model.counts, model.proxy_factor,
        metric_id(model.metric), model.stats_count, model.stats_mean, model.stats_m2,
    )
    if bad >= 0:
        raise DataError(f"class {int(labels[bad])} has no active center; update proxies first")
    for j in range(model.n_centers):
        if model.counts[j] == 0:
            continue
        if model.stats_count[j] >= 2:
            std = math.sqrt(model.stats_m2[j] / model.stats_count[j])
            model.radii[j] = model.stats_mean[j] + std
        else:
            model.radii[j] = model.stats_mean[j]
    model.finalized = True


def fit_model(
    train: EmbeddingDataset, proxy_factor: int, metric: str = L2
) -> ProxyModel:
    """Convenience: new model, one streaming pass in file order, finalize."""
    train.require_all_classes()
    model = new_model(proxy_factor, train.num_classes, train.dim, metric)
    update_proxies(model, train.vectors, train.labels)
    finalize_radii(model, train)
    return model


def nearest_proxy_batch(
    model: ProxyModel, vectors: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Global nearest active center for each row: (index, distance, within_radius)."""
    if not model.finalized:
        raise DataError("model not finalized; call finalize_radii first")
    vectors = as_vectors(vectors, model.dim)
    mid = metric_id(model.metric)
    active = model.active
    if model.metric == COSINE:
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            row = int(np.argmax(norms == 0.0))
            raise DataError(f"zero vector at row {row}: cosine distance undefined")
        norms_c = distances.row_norms(model.centers)
    else:
        norms_c = np.empty(0, dtype=np.float64)
    idx, dist = distances.nearest_masked_batch(vectors, model.centers, active, norms_c, mid)
    if np.any(idx < 0):
        raise DataError("model has no active centers")
    within = dist <= model.radii[idx]
    return idx, dist, within


def nearest_proxy(model: ProxyModel, x: np.ndarray) -> ProxyQuery:
    x = np.asarray(x, dtype=np.float32).reshape(1, -1)
    idx, dist, within = nearest_proxy_batch(model, x)
    j = int(idx[0])
    return ProxyQuery(j, model.proxy_label(j), float(dist[0]), bool(within[0]))


def save_model(model: ProxyModel, path: str | Path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(
            "<IBBIII", _VERSION, metric_id(model.metric), int(model.finalized),
            model.proxy_factor, model.num_classes, model.dim,
        ))
        fh.write(model.centers.astype("<f4", copy=False).tobytes())
        fh.write(model.counts.astype("<u8", copy=False).tobytes())
        fh.write(model.stats_count.astype("<u8", copy=False).tobytes())
        fh.write(model.stats_mean.astype("<f8", copy=False).tobytes())
        fh.write(model.stats_m2.astype("<f8", copy=False).tobytes())
        fh.write(model.radii.astype("<f8", copy=False).tobytes())


def load_model(path: str | Path) -> ProxyModel:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 4 or blob[:4] != _MAGIC:
        raise DataError(f"{path.name}: bad magic")
    if len(blob) < 22:
        raise DataError(f"{path.name}: truncated header")
    version, mid, finalized, k, c, dim = struct.unpack_from("<IBBIII", blob, 4)
    if version != _VERSION:
        raise DataError(f"{path.name}: unsupported version {version}")
    if mid not in (0, 1):
        raise DataError(f"{path.name}: unknown metric id {mid}")
    if k < 1 or c < 1 or dim < 1:
        raise DataError(f"{path.name}: invalid model dimensions")
    n = k * c
    expect = 22 + 4 * n * dim + 8 * n * 5
    if len(blob) < expect:
        raise DataError(f"{path.name}: truncated model data")
    if len(blob) > expect:
        raise DataError(f"{path.name}: trailing data after model")
    off = 22

    def take(dtype, count, shape=None):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off).copy()
        off += arr.nbytes
        return arr.reshape(shape) if shape else arr

    centers = take("<f4", n * dim, (n, dim))
    counts = take("<u8", n).astype(np.int64)
    stats_count = take("<u8", n).astype(np.int64)
    stats_mean = take("<f8", n)
    stats_m2 = take("<f8", n)
    radii = take("<f8", n)
    return ProxyModel(
        metric=L2 if mid == 0 else COSINE,
        proxy_factor=k,
        num_classes=c,
        dim=dim,
        centers=centers,
        counts=counts,
        stats_count=stats_count,
        stats_mean=stats_mean,
        stats_m2=stats_m2,
        radii=radii,
        finalized=bool(finalized),
    )
