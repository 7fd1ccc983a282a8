"""Selective classification: accept/reject decisions and metrics over the kept slice.

A prediction is rejected when the nearest proxy disagrees with the
predicted label (``label_flip``), when the sample falls outside that
proxy's coverage radius (``out_of_radius``), or per the chosen policy:

* ``either`` -- reject on any reason (default),
* ``both`` -- reject only when both reasons fire,
* ``flip_only`` / ``radius_only`` -- single-signal variants.

Reasons are always recorded, accepted or not. Metrics (macro precision,
recall, F1) are computed over accepted samples only but averaged across
all classes, so a class with no accepted samples drags the macro scores
down instead of silently vanishing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import distances
from .distances import L2, metric_id
from .errors import DataError
from .overlap import directional_overlap
from .proxy import ProxyModel, nearest_proxy_batch
from .store import EmbeddingDataset

POLICIES = ("either", "both", "flip_only", "radius_only")

LABEL_FLIP = "label_flip"
OUT_OF_RADIUS = "out_of_radius"


class PredictionRecord(NamedTuple):
    id: str
    label: int
    score: Optional[float] = None


@dataclass
class RejectDecision:
    id: str
    accepted: bool
    reasons: tuple[str, ...]  # subset of (label_flip, out_of_radius), that order
    proxy_index: int
    proxy_label: int
    distance: float
    radius: float


@dataclass
class SelectiveReport:
    num_classes: int
    total: int
    accepted: int
    rejected: int
    coverage: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class_f1: list[float]
    confusion: np.ndarray  # (c, c), rows = truth, cols = predicted, accepted only
    nothing_accepted: bool = False


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    """JSONL, one object per line: {"id": str, "label": int, "score"?: float}."""
    path = Path(path)
    preds: list[PredictionRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{where}: record is not an object")
            unknown = set(obj) - {"id", "label", "score"}
            if unknown:
                raise DataError(f"{where}: unknown field(s) {sorted(unknown)}")
            if "id" not in obj or "label" not in obj:
                raise DataError(f"{where}: missing required field")
            rid, label = obj["id"], obj["label"]
            if not isinstance(rid, str):
                raise DataError(f"{where}: id must be a string")
            if isinstance(label, bool) or not isinstance(label, int) or label < 0:
                raise DataError(f"{where}: label must be a non-negative integer")
            score = obj.get("score")
            if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
                raise DataError(f"{where}: score must be a number")
            if rid in seen:
                raise DataError(f"{where}: duplicate id {rid!r}")
            seen.add(rid)
            preds.append(PredictionRecord(rid, label, None if score is None else float(score)))
    if not preds:
        raise DataError(f"{path.name}: empty predictions file")
    return preds


def save_predictions(preds: Sequence[PredictionRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in preds:
            obj = {"id": p.id, "label": p.label}
            if p.score is not None:
                obj["score"] = p.score
            fh.write(json.dumps(obj) + "\n")


def _check_aligned(ds: EmbeddingDataset, preds: Sequence[PredictionRecord]) -> np.ndarray:
    """Predictions must cover the dataset exactly; returns their row indices."""
    if len(preds) != len(ds):
        raise DataError(
            f"prediction count {len(preds)} does not match dataset {ds.name!r} size {len(ds)}"
        )
    rows = np.empty(len(preds), dtype=np.int64)
    for i, p in enumerate(preds):
        rows[i] = ds.row_of(p.id)
    return rows


def decide(
    model: ProxyModel,
    ds: EmbeddingDataset,
    preds: Sequence[PredictionRecord],
    policy: str = "either",
) -> list[RejectDecision]:
    """One decision per prediction, in prediction order."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    if ds.dim != model.dim:
        raise DataError(f"dim mismatch: model {model.dim}, dataset {ds.dim}")
    rows = _check_aligned(ds, preds)
    idx, dist, within = nearest_proxy_batch(model, ds.vectors)
    decisions: list[RejectDecision] = []
    for p, row in zip(preds, rows):
        j = int(idx[row])
        plabel = model.proxy_label(j)
        flip = p.label != plabel
        outside = not bool(within[row])
        reasons = tuple(
            r for r, hit in ((LABEL_FLIP, flip), (OUT_OF_RADIUS, outside)) if hit
        )
        if policy == "either":
            rejected = flip or outside
        elif policy == "both":
            rejected = flip and outside
        elif policy == "flip_only":
            rejected = flip
        else:
            rejected = outside
        decisions.append(RejectDecision(
            id=p.id,
            accepted=not rejected,
            reasons=reasons,
            proxy_index=j,
            proxy_label=plabel,
            distance=float(dist[row]),
            radius=float(model.radii[j]),
        ))
    return decisions


def selective_metrics(
    truth: EmbeddingDataset,
    preds: Sequence[PredictionRecord],
    decisions: Sequence[RejectDecision],
) -> SelectiveReport:
    if len(preds) != len(decisions):
        raise DataError("predictions and decisions differ in length")
    for p, d in zip(preds, decisions):
        if p.id != d.id:
            raise DataError(f"prediction/decision id mismatch: {p.id!r} vs {d.id!r}")
    rows = _check_aligned(truth, preds)
    c = truth.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    accepted = 0
    for p, d, row in zip(preds, decisions, rows):
        if not d.accepted:
            continue
        if p.label >= c:
            raise DataError(f"predicted label {p.label} out of range [0, {c})")
        confusion[truth.labels[row], p.label] += 1
        accepted += 1
    total = len(preds)
    precision = np.zeros(c)
    recall = np.zeros(c)
    f1 = np.zeros(c)
    for k in range(c):
        tp = confusion[k, k]
        pred_k = confusion[:, k].sum()
        true_k = confusion[k, :].sum()
        precision[k] = tp / pred_k if pred_k else 0.0
        recall[k] = tp / true_k if true_k else 0.0
        denom = precision[k] + recall[k]
        f1[k] = 2.0 * precision[k] * recall[k] / denom if denom else 0.0
    return SelectiveReport(
        num_classes=c,
        total=total,
        accepted=accepted,
        rejected=total - accepted,
        coverage=accepted / total,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        per_class_f1=[float(v) for v in f1],
        confusion=confusion,
        nothing_accepted=(accepted == 0),
    )


@dataclass
class CrossCell:
    train: str
    eval: str
    selective: SelectiveReport
    o_directional: float


@dataclass
class CrossMatrix:
    trains: list[str]
    evals: list[str]
    cells: dict[tuple[str, str], CrossCell] = field(default_factory=dict)


def cross_matrix(
    models: dict[str, ProxyModel],
    train_sets: dict[str, EmbeddingDataset],
    eval_sets: dict[str, EmbeddingDataset],
    predictions: dict[tuple[str, str], Sequence[PredictionRecord]],
    policy: str = "either",
    overlap_metric: str = "cosine",
) -> CrossMatrix:
    """Every model scored on every eval set, with train-vs-eval overlap per cell.

    ``predictions`` is keyed by (model name, eval name); a missing pair is
    an error, not an empty cell.
    """
    if set(models) != set(train_sets):
        raise DataError("models and train_sets must share the same names")
    out = CrossMatrix(trains=list(models), evals=list(eval_sets))
    for tname, model in models.items():
        for ename, ds in eval_sets.items():
            try:
                preds = predictions[(tname, ename)]
            except KeyError:
                raise DataError(f"missing predictions for pair ({tname!r}, {ename!r})") from None
            decisions = decide(model, ds, preds, policy)
            report = selective_metrics(ds, preds, decisions)
            ov = directional_overlap(train_sets[tname], ds, overlap_metric)
            out.cells[(tname, ename)] = CrossCell(
                train=tname, eval=ename, selective=report, o_directional=ov.o_directional
            )
    return out


def report_to_dict(report: SelectiveReport) -> dict:
    return {
        "num_classes": report.num_classes,
        "total": report.total,
        "accepted": report.accepted,
        "rejected": report.rejected,
        "coverage": report.coverage,
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "macro_f1": report.macro_f1,
        "per_class_f1": report.per_class_f1,
        "confusion": report.confusion.tolist(),
        "nothing_accepted": report.nothing_accepted,
    }


def matrix_to_dict(matrix: CrossMatrix) -> dict:
    return {
        "trains": matrix.trains,
        "evals": matrix.evals,
        "cells": [
            {
                "train": cell.train,
                "eval": cell.eval,
                "o_directional": cell.o_directional,
                "selective": report_to_dict(cell.selective),
            }
            for cell in matrix.cells.values()
        ],
    }


def render_matrix_table(matrix: CrossMatrix) -> str:
    """Plain-text grid; each cell shows f1/coverage/overlap."""
    col_w = max([len(t) for t in matrix.trains] + [23])
    lines = ["cell = f1/coverage/overlap", ""]
    header = "eval".ljust(16) + "".join(t.rjust(col_w + 2) for t in matrix.trains)
    lines.append(header)
    for ename in matrix.evals:
        row = ename.ljust(16)
        for tname in matrix.trains:
            cell = matrix.cells[(tname, ename)]
            txt = f"{cell.selective.macro_f1:.3f}/{cell.selective.coverage:.3f}/{cell.o_directional:.3f}"
            row += txt.rjust(col_w + 2)
        lines.append(row)
    return "\n".join(lines) + "\n"


def save_decisions(decisions: Sequence[RejectDecision], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in decisions:
            fh.write(json.dumps({
                "id": d.id,
                "accepted": d.accepted,
                "reasons": list(d.reasons),
                "proxy_index": d.proxy_index,
                "proxy_label": d.proxy_label,
                "distance": d.distance,
                "radius": d.radius,
            }) + "\n")


# -- synthetic data and a plain nearest-centroid baseline ----------------------


def grid_centers(num: int, dim: int, separation: float) -> np.ndarray:
    """Deterministic well-separated cluster centers on an axis-aligned grid.

    Center j sits at ``separation * (1 + j // dim)`` along axis ``j % dim``,
    so any two centers are at least ``separation`` apart in L2.
    """
    centers = np.zeros((num, dim), dtype=np.float64)
    for j in range(num):
        centers[j, j % dim] = separation * (1 + j // dim)
    return centers


def gen_blobs(
    name: str,
    dim: int,
    num_classes: int,
    centers: np.ndarray,
    cluster_classes: Sequence[int],
    n_per_cluster: int | Sequence[int],
    spread: float | Sequence[float],
    seed: int,
) -> EmbeddingDataset:
    """Gaussian blobs, one per row of ``centers``, labeled by ``cluster_classes``.

    Sampling order is fixed (cluster by cluster), so output is a pure
    function of the arguments.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    m = centers.shape[0]
    if centers.shape[1] != dim:
        raise DataError(f"centers have dim {centers.shape[1]}, expected {dim}")
    if len(cluster_classes) != m:
        raise DataError("cluster_classes must match the number of centers")
    for cls in cluster_classes:
        if not 0 <= cls < num_classes:
            raise DataError(f"cluster class {cls} out of range [0, {num_classes})")
    sizes = [n_per_cluster] * m if isinstance(n_per_cluster, int) else list(n_per_cluster)
    spreads = [spread] * m if isinstance(spread, (int, float)) else list(spread)
    if len(sizes) != m or len(spreads) != m:
        raise DataError("per-cluster sizes/spreads must match the number of centers")
    for s in spreads:
        if not s > 0:
            raise DataError(f"spread must be positive, got {s}")
    for n in sizes:
        if n < 1:
            raise DataError(f"cluster size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    ids: list[str] = []
    labels: list[int] = []
    chunks: list[np.ndarray] = []
    for ci in range(m):
        pts = centers[ci] + spreads[ci] * rng.standard_normal((sizes[ci], dim))
        chunks.append(pts.astype(np.float32))
        ids.extend(f"{name}-c{ci:02d}-{i:05d}" for i in range(sizes[ci]))
        labels.extend([int(cluster_classes[ci])] * sizes[ci])
    return EmbeddingDataset(
        name=name,
        dim=dim,
        num_classes=num_classes,
        ids=ids,
        labels=np.asarray(labels, dtype=np.int64),
        vectors=np.vstack(chunks),
    )


def class_centroids(train: EmbeddingDataset) -> np.ndarray:
    """Per-class mean vectors (float32); every class must be populated."""
    train.require_all_classes()
    out = np.zeros((train.num_classes, train.dim), dtype=np.float64)
    for cls in range(train.num_classes):
        out[cls] = train.vectors[train.labels == cls].astype(np.float64).mean(axis=0)
    return out.astype(np.float32)


def nearest_center_classify(
    train: EmbeddingDataset, ds: EmbeddingDataset, metric: str = L2
) -> list[PredictionRecord]:
    """Nearest class-centroid baseline; ties break toward the lower class."""
    if train.dim != ds.dim:
        raise DataError(f"dim mismatch: {train.name!r} has {train.dim}, {ds.name!r} has {ds.dim}")
    mid = metric_id(metric)
    centroids = class_centroids(train)
    active = np.ones(centroids.shape[0], dtype=bool)
    if metric == L2:
        norms = np.empty(0, dtype=np.float64)
    else:
        norms = distances.row_norms(centroids)
        if np.any(norms == 0.0):
            raise DataError("zero-norm class centroid: cosine distance undefined")
        qn = np.linalg.norm(ds.vectors.astype(np.float64), axis=1)
        if np.any(qn == 0.0):
            row = int(np.argmax(qn == 0.0))
            raise DataError(f"zero vector at row {row}: cosine distance undefined")
    idx, _ = distances.nearest_masked_batch(ds.vectors, centroids, active, norms, mid)
    return [PredictionRecord(ds.ids[i], int(idx[i])) for i in range(len(ds))]
