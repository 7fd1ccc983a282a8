"""Nearest-neighbor overlap between two embedding datasets.

For a point x in A against a reference set B:

* w(x) -- distance from x to its nearest other point in A,
* b(x) -- distance from x to its nearest point in B,
* ratio(x) = w(x) / b(x), with b = 0 and w > 0 giving +inf and
  b = 0 and w = 0 giving 1 (exact duplicate across the sets).

p_a is the fraction of A with ratio strictly greater than 1 (its
own set looks farther than the other set), p_b the mirror image.
The bidirectional score is (p_a + p_b) / 2; the directional score
is p_a alone, read as "A = training data, B = unseen data".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .distances import COSINE, cross_nearest, metric_id, self_nearest
from .errors import DataError
from .store import EmbeddingDataset


class PointRatio(NamedTuple):
    id: str
    w: float  # nearest-other distance inside the point's own set
    b: float  # nearest distance to the other set
    ratio: float


@dataclass
class OverlapReport:
    metric: str
    p_a: float
    p_b: float
    o_bidirectional: float
    o_directional: float
    per_point: list[PointRatio] = field(default_factory=list)


def _ratios(w: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(w)
    zero = b == 0.0
    np.divide(w, b, out=out, where=~zero)
    out[zero & (w > 0.0)] = np.inf
    out[zero & (w == 0.0)] = 1.0
    return out


def _exceed_fraction(ratio: np.ndarray) -> float:
    return int(np.count_nonzero(ratio > 1.0)) / ratio.shape[0]


def per_point_ratios(
    a: EmbeddingDataset, b: EmbeddingDataset, metric: str = COSINE, *, exact=None
) -> list[PointRatio]:
    """w, b, and ratio for every point of ``a`` against reference set ``b``."""
    metric_id(metric)
    if a.dim != b.dim:
        raise DataError(f"dim mismatch: {a.name!r} has {a.dim}, {b.name!r} has {b.dim}")
    if len(a) < 2:
        raise DataError(f"dataset {a.name!r} needs >= 2 records for within-set distances")
    if len(b) < 1:
        raise DataError(f"dataset {b.name!r} is empty")
    w = self_nearest(a.vectors, metric, exact=exact)
    ab, _ = cross_nearest(a.vectors, b.vectors, metric, exact=exact)
    ratio = _ratios(w, ab)
    return [
        PointRatio(a.ids[i], float(w[i]), float(ab[i]), float(ratio[i]))
        for i in range(len(a))
    ]


def directional_overlap(
    a: EmbeddingDataset,
    b: EmbeddingDataset,
    metric: str = COSINE,
    *,
    exact=None,
    include_per_point: bool = False,
) -> OverlapReport:
    """Overlap in both directions between ``a`` and ``b``.

    ``per_point`` rows (for points of ``a``) are attached only when
    ``include_per_point`` is set; the scalar scores never depend on it.
    """
    metric_id(metric)
    if a.dim != b.dim:
        raise DataError(f"dim mismatch: {a.name!r} has {a.dim}, {b.name!r} has {b.dim}")
    for ds in (a, b):
        if len(ds) < 2:
            raise DataError(f"dataset {ds.name!r} needs >= 2 records for within-set distances")
    w_a = self_nearest(a.vectors, metric, exact=exact)
    w_b = self_nearest(b.vectors, metric, exact=exact)
    a_to_b, b_to_a = cross_nearest(a.vectors, b.vectors, metric, exact=exact)
    ratio_a = _ratios(w_a, a_to_b)
    ratio_b = _ratios(w_b, b_to_a)
    p_a = _exceed_fraction(ratio_a)
    p_b = _exceed_fraction(ratio_b)
    per_point: list[PointRatio] = []
    if include_per_point:
        per_point = [
            PointRatio(a.ids[i], float(w_a[i]), float(a_to_b[i]), float(ratio_a[i]))
            for i in range(len(a))
        ]
    return OverlapReport(
        metric=metric,
        p_a=p_a,
        p_b=p_b,
        o_bidirectional=(p_a + p_b) / 2.0,
        o_directional=p_a,
        per_point=per_point,
    )


def _json_num(x: float):
    # JSON has no Infinity literal; infinite ratios serialize as the string "inf"
    return x if np.isfinite(x) else "inf"


def report_to_dict(report: OverlapReport) -> dict:
    out = {
        "metric": report.metric,
        "p_a": report.p_a,
        "p_b": report.p_b,
        "o_bidirectional": report.o_bidirectional,
        "o_directional": report.o_directional,
    }
    if report.per_point:
        out["per_point"] = [
            {"id": p.id, "w": _json_num(p.w), "b": _json_num(p.b), "ratio": _json_num(p.ratio)}
            for p in report.per_point
        ]
    return out


def write_overlap_json(report: OverlapReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_per_point_tsv(rows: list[PointRatio], path: str | Path) -> None:
    def cell(x: float) -> str:
        return repr(x) if np.isfinite(x) else "inf"

    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("id\tw\tb\tratio\n")
        for p in rows:
            fh.write(f"{p.id}\t{cell(p.w)}\t{cell(p.b)}\t{cell(p.ratio)}\n")
