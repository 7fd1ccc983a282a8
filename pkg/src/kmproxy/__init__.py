"""Reject-option classification with per-class proxy centers, plus a
nearest-neighbor overlap score between embedding datasets."""

from .distances import COSINE, L2, METRICS, cross_nearest, self_nearest
from .errors import DataError
from .evaluate import (
    CrossMatrix,
    PredictionRecord,
    RejectDecision,
    SelectiveReport,
    cross_matrix,
    decide,
    gen_blobs,
    load_predictions,
    nearest_center_classify,
    selective_metrics,
)
from .overlap import OverlapReport, directional_overlap, per_point_ratios
from .proxy import (
    ProxyModel,
    finalize_radii,
    fit_model,
    load_model,
    nearest_proxy,
    new_model,
    save_model,
    update_proxies,
)
from .store import (
    EmbeddingDataset,
    class_balanced_split,
    load_dataset,
    load_jsonl,
    save_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "COSINE",
    "L2",
    "METRICS",
    "DataError",
    "EmbeddingDataset",
    "OverlapReport",
    "PredictionRecord",
    "ProxyModel",
    "RejectDecision",
    "SelectiveReport",
    "CrossMatrix",
    "class_balanced_split",
    "cross_matrix",
    "cross_nearest",
    "decide",
    "directional_overlap",
    "finalize_radii",
    "fit_model",
    "gen_blobs",
    "load_dataset",
    "load_jsonl",
    "load_model",
    "load_predictions",
    "nearest_center_classify",
    "nearest_proxy",
    "new_model",
    "per_point_ratios",
    "save_dataset",
    "save_model",
    "selective_metrics",
    "self_nearest",
    "update_proxies",
]
