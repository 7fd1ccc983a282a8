"""Labeled embedding datasets: loading, validation, persistence, splitting.

Two interchangeable on-disk forms:

* JSONL -- one record per line: ``{"id": str, "label": int, "vector": [f, ...]}``.
  Field order is irrelevant; unknown fields are rejected.
* Binary (``.embd``) -- little-endian, no padding:
  magic ``EMBD``, version u32 = 1, dim u32, num_classes u32, count u64,
  then per record: id_len u16, id bytes (UTF-8), label u32, dim x f32.

Vectors are stored as float32. A JSONL -> binary -> JSONL round trip
preserves ids, labels, and vector bits exactly.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DataError

_MAGIC = b"EMBD"
_VERSION = 1


class EmbeddingRecord(NamedTuple):
    id: str
    label: int
    vector: np.ndarray


@dataclass
class EmbeddingDataset:
    """Immutable labeled collection of fixed-dimension float32 vectors."""

    name: str
    dim: int
    num_classes: int
    ids: list[str]
    labels: np.ndarray  # int64, shape (n,)
    vectors: np.ndarray  # float32, shape (n, dim)
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.dim < 1:
            raise DataError(f"dataset {self.name!r}: dim must be >= 1, got {self.dim}")
        if self.num_classes < 1:
            raise DataError(
                f"dataset {self.name!r}: num_classes must be >= 1, got {self.num_classes}"
            )
        n = len(self.ids)
        if self.labels.shape != (n,) or self.vectors.shape != (n, self.dim):
            raise DataError(f"dataset {self.name!r}: inconsistent record arrays")
        if n > 0:
            out_of_range = (self.labels < 0) | (self.labels >= self.num_classes)
            if np.any(out_of_range):
                bad = int(np.argmax(out_of_range))
                raise DataError(
                    f"dataset {self.name!r}: label {int(self.labels[bad])} out of range "
                    f"[0, {self.num_classes}) for record {self.ids[bad]!r}"
                )
            if not np.all(np.isfinite(self.vectors)):
                bad = int(np.argwhere(~np.isfinite(self.vectors))[0][0])
                raise DataError(
                    f"dataset {self.name!r}: non-finite component in record {self.ids[bad]!r}"
                )
        self._index = {}
        for i, rid in enumerate(self.ids):
            if rid in self._index:
                raise DataError(f"dataset {self.name!r}: duplicate id {rid!r}")
            self._index[rid] = i
        self.labels.flags.writeable = False
        self.vectors.flags.writeable = False

    def __len__(self) -> int:
        return len(self.ids)

    def record(self, i: int) -> EmbeddingRecord:
        return EmbeddingRecord(self.ids[i], int(self.labels[i]), self.vectors[i])

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        for i in range(len(self.ids)):
            yield self.record(i)

    def row_of(self, record_id: str) -> int:
        try:
            return self._index[record_id]
        except KeyError:
            raise DataError(f"dataset {self.name!r}: unknown record id {record_id!r}") from None

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def require_all_classes(self) -> None:
        """Every class 0..c-1 must have at least one record (fit precondition)."""
        counts = self.class_counts()
        for cls, cnt in enumerate(counts):
            if cnt == 0:
                raise DataError(f"dataset {self.name!r}: class {cls} has no samples")

    def subset(self, rows: np.ndarray, name: str) -> "EmbeddingDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return EmbeddingDataset(
            name=name,
            dim=self.dim,
            num_classes=self.num_classes,
            ids=[self.ids[i] for i in rows],
            labels=self.labels[rows].copy(),
            vectors=self.vectors[rows].copy(),
        )


def _check_record_obj(obj: dict, where: str) -> tuple[str, int, list]:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: record is not an object")
    unknown = set(obj) - {"id", "label", "vector"}
    if unknown:
        raise DataError(f"{where}: unknown field(s) {sorted(unknown)}")
    for key in ("id", "label", "vector"):
        if key not in obj:
            raise DataError(f"{where}: missing field {key!r}")
    rid, label, vec = obj["id"], obj["label"], obj["vector"]
    if not isinstance(rid, str):
        raise DataError(f"{where}: id must be a string")
    if isinstance(label, bool) or not isinstance(label, int):
        raise DataError(f"{where}: label must be an integer")
    if label < 0:
        raise DataError(f"{where}: label must be >= 0")
    if not isinstance(vec, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec
    ):
        raise DataError(f"{where}: vector must be a list of numbers")
    return rid, label, vec


def load_jsonl(
    path: str | Path,
    name: str | None = None,
    *,
    dim: int | None = None,
    num_classes: int | None = None,
) -> EmbeddingDataset:
    """Load a JSONL embedding file.

    ``dim`` and ``num_classes`` are inferred (first vector's length,
    1 + max label) unless given explicitly.
    """
    path = Path(path)
    name = name if name is not None else path.stem
    ids: list[str] = []
    labels: list[int] = []
    vectors: list[np.ndarray] = []
    inferred_dim = dim
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
            rid, label, vec = _check_record_obj(obj, where)
            if inferred_dim is None:
                inferred_dim = len(vec)
            if len(vec) != inferred_dim:
                raise DataError(
                    f"dimension mismatch at line {lineno}: expected {inferred_dim}, got {len(vec)}"
                )
            with np.errstate(over="ignore"):
                row = np.asarray(vec, dtype=np.float32)
            if not np.all(np.isfinite(row)):
                raise DataError(f"{where}: non-finite vector component")
            ids.append(rid)
            labels.append(label)
            vectors.append(row)
    if not ids:
        raise DataError(f"{path.name}: empty dataset")
    if num_classes is None:
        num_classes = max(labels) + 1
    return EmbeddingDataset(
        name=name,
        dim=int(inferred_dim),
        num_classes=int(num_classes),
        ids=ids,
        labels=np.asarray(labels, dtype=np.int64),
        vectors=np.vstack(vectors),
    )


def save_jsonl(ds: EmbeddingDataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in ds:
            obj = {
                "id": rec.id,
                "label": rec.label,
                "vector": [float(v) for v in rec.vector],
            }
            fh.write(json.dumps(obj, separators=(", ", ": ")) + "\n")


def save_binary(ds: EmbeddingDataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIQ", _VERSION, ds.dim, ds.num_classes, len(ds)))
        for rec in ds:
            raw = rec.id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise DataError(f"record id too long to serialize: {rec.id[:40]!r}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", rec.label))
            fh.write(rec.vector.astype("<f4", copy=False).tobytes())


def load_binary(path: str | Path, name: str | None = None) -> EmbeddingDataset:
    path = Path(path)
    name = name if name is not None else path.stem
    blob = path.read_bytes()
    if len(blob) < 4 or blob[:4] != _MAGIC:
        raise DataError(f"{path.name}: bad magic")
    if len(blob) < 24:
        raise DataError(f"{path.name}: truncated header")
    version, dim, num_classes, count = struct.unpack_from("<IIIQ", blob, 4)
    if version != _VERSION:
        raise DataError(f"{path.name}: unsupported version {version}")
    off = 24
    ids: list[str] = []
    labels = np.empty(count, dtype=np.int64)
    vectors = np.empty((count, dim), dtype=np.float32)
    vec_bytes = 4 * dim
    for k in range(count):
        if off + 2 > len(blob):
            raise DataError(f"{path.name}: truncated at record {k}")
        (id_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        if off + id_len + 4 + vec_bytes > len(blob):
            raise DataError(f"{path.name}: truncated at record {k}")
        ids.append(blob[off : off + id_len].decode("utf-8"))
        off += id_len
        (label,) = struct.unpack_from("<I", blob, off)
        off += 4
        vectors[k] = np.frombuffer(blob, dtype="<f4", count=dim, offset=off)
        labels[k] = label
        off += vec_bytes
    if off != len(blob):
        raise DataError(f"{path.name}: trailing data after last record")
    if count == 0:
        raise DataError(f"{path.name}: empty dataset")
    return EmbeddingDataset(
        name=name, dim=dim, num_classes=num_classes, ids=ids, labels=labels, vectors=vectors
    )


def load_dataset(path: str | Path, name: str | None = None, **kwargs) -> EmbeddingDataset:
    """Load by extension: ``.jsonl``/``.json`` as JSONL, anything else binary."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such dataset file: {path}")
    if path.suffix.lower() in (".jsonl", ".json"):
        return load_jsonl(path, name, **kwargs)
    return load_binary(path, name)


def save_dataset(ds: EmbeddingDataset, path: str | Path) -> None:
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".json"):
        save_jsonl(ds, path)
    else:
        save_binary(ds, path)


def class_balanced_split(
    ds: EmbeddingDataset, train_fraction: float, seed: int
) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    """Per-class split: floor(train_fraction * n_class) records to train.

    Membership is chosen by a seeded shuffle per class; records keep their
    original order inside each split. The two outputs partition the input.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    counts = ds.class_counts()
    for cls, cnt in enumerate(counts):
        if cnt < 2:
            raise DataError(
                f"dataset {ds.name!r}: class {cls} has {int(cnt)} record(s); need >= 2 to split"
            )
    rng = np.random.default_rng(seed)
    train_rows: list[np.ndarray] = []
    test_rows: list[np.ndarray] = []
    for cls in range(ds.num_classes):
        rows = np.flatnonzero(ds.labels == cls)
        perm = rng.permutation(rows)
        n_train = math.floor(train_fraction * len(rows))
        train_rows.append(np.sort(perm[:n_train]))
        test_rows.append(np.sort(perm[n_train:]))
    train_idx = np.sort(np.concatenate(train_rows))
    test_idx = np.sort(np.concatenate(test_rows))
    return (
        ds.subset(train_idx, f"{ds.name}-train"),
        ds.subset(test_idx, f"{ds.name}-test"),
    )
