"""Labeled feature-vector datasets and their on-disk formats.

Two interchange formats are supported:

* ``binary`` (canonical, magic ``CBFV``): fixed-width, seekable,
  language-neutral.  Layout, all little-endian::

      bytes 0..3   magic  b"CBFV"
      bytes 4..7   u32    format version (currently 1)
      bytes 8..11  u32    feature dimension
      bytes 12..19 u64    record count
      then per record: u32 label, followed by `dim` IEEE-754 binary32 values

* ``csv``: one record per line, label in the first column, no header row,
  ``.`` as the decimal separator.  Vectors round-trip at 32-bit precision.

Record order is preserved exactly; downstream clustering is order-sensitive,
so order is part of the data.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import struct

import numpy as np

MAGIC_BINARY = b"CBFV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, record count


class DatasetFormatError(ValueError):
    """A dataset file or in-memory dataset violates the format contract."""


@dataclass(frozen=True)
class FeatureRecord:
    """One labeled feature vector; the unit of ingest."""

    label: int
    vector: np.ndarray  # float32, shape (dim,)


class FeatureDataset:
    """An ordered collection of labeled float32 feature vectors.

    Internally stored as a label array of shape (n,) and a vector matrix of
    shape (n, dim).  Instances are treated as immutable after construction.
    """

    def __init__(self, labels, vectors):
        labels = np.asarray(labels, dtype=np.int64)
        vectors = np.asarray(vectors, dtype=np.float32)
        if labels.ndim != 1 or vectors.ndim != 2:
            raise DatasetFormatError("labels must be 1-D and vectors 2-D")
        if len(labels) != len(vectors):
            raise DatasetFormatError(
                f"{len(labels)} labels for {len(vectors)} vectors"
            )
        if len(labels) == 0:
            raise DatasetFormatError("dataset must contain at least one record")
        if vectors.shape[1] < 1:
            raise DatasetFormatError("feature dimension must be >= 1")
        if labels.min() < 0:
            bad = int(np.argmax(labels < 0))
            raise DatasetFormatError(f"record {bad}: negative label {labels[bad]}")
        if not np.all(np.isfinite(vectors)):
            bad = int(np.argmax(~np.all(np.isfinite(vectors), axis=1)))
            raise DatasetFormatError(f"record {bad}: non-finite component")
        self.labels = labels
        self.vectors = vectors
        self.labels.setflags(write=False)
        self.vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def class_ids(self) -> list[int]:
        """Distinct labels present, ascending."""
        return [int(c) for c in np.unique(self.labels)]

    def __len__(self) -> int:
        return len(self.labels)

    def record(self, i: int) -> FeatureRecord:
        return FeatureRecord(int(self.labels[i]), self.vectors[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self.record(i)

    @classmethod
    def from_records(cls, records) -> "FeatureDataset":
        records = list(records)
        if not records:
            raise DatasetFormatError("dataset must contain at least one record")
        labels = [r.label for r in records]
        vectors = [r.vector for r in records]
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise DatasetFormatError(f"mixed vector dimensions {sorted(dims)}")
        return cls(labels, np.stack(vectors))


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("vector", "<f4", (dim,))])


def _read_binary(path: Path) -> FeatureDataset:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, dim, count = _HEADER.unpack_from(raw)
    if magic != MAGIC_BINARY:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise DatasetFormatError(f"{path}: dimension {dim} < 1")
    if count < 1:
        raise DatasetFormatError(f"{path}: empty dataset")
    rec_size = 4 + 4 * dim
    body = raw[_HEADER.size:]
    if len(body) != count * rec_size:
        whole = len(body) // rec_size
        raise DatasetFormatError(
            f"{path}: truncated at record {whole} "
            f"(header declares {count} records)"
        )
    table = np.frombuffer(body, dtype=_record_dtype(dim))
    vectors = table["vector"]
    if not np.all(np.isfinite(vectors)):
        bad = int(np.argmax(~np.all(np.isfinite(vectors), axis=1)))
        raise DatasetFormatError(f"{path}: record {bad}: non-finite component")
    return FeatureDataset(table["label"].astype(np.int64), vectors)


def _read_csv(path: Path) -> FeatureDataset:
    labels: list[int] = []
    rows: list[np.ndarray] = []
    dim = None
    with open(path, "r", encoding="ascii") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if dim is None:
                dim = len(fields) - 1
                if dim < 1:
                    raise DatasetFormatError(f"{path}: record 0 has no components")
            elif len(fields) - 1 != dim:
                raise DatasetFormatError(
                    f"{path}: record {len(rows)} has {len(fields) - 1} "
                    f"components, expected {dim}"
                )
            try:
                label = int(fields[0])
                vec = np.array(fields[1:], dtype=np.float32)
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path}: record {len(rows)}: {exc}"
                ) from None
            if label < 0:
                raise DatasetFormatError(
                    f"{path}: record {len(rows)}: negative label {label}"
                )
            if not np.all(np.isfinite(vec)):
                raise DatasetFormatError(
                    f"{path}: record {len(rows)}: non-finite component"
                )
            labels.append(label)
            rows.append(vec)
    if not rows:
        raise DatasetFormatError(f"{path}: empty dataset")
    return FeatureDataset(labels, np.stack(rows))


def read_dataset(path, format: str = "binary") -> FeatureDataset:
    """Load a dataset from `path` in the given format ("binary" or "csv")."""
    path = Path(path)
    if format == "binary":
        return _read_binary(path)
    if format == "csv":
        return _read_csv(path)
    raise ValueError(f"unknown format {format!r}")


def _write_binary(dataset: FeatureDataset, path: Path) -> None:
    if dataset.labels.max() > 0xFFFFFFFF:
        raise DatasetFormatError("label does not fit in u32")
    table = np.empty(len(dataset), dtype=_record_dtype(dataset.dim))
    table["label"] = dataset.labels
    table["vector"] = dataset.vectors
    header = _HEADER.pack(MAGIC_BINARY, FORMAT_VERSION, dataset.dim, len(dataset))
    path.write_bytes(header + table.tobytes())


def _write_csv(dataset: FeatureDataset, path: Path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for i in range(len(dataset)):
            # %.9g round-trips any binary32 value exactly
            comps = ",".join("%.9g" % v for v in dataset.vectors[i])
            fh.write(f"{dataset.labels[i]},{comps}\n")


def write_dataset(dataset: FeatureDataset, path, format: str = "binary") -> None:
    """Write `dataset` to `path`; binary round-trips are byte-identical."""
    path = Path(path)
    if format == "binary":
        _write_binary(dataset, path)
    elif format == "csv":
        _write_csv(dataset, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def split_by_class(dataset: FeatureDataset) -> dict[int, np.ndarray]:
    """Partition vectors by label, preserving within-class record order."""
    return {
        c: dataset.vectors[dataset.labels == c] for c in dataset.class_ids
    }
