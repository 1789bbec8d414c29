"""Data model and ingestion for embedding files and image manifests.

An embedding file ("EMB1") is: magic bytes ``EMB1``, little-endian u32 row
count, u32 dim count, then ``rows * dims`` little-endian float32 values in
row-major order.  Values are stored in 32-bit but all computation downstream
happens in float64.

A manifest is a UTF-8 CSV with header
``image_id,identity_id,dataset_name,camera_id,row_index``; ``camera_id`` may
be empty.  Each manifest must reference every row of its paired embedding
file exactly once.

Identities are namespaced internally as ``<dataset_name>/<identity_id>`` so
identities from different datasets never collide in one pool.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

__all__ = [
    "ImageRecord",
    "FeaturePool",
    "IdFeatureTable",
    "MANIFEST_HEADER",
    "read_embeddings",
    "write_embeddings",
    "read_manifest",
    "write_manifest",
    "load_pool",
    "load_target",
    "id_average",
    "slice_pool",
]

MAGIC = b"EMB1"
MANIFEST_HEADER = ["image_id", "identity_id", "dataset_name", "camera_id", "row_index"]
_MAX_REPORT_ROWS = 20


@dataclass(frozen=True)
class ImageRecord:
    """One image's bookkeeping: labels plus its row in the pool matrix."""

    image_id: str
    identity_id: str
    dataset_name: str
    camera_id: int | None
    row_index: int


@dataclass(frozen=True)
class FeaturePool:
    """Immutable feature matrix plus per-image records for one set of images."""

    matrix: np.ndarray  # (n, dims) float64, read-only
    records: tuple[ImageRecord, ...]
    datasets: frozenset[str]

    def __post_init__(self):
        if len(self.records) != self.matrix.shape[0]:
            raise ValidationError(
                f"record count {len(self.records)} != matrix rows {self.matrix.shape[0]}"
            )

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dims(self) -> int:
        return self.matrix.shape[1]

    def identity_order(self) -> list[str]:
        """Distinct identities in first-appearance order."""
        seen: dict[str, None] = {}
        for rec in self.records:
            if rec.identity_id not in seen:
                seen[rec.identity_id] = None
        return list(seen)

    def camera_ids(self) -> list[int | None]:
        return [rec.camera_id for rec in self.records]


@dataclass(frozen=True)
class IdFeatureTable:
    """Per-identity mean features: row i averages all images of identity i."""

    identity_ids: tuple[str, ...]
    features: np.ndarray  # (n_identities, dims) float64
    image_counts: np.ndarray  # (n_identities,) int

    @property
    def n_identities(self) -> int:
        return len(self.identity_ids)


def _report(path, message: str, offenders: list[dict] | None = None) -> dict:
    report = {"error": message, "path": str(path)}
    if offenders:
        report["offending_rows"] = offenders[:_MAX_REPORT_ROWS]
    return report


def write_embeddings(path, matrix) -> None:
    """Writes an EMB1 file; the matrix is stored as little-endian float32."""
    x = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    if x.ndim != 2:
        raise ValidationError(f"embedding matrix must be 2-D, got ndim={x.ndim}")
    rows, dims = x.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", rows, dims))
        fh.write(x.astype("<f4").tobytes(order="C"))


def read_embeddings(path) -> np.ndarray:
    """Reads an EMB1 file into a float64 matrix, validating finiteness."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"embedding file not found: {path}", _report(path, "file not found"))
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise ValidationError(f"not an EMB1 file: {path}", _report(path, "bad magic bytes"))
    rows, dims = struct.unpack("<II", raw[4:12])
    expected = 12 + rows * dims * 4
    if len(raw) != expected:
        raise ValidationError(
            f"truncated embedding file: {path} ({len(raw)} bytes, expected {expected})",
            _report(path, f"expected {expected} bytes, found {len(raw)}"),
        )
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(rows, dims).astype(np.float64)
    if not np.all(np.isfinite(data)):
        bad = np.unique(np.nonzero(~np.isfinite(data))[0]).tolist()
        offenders = [{"row": int(r), "reason": "non-finite value"} for r in bad]
        raise ValidationError(
            f"non-finite value in embeddings: {path}",
            _report(path, "non-finite value in embeddings", offenders),
        )
    return data


def write_manifest(path, rows: Iterable[dict]) -> None:
    """Writes a manifest CSV; each row dict uses the manifest header keys."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_HEADER)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            if out.get("camera_id") is None:
                out["camera_id"] = ""
            writer.writerow(out)


def read_manifest(path) -> list[dict]:
    """Reads and validates one manifest CSV; returns raw row dicts."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"manifest not found: {path}", _report(path, "file not found"))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"empty manifest: {path}", _report(path, "empty manifest"))
        if header != MANIFEST_HEADER:
            raise ValidationError(
                f"bad manifest header in {path}: {header}",
                _report(path, f"expected header {MANIFEST_HEADER}, got {header}"),
            )
        rows = []
        offenders = []
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(MANIFEST_HEADER):
                offenders.append({"row": lineno, "reason": f"expected 5 cells, got {len(cells)}"})
                continue
            rows.append(dict(zip(MANIFEST_HEADER, cells), _line=lineno))
    if offenders:
        raise ValidationError(
            f"malformed rows in manifest {path}",
            _report(path, "malformed manifest rows", offenders),
        )
    return rows


def _parse_records(
    manifest_path, rows: list[dict], n_rows: int, row_offset: int, seen_ids: set[str]
) -> list[ImageRecord]:
    records = []
    offenders = []
    seen_rows: set[int] = set()
    for row in rows:
        line = row["_line"]
        image_id = row["image_id"]
        identity = row["identity_id"]
        dataset = row["dataset_name"]
        if not image_id:
            offenders.append({"row": line, "reason": "empty image_id"})
            continue
        if not identity:
            offenders.append({"row": line, "reason": "empty identity_id"})
            continue
        if not dataset:
            offenders.append({"row": line, "reason": "empty dataset_name"})
            continue
        if image_id in seen_ids:
            offenders.append({"row": line, "reason": f"duplicate image_id '{image_id}'"})
            continue
        camera: int | None = None
        if row["camera_id"] != "":
            try:
                camera = int(row["camera_id"])
            except ValueError:
                offenders.append({"row": line, "reason": f"bad camera_id '{row['camera_id']}'"})
                continue
        try:
            local_row = int(row["row_index"])
        except ValueError:
            offenders.append({"row": line, "reason": f"bad row_index '{row['row_index']}'"})
            continue
        if not 0 <= local_row < n_rows:
            offenders.append(
                {"row": line, "reason": f"row out of range: {local_row} not in [0, {n_rows})"}
            )
            continue
        if local_row in seen_rows:
            offenders.append({"row": line, "reason": f"row_index {local_row} referenced twice"})
            continue
        seen_rows.add(local_row)
        seen_ids.add(image_id)
        records.append(
            ImageRecord(
                image_id=image_id,
                identity_id=f"{dataset}/{identity}",
                dataset_name=dataset,
                camera_id=camera,
                row_index=row_offset + local_row,
            )
        )
    if offenders:
        raise ValidationError(
            f"invalid rows in manifest {manifest_path} "
            f"(first: {offenders[0]['reason']})",
            _report(manifest_path, "invalid manifest rows", offenders),
        )
    if len(seen_rows) != n_rows:
        missing = sorted(set(range(n_rows)) - seen_rows)[:_MAX_REPORT_ROWS]
        raise ValidationError(
            f"manifest {manifest_path} does not cover all {n_rows} embedding rows",
            _report(
                manifest_path,
                "uncovered embedding rows",
                [{"row": int(r), "reason": "embedding row not referenced"} for r in missing],
            ),
        )
    return records


def load_pool(manifest_paths: Sequence, embedding_paths: Sequence) -> FeaturePool:
    """Loads manifest/embedding file pairs into one concatenated pool.

    Files are concatenated in the given order and row indices re-based onto
    the combined matrix, so loading the same files twice yields identical
    pools.  All embedding files must share the same dimensionality and every
    image_id must be unique across the whole pool.
    """
    if len(manifest_paths) != len(embedding_paths):
        raise ValidationError(
            f"{len(manifest_paths)} manifests but {len(embedding_paths)} embedding files"
        )
    if not manifest_paths:
        raise ValidationError("no input files given")
    matrices = []
    records: list[ImageRecord] = []
    seen_ids: set[str] = set()
    dims: int | None = None
    offset = 0
    for manifest_path, embedding_path in zip(manifest_paths, embedding_paths):
        matrix = read_embeddings(embedding_path)
        if dims is None:
            dims = matrix.shape[1]
        elif matrix.shape[1] != dims:
            raise ValidationError(
                f"dimension mismatch: {embedding_path} has dims={matrix.shape[1]}, "
                f"expected {dims}",
                _report(embedding_path, f"dims {matrix.shape[1]} != {dims}"),
            )
        rows = read_manifest(manifest_path)
        records.extend(_parse_records(manifest_path, rows, matrix.shape[0], offset, seen_ids))
        matrices.append(matrix)
        offset += matrix.shape[0]
    full = np.ascontiguousarray(np.vstack(matrices))
    full.setflags(write=False)
    datasets = frozenset(rec.dataset_name for rec in records)
    return FeaturePool(matrix=full, records=tuple(records), datasets=datasets)


def load_target(manifest_path, embedding_path) -> FeaturePool:
    """Loads one unlabeled target set.

    Identity labels may be placeholders (e.g. ``?``); nothing downstream reads
    them for the target except ``camera_id`` in camera-aware search.
    """
    return load_pool([manifest_path], [embedding_path])


def id_average(pool: FeaturePool) -> IdFeatureTable:
    """Averages each identity's image features into one row per identity.

    Identity order is first-appearance order over the pool records; sums are
    accumulated in float64 in record order.
    """
    if pool.n_rows == 0:
        raise ValidationError("cannot average an empty pool")
    order = pool.identity_order()
    index = {identity: i for i, identity in enumerate(order)}
    sums = np.zeros((len(order), pool.dims), dtype=np.float64)
    counts = np.zeros(len(order), dtype=np.int64)
    for rec in pool.records:
        i = index[rec.identity_id]
        sums[i] += pool.matrix[rec.row_index]
        counts[i] += 1
    features = sums / counts[:, None]
    features.setflags(write=False)
    return IdFeatureTable(identity_ids=tuple(order), features=features, image_counts=counts)


def slice_pool(pool: FeaturePool, record_indices: Sequence[int]) -> FeaturePool:
    """Builds a new pool from a subset of records, re-basing row indices."""
    idx = list(record_indices)
    rows = np.ascontiguousarray(pool.matrix[[pool.records[i].row_index for i in idx]])
    rows.setflags(write=False)
    records = tuple(
        ImageRecord(
            image_id=pool.records[i].image_id,
            identity_id=pool.records[i].identity_id,
            dataset_name=pool.records[i].dataset_name,
            camera_id=pool.records[i].camera_id,
            row_index=new_row,
        )
        for new_row, i in enumerate(idx)
    )
    datasets = frozenset(rec.dataset_name for rec in records)
    return FeaturePool(matrix=rows, records=records, datasets=datasets)
