"""Proxy-set search: score clusters against the target and sample identities.

The pipeline is: cluster the pool by identity-averaged features, measure each
cluster's FID and variance gap to the target on image-level features, turn
the two distance lists into per-cluster sampling weights

    w_k = lam * softmax(-fid)_k + (1 - lam) * softmax(-v_gap)_k,

spread each cluster's weight uniformly over its identities (w_k / |S_k|), and
draw the requested number of distinct identities without replacement.  When
the target carries camera labels the search runs once per camera and the
per-pass results are unioned with one copy per identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .cluster import ClusterSubsets, kmeans, materialize_subsets
from .corpus import FeaturePool, ImageRecord, id_average, slice_pool
from .errors import NumericalError, ValidationError
from .stats import DistancePair

__all__ = [
    "SearchParams",
    "ClusterScores",
    "SearchPass",
    "ProxySet",
    "cluster_distances",
    "sampling_scores",
    "sample_proxy",
    "camera_aware_search",
    "search_proxy",
    "proxy_records_jsonl",
    "proxy_from_jsonl",
    "proxy_summary",
]


@dataclass(frozen=True)
class SearchParams:
    """Knobs of one search run.

    ``lam`` trades FID against variance gap in the sampling score (1.0 means
    FID only), ``k`` is the cluster count, ``n_identities`` the number of
    distinct identities drawn per pass.
    """

    lam: float = 0.6
    k: int = 20
    n_identities: int = 500
    seed: int = 0
    camera_aware: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must be in [0, 1], got {self.lam}")
        if self.n_identities < 1:
            raise ValidationError(f"n_identities must be >= 1, got {self.n_identities}")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class ClusterScores:
    """Per-cluster distances and the sampling weights derived from them."""

    fid: np.ndarray
    v_gap: np.ndarray
    weights: np.ndarray  # w_k, sums to 1
    id_counts: np.ndarray | None = None  # |S_k|, when derived from subsets

    @property
    def per_identity_weight(self) -> np.ndarray:
        """w_k / |S_k| for each cluster (requires id_counts)."""
        if self.id_counts is None:
            raise ValidationError("per-identity weights need cluster id_counts")
        counts = np.maximum(self.id_counts, 1)
        return self.weights / counts


@dataclass(frozen=True)
class SearchPass:
    """Provenance of one sampling pass (one camera, or the whole target)."""

    camera: int | None
    seed: int
    scores: ClusterScores
    drawn: tuple[str, ...]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ProxySet:
    """A sampled proxy: distinct identities with all of their images."""

    identity_ids: tuple[str, ...]
    records: tuple[ImageRecord, ...]
    params: SearchParams
    passes: tuple[SearchPass, ...] = field(default=())

    @property
    def n_identities(self) -> int:
        return len(self.identity_ids)


def _softmax_neg(values: np.ndarray) -> np.ndarray:
    z = -np.asarray(values, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def cluster_distances(
    subsets: ClusterSubsets, pool: FeaturePool, target: FeaturePool
) -> list[DistancePair]:
    """FID and variance gap between each cluster's images and the target.

    Distances are computed on image-level features, not the ID-averaged ones
    used for clustering.
    """
    if target.n_rows < 2:
        raise ValidationError(f"target needs at least 2 rows, got {target.n_rows}")
    if pool.dims != target.dims:
        raise ValidationError(f"dimension mismatch: pool {pool.dims} vs target {target.dims}")
    target_summary = stats.summarize(target.matrix)
    target_variance = stats.scalar_variance(target.matrix)
    pairs = []
    for k, rows in enumerate(subsets.row_indices):
        if rows.size < 2:
            raise ValidationError(f"cluster {k} has {rows.size} images; need at least 2")
        features = pool.matrix[rows]
        pairs.append(
            DistancePair(
                fid=stats.fid(stats.summarize(features), target_summary),
                v_gap=abs(stats.scalar_variance(features) - target_variance),
            )
        )
    return pairs


def sampling_scores(
    pairs: list[DistancePair], lam: float, id_counts: np.ndarray | None = None
) -> ClusterScores:
    """Combines negated-distance softmaxes into per-cluster sampling weights."""
    if not pairs:
        raise ValidationError("need at least one cluster distance pair")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must be in [0, 1], got {lam}")
    fids = np.asarray([p.fid for p in pairs], dtype=np.float64)
    gaps = np.asarray([p.v_gap for p in pairs], dtype=np.float64)
    if not (np.all(np.isfinite(fids)) and np.all(np.isfinite(gaps))):
        raise NumericalError("non-finite distance in sampling scores")
    weights = lam * _softmax_neg(fids) + (1.0 - lam) * _softmax_neg(gaps)
    counts = None if id_counts is None else np.asarray(id_counts, dtype=np.int64)
    return ClusterScores(fid=fids, v_gap=gaps, weights=weights, id_counts=counts)


def _draw_identities(
    subsets: ClusterSubsets, scores: ClusterScores, n_identities: int, seed: int
) -> list[str]:
    """Sequential weighted draws without replacement, renormalizing each step."""
    identities: list[str] = []
    weights: list[float] = []
    for k in range(subsets.k):
        count = max(int(subsets.id_counts[k]), 1)
        per_id = scores.weights[k] / count
        for identity in subsets.identity_ids[k]:
            identities.append(identity)
            weights.append(per_id)
    total = len(identities)
    if n_identities > total:
        raise ValidationError(f"requested {n_identities} identities but pool has {total}")
    w = np.asarray(weights, dtype=np.float64)
    rng = np.random.default_rng(seed)
    drawn: list[str] = []
    for _ in range(n_identities):
        p = w / w.sum()
        idx = int(rng.choice(total, p=p))
        drawn.append(identities[idx])
        w[idx] = 0.0
    return drawn


def _gather_records(pool: FeaturePool, identities: list[str]) -> tuple[ImageRecord, ...]:
    wanted = set(identities)
    return tuple(rec for rec in pool.records if rec.identity_id in wanted)


def sample_proxy(
    pool: FeaturePool,
    subsets: ClusterSubsets,
    scores: ClusterScores,
    n_identities: int,
    seed: int,
) -> ProxySet:
    """Draws distinct identities with probability proportional to w_k / |S_k|.

    Every image of a drawn identity is included.  Deterministic given seed.
    """
    drawn = _draw_identities(subsets, scores, n_identities, seed)
    params = SearchParams(n_identities=n_identities, seed=seed)
    search_pass = SearchPass(camera=None, seed=seed, scores=scores, drawn=tuple(drawn))
    return ProxySet(
        identity_ids=tuple(drawn),
        records=_gather_records(pool, drawn),
        params=params,
        passes=(search_pass,),
    )


def _run_pass(
    pool: FeaturePool,
    subsets: ClusterSubsets,
    target: FeaturePool,
    lam: float,
    n_identities: int,
    seed: int,
    camera: int | None,
) -> SearchPass:
    warnings = []
    if target.n_rows < target.dims + 1:
        warnings.append(
            f"target slice has {target.n_rows} rows for {target.dims} dims; "
            "covariance is rank-deficient and eigenvalues were clamped"
        )
    pairs = cluster_distances(subsets, pool, target)
    scores = sampling_scores(pairs, lam, id_counts=subsets.id_counts)
    drawn = _draw_identities(subsets, scores, n_identities, seed)
    return SearchPass(
        camera=camera, seed=seed, scores=scores, drawn=tuple(drawn), warnings=tuple(warnings)
    )


def camera_aware_search(
    pool: FeaturePool, target: FeaturePool, params: SearchParams
) -> ProxySet:
    """Runs the search once per target camera and unions the draws.

    Clustering is computed once and shared by all passes; pass p samples with
    seed ``params.seed + p``.  An identity drawn in several passes keeps a
    single copy in the result.
    """
    missing = [rec.image_id for rec in target.records if rec.camera_id is None]
    if missing:
        raise ValidationError(
            f"camera_id required on every target record for camera-aware search "
            f"({len(missing)} records missing it, first: {missing[0]})"
        )
    subsets = _cluster_pool(pool, params)
    cameras = sorted({rec.camera_id for rec in target.records})
    passes = []
    for p, camera in enumerate(cameras):
        rows = [i for i, rec in enumerate(target.records) if rec.camera_id == camera]
        if len(rows) < 2:
            raise ValidationError(f"target camera {camera} has {len(rows)} rows; need at least 2")
        target_slice = slice_pool(target, rows)
        passes.append(
            _run_pass(
                pool,
                subsets,
                target_slice,
                params.lam,
                params.n_identities,
                params.seed + p,
                camera,
            )
        )
    union: dict[str, None] = {}
    for search_pass in passes:
        for identity in search_pass.drawn:
            union.setdefault(identity, None)
    identities = list(union)
    return ProxySet(
        identity_ids=tuple(identities),
        records=_gather_records(pool, identities),
        params=params,
        passes=tuple(passes),
    )


def _cluster_pool(pool: FeaturePool, params: SearchParams) -> ClusterSubsets:
    table = id_average(pool)
    model = kmeans(table, params.k, seed=params.seed)
    return materialize_subsets(pool, model)


def search_proxy(pool: FeaturePool, target: FeaturePool, params: SearchParams) -> ProxySet:
    """Full search: cluster the pool, score against the target, sample.

    Dispatches to the camera-aware variant when ``params.camera_aware`` is
    set; otherwise one pass over the whole target with seed ``params.seed``.
    """
    if params.camera_aware:
        return camera_aware_search(pool, target, params)
    subsets = _cluster_pool(pool, params)
    search_pass = _run_pass(
        pool, subsets, target, params.lam, params.n_identities, params.seed, None
    )
    return ProxySet(
        identity_ids=search_pass.drawn,
        records=_gather_records(pool, list(search_pass.drawn)),
        params=params,
        passes=(search_pass,),
    )


def proxy_records_jsonl(proxy: ProxySet) -> str:
    """One JSON object per sampled image record, in pool order."""
    lines = []
    for rec in proxy.records:
        lines.append(
            json.dumps(
                {
                    "image_id": rec.image_id,
                    "identity_id": rec.identity_id,
                    "dataset_name": rec.dataset_name,
                    "camera_id": rec.camera_id,
                    "row_index": rec.row_index,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def proxy_from_jsonl(text: str, params: SearchParams | None = None) -> ProxySet:
    """Rebuilds a proxy from its JSONL serialization (provenance not restored)."""
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad proxy JSONL line {lineno}: {exc}")
        try:
            camera = obj["camera_id"]
            records.append(
                ImageRecord(
                    image_id=str(obj["image_id"]),
                    identity_id=str(obj["identity_id"]),
                    dataset_name=str(obj["dataset_name"]),
                    camera_id=None if camera is None else int(camera),
                    row_index=int(obj["row_index"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad proxy JSONL line {lineno}: {exc}")
    if not records:
        raise ValidationError("proxy JSONL holds no records")
    seen: dict[str, None] = {}
    for rec in records:
        seen.setdefault(rec.identity_id, None)
    return ProxySet(
        identity_ids=tuple(seen),
        records=tuple(records),
        params=params if params is not None else SearchParams(),
    )


def proxy_summary(proxy: ProxySet) -> dict:
    """Search provenance plus composition statistics, JSON-serializable."""
    by_dataset: dict[str, int] = {}
    for rec in proxy.records:
        by_dataset[rec.dataset_name] = by_dataset.get(rec.dataset_name, 0) + 1
    total = max(len(proxy.records), 1)
    composition = {name: count / total for name, count in sorted(by_dataset.items())}
    passes = []
    for search_pass in proxy.passes:
        scores = search_pass.scores
        clusters = [
            {
                "fid": float(scores.fid[k]),
                "v_gap": float(scores.v_gap[k]),
                "weight": float(scores.weights[k]),
                "id_count": int(scores.id_counts[k]) if scores.id_counts is not None else None,
            }
            for k in range(len(scores.weights))
        ]
        passes.append(
            {
                "camera": search_pass.camera,
                "seed": search_pass.seed,
                "n_drawn": len(search_pass.drawn),
                "clusters": clusters,
                "warnings": list(search_pass.warnings),
            }
        )
    return {
        "params": {
            "lambda": proxy.params.lam,
            "k": proxy.params.k,
            "n_identities": proxy.params.n_identities,
            "seed": proxy.params.seed,
            "camera_aware": proxy.params.camera_aware,
        },
        "identity_count": proxy.n_identities,
        "image_count": len(proxy.records),
        "composition": composition,
        "passes": passes,
    }
