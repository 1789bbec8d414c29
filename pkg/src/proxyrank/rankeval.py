"""Model scoring on proxies and rank-correlation quality reports.

``reid_eval`` scores one model's embeddings over a proxy with the standard
multi-camera retrieval protocol (mAP and rank-k).  The rank statistics
(Spearman's rho, tie-corrected Kendall's tau-b, permutation p-values) compare
a proxy's model ranking against a reference ranking.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .search import ProxySet

__all__ = [
    "AccuracyTable",
    "QualityReport",
    "ReidResult",
    "reid_eval",
    "spearman",
    "kendall_tau_b",
    "perm_pvalue",
    "proxy_quality",
]

RANK_KS = (1, 5, 10)


@dataclass(frozen=True)
class AccuracyTable:
    """models x datasets matrix of scalar performance values in [0, 1]."""

    model_ids: tuple[str, ...]
    dataset_ids: tuple[str, ...]
    values: np.ndarray  # (models, datasets) float64

    def __post_init__(self):
        if self.values.shape != (len(self.model_ids), len(self.dataset_ids)):
            raise ValidationError(
                f"accuracy matrix shape {self.values.shape} does not match "
                f"{len(self.model_ids)} models x {len(self.dataset_ids)} datasets"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("non-finite accuracy value")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValidationError("accuracy values must lie in [0, 1]")

    def column(self, dataset_id: str) -> np.ndarray:
        if dataset_id not in self.dataset_ids:
            raise ValidationError(f"missing column '{dataset_id}'")
        return self.values[:, self.dataset_ids.index(dataset_id)]

    @classmethod
    def read_csv(cls, path) -> "AccuracyTable":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"accuracy table not found: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValidationError(f"empty accuracy table: {path}")
            if not header or header[0] != "model_id":
                raise ValidationError(f"accuracy table must start with a model_id column: {path}")
            datasets = tuple(header[1:])
            models = []
            rows = []
            for cells in reader:
                if len(cells) != len(header):
                    raise ValidationError(f"ragged row in accuracy table {path}: {cells}")
                models.append(cells[0])
                try:
                    rows.append([float(c) for c in cells[1:]])
                except ValueError as exc:
                    raise ValidationError(f"non-numeric accuracy in {path}: {exc}")
        return cls(
            model_ids=tuple(models),
            dataset_ids=datasets,
            values=np.asarray(rows, dtype=np.float64),
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model_id", *self.dataset_ids])
            for i, model in enumerate(self.model_ids):
                writer.writerow([model, *(repr(float(v)) for v in self.values[i])])


@dataclass(frozen=True)
class QualityReport:
    """How well a proxy's model ranking matches the reference ranking."""

    spearman_rho: float
    kendall_tau: float
    p_value_rho: float
    p_value_tau: float
    best_on_proxy: str
    best_on_reference: str
    regret: float

    def to_dict(self) -> dict:
        return {
            "spearman_rho": self.spearman_rho,
            "kendall_tau": self.kendall_tau,
            "p_value_rho": self.p_value_rho,
            "p_value_tau": self.p_value_tau,
            "best_on_proxy": self.best_on_proxy,
            "best_on_reference": self.best_on_reference,
            "regret": self.regret,
        }


@dataclass(frozen=True)
class ReidResult:
    """mAP plus rank-k match rates from one retrieval evaluation."""

    map: float
    rank_k: dict[int, float]
    n_queries: int


def _l2_normalize(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def reid_eval(model_features, proxy: ProxySet) -> ReidResult:
    """Scores one model's proxy embeddings with the retrieval protocol.

    Queries: the lexicographically smallest image_id of each (identity,
    camera) pair, restricted to identities seen in at least two cameras.
    The gallery is every proxy image; entries sharing the query's identity
    and camera are excluded (this removes the query itself).  Ranking is by
    descending cosine similarity with ties broken by gallery order; a query's
    AP is the mean of precision-at-hit over its cross-camera matches.
    """
    features = np.asarray(model_features, dtype=np.float64)
    if features.ndim != 2:
        raise ValidationError("model features must be a 2-D matrix")
    if features.shape[0] != len(proxy.records):
        raise ValidationError(
            f"model features have {features.shape[0]} rows but the proxy has "
            f"{len(proxy.records)} images"
        )
    for rec in proxy.records:
        if rec.camera_id is None:
            raise ValidationError(f"camera_id required for evaluation (image {rec.image_id})")

    identities = np.asarray([rec.identity_id for rec in proxy.records])
    cameras = np.asarray([rec.camera_id for rec in proxy.records])
    image_ids = [rec.image_id for rec in proxy.records]

    cams_per_identity: dict[str, set[int]] = {}
    for rec in proxy.records:
        cams_per_identity.setdefault(rec.identity_id, set()).add(rec.camera_id)

    best_per_pair: dict[tuple[str, int], int] = {}
    for i, rec in enumerate(proxy.records):
        if len(cams_per_identity[rec.identity_id]) < 2:
            continue
        key = (rec.identity_id, rec.camera_id)
        if key not in best_per_pair or image_ids[i] < image_ids[best_per_pair[key]]:
            best_per_pair[key] = i
    query_idx = [best_per_pair[key] for key in sorted(best_per_pair)]
    if not query_idx:
        raise ValidationError("no valid query: no identity appears in at least two cameras")

    normed = _l2_normalize(features)
    sims = normed[query_idx] @ normed.T

    aps = []
    hits_at = {k: 0 for k in RANK_KS}
    for qi, q in enumerate(query_idx):
        keep = ~((identities == identities[q]) & (cameras == cameras[q]))
        kept_sims = sims[qi][keep]
        kept_match = (identities[keep] == identities[q])
        order = np.argsort(-kept_sims, kind="stable")
        match_ranked = kept_match[order]
        hit_positions = np.flatnonzero(match_ranked)
        # Queries are built only for identities spanning two cameras, so at
        # least one cross-camera match exists.
        precision_at_hit = (np.arange(1, hit_positions.size + 1)) / (hit_positions + 1)
        aps.append(float(precision_at_hit.mean()))
        for k in RANK_KS:
            if np.any(hit_positions < k):
                hits_at[k] += 1

    n_q = len(query_idx)
    return ReidResult(
        map=float(np.mean(aps)),
        rank_k={k: hits_at[k] / n_q for k in RANK_KS},
        n_queries=n_q,
    )


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise ValidationError("rank statistics expect 1-D inputs")
    if xa.shape[0] != ya.shape[0]:
        raise ValidationError(f"length mismatch: {xa.shape[0]} vs {ya.shape[0]}")
    if xa.shape[0] < 2:
        raise ValidationError("need at least 2 values")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise ValidationError("non-finite value in rank statistic input")
    return xa, ya


def spearman(x, y) -> float:
    """Spearman's rho: Pearson correlation of fractional (mid) ranks."""
    xa, ya = _check_pair(x, y)
    rx = rankdata(xa, method="average")
    ry = rankdata(ya, method="average")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        raise ValidationError("zero variance in ranks (constant input)")
    return float(rx @ ry) / denom


def _pair_counts(xa: np.ndarray, ya: np.ndarray) -> tuple[int, int, int, int]:
    """Concordant, discordant, tied-only-in-x, tied-only-in-y pair counts."""
    sx = np.sign(xa[:, None] - xa[None, :])
    sy = np.sign(ya[:, None] - ya[None, :])
    upper = np.triu_indices(xa.shape[0], k=1)
    sx = sx[upper]
    sy = sy[upper]
    prod = sx * sy
    concordant = int(np.count_nonzero(prod > 0))
    discordant = int(np.count_nonzero(prod < 0))
    tied_x_only = int(np.count_nonzero((sx == 0) & (sy != 0)))
    tied_y_only = int(np.count_nonzero((sy == 0) & (sx != 0)))
    return concordant, discordant, tied_x_only, tied_y_only


def kendall_tau_b(x, y) -> float:
    """Tie-corrected Kendall's tau-b.

    (C - D) / sqrt((C + D + Tx)(C + D + Ty)) where Tx / Ty count pairs tied in
    exactly one of the inputs.  Errors out when either input is entirely tied
    (the coefficient is undefined there).
    """
    xa, ya = _check_pair(x, y)
    c, d, tx, ty = _pair_counts(xa, ya)
    denom_x = c + d + tx
    denom_y = c + d + ty
    if denom_x == 0 or denom_y == 0:
        raise ValidationError("kendall_tau_b undefined for an all-tied input")
    return float(c - d) / math.sqrt(float(denom_x * denom_y))


def perm_pvalue(x, y, statistic: str = "rho", n_perm: int = 999, seed: int = 0) -> float:
    """Two-sided permutation p-value for rho or tau.

    p = (1 + #{|stat(perm)| >= |stat(observed)|}) / (n_perm + 1), permuting y
    with a seeded generator.
    """
    if statistic not in ("rho", "tau"):
        raise ValidationError(f"statistic must be 'rho' or 'tau', got '{statistic}'")
    if n_perm < 99:
        raise ValidationError(f"n_perm must be >= 99, got {n_perm}")
    xa, ya = _check_pair(x, y)
    n = xa.shape[0]
    rng = np.random.default_rng(seed)
    perms = np.stack([rng.permutation(n) for _ in range(n_perm)])

    if statistic == "rho":
        observed = spearman(xa, ya)
        rx = rankdata(xa, method="average")
        ry = rankdata(ya, method="average")
        rx = rx - rx.mean()
        sx = math.sqrt(float(rx @ rx))
        # Ranks of a permuted vector are the permuted ranks, so the per-perm
        # statistic reduces to one matrix-vector product.
        ry_centered = ry - ry.mean()
        sy = math.sqrt(float(ry_centered @ ry_centered))
        permuted = ry[perms] - ry.mean()
        stat = (permuted @ rx) / (sx * sy)
    else:
        observed = kendall_tau_b(xa, ya)
        stat = np.empty(n_perm)
        for i in range(n_perm):
            stat[i] = kendall_tau_b(xa, ya[perms[i]])

    count = int(np.count_nonzero(np.abs(stat) >= abs(observed)))
    return (1 + count) / (n_perm + 1)


def proxy_quality(
    table: AccuracyTable,
    proxy_col: str,
    reference_col: str,
    n_perm: int = 999,
    seed: int = 0,
) -> QualityReport:
    """Rank-correlation quality of one accuracy column against a reference.

    Best models are argmaxes of the two columns (first index on ties); regret
    is measured on the reference column and is always >= 0.
    """
    proxy_vals = table.column(proxy_col)
    ref_vals = table.column(reference_col)
    rho = spearman(proxy_vals, ref_vals)
    tau = kendall_tau_b(proxy_vals, ref_vals)
    best_proxy_idx = int(np.argmax(proxy_vals))
    best_ref_idx = int(np.argmax(ref_vals))
    return QualityReport(
        spearman_rho=rho,
        kendall_tau=tau,
        p_value_rho=perm_pvalue(proxy_vals, ref_vals, "rho", n_perm=n_perm, seed=seed),
        p_value_tau=perm_pvalue(proxy_vals, ref_vals, "tau", n_perm=n_perm, seed=seed),
        best_on_proxy=table.model_ids[best_proxy_idx],
        best_on_reference=table.model_ids[best_ref_idx],
        regret=float(ref_vals[best_ref_idx] - ref_vals[best_proxy_idx]),
    )
