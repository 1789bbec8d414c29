"""Partitioning of identity-averaged features into K groups.

Plain Lloyd k-means with k-means++ seeding.  Everything is deterministic
given (input order, k, seed): initialization draws from a seeded generator,
assignment ties break toward the lowest cluster index, and centroid updates
accumulate in fixed record order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import FeaturePool, IdFeatureTable
from .errors import NumericalError, ValidationError

__all__ = ["ClusterModel", "ClusterSubsets", "kmeans", "materialize_subsets", "cluster_model_json"]


@dataclass(frozen=True)
class ClusterModel:
    """Fitted k-means state: centroids plus the identity -> cluster map."""

    k: int
    centroids: np.ndarray  # (k, dims)
    assignment: dict[str, int]
    inertia: float
    seed: int
    iterations_run: int


@dataclass(frozen=True)
class ClusterSubsets:
    """The pool regrouped by cluster: identities and their image rows."""

    identity_ids: tuple[tuple[str, ...], ...]  # per cluster
    row_indices: tuple[np.ndarray, ...]  # per cluster, rows into the pool matrix
    id_counts: np.ndarray  # per cluster, number of identities

    @property
    def k(self) -> int:
        return len(self.identity_ids)

    @property
    def total_identities(self) -> int:
        return int(self.id_counts.sum())


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances; clipped because the expanded form
    # can go fractionally negative.
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(centroids * centroids, axis=1)[None, :]
        - 2.0 * (x @ centroids.T)
    )
    return np.maximum(d2, 0.0)


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    closest = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # All remaining points coincide with a centroid; fall back to a
            # uniform draw over the not-yet-chosen indices.
            available = np.setdiff1d(np.arange(n), np.asarray(chosen))
            idx = int(rng.choice(available))
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((x - x[idx]) ** 2, axis=1))
    return x[chosen].copy()


def kmeans(ids: IdFeatureTable, k: int, seed: int = 0, max_iters: int = 300) -> ClusterModel:
    """Clusters the identity-averaged features into k groups.

    k-means++ initialization from ``seed``, then Lloyd iterations until the
    assignment reaches a fixpoint or ``max_iters`` passes.  Clusters that
    empty out are re-seeded with the point currently farthest from its
    centroid so all k subsets stay usable.
    """
    if ids.n_identities == 0:
        raise ValidationError("cannot cluster an empty identity table")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > ids.n_identities:
        raise ValidationError(f"k={k} exceeds the {ids.n_identities} identities available")
    if max_iters < 1:
        raise ValidationError(f"max_iters must be >= 1, got {max_iters}")

    x = np.asarray(ids.features, dtype=np.float64)
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(x, k, rng)

    d2 = _sq_dists(x, centroids)
    assign = np.argmin(d2, axis=1)
    inertia = float(np.take_along_axis(d2, assign[:, None], axis=1).sum())
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, x)
        counts = np.bincount(assign, minlength=k)
        nonempty = counts > 0
        centroids = np.where(nonempty[:, None], sums / np.maximum(counts, 1)[:, None], centroids)

        empty = np.flatnonzero(~nonempty)
        if empty.size:
            point_d2 = np.take_along_axis(_sq_dists(x, centroids), assign[:, None], axis=1)[:, 0]
            taken: list[int] = []
            for cluster in empty:
                order = np.argsort(-point_d2, kind="stable")
                far = next(int(i) for i in order if i not in taken)
                taken.append(far)
                centroids[cluster] = x[far]
                point_d2[far] = -np.inf

        d2 = _sq_dists(x, centroids)
        new_assign = np.argmin(d2, axis=1)
        new_inertia = float(np.take_along_axis(d2, new_assign[:, None], axis=1).sum())
        if new_inertia > inertia * (1 + 1e-9) + 1e-9:
            raise NumericalError(
                f"inertia increased during Lloyd iteration: {inertia} -> {new_inertia}"
            )
        converged = bool(np.array_equal(new_assign, assign))
        assign = new_assign
        inertia = new_inertia
        if converged:
            break

    assignment = {identity: int(c) for identity, c in zip(ids.identity_ids, assign)}
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignment=assignment,
        inertia=inertia,
        seed=seed,
        iterations_run=iterations,
    )


def materialize_subsets(pool: FeaturePool, model: ClusterModel) -> ClusterSubsets:
    """Groups the pool's image rows by their identity's cluster."""
    pool_identities = set(pool.identity_order())
    missing = sorted(pool_identities - set(model.assignment))
    if missing:
        raise ValidationError(
            f"{len(missing)} pool identities missing from cluster assignment "
            f"(first: {missing[0]})"
        )
    extra = sorted(set(model.assignment) - pool_identities)
    if extra:
        raise ValidationError(
            f"cluster assignment names {len(extra)} identities not in the pool "
            f"(first: {extra[0]})"
        )

    ids_per_cluster: list[list[str]] = [[] for _ in range(model.k)]
    rows_per_cluster: list[list[int]] = [[] for _ in range(model.k)]
    seen: set[str] = set()
    for rec in pool.records:
        cluster = model.assignment[rec.identity_id]
        if rec.identity_id not in seen:
            seen.add(rec.identity_id)
            ids_per_cluster[cluster].append(rec.identity_id)
        rows_per_cluster[cluster].append(rec.row_index)
    return ClusterSubsets(
        identity_ids=tuple(tuple(ids) for ids in ids_per_cluster),
        row_indices=tuple(np.asarray(rows, dtype=np.int64) for rows in rows_per_cluster),
        id_counts=np.asarray([len(ids) for ids in ids_per_cluster], dtype=np.int64),
    )


def cluster_model_json(model: ClusterModel, max_centroid_dims: int = 64) -> str:
    """Audit dump of a fitted model; centroids are omitted above 64 dims."""
    payload = {
        "k": model.k,
        "seed": model.seed,
        "iterations_run": model.iterations_run,
        "inertia": model.inertia,
        "assignment": model.assignment,
    }
    if model.centroids.shape[1] <= max_centroid_dims:
        payload["centroids"] = model.centroids.tolist()
    return json.dumps(payload, sort_keys=True)
