"""Synthetic multi-domain worlds for desk-scale validation of the search.

A world is a handful of Gaussian-mixture domains (one mixture component per
identity) plus a bank of synthetic models whose per-domain accuracies are
constructed so that nearby domains rank the models similarly.  ``run_trend``
then measures, across many candidate proxies, how distribution distance to a
held-out target relates to ranking quality — and whether searched proxies beat
uniform-random ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import FeaturePool, ImageRecord, write_embeddings, write_manifest
from .errors import ValidationError
from .rankeval import AccuracyTable, kendall_tau_b, spearman
from .search import SearchParams, search_proxy
from .stats import fid, scalar_variance, summarize

__all__ = [
    "SynthSpec",
    "SynthWorld",
    "TrendGrid",
    "TrendRow",
    "TrendReport",
    "gen_world",
    "with_cameras",
    "run_trend",
    "trend_csv",
    "write_world",
]

N_CAMERAS = 3  # images of an identity rotate through this many synthetic cameras

# Per-domain dispersion multipliers lie in 1 +- this fraction (scaled down with
# the mean spread so that a zero-spread world is exactly homogeneous).
_SCALE_JITTER = 0.3

# Within a domain, identity means scatter at this fraction of the domain scale
# and images at this (larger) fraction around their identity mean.  Most of the
# dispersion sits at image level so that identity subsets of a domain keep
# roughly the domain's variance.
_ID_SCATTER = 0.5
_IMG_JITTER = 1.0

# Accuracy-model coefficients: weight of a model's directional affinity with
# the domain mean, of its sensitivity to the domain's dispersion, and of a
# per-(model, domain) quirk that no feature statistic can see.  The quirk term
# is what makes over-concentrating on a single nearby domain risky.
_AFFINITY_WEIGHT = 0.9
_SCALE_WEIGHT = 1.5
_QUIRK_WEIGHT = 0.3
_SKILL_STD = 0.8


@dataclass(frozen=True)
class SynthSpec:
    """Generator knobs for one synthetic world."""

    dims: int = 8
    n_domains: int = 6
    identities_per_domain: int = 40
    images_per_identity: int = 10
    domain_mean_spread: float = 3.0
    within_domain_scale: float = 1.0
    n_models: int = 30
    model_noise: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("dims", "n_domains", "identities_per_domain", "images_per_identity", "n_models"):
            value = getattr(self, name)
            if value < 1:
                raise ValidationError(f"{name} must be >= 1, got {value}")
        if self.identities_per_domain < 2:
            raise ValidationError(
                f"identities_per_domain must be >= 2, got {self.identities_per_domain}"
            )
        if self.n_domains < 2:
            raise ValidationError(f"need a pool domain and a target, got n_domains={self.n_domains}")
        # Zero mean spread is allowed (it makes all domains identically
        # distributed); scales must stay strictly positive.
        if self.domain_mean_spread < 0:
            raise ValidationError(f"domain_mean_spread must be >= 0, got {self.domain_mean_spread}")
        if self.within_domain_scale <= 0:
            raise ValidationError(f"within_domain_scale must be > 0, got {self.within_domain_scale}")
        if self.model_noise < 0:
            raise ValidationError(f"model_noise must be >= 0, got {self.model_noise}")


@dataclass(frozen=True)
class SynthWorld:
    """A generated pool/target pair with ground-truth model accuracies."""

    spec: SynthSpec
    pool: FeaturePool
    target: FeaturePool
    domain_names: tuple[str, ...]  # pool domains first, target domain last
    accuracy: AccuracyTable  # models x domains, target column included

    @property
    def target_domain(self) -> str:
        return self.domain_names[-1]

    @property
    def true_target_accuracy(self) -> np.ndarray:
        return self.accuracy.column(self.target_domain)


@dataclass(frozen=True)
class TrendGrid:
    """Candidate-proxy grid for ``run_trend``."""

    lambdas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.6, 0.75, 1.0)
    k: int = 20
    n_identities: int = 40
    n_random: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.lambdas:
            raise ValidationError("lambda grid must be nonempty")
        for lam in self.lambdas:
            if not 0.0 <= lam <= 1.0:
                raise ValidationError(f"lambda must be in [0, 1], got {lam}")
        if self.k < 1 or self.n_identities < 1 or self.n_random < 1:
            raise ValidationError("k, n_identities and n_random must all be >= 1")


@dataclass(frozen=True)
class TrendRow:
    proxy_id: str
    kind: str  # one of: self, domain, random, searched
    fid: float
    v_gap: float
    rho: float
    tau: float


@dataclass(frozen=True)
class TrendReport:
    rows: tuple[TrendRow, ...]
    summary: dict


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _domain_features(
    rng: np.random.Generator, spec: SynthSpec, mean: np.ndarray, scale: float
) -> np.ndarray:
    """Images for one domain: identity means scattered around the domain mean,
    then images jittered (more widely) around each identity mean."""
    n_ids = spec.identities_per_domain
    per_id = spec.images_per_identity
    id_means = mean + _ID_SCATTER * scale * spec.within_domain_scale * rng.standard_normal(
        (n_ids, spec.dims)
    )
    jitter = _IMG_JITTER * scale * spec.within_domain_scale
    images = id_means[:, None, :] + jitter * rng.standard_normal((n_ids, per_id, spec.dims))
    return images.reshape(n_ids * per_id, spec.dims)


def _build_pool(
    matrices: list[np.ndarray], names: list[str], spec: SynthSpec
) -> FeaturePool:
    records = []
    row = 0
    for name, matrix in zip(names, matrices):
        for j in range(spec.identities_per_domain):
            for k in range(spec.images_per_identity):
                records.append(
                    ImageRecord(
                        image_id=f"{name}_id{j:03d}_img{k:02d}",
                        identity_id=f"{name}/id{j:03d}",
                        dataset_name=name,
                        camera_id=k % N_CAMERAS,
                        row_index=row,
                    )
                )
                row += 1
    stacked = np.vstack(matrices)
    # Quantize through float32 so in-memory worlds match their on-disk copies.
    stacked = np.ascontiguousarray(stacked.astype(np.float32).astype(np.float64))
    stacked.setflags(write=False)
    return FeaturePool(matrix=stacked, records=tuple(records), datasets=frozenset(names))


def gen_world(spec: SynthSpec) -> SynthWorld:
    """Builds a deterministic world: domains, images, and model accuracies.

    The last domain is held out as the target.  Each synthetic model m has a
    baseline skill, a unit direction u_m, and a dispersion sensitivity t_m; its
    accuracy on domain d passes
    ``skill + a*<u_m, mu_d>/spread + b*t_m*(scale_d - 1) + c*quirk_{m,d}``
    through a sigmoid and adds observation noise.  Domains with nearby means
    and dispersions therefore produce similar model rankings, while the quirk
    term keeps any single domain from being a perfectly predictable proxy.
    """
    rng = np.random.default_rng(spec.seed)
    names = [f"dom{d}" for d in range(spec.n_domains)]

    mus = spec.domain_mean_spread * rng.standard_normal((spec.n_domains, spec.dims))
    jitter = _SCALE_JITTER * math.tanh(spec.domain_mean_spread)
    scales = 1.0 + jitter * rng.uniform(-1.0, 1.0, spec.n_domains)
    matrices = [_domain_features(rng, spec, mus[d], scales[d]) for d in range(spec.n_domains)]

    skills = _SKILL_STD * rng.standard_normal(spec.n_models)
    directions = rng.standard_normal((spec.n_models, spec.dims))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    sensitivity = rng.standard_normal(spec.n_models)
    quirk = rng.standard_normal((spec.n_models, spec.n_domains))

    spread_norm = max(spec.domain_mean_spread, 1e-9)
    affinity = (directions @ mus.T) / spread_norm  # (models, domains)
    logits = (
        skills[:, None]
        + _AFFINITY_WEIGHT * affinity
        + _SCALE_WEIGHT * sensitivity[:, None] * (scales[None, :] - 1.0)
        + _QUIRK_WEIGHT * quirk
    )
    noise = spec.model_noise * rng.standard_normal((spec.n_models, spec.n_domains))
    accuracies = np.clip(_sigmoid(logits) + noise, 0.0, 1.0)

    table = AccuracyTable(
        model_ids=tuple(f"model{m:02d}" for m in range(spec.n_models)),
        dataset_ids=tuple(names),
        values=accuracies,
    )
    pool = _build_pool(matrices[:-1], names[:-1], spec)
    target = _build_pool(matrices[-1:], names[-1:], spec)
    return SynthWorld(
        spec=spec, pool=pool, target=target, domain_names=tuple(names), accuracy=table
    )


def with_cameras(pool: FeaturePool, n_cameras: int) -> FeaturePool:
    """Reassigns camera ids round-robin over record order (test helper)."""
    if n_cameras < 1:
        raise ValidationError(f"n_cameras must be >= 1, got {n_cameras}")
    records = tuple(
        ImageRecord(
            image_id=rec.image_id,
            identity_id=rec.identity_id,
            dataset_name=rec.dataset_name,
            camera_id=i % n_cameras,
            row_index=rec.row_index,
        )
        for i, rec in enumerate(pool.records)
    )
    return FeaturePool(matrix=pool.matrix, records=records, datasets=pool.datasets)


def _composition(records, domain_names) -> np.ndarray:
    counts = {name: 0 for name in domain_names}
    for rec in records:
        counts[rec.dataset_name] += 1
    total = sum(counts.values())
    return np.asarray([counts[name] / total for name in domain_names])


def _proxy_accuracy(world: SynthWorld, records) -> np.ndarray:
    """A model's proxy accuracy is its per-domain accuracy weighted by the
    proxy's image composition over domains."""
    fractions = _composition(records, world.domain_names)
    return world.accuracy.values @ fractions


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise ValidationError("zero variance in trend correlation input")
    return float(xc @ yc) / denom


def _trend_row(world: SynthWorld, proxy_id: str, kind: str, records, target_summary,
               target_variance: float) -> TrendRow:
    rows = [rec.row_index for rec in records]
    features = world.pool.matrix[rows] if kind != "self" else world.target.matrix[rows]
    proxy_acc = _proxy_accuracy(world, records)
    reference = world.true_target_accuracy
    return TrendRow(
        proxy_id=proxy_id,
        kind=kind,
        fid=fid(summarize(features), target_summary),
        v_gap=abs(scalar_variance(features) - target_variance),
        rho=spearman(proxy_acc, reference),
        tau=kendall_tau_b(proxy_acc, reference),
    )


def run_trend(world: SynthWorld, grid: TrendGrid) -> TrendReport:
    """Evaluates every candidate proxy and summarizes the distance/quality link.

    Candidates: the target itself, each pool domain, ``n_random`` uniform
    subsets of ``n_identities`` identities, and one searched proxy per lambda.
    The summary reports Pearson correlations of fid/v_gap against rho plus
    win rates of the searched proxy (lambda closest to 0.6) over the random
    baselines.
    """
    target_summary = summarize(world.target.matrix)
    target_variance = scalar_variance(world.target.matrix)
    rows: list[TrendRow] = []

    rows.append(
        _trend_row(world, "target", "self", world.target.records, target_summary, target_variance)
    )

    pool_domains = world.domain_names[:-1]
    by_domain: dict[str, list[ImageRecord]] = {name: [] for name in pool_domains}
    for rec in world.pool.records:
        by_domain[rec.dataset_name].append(rec)
    for name in pool_domains:
        rows.append(
            _trend_row(world, name, "domain", by_domain[name], target_summary, target_variance)
        )

    identity_rows: dict[str, list[ImageRecord]] = {}
    for rec in world.pool.records:
        identity_rows.setdefault(rec.identity_id, []).append(rec)
    identity_order = list(identity_rows)
    n_pick = min(grid.n_identities, len(identity_order))
    rng = np.random.default_rng(grid.seed + 104729)
    for r in range(grid.n_random):
        chosen = rng.choice(len(identity_order), size=n_pick, replace=False)
        records = [rec for i in sorted(chosen) for rec in identity_rows[identity_order[i]]]
        rows.append(
            _trend_row(world, f"random{r:02d}", "random", records, target_summary, target_variance)
        )

    searched_rows: dict[float, TrendRow] = {}
    for lam in grid.lambdas:
        params = SearchParams(
            lam=lam, k=grid.k, n_identities=grid.n_identities, seed=grid.seed
        )
        proxy = search_proxy(world.pool, world.target, params)
        row = _trend_row(
            world, f"searched_lam{lam:g}", "searched", proxy.records, target_summary,
            target_variance,
        )
        searched_rows[lam] = row
        rows.append(row)

    fids = np.asarray([row.fid for row in rows])
    vgaps = np.asarray([row.v_gap for row in rows])
    rhos = np.asarray([row.rho for row in rows])

    pick = min(grid.lambdas, key=lambda lam: abs(lam - 0.6))
    searched = searched_rows[pick]
    random_rows = [row for row in rows if row.kind == "random"]
    rho_wins = sum(1 for row in random_rows if searched.rho >= row.rho)
    fid_wins = sum(1 for row in random_rows if searched.fid < row.fid)

    summary = {
        "pearson_fid_rho": _pearson(fids, rhos),
        "pearson_vgap_rho": _pearson(vgaps, rhos),
        "searched": {
            f"{lam:g}": {"rho": row.rho, "tau": row.tau, "fid": row.fid, "v_gap": row.v_gap}
            for lam, row in sorted(searched_rows.items())
        },
        "random": {
            "mean_rho": float(np.mean([row.rho for row in random_rows])),
            "mean_fid": float(np.mean([row.fid for row in random_rows])),
        },
        "win_rates": {
            "lambda_used": pick,
            "rho_vs_random": rho_wins / len(random_rows),
            "fid_vs_random": fid_wins / len(random_rows),
        },
    }
    return TrendReport(rows=tuple(rows), summary=summary)


def trend_csv(report: TrendReport) -> str:
    lines = ["proxy_id,kind,fid,v_gap,rho,tau"]
    for row in report.rows:
        lines.append(
            f"{row.proxy_id},{row.kind},{row.fid!r},{row.v_gap!r},{row.rho!r},{row.tau!r}"
        )
    return "\n".join(lines) + "\n"


def write_world(world: SynthWorld, out_dir) -> dict:
    """Writes the world as corpus-format files; returns the path map.

    Manifest identity cells are written without the dataset prefix, matching
    how loaders namespace them on the way back in.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "pool_manifest": out / "pool_manifest.csv",
        "pool_embeddings": out / "pool.emb1",
        "target_manifest": out / "target_manifest.csv",
        "target_embeddings": out / "target.emb1",
        "accuracy": out / "accuracy.csv",
    }

    def manifest_rows(pool: FeaturePool):
        for rec in pool.records:
            yield {
                "image_id": rec.image_id,
                "identity_id": rec.identity_id.split("/", 1)[1],
                "dataset_name": rec.dataset_name,
                "camera_id": rec.camera_id,
                "row_index": rec.row_index,
            }

    write_manifest(paths["pool_manifest"], manifest_rows(world.pool))
    write_embeddings(paths["pool_embeddings"], world.pool.matrix)
    write_manifest(paths["target_manifest"], manifest_rows(world.target))
    write_embeddings(paths["target_embeddings"], world.target.matrix)
    world.accuracy.write_csv(paths["accuracy"])
    return {key: str(value) for key, value in paths.items()}
