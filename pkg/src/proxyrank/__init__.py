"""Search labeled proxy sets that mimic an unlabeled target distribution.

Given feature embeddings for a pool of labeled candidate images and for an
unlabeled target set, this package clusters the pool, scores each cluster
against the target with the Frechet distance and a feature-variance gap,
samples a proxy set of identities from the best-matching clusters, and
measures how faithfully model rankings on that proxy track rankings on the
target (Spearman / Kendall rank correlations).
"""

__version__ = "0.1.0"

from .errors import NumericalError, ProxyRankError, ValidationError
from .stats import (
    DistancePair,
    GaussianSummary,
    fid,
    median_bandwidth,
    mmd2,
    scalar_variance,
    sqrtm_psd,
    summarize,
    v_gap,
)
from .corpus import (
    FeaturePool,
    IdFeatureTable,
    ImageRecord,
    id_average,
    load_pool,
    load_target,
    read_embeddings,
    read_manifest,
    slice_pool,
    write_embeddings,
    write_manifest,
)
from .cluster import ClusterModel, ClusterSubsets, cluster_model_json, kmeans, materialize_subsets
from .search import (
    ClusterScores,
    ProxySet,
    SearchParams,
    SearchPass,
    camera_aware_search,
    cluster_distances,
    proxy_from_jsonl,
    proxy_records_jsonl,
    proxy_summary,
    sample_proxy,
    sampling_scores,
    search_proxy,
)
from .rankeval import (
    AccuracyTable,
    QualityReport,
    ReidResult,
    kendall_tau_b,
    perm_pvalue,
    proxy_quality,
    reid_eval,
    spearman,
)
from .synthbench import (
    SynthSpec,
    SynthWorld,
    TrendGrid,
    TrendReport,
    TrendRow,
    gen_world,
    run_trend,
    trend_csv,
    with_cameras,
    write_world,
)

__all__ = [
    "__version__",
    "ProxyRankError",
    "ValidationError",
    "NumericalError",
    "GaussianSummary",
    "DistancePair",
    "summarize",
    "sqrtm_psd",
    "fid",
    "scalar_variance",
    "v_gap",
    "median_bandwidth",
    "mmd2",
    "ImageRecord",
    "FeaturePool",
    "IdFeatureTable",
    "load_pool",
    "load_target",
    "id_average",
    "slice_pool",
    "read_embeddings",
    "write_embeddings",
    "read_manifest",
    "write_manifest",
    "ClusterModel",
    "ClusterSubsets",
    "kmeans",
    "materialize_subsets",
    "cluster_model_json",
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
    "AccuracyTable",
    "QualityReport",
    "ReidResult",
    "reid_eval",
    "spearman",
    "kendall_tau_b",
    "perm_pvalue",
    "proxy_quality",
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
