"""Distribution summaries and distances between feature sets.

Feature sets are dense ``(rows, dims)`` float arrays.  The distances offered
here are the two used by the proxy search (FID and the scalar feature-variance
gap) plus an unbiased squared MMD as a drop-in alternative to FID.

All functions are pure and operate on read-only views; computation is done in
float64 regardless of the input dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NumericalError, ValidationError

__all__ = [
    "GaussianSummary",
    "DistancePair",
    "summarize",
    "sqrtm_psd",
    "fid",
    "scalar_variance",
    "v_gap",
    "mmd2",
    "median_bandwidth",
]

# Eigenvalues below this fraction of the largest one are treated as zero when
# taking matrix square roots: sample covariances of small sets are routinely
# rank-deficient.
_EIG_CLAMP_REL = 1e-8
_SYMMETRY_TOL = 1e-6


@dataclass(frozen=True)
class GaussianSummary:
    """First and second moments of one feature set.

    Attributes:
        mu: column means, shape ``(dims,)``.
        sigma: unbiased sample covariance, shape ``(dims, dims)``, symmetric.
        n: number of rows summarized (>= 2).
    """

    mu: np.ndarray
    sigma: np.ndarray
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("GaussianSummary requires n >= 2")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.sigma))):
            raise NumericalError("non-finite entries in Gaussian summary")
        if np.max(np.abs(self.sigma - self.sigma.T)) > 1e-9:
            raise NumericalError("covariance not symmetric within 1e-9")

    @property
    def dims(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class DistancePair:
    """FID and variance gap between one candidate set and the target."""

    fid: float
    v_gap: float

    def __post_init__(self):
        if not (np.isfinite(self.fid) and np.isfinite(self.v_gap)):
            raise NumericalError("non-finite distance pair")
        if self.fid < 0 or self.v_gap < 0:
            raise NumericalError("distance pair must be nonnegative")


def _as_matrix(features, name: str = "features") -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D matrix, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite value in {name}")
    return x


def summarize(features) -> GaussianSummary:
    """Computes mean and unbiased covariance (divisor n-1) of a feature set.

    The covariance is symmetrized exactly, so ``summarize(x).sigma`` equals its
    own transpose bit for bit.
    """
    x = _as_matrix(features)
    n = x.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 rows to summarize, got {n}")
    mu = x.mean(axis=0)
    xc = x - mu
    sigma = xc.T @ xc / (n - 1)
    sigma = (sigma + sigma.T) / 2.0
    return GaussianSummary(mu=mu, sigma=sigma, n=n)


def sqrtm_psd(m) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues below ``1e-8`` of the largest are clamped to zero, which keeps
    rank-deficient sample covariances usable.  Raises NumericalError if the
    input is not symmetric within 1e-6 (relative to its largest entry) or has
    non-finite entries.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("non-finite entries in matrix")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and float(np.max(np.abs(a - a.T))) > _SYMMETRY_TOL * scale:
        raise NumericalError("matrix not symmetric within tolerance")
    sym = (a + a.T) / 2.0
    w, v = np.linalg.eigh(sym)
    cut = _EIG_CLAMP_REL * max(float(w[-1]), 0.0)
    w = np.where(w < cut, 0.0, w)
    root = (v * np.sqrt(w)) @ v.T
    return (root + root.T) / 2.0


def fid(a: GaussianSummary, b: GaussianSummary) -> float:
    """Fréchet distance between two Gaussian summaries.

    ``||mu_a - mu_b||^2 + tr(sigma_a + sigma_b - 2 (sigma_a sigma_b)^{1/2})``.
    The cross term is evaluated as ``sqrtm(sqrt_a @ sigma_b @ sqrt_a)`` so the
    square root always sees a symmetric PSD argument; its trace equals the
    trace of the conventional non-symmetric form.  Tiny negative totals from
    rounding are clamped to zero.
    """
    if a.dims != b.dims:
        raise ValidationError(f"dimension mismatch: {a.dims} vs {b.dims}")
    diff = a.mu - b.mu
    root_a = sqrtm_psd(a.sigma)
    inner = root_a @ b.sigma @ root_a
    inner = (inner + inner.T) / 2.0
    cross = sqrtm_psd(inner)
    value = float(diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def scalar_variance(features) -> float:
    """Mean per-dimension sample variance, i.e. trace(covariance) / dims."""
    x = _as_matrix(features)
    if x.shape[0] < 2:
        raise ValidationError(f"need at least 2 rows for variance, got {x.shape[0]}")
    return float(np.var(x, axis=0, ddof=1).mean())


def v_gap(p, t) -> float:
    """Absolute difference of the two sets' scalar feature variances."""
    p = _as_matrix(p, "p")
    t = _as_matrix(t, "t")
    if p.shape[1] != t.shape[1]:
        raise ValidationError(f"dimension mismatch: {p.shape[1]} vs {t.shape[1]}")
    return abs(scalar_variance(p) - scalar_variance(t))


def _gauss_kernel(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-cdist(x, y, "sqeuclidean") / (2.0 * bandwidth * bandwidth))


def median_bandwidth(x, y=None, max_rows: int = 2000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance, the usual kernel bandwidth heuristic.

    Rows of ``x`` (and ``y``, if given) are pooled; at most ``max_rows`` rows
    are kept, subsampled with a fixed seed so the result is reproducible.
    """
    x = _as_matrix(x, "x")
    rows = x if y is None else np.vstack([x, _as_matrix(y, "y")])
    if rows.shape[0] > max_rows:
        rng = np.random.default_rng(seed)
        keep = rng.choice(rows.shape[0], size=max_rows, replace=False)
        rows = rows[np.sort(keep)]
    d = cdist(rows, rows, "euclidean")
    off = d[np.triu_indices(rows.shape[0], k=1)]
    med = float(np.median(off)) if off.size else 0.0
    return med if med > 0 else 1.0


def mmd2(p, t, bandwidth: float | None = None) -> float:
    """Unbiased squared maximum mean discrepancy with a Gaussian kernel.

    The kernel is ``exp(-||x - y||^2 / (2 bandwidth^2))``; ``bandwidth=None``
    uses the median-distance heuristic over the pooled rows.  For equal sample
    sizes the paired U-statistic is used (cross-kernel diagonal excluded along
    with the self-kernel diagonals), so ``mmd2(x, x)`` is exactly zero.  For
    unequal sizes the cross term runs over all pairs.  The estimator is
    unbiased and may be slightly negative; it is not clamped.
    """
    x = _as_matrix(p, "p")
    y = _as_matrix(t, "t")
    if x.shape[1] != y.shape[1]:
        raise ValidationError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise ValidationError("mmd2 needs at least 2 rows on each side")
    if bandwidth is None:
        bandwidth = median_bandwidth(x, y)
    if not bandwidth > 0:
        raise ValidationError(f"bandwidth must be positive, got {bandwidth}")

    kxx = _gauss_kernel(x, x, bandwidth)
    kyy = _gauss_kernel(y, y, bandwidth)
    kxy = _gauss_kernel(x, y, bandwidth)
    sum_xx = float(kxx.sum() - np.trace(kxx))
    sum_yy = float(kyy.sum() - np.trace(kyy))
    if m == n:
        # Paired form: treat row i of each side as one joint draw and exclude
        # i == j everywhere, including the cross terms.
        sum_xy = float(kxy.sum() - np.trace(kxy))
        return (sum_xx + sum_yy - 2.0 * sum_xy) / (m * (m - 1))
    return sum_xx / (m * (m - 1)) + sum_yy / (n * (n - 1)) - 2.0 * float(kxy.sum()) / (m * n)
