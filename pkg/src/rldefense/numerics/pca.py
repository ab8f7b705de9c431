"""PCA through a cyclic Jacobi eigendecomposition of the sample covariance."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), nonincreasing
    total_variance: float = 0.0
    degenerate: bool = False

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    @property
    def explained_fraction(self) -> float:
        if self.total_variance <= 0.0:
            return 1.0
        return float(self.explained_variance.sum() / self.total_variance)


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm falls below
    ``tol * ||a||_F``. Returns eigenvalues in descending order and the
    matching eigenvectors as columns, each column's largest-magnitude entry
    made positive.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    off_diag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[off_diag] ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0.0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J on rows/cols p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        warnings.warn("Jacobi eigensolver did not converge", RuntimeWarning, stacklevel=2)
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values, v = values[order], v[:, order]
    for j in range(n):
        if v[np.argmax(np.abs(v[:, j])), j] < 0.0:
            v[:, j] = -v[:, j]
    return values, v


def pca_fit(data, variance_target: float = 0.95) -> PcaModel:
    """Keep the fewest leading components explaining ``variance_target`` of the variance."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientDataError("PCA needs at least two observations")
    if not np.isfinite(x).all():
        raise ValueError("PCA data contains non-finite entries")
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must lie in (0, 1]")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    values, vectors = jacobi_eigh(cov)
    values = np.clip(values, 0.0, None)
    total = float(values.sum())
    if total <= 1e-12 * max(1.0, float(np.abs(mean).max(initial=0.0))):
        warnings.warn("near-zero total variance; keeping a single component", RuntimeWarning, stacklevel=2)
        return PcaModel(mean, vectors[:, :1].T.copy(), values[:1].copy(), total, degenerate=True)
    cumulative = np.cumsum(values) / total
    # tolerance keeps k = d reachable for variance_target = 1.0 under rounding
    k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    k = min(k, len(values))
    return PcaModel(mean, vectors[:, :k].T.copy(), values[:k].copy(), total)


def pca_reconstruct(model: PcaModel, x) -> np.ndarray:
    """Project onto ``mean + span(components)``; works on a vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"expected length {model.dim}, got shape {x.shape}")
    coords = (x - model.mean) @ model.components.T
    return model.mean + coords @ model.components
