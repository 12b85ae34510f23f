"""Linear and kernel PCA with Kaiser-Guttman component retention, plus the
mean-distance class assignment in the retained space."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)


def kaiser_guttman(eigenvalues) -> int:
    """Number of eigenvalues strictly greater than 1 (at least 1)."""
    count = int(np.sum(np.asarray(eigenvalues) > 1.0))
    if count == 0:
        warnings.warn("no eigenvalue exceeds 1; keeping the leading component")
        return 1
    return count


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass(frozen=True)
class PcaModel:
    """Retained eigenpairs, preprocessing context and projected training data.

    For ``kind='linear'`` the components live in the (standardised) input
    space; for ``kind='kernel'`` they are expansion coefficients over the
    training points and instances are given as kernel rows.
    """

    kind: str
    eigenvalues: np.ndarray          # retained, descending
    components: np.ndarray           # (d_kept x n) or (n_train x n)
    projections: np.ndarray          # (n_train x n)
    labels: np.ndarray               # +1 Fake / -1 Real (0 when unlabeled)
    all_eigenvalues: np.ndarray = field(repr=False, default=None)
    mean: np.ndarray | None = field(repr=False, default=None)
    scale: np.ndarray | None = field(repr=False, default=None)
    kept_columns: np.ndarray | None = field(repr=False, default=None)
    gram_col_mean: np.ndarray | None = field(repr=False, default=None)
    gram_mean: float = 0.0

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size


def pca_eigen(features, *, standardize: bool = True):
    """Full eigendecomposition behind :func:`train_pca`.

    Returns (eigenvalues desc, eigenvectors as columns, centred/scaled data,
    mean, scale, kept column indices). With ``standardize`` the columns are
    z-scored (population moments) and constant columns dropped, so the
    eigenvalues are those of the correlation matrix.
    """
    X = features.toarray() if sp.issparse(features) else np.asarray(features, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError("PCA needs at least two rows")
    mean = X.mean(axis=0)
    if standardize:
        scale = X.std(axis=0)
        kept = np.flatnonzero(scale > 1e-12 * np.maximum(1.0, np.abs(mean)))
        if kept.size == 0:
            raise ValueError("every column is constant")
    else:
        scale = np.ones(X.shape[1])
        kept = np.arange(X.shape[1])
    Z = (X[:, kept] - mean[kept]) / scale[kept]
    d = kept.size
    if d <= n:
        evals, evecs = np.linalg.eigh(Z.T @ Z / n)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
    else:
        # n < d: decompose the n x n Gram side and map back
        evals, v = np.linalg.eigh(Z @ Z.T / n)
        order = np.argsort(evals)[::-1]
        evals, v = evals[order], v[:, order]
        pos = evals > 1e-12 * max(evals[0], 1.0)
        evecs = np.zeros((d, evals.size))
        evecs[:, pos] = Z.T @ v[:, pos] / np.sqrt(n * evals[pos])
    evals = np.where(np.abs(evals) < 1e-13, 0.0, evals)
    return evals, _orient(evecs), Z, mean, scale, kept


def train_pca(features, labels=None, *, standardize: bool = True) -> PcaModel:
    """PCA of a (pages x features) matrix keeping eigenvalues > 1, with the
    projected training points stored for classification."""
    evals, evecs, Z, mean, scale, kept = pca_eigen(features, standardize=standardize)
    n = Z.shape[0]
    labels = np.zeros(n) if labels is None else np.asarray(labels, dtype=float)
    k = kaiser_guttman(evals)
    comps = evecs[:, :k]
    return PcaModel("linear", evals[:k].copy(), comps, Z @ comps, labels,
                    all_eigenvalues=evals, mean=mean, scale=scale, kept_columns=kept)


def center_gram(gram: np.ndarray) -> np.ndarray:
    K = np.asarray(gram, dtype=float)
    col = K.mean(axis=0)
    return K - col[None, :] - col[:, None] + K.mean()


def train_kernel_pca(gram, labels=None) -> PcaModel:
    """Kernel PCA on a training Gram matrix.

    The double-centred matrix is eigendecomposed; retention applies the
    ">1" rule to its eigenvalues divided by the sample count, so a linear
    kernel on z-scored data reproduces correlation PCA.
    """
    K = np.asarray(gram, dtype=float)
    n = K.shape[0]
    if K.shape != (n, n) or n < 2:
        raise ValueError("kernel PCA needs a square Gram matrix with >= 2 rows")
    if not np.allclose(K, K.T, atol=1e-10, rtol=0):
        raise ValueError("gram matrix is not symmetric")
    labels = np.zeros(n) if labels is None else np.asarray(labels, dtype=float)
    Kc = center_gram(K)
    Kc = (Kc + Kc.T) / 2
    mu, v = np.linalg.eigh(Kc)
    order = np.argsort(mu)[::-1]
    mu, v = mu[order], v[:, order]
    scaled = np.where(np.abs(mu / n) < 1e-13, 0.0, mu / n)
    k = kaiser_guttman(scaled)
    k = min(k, int(np.sum(mu > 1e-12 * max(mu[0], 1e-300))) or 1)
    v = _orient(v[:, :k])
    top = np.maximum(mu[:k], 1e-300)
    alphas = v / np.sqrt(top)
    return PcaModel("kernel", scaled[:k].copy(), alphas, v * np.sqrt(top), labels,
                    all_eigenvalues=scaled, gram_col_mean=K.mean(axis=0),
                    gram_mean=float(K.mean()))


def project(model: PcaModel, instances) -> np.ndarray:
    """Coordinates of instances in the retained space.

    Linear models take raw feature rows; kernel models take kernel rows
    against the training points.
    """
    X = instances.toarray() if sp.issparse(instances) else np.asarray(instances, dtype=float)
    X = np.atleast_2d(X)
    if model.kind == "linear":
        kept = model.kept_columns
        Z = (X[:, kept] - model.mean[kept]) / model.scale[kept]
        return Z @ model.components
    if X.shape[1] != model.gram_col_mean.size:
        raise ValueError("kernel row length does not match the training set")
    Kc = X - model.gram_col_mean[None, :] - X.mean(axis=1, keepdims=True) + model.gram_mean
    return Kc @ model.components


def classify_projected(model: PcaModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Labels (+1/-1) by smaller mean distance to each class's training
    points, ties -> Fake; also returns the score d_real - d_fake."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    fake = model.projections[model.labels > 0]
    real = model.projections[model.labels < 0]
    if len(fake) == 0 or len(real) == 0:
        raise ValueError("PCA classification needs training points of both classes")
    d_fake = cdist(P, fake).mean(axis=1)
    d_real = cdist(P, real).mean(axis=1)
    return np.where(d_fake <= d_real, 1, -1), d_real - d_fake


def classify_pca(model: PcaModel, instance) -> int:
    labels, _ = classify_projected(model, project(model, instance))
    return int(labels[0])
