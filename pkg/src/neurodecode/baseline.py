"""Covariance baseline: common spatial patterns + shrinkage LDA.

The reference linear decoder.  CSP finds spatial filters extremizing
the variance ratio between the two classes via the generalized
eigenproblem ``sigma_1 w = lambda (sigma_0 + sigma_1) w`` on
trace-normalized average covariance matrices; log-variance features of
the top and bottom ``m`` filters feed a two-class LDA whose pooled
covariance gets a small diagonal shrinkage.

Anything this model can exploit lives in second-order statistics; a
task whose classes share their covariance (the parity construction)
leaves it at chance by design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataError, NumericError

N_FILTER_PAIRS = 3
LDA_SHRINKAGE = 1e-4


@dataclass
class CspModel:
    filters: np.ndarray  # (2m, channels); first m favor class 1, last m class 0
    eigenvalues: np.ndarray

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]


@dataclass
class LdaModel:
    weights: np.ndarray
    bias: float


@dataclass
class CspLdaPipeline:
    csp: CspModel
    lda: LdaModel

    def predict(self, x: np.ndarray) -> np.ndarray:
        feats = csp_features(self.csp, x)
        return (feats @ self.lda.weights + self.lda.bias > 0).astype(np.int64)


def _class_covariances(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 3:
        raise DataError(f"expected trials x channels x samples, got shape {x.shape}")
    classes = np.unique(y)
    if not np.array_equal(classes, [0, 1]):
        raise DataError(f"CSP needs both classes 0 and 1; labels present: {classes.tolist()}")
    sums = {0: None, 1: None}
    counts = {0: 0, 1: 0}
    for xi, yi in zip(x, y):
        c = xi @ xi.T / xi.shape[1]
        tr = np.trace(c)
        if tr <= 0:
            raise NumericError("trial covariance has non-positive trace")
        c /= tr
        k = int(yi)
        sums[k] = c if sums[k] is None else sums[k] + c
        counts[k] += 1
    return sums[0] / counts[0], sums[1] / counts[1]


def fit_csp(x: np.ndarray, y: np.ndarray, n_pairs: int = N_FILTER_PAIRS) -> CspModel:
    """Fit CSP filters from labeled epochs (trials x channels x samples)."""
    sigma0, sigma1 = _class_covariances(x, y)
    composite = sigma0 + sigma1
    try:
        eigvals, eigvecs = scipy.linalg.eigh(sigma1, composite)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"generalized eigendecomposition failed: {exc}") from exc
    n = eigvals.size
    if 2 * n_pairs > n:
        raise DataError(f"{n_pairs} filter pairs need >= {2 * n_pairs} channels, have {n}")
    # eigh returns ascending eigenvalues; big ones favor class 1
    order = list(range(n - 1, n - 1 - n_pairs, -1)) + list(range(n_pairs))
    filters = eigvecs[:, order].T
    return CspModel(filters=filters, eigenvalues=eigvals[order])


def csp_features(model: CspModel, x: np.ndarray) -> np.ndarray:
    """Normalized log-variance of each spatially filtered trial."""
    x = np.asarray(x, dtype=np.float64)
    z = np.einsum("fc,nct->nft", model.filters, x)
    var = z.var(axis=2)
    var = np.maximum(var, 1e-30)
    return np.log(var / var.sum(axis=1, keepdims=True))


def fit_lda(feats: np.ndarray, y: np.ndarray, shrinkage: float = LDA_SHRINKAGE) -> LdaModel:
    """Two-class LDA with diagonal shrinkage of the pooled covariance."""
    feats = np.asarray(feats, dtype=np.float64)
    y = np.asarray(y)
    mu0 = feats[y == 0].mean(axis=0)
    mu1 = feats[y == 1].mean(axis=0)
    n = feats.shape[0]
    if n < 3:
        raise DataError(f"LDA needs at least 3 trials, got {n}")
    centered = feats.copy()
    centered[y == 0] -= mu0
    centered[y == 1] -= mu1
    pooled = centered.T @ centered / (n - 2)
    pooled = pooled + shrinkage * np.mean(np.diag(pooled)) * np.eye(pooled.shape[0])
    try:
        weights = np.linalg.solve(pooled, mu1 - mu0)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"LDA covariance is singular even after shrinkage: {exc}") from exc
    bias = -float(weights @ (mu0 + mu1) / 2.0)
    return LdaModel(weights=weights, bias=bias)


def fit_csp_lda(x: np.ndarray, y: np.ndarray, n_pairs: int = N_FILTER_PAIRS) -> CspLdaPipeline:
    csp = fit_csp(x, y, n_pairs=n_pairs)
    lda = fit_lda(csp_features(csp, x), y)
    return CspLdaPipeline(csp=csp, lda=lda)
