"""Full-covariance Gaussian mixtures: EM fitting, AIC model selection, sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

COV_FLOOR = 1e-6
EMPTY_MASS = 1e-10
REL_TOL = 1e-6
LOG_2PI = np.log(2.0 * np.pi)


class ModelTooLargeError(ValueError):
    """Raised when a mixture has more components than there are data points."""


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Immutable mixture of ``k`` full-covariance Gaussians in ``dim`` dimensions.

    ``trace`` holds the log-likelihood of the training data at every EM
    iterate, starting with the initialization.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    trace: Tuple[float, ...] = ()
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covariances, dtype=float).reshape(means.shape[0], means.shape[1], means.shape[1])
        if weights.shape != (means.shape[0],):
            raise ValueError("weights and means disagree on the number of components")
        for name, value in (("weights", weights), ("means", means), ("covariances", covs)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        chol = np.linalg.cholesky(covs)
        chol.setflags(write=False)
        object.__setattr__(self, "chol", chol)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> List[GaussianComponent]:
        return [GaussianComponent(float(w), m, c) for w, m, c in zip(self.weights, self.means, self.covariances)]

    @property
    def n_parameters(self) -> int:
        d = self.dim
        return (self.k - 1) + self.k * d + self.k * d * (d + 1) // 2

    def aic(self, data) -> float:
        return 2.0 * self.n_parameters - 2.0 * log_likelihood(self, data)


def _as_data(data) -> np.ndarray:
    try:
        x = np.asarray(data, dtype=float)
    except ValueError as exc:
        raise ValueError("data points must share one dimension") from exc
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("data must be a list of vectors")
    return x


def _floor_eigh(covs: np.ndarray):
    """Eigen-decompose symmetric matrices with eigenvalues clipped at the floor.

    Clipping is the exact maximizer of the Gaussian likelihood under the
    constraint ``lambda_min >= floor``, so EM stays monotone with it.
    """
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    vals, vecs = np.linalg.eigh(covs)
    return np.maximum(vals, COV_FLOOR), vecs


def _compose(vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    out = (vecs * vals[..., None, :]) @ np.swapaxes(vecs, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _log_gauss_eig(x, means, vals, vecs) -> np.ndarray:
    """(n, k) component log-densities from eigen-decomposed covariances."""
    d = x.shape[1]
    whiten = vecs / np.sqrt(vals)[:, None, :]
    z = x @ whiten - (means[:, None, :] @ whiten)
    maha = (z * z).sum(axis=2)
    logdet = np.log(vals).sum(axis=1)
    return -0.5 * (d * LOG_2PI + maha + logdet[:, None]).T


def _log_gauss(x: np.ndarray, means: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """(n, k) component log-densities from Cholesky factors."""
    d = x.shape[1]
    inv = np.linalg.inv(chol)
    z = (x[None, :, :] - means[:, None, :]) @ np.swapaxes(inv, -1, -2)
    maha = (z * z).sum(axis=2)
    half_logdet = np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    return (-0.5 * (d * LOG_2PI + maha) - half_logdet[:, None]).T


def _log_weights(weights):
    with np.errstate(divide="ignore"):
        return np.log(weights)


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    m = np.where(np.isfinite(m), m, 0.0)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def log_likelihood(mixture: GaussianMixture, data) -> float:
    """Total log-likelihood of ``data`` under ``mixture``."""
    x = _as_data(data)
    if x.shape[1] != mixture.dim:
        raise ValueError(f"data has dimension {x.shape[1]}, mixture has {mixture.dim}")
    lp = _log_gauss(x, mixture.means, mixture.chol) + _log_weights(mixture.weights)
    return float(_logsumexp_rows(lp).sum())


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _m_step(x, xx, resp, reseed_means):
    n, d = x.shape
    mass = resp.sum(axis=0)
    safe = np.maximum(mass, np.finfo(float).tiny)
    means = (resp.T @ x) / safe[:, None]
    second = (resp.T @ xx).reshape(-1, d, d) / safe[:, None, None]
    covs = second - means[:, :, None] * means[:, None, :]
    weights = mass / n

    empty = mass < EMPTY_MASS
    if empty.any():
        # A starved component is moved with its negligible weight, so the
        # likelihood drops by at most about the starved mass (< 1e-9).
        means[empty] = reseed_means[empty]
        covs[empty] = 0.0
        weights[empty] = np.maximum(weights[empty], EMPTY_MASS / (10.0 * n))
        weights = weights / weights.sum()
    vals, vecs = _floor_eigh(covs)
    return weights, means, vals, vecs


def fit_em(data, k: int, seed: int = 0, max_iter: int = 100, init_means=None) -> GaussianMixture:
    """Fit a ``k``-component mixture by expectation-maximization.

    Initialization hard-assigns every point to the nearest of ``k`` centers
    drawn k-means++-style from ``seed`` (or to ``init_means`` when given),
    followed by one M-step. Iterates until the relative log-likelihood change
    drops below ``1e-6`` or ``max_iter`` EM steps have run.
    """
    x = _as_data(data)
    n, d = x.shape
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if n < k:
        raise ModelTooLargeError(f"cannot fit {k} components to {n} points")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")

    if init_means is None:
        centers = _kmeans_pp(x, k, np.random.default_rng(seed))
    else:
        centers = np.asarray(init_means, dtype=float).reshape(k, d)
    xx = (x[:, :, None] * x[:, None, :]).reshape(n, d * d)
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((n, k))
    resp[np.arange(n), d2.argmin(axis=1)] = 1.0
    weights, means, vals, vecs = _m_step(x, xx, resp, centers)

    trace = []
    prev = -np.inf
    while True:
        lp = _log_gauss_eig(x, means, vals, vecs) + _log_weights(weights)
        point_ll = _logsumexp_rows(lp)
        ll = float(point_ll.sum())
        trace.append(ll)
        if abs(ll - prev) < REL_TOL * max(abs(prev), 1.0) or len(trace) > max_iter:
            break
        prev = ll
        resp = np.exp(lp - point_ll[:, None])
        worst = np.broadcast_to(x[int(point_ll.argmin())], (k, d))
        weights, means, vals, vecs = _m_step(x, xx, resp, worst)

    return GaussianMixture(weights, means, _compose(vals, vecs), tuple(trace))


def select_and_fit(data, k_min: int = 2, k_max: int = 10, seed: int = 0, max_iter: int = 100) -> GaussianMixture:
    """Fit one mixture per ``k`` in ``[k_min, k_max]`` and keep the lowest AIC.

    ``k_max`` is truncated to the number of data points; ties go to the
    smaller ``k``.
    """
    x = _as_data(data)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot fit a mixture to empty data")
    if not 1 <= k_min <= k_max:
        raise ValueError(f"need 1 <= k_min <= k_max, got [{k_min}, {k_max}]")
    k_hi = min(k_max, n)
    k_lo = min(k_min, k_hi)

    best, best_aic = None, np.inf
    for k in range(k_lo, k_hi + 1):
        mix = fit_em(x, k, seed=seed, max_iter=max_iter)
        aic = 2.0 * mix.n_parameters - 2.0 * mix.trace[-1]
        if aic < best_aic:
            best, best_aic = mix, aic
    return best


def sample_component(mixture: GaussianMixture, index: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one point from component ``index`` using its Cholesky factor."""
    if not 0 <= index < mixture.k:
        raise ValueError(f"component index {index} out of range for k={mixture.k}")
    z = rng.standard_normal(mixture.dim)
    return mixture.means[index] + mixture.chol[index] @ z
