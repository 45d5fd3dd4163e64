"""Scaled unscented transform over the simulator-parameter distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError, InvalidInputError, NumericError

JITTER_SCALE = 1e-9
JITTER_RETRIES = 3


@dataclass(frozen=True)
class UtConfig:
    """Sigma-point hyperparameters.

    ``alpha`` sets the spread around the mean, ``kappa`` is the secondary
    scaling and ``xi`` the extra degree of freedom entering only the zeroth
    covariance weight (2 is optimal for Gaussians).
    """

    alpha: float = 0.5
    kappa: float = 0.0
    xi: float = 2.0

    def scaling(self, n: int) -> float:
        """Primary scaling ``alpha^2 (n + kappa) - n``."""
        nu = self.alpha**2 * (n + self.kappa) - n
        if n + nu <= 0:
            raise ConfigError(f"n + nu = {n + nu:g} must be positive (alpha={self.alpha}, "
                              f"kappa={self.kappa}, n={n})")
        return nu


@dataclass(frozen=True)
class SigmaSet:
    points: NDArray[np.float64]        # (2n+1, n)
    mean_weights: NDArray[np.float64]  # (2n+1,)
    cov_weights: NDArray[np.float64]   # (2n+1,)

    def __len__(self):
        return len(self.mean_weights)


def _cholesky_with_jitter(cov: NDArray[np.float64]) -> NDArray[np.float64]:
    n = cov.shape[0]
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_SCALE * max(np.trace(cov), 0.0) / n
    if jitter == 0.0:
        jitter = JITTER_SCALE
    for attempt in range(1, JITTER_RETRIES + 1):
        try:
            return np.linalg.cholesky(cov + attempt * jitter * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    raise NumericError("covariance is not positive semi-definite; Cholesky failed after jitter")


def sigma_points(mean: ArrayLike, cov: ArrayLike, cfg: UtConfig = UtConfig()) -> SigmaSet:
    """Build the 2n+1 scaled sigma points of ``N(mean, cov)``.

    Points ``1..n`` add the columns of the lower Cholesky factor of
    ``(n + nu) cov`` to the mean and points ``n+1..2n`` subtract them.
    A zero covariance is allowed and collapses every point onto the mean.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    n = mean.size
    if mean.ndim != 1 or n < 1:
        raise InvalidInputError("mean must be a non-empty vector")
    if cov.shape != (n, n):
        raise InvalidInputError(f"cov must have shape ({n}, {n}), got {cov.shape}")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise InvalidInputError("non-finite mean or covariance")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
        raise InvalidInputError("covariance must be symmetric")

    nu = cfg.scaling(n)
    root = _cholesky_with_jitter((n + nu) * cov)

    points = np.empty((2 * n + 1, n))
    points[0] = mean
    points[1:n + 1] = mean + root.T
    points[n + 1:] = mean - root.T

    wm = np.full(2 * n + 1, 1.0 / (2.0 * (n + nu)))
    wc = wm.copy()
    wm[0] = nu / (n + nu)
    wc[0] = wm[0] + (1.0 - cfg.alpha**2 + cfg.xi)
    return SigmaSet(points, wm, wc)


def unscented_mean(values: ArrayLike, mean_weights: ArrayLike) -> float | NDArray[np.float64]:
    """Weighted sum over the leading (sigma-point) axis of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    w = np.asarray(mean_weights, dtype=np.float64)
    if values.shape[:1] != w.shape:
        raise InvalidInputError(f"{values.shape[0] if values.ndim else 0} values "
                                f"for {w.size} weights")
    out = np.tensordot(w, values, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def unscented_moments(vectors: ArrayLike, mean_weights: ArrayLike, cov_weights: ArrayLike):
    """Recover mean and covariance from transformed sigma points ``(L, d)``."""
    y = np.asarray(vectors, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    wm = np.asarray(mean_weights, dtype=np.float64)
    wc = np.asarray(cov_weights, dtype=np.float64)
    if not (y.shape[0] == wm.size == wc.size):
        raise InvalidInputError("vectors, mean weights and covariance weights differ in length")
    mean = wm @ y
    d = y - mean
    cov = (wc[:, None] * d).T @ d
    return mean, cov
