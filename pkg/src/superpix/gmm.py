"""Mixture model core: initialization, E/M steps, covariance clamping, EM driver.

Each superpixel carries a mean over (x, y, L, a, b) and a block-diagonal
covariance: a 2x2 spatial block, a scalar luminance variance, and a 2x2
chroma block (grayscale images use a single scalar intensity variance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels
from .grid import GridGeometry
from .imaging import FeatureImage

LN_2PI = _kernels.LN_2PI

# Off-diagonal magnitude below which a 2x2 block is treated as diagonal.
_DIAG_TOL = 1e-12


@dataclass
class EmConfig:
    """Estimator knobs; defaults follow the reference tuning."""

    iterations: int = 10
    lam: float = 8.0          # initial color std, CIELAB units
    eps_spatial: float = 2.0  # spatial eigenvalue floor
    eps_color: float = 8.0    # color eigenvalue floor; also the regularity knob

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lam <= 0 or self.eps_spatial <= 0 or self.eps_color <= 0:
            raise ValueError("lam and eigenvalue floors must be positive")


@dataclass
class MixtureParams:
    """Stacked per-superpixel parameters.

    mu: (K, D); cov_spatial: (K, 2, 2); var_lum: (K,) luminance (or
    grayscale intensity) variance; cov_chroma: (K, 2, 2) for color input,
    None for grayscale.
    """

    mu: np.ndarray
    cov_spatial: np.ndarray
    var_lum: np.ndarray
    cov_chroma: np.ndarray | None

    @property
    def num_superpixels(self) -> int:
        return self.mu.shape[0]

    @property
    def dim(self) -> int:
        return self.mu.shape[1]

    @property
    def is_color(self) -> bool:
        return self.cov_chroma is not None


@dataclass
class ResponsibilityTable:
    """Sparse posterior weights, up to 9 candidates per pixel.

    candidates[i] holds the pixel's candidate superpixels in ascending
    order padded with -1; weights[i] holds the matching posteriors and is
    zero on padding.
    """

    candidates: np.ndarray  # (N, 9) int32
    weights: np.ndarray     # (N, 9) float64

    @property
    def num_pixels(self) -> int:
        return self.candidates.shape[0]

    def pairs(self, i: int) -> list[tuple[int, float]]:
        valid = self.candidates[i] >= 0
        return list(zip(self.candidates[i][valid].tolist(),
                        self.weights[i][valid].tolist()))


def set_thread_count(n: int) -> int:
    """Set the worker count for the parallel kernels; returns the count
    actually in effect (capped by the numba thread pool size)."""
    if n < 1:
        raise ValueError("thread count must be >= 1")
    actual = min(n, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(actual)
    return actual


def _eigh2x2(block: np.ndarray):
    """Closed-form eigendecomposition of batched symmetric 2x2 matrices.

    Returns (lo, hi, q0, q1, diag_mask): eigenvalues lo <= hi and the
    unit eigenvector (q0, q1) for hi; diag_mask marks near-diagonal
    blocks handled without rotation.
    """
    a = block[..., 0, 0]
    b = 0.5 * (block[..., 0, 1] + block[..., 1, 0])
    d = block[..., 1, 1]
    diag_mask = np.abs(b) < _DIAG_TOL
    half_tr = 0.5 * (a + d)
    disc = np.sqrt((0.5 * (a - d)) ** 2 + b * b)
    lo = half_tr - disc
    hi = half_tr + disc
    bb = np.where(diag_mask, 1.0, b)
    v0 = bb
    v1 = np.where(diag_mask, 0.0, hi - a)
    norm = np.sqrt(v0 * v0 + v1 * v1)
    return lo, hi, v0 / norm, v1 / norm, diag_mask


def _clamp_sym2x2(block: np.ndarray, eps: float) -> np.ndarray:
    lo, hi, q0, q1, diag_mask = _eigh2x2(block)
    lo_c = np.maximum(lo, eps)
    hi_c = np.maximum(hi, eps)
    out = np.empty_like(block, dtype=np.float64)
    # hi eigenvector (q0, q1); lo eigenvector (-q1, q0)
    out[..., 0, 0] = hi_c * q0 * q0 + lo_c * q1 * q1
    out[..., 0, 1] = (hi_c - lo_c) * q0 * q1
    out[..., 1, 0] = out[..., 0, 1]
    out[..., 1, 1] = hi_c * q1 * q1 + lo_c * q0 * q0
    if np.any(diag_mask):
        a = np.maximum(block[..., 0, 0], eps)
        d = np.maximum(block[..., 1, 1], eps)
        out[..., 0, 0] = np.where(diag_mask, a, out[..., 0, 0])
        out[..., 1, 1] = np.where(diag_mask, d, out[..., 1, 1])
        out[..., 0, 1] = np.where(diag_mask, 0.0, out[..., 0, 1])
        out[..., 1, 0] = out[..., 0, 1]
    return out


def regularize_covariance(block, eps: float):
    """Floor the eigenvalues of a covariance block at eps.

    Accepts a scalar, a (2, 2) symmetric matrix, or batched (K,) / (K, 2, 2)
    arrays; returns the same shape with every eigenvalue >= eps.
    """
    if np.isscalar(block) or np.ndim(block) == 0:
        return max(float(block), eps)
    arr = np.asarray(block, dtype=np.float64)
    if arr.ndim == 1:
        return np.maximum(arr, eps)
    return _clamp_sym2x2(arr, eps)


def regularize_params(params: MixtureParams, cfg: EmConfig) -> MixtureParams:
    """Clamp every covariance block of every superpixel."""
    return MixtureParams(
        mu=params.mu,
        cov_spatial=regularize_covariance(params.cov_spatial, cfg.eps_spatial),
        var_lum=np.maximum(params.var_lum, cfg.eps_color),
        cov_chroma=(regularize_covariance(params.cov_chroma, cfg.eps_color)
                    if params.is_color else None),
    )


def init_params(features: FeatureImage, geom: GridGeometry,
                cfg: EmConfig) -> MixtureParams:
    """Seed one Gaussian per grid cell.

    Means copy the cell-center pixel's feature vector; the spatial block
    starts at diag(vx^2, vy^2) so neighboring superpixels overlap, and
    color variances start at lam^2.
    """
    if features.width != geom.width or features.height != geom.height:
        raise ValueError("feature image does not match geometry")
    K = geom.num_superpixels
    ks = np.arange(K)
    kx = ks % geom.cols
    ky = ks // geom.cols
    centers = (kx * geom.interval_x + geom.interval_x // 2
               + geom.width * (ky * geom.interval_y + geom.interval_y // 2))
    mu = features.features[centers].copy()
    cov_spatial = np.zeros((K, 2, 2))
    cov_spatial[:, 0, 0] = geom.interval_x ** 2
    cov_spatial[:, 1, 1] = geom.interval_y ** 2
    var_lum = np.full(K, cfg.lam ** 2)
    if features.is_color:
        cov_chroma = np.zeros((K, 2, 2))
        cov_chroma[:, 0, 0] = cfg.lam ** 2
        cov_chroma[:, 1, 1] = cfg.lam ** 2
        return MixtureParams(mu, cov_spatial, var_lum, cov_chroma)
    return MixtureParams(mu, cov_spatial, var_lum, None)


def _inv_sym2x2(block: np.ndarray):
    det = (block[..., 0, 0] * block[..., 1, 1]
           - block[..., 0, 1] * block[..., 1, 0])
    inv = np.empty_like(block)
    inv[..., 0, 0] = block[..., 1, 1] / det
    inv[..., 1, 1] = block[..., 0, 0] / det
    inv[..., 0, 1] = -block[..., 0, 1] / det
    inv[..., 1, 0] = -block[..., 1, 0] / det
    return inv, det


def _precompute(params: MixtureParams):
    inv_s, det_s = _inv_sym2x2(params.cov_spatial)
    inv_l = 1.0 / params.var_lum
    logdet = np.log(det_s) + np.log(params.var_lum)
    if params.is_color:
        inv_ab, det_ab = _inv_sym2x2(params.cov_chroma)
        logdet = logdet + np.log(det_ab)
    else:
        inv_ab = np.zeros((params.num_superpixels, 2, 2))
    return inv_s, inv_l, inv_ab, logdet


def log_gaussian(z: np.ndarray, params: MixtureParams, k: int) -> float:
    """Log density of feature vector z under superpixel k's Gaussian."""
    z = np.asarray(z, dtype=np.float64)
    mu = params.mu[k]
    ds = z[:2] - mu[:2]
    inv_s, det_s = _inv_sym2x2(params.cov_spatial[k])
    q = ds @ inv_s @ ds
    logdet = math.log(det_s) + math.log(params.var_lum[k])
    dl = z[2] - mu[2]
    q += dl * dl / params.var_lum[k]
    if params.is_color:
        dab = z[3:5] - mu[3:5]
        inv_ab, det_ab = _inv_sym2x2(params.cov_chroma[k])
        q += dab @ inv_ab @ dab
        logdet += math.log(det_ab)
    return -0.5 * (params.dim * LN_2PI + logdet + q)


def _estep_full(features: FeatureImage, geom: GridGeometry,
                params: MixtureParams):
    N = features.num_pixels
    cand = np.empty((N, 9), dtype=np.int32)
    resp = np.empty((N, 9), dtype=np.float64)
    loglik = np.empty(N, dtype=np.float64)
    inv_s, inv_l, inv_ab, logdet = _precompute(params)
    _kernels.estep_kernel(
        features.features, geom.width, geom.height,
        geom.interval_x, geom.interval_y, geom.cols, geom.rows,
        params.mu, inv_s, inv_l, inv_ab, logdet, params.is_color,
        cand, resp, loglik)
    return ResponsibilityTable(cand, resp), loglik


def e_step(features: FeatureImage, geom: GridGeometry,
           params: MixtureParams) -> ResponsibilityTable:
    """Posterior weight of each candidate superpixel for every pixel.

    Computed from log densities with per-pixel max subtraction, then
    normalized over the candidate set.
    """
    table, _ = _estep_full(features, geom, params)
    return table


def log_likelihood(features: FeatureImage, geom: GridGeometry,
                   params: MixtureParams) -> float:
    """Sum over pixels of the log candidate-summed density."""
    _, loglik = _estep_full(features, geom, params)
    return float(np.sum(loglik))


def m_step(features: FeatureImage, geom: GridGeometry,
           table: ResponsibilityTable, cfg: EmConfig) -> MixtureParams:
    """Weighted means and scatters over each superpixel's window, followed
    by eigenvalue clamping. Accumulation order is fixed (row-major within
    the window) so results do not depend on thread count."""
    K = geom.num_superpixels
    D = features.dim
    is_color = features.is_color
    mu = np.empty((K, D))
    cov_s = np.empty((K, 2, 2))
    var_l = np.empty(K)
    cov_ab = np.empty((K, 2, 2)) if is_color else None
    fault = np.zeros(1, dtype=np.int32)
    _kernels.mstep_kernel(
        features.features, geom.width, geom.height,
        geom.interval_x, geom.interval_y, geom.cols, geom.rows,
        table.candidates, table.weights, is_color,
        mu, cov_s, var_l,
        cov_ab if is_color else np.zeros((K, 2, 2)), fault)
    if fault[0]:
        raise RuntimeError("superpixel with zero total responsibility")
    raw = MixtureParams(mu, cov_s, var_l, cov_ab)
    return regularize_params(raw, cfg)


@dataclass
class EmResult:
    params: MixtureParams
    responsibilities: ResponsibilityTable
    loglik_history: list[float] = field(default_factory=list)


def run_em(features: FeatureImage, geom: GridGeometry, cfg: EmConfig,
           track_likelihood: bool = False) -> EmResult:
    """Fixed-iteration EM: init, E-step, then iterations x (M-step, E-step).

    No convergence check; when track_likelihood is set, the history holds
    the model log likelihood observed at each E-step (iterations + 1
    entries, non-decreasing when clamping is inactive).
    """
    params = regularize_params(init_params(features, geom, cfg), cfg)
    table, loglik = _estep_full(features, geom, params)
    history = [float(np.sum(loglik))] if track_likelihood else []
    for _ in range(cfg.iterations):
        params = m_step(features, geom, table, cfg)
        table, loglik = _estep_full(features, geom, params)
        if track_likelihood:
            history.append(float(np.sum(loglik)))
    return EmResult(params, table, history)
