"""Patch-ensemble PCA denoising of averaged cluster centers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass
class DenoiseConfig:
    sigma: float  # per-bin noise std of the raw projections
    k_bar: float  # average retained members per cluster
    patch_length: int = 15
    num_neighbors: int = 40

    def validate(self, center_length: int | None = None) -> None:
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")
        if self.k_bar <= 0.0:
            raise ValueError("k_bar must be positive")
        if self.patch_length < 2:
            raise ValueError("patch_length must be at least 2")
        if self.num_neighbors < self.patch_length:
            raise ValueError("num_neighbors must be at least patch_length")
        if center_length is not None and self.patch_length > center_length:
            raise ValueError("patch_length exceeds the center length")


def wiener_shrink(alpha, sigma_l_sq, noise_var):
    """Shrink coefficient(s): alpha * sigma_l_sq / (sigma_l_sq + noise_var).

    Both variances zero returns 0 (limit convention).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    sigma_l_sq = np.asarray(sigma_l_sq, dtype=np.float64)
    denom = np.asarray(sigma_l_sq + noise_var, dtype=np.float64)
    gain = np.zeros_like(denom)
    np.divide(sigma_l_sq, denom, out=gain, where=denom > 0)
    result = alpha * gain
    return float(result) if result.ndim == 0 else result


def estimate_coeff_variance(coeffs, noise_var, axis=0):
    """max(0, mean(coeffs^2) - noise_var) along `axis`."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    est = np.mean(coeffs**2, axis=axis) - noise_var
    est = np.maximum(est, 0.0)
    return float(est) if np.ndim(est) == 0 else est


def denoise_centers(centers: np.ndarray, config: DenoiseConfig) -> np.ndarray:
    """Denoise each cluster center with ensemble-PCA Wiener shrinkage.

    Every length-`patch_length` window (stride 1) of every center is a
    reference patch. Its ensemble is the `num_neighbors` nearest patches
    by l2 distance pooled across all centers (the reference always
    qualifies through its zero self-distance). The ensemble is mean
    centered, a PCA basis computed, coefficient variances estimated with
    noise variance sigma^2 / k_bar, and the reference patch's coefficients
    shrunk before reconstruction. Overlapping outputs are averaged in
    position order. sigma = 0 returns the input unchanged.
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2:
        raise ValueError("centers must be a (Kc, L) array")
    config.validate(center_length=centers.shape[1])
    if config.sigma == 0.0:
        return centers.copy()

    num_centers, length = centers.shape
    p = config.patch_length
    noise_var = config.sigma**2 / config.k_bar

    patches = sliding_window_view(centers, p, axis=1).reshape(-1, p)
    total = patches.shape[0]
    ensemble_size = min(config.num_neighbors, total)

    norms = (patches**2).sum(axis=1)
    out_sum = np.zeros_like(patches)
    chunk = max(1, int(2**23 / max(1, total)))
    for start in range(0, total, chunk):
        block = patches[start : start + chunk]
        d2 = norms[start : start + chunk, None] - 2.0 * block @ patches.T + norms[None, :]
        idx = np.argpartition(d2, ensemble_size - 1, axis=1)[:, :ensemble_size]
        ensembles = patches[idx]  # (chunk, ensemble, p)
        mu = ensembles.mean(axis=1)
        centered = ensembles - mu[:, None, :]
        cov = centered.transpose(0, 2, 1) @ centered / ensemble_size
        _, basis = np.linalg.eigh(cov)  # (chunk, p, p), orthonormal columns
        coeffs = centered @ basis  # ensemble coefficients per direction
        sig_var = estimate_coeff_variance(coeffs, noise_var, axis=1)
        ref_coeffs = ((block - mu)[:, None, :] @ basis)[:, 0, :]
        shrunk = wiener_shrink(ref_coeffs, sig_var, noise_var)
        out_sum[start : start + chunk] = mu + (basis @ shrunk[..., None])[..., 0]

    denoised_patches = out_sum.reshape(num_centers, length - p + 1, p)
    acc = np.zeros_like(centers)
    cnt = np.zeros(length)
    for offset in range(p):
        acc[:, offset : offset + length - p + 1] += denoised_patches[:, :, offset]
        cnt[offset : offset + length - p + 1] += 1.0
    return acc / cnt
