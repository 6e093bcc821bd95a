"""Synthetic projection datasets with unknown poses, noise and outliers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import bilinear_resize, detector_length, radon_forward_many, shift_projection

INLIER, CLASS1, CLASS2 = 0, 1, 2


@dataclass
class SimulationConfig:
    side: int = 64
    num_projections: int = 3600
    noise_fraction: float = 0.1
    f1: float = 0.0
    f2: float = 0.0
    f3: float = 0.1
    shift_bound: float = 0.0
    angle_intervals: tuple[tuple[float, float], ...] = ((0.0, math.pi),)
    seed: int = 0

    def validate(self) -> None:
        if self.side < 2:
            raise ValueError("side must be at least 2")
        if self.num_projections < 1:
            raise ValueError("num_projections must be positive")
        for name in ("f1", "f2", "f3"):
            val = getattr(self, name)
            if not 0.0 <= val < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.f1 + self.f2 >= 1.0:
            raise ValueError("f1 + f2 must leave at least one inlier")
        if self.noise_fraction < 0.0:
            raise ValueError("noise_fraction must be non-negative")
        if self.shift_bound < 0.0:
            raise ValueError("shift_bound must be non-negative")
        if not self.angle_intervals:
            raise ValueError("angle_intervals must be non-empty")
        for lo, hi in self.angle_intervals:
            if not (0.0 <= lo < hi <= math.pi + 1e-12):
                raise ValueError("each angle interval needs 0 <= lo < hi <= pi")


@dataclass
class GroundTruth:
    angles: np.ndarray  # (Q,) radians
    shifts: np.ndarray  # (Q,) detector bins
    labels: np.ndarray  # (Q,) INLIER / CLASS1 / CLASS2
    sigma: float = 0.0  # noise standard deviation actually applied
    dropped_pixels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))


def sample_angles(
    intervals: tuple[tuple[float, float], ...],
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw angles from the union of intervals, weighted by interval length."""
    lengths = np.array([hi - lo for lo, hi in intervals], dtype=np.float64)
    which = rng.choice(len(intervals), size=count, p=lengths / lengths.sum())
    u = rng.uniform(0.0, 1.0, size=count)
    lows = np.array([lo for lo, _ in intervals])
    return lows[which] + u * lengths[which]


def make_dataset(
    image: np.ndarray,
    config: SimulationConfig,
    outlier_pool: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, GroundTruth]:
    """Simulate the measured sinogram for `image` under `config`.

    Projections are drawn at angles from the configured intervals. A
    fraction f1 are projections of pool images instead of `image`; a
    fraction f2 are projections of a single corrupted copy of `image`
    with floor(f3 * side^2) pixels zeroed. Every projection (outliers
    included) is translated by a uniform shift in [-shift_bound,
    shift_bound] and perturbed with N(0, sigma^2) noise per bin, where
    sigma = noise_fraction * (grand mean bin of the noiseless inlier
    projections). Deterministic for a fixed seed.
    """
    config.validate()
    image = np.asarray(image, dtype=np.float64)
    side = config.side
    if image.shape != (side, side):
        raise ValueError("image does not match config.side")
    count = config.num_projections
    rng = np.random.default_rng(config.seed)

    angles = sample_angles(config.angle_intervals, count, rng)
    labels = np.zeros(count, dtype=np.int64)
    # floor(f * Q), forgiving float dust on exact products like 0.29 * 100
    n1 = int(config.f1 * count + 1e-9)
    n2 = int(config.f2 * count + 1e-9)
    order = rng.permutation(count)
    labels[order[:n1]] = CLASS1
    labels[order[n1 : n1 + n2]] = CLASS2
    shifts = rng.uniform(-config.shift_bound, config.shift_bound, size=count) if config.shift_bound > 0 else np.zeros(count)

    dropped = np.empty(0, dtype=np.intp)
    corrupted = image
    if n2 > 0:
        n_drop = int(config.f3 * side * side + 1e-9)
        dropped = rng.choice(side * side, size=n_drop, replace=False)
        corrupted = image.copy()
        corrupted.ravel()[dropped] = 0.0

    if n1 > 0:
        if not outlier_pool:
            raise ValueError("f1 > 0 requires a non-empty outlier_pool")
        pool = [img if img.shape == (side, side) else bilinear_resize(img, side) for img in outlier_pool]
        picks = rng.integers(0, len(pool), size=n1)
    else:
        pool, picks = [], np.empty(0, dtype=np.int64)

    sino = np.empty((count, detector_length(side)))
    inlier_rows = labels == INLIER
    sino[inlier_rows] = radon_forward_many(image, angles[inlier_rows])
    if n2 > 0:
        rows2 = labels == CLASS2
        sino[rows2] = radon_forward_many(corrupted, angles[rows2])
    if n1 > 0:
        rows1 = np.flatnonzero(labels == CLASS1)
        for pool_idx in np.unique(picks):
            members = rows1[picks == pool_idx]
            sino[members] = radon_forward_many(pool[pool_idx], angles[members])

    sigma = config.noise_fraction * float(sino[inlier_rows].mean())

    if config.shift_bound > 0:
        for i in range(count):
            sino[i] = shift_projection(sino[i], shifts[i])
    if sigma > 0:
        sino += rng.normal(0.0, sigma, size=sino.shape)

    return sino, GroundTruth(angles, shifts, labels, sigma=sigma, dropped_pixels=dropped)
