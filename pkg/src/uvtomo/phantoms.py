"""Built-in test objects: a head phantom and generators for foreign images."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

# (intensity, semi-axis a, semi-axis b, center x0, center y0, rotation deg)
_HEAD_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def _norm_grid(side: int) -> tuple[np.ndarray, np.ndarray]:
    c = side // 2
    coords = (np.arange(side) - c) / (side / 2.0)
    y, x = np.meshgrid(coords, coords, indexing="ij")
    return x, y


def shepp_logan(side: int, smooth: float = 0.0) -> np.ndarray:
    """Ellipse head phantom, values in [0, 1]; optional Gaussian blur of `smooth` px."""
    return _ellipse_image(side, _HEAD_ELLIPSES, smooth)


def shepp_logan_smooth(side: int) -> np.ndarray:
    """Band-limited head phantom: shepp_logan blurred by side/42 pixels.

    Sharp piecewise-constant edges put a ~0.3 relative floor on filtered
    backprojection accuracy at small sides; the blurred variant is the
    canonical object for reconstruction-quality checks.
    """
    return shepp_logan(side, smooth=side / 42.0)


# head phantom plus three unequal off-axis features that share no mirror axis
_PORTRAIT_ELLIPSES = _HEAD_ELLIPSES + (
    (0.44, 0.110, 0.087, 0.25, -0.27, 158.0),
    (0.28, 0.087, 0.067, -0.17, 0.27, 33.0),
    (0.29, 0.060, 0.059, 0.41, 0.21, 16.0),
)


def _ellipse_image(side: int, ellipses, smooth: float) -> np.ndarray:
    x, y = _norm_grid(side)
    img = np.zeros((side, side))
    for inten, a, b, x0, y0, phi_deg in ellipses:
        phi = np.deg2rad(phi_deg)
        xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
        yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += inten
    if smooth > 0.0:
        img = gaussian_filter(img, smooth)
    return img


def portrait(side: int) -> np.ndarray:
    """Smooth mirror-asymmetric phantom, blurred by side/42 pixels.

    The head phantom's elongation and centroid offset give strong
    order-1/2 projection moments, but its near mirror symmetry leaves a
    view and its reflection almost indistinguishable at low moment
    orders, so unknown-pose solvers flip individual views at random.
    Three unequal off-axis features that share no common mirror axis
    break that degeneracy while keeping the moment backbone, making this
    the canonical object for full-pipeline (unknown pose) checks; the
    plain head phantom remains the reference for known-pose ones.
    """
    return _ellipse_image(side, _PORTRAIT_ELLIPSES, smooth=side / 42.0)


def gaussian_blobs(side: int, count: int = 4, seed: int = 7) -> np.ndarray:
    """Smooth positive phantom: a sum of random Gaussian bumps inside the unit disk."""
    rng = np.random.default_rng(seed)
    x, y = _norm_grid(side)
    img = np.zeros((side, side))
    for _ in range(count):
        cx, cy = rng.uniform(-0.5, 0.5, size=2)
        width = rng.uniform(0.12, 0.3)
        amp = rng.uniform(0.5, 1.0)
        img += amp * np.exp(-(((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * width**2)))
    return img


def foreign_pool(side: int, count: int, seed: int) -> list[np.ndarray]:
    """Seeded pool of images unrelated to the head phantom, for outlier projections.

    Emulates drawing from a large natural-image collection: every image
    mixes several of five content families (rectangles, ellipses, shaded
    discs, band-limited random fields, oriented stripes) with randomized
    geometry, scale and contrast, so pool members are mutually dissimilar
    rather than variations on one template. Amplitudes stay comparable to
    the head phantom so outliers are not separable by total mass alone.
    """
    rng = np.random.default_rng(seed)
    x, y = _norm_grid(side)
    disc = x**2 + y**2 <= 0.81
    pool = []
    for _ in range(count):
        img = np.zeros((side, side))
        for _ in range(rng.integers(2, 6)):
            kind = rng.integers(0, 5)
            cx, cy = rng.uniform(-0.5, 0.5, size=2)
            amp = rng.uniform(0.3, 1.2)
            if kind == 0:
                hw, hh = rng.uniform(0.08, 0.45, size=2)
                img[(np.abs(x - cx) < hw) & (np.abs(y - cy) < hh)] += amp
            elif kind == 1:
                a, b = rng.uniform(0.08, 0.45, size=2)
                img[((x - cx) / a) ** 2 + ((y - cy) / b) ** 2 <= 1.0] += amp
            elif kind == 2:
                direction = rng.uniform(0, np.pi)
                img += amp * 0.5 * (1.0 + x * np.cos(direction) + y * np.sin(direction)) * disc
            elif kind == 3:
                field = gaussian_filter(rng.standard_normal((side, side)), rng.uniform(1.0, side / 6.0))
                peak = np.abs(field).max()
                if peak > 0:
                    img += amp * np.abs(field) / peak * disc
            else:
                freq = rng.uniform(2.0, 8.0)
                direction = rng.uniform(0, np.pi)
                phase = rng.uniform(0, 2 * np.pi)
                wave = np.cos(freq * np.pi * (x * np.cos(direction) + y * np.sin(direction)) + phase)
                img += amp * 0.5 * (1.0 + wave) * disc
        img *= rng.uniform(0.6, 1.4)
        pool.append(img)
    return pool


_BUILTIN = {
    "shepp-logan": shepp_logan,
    "shepp-logan-smooth": shepp_logan_smooth,
    "blobs": gaussian_blobs,
}


def make_phantom(name: str, side: int) -> np.ndarray:
    try:
        return _BUILTIN[name](side)
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}; choices: {sorted(_BUILTIN)}") from None
