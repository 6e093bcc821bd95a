"""Core 2D parallel-beam tomography operators.

Conventions used throughout the package:

- An image is a square 2D float64 array. Pixel centers sit on the integer
  lattice x = col - side//2, y = row - side//2, so the coordinate origin is
  the pixel (side//2, side//2).
- A projection at angle theta is the line-integral transform
  g(rho) = sum_xy z(x, y) * delta(rho - x*cos(theta) - y*sin(theta)),
  discretized by splatting each pixel onto the two nearest detector bins
  with linear interpolation weights. Detector bins have unit spacing and
  are centered at rho = 0; the detector length is ceil(sqrt(2)*side),
  forced odd so a bin sits exactly at rho = 0.
- Angles are radians. A pose is (angle, shift): the projection was taken
  at `angle` and then translated by `shift` detector bins.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy import fft as sfft


class Pose(NamedTuple):
    """View angle (radians, canonically in [0, pi)) and detector shift (bins)."""

    angle: float
    shift: float = 0.0


def detector_length(side: int) -> int:
    """Number of detector bins for a side x side image: ceil(sqrt(2)*side), forced odd."""
    if side < 1:
        raise ValueError("side must be positive")
    length = math.ceil(math.sqrt(2.0) * side)
    if length % 2 == 0:
        length += 1
    return length


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1] or image.size == 0:
        raise ValueError("image must be a non-empty square 2D array")
    return image


def _pixel_grid(side: int) -> tuple[np.ndarray, np.ndarray]:
    c = side // 2
    coords = np.arange(side, dtype=np.float64) - c
    y, x = np.meshgrid(coords, coords, indexing="ij")
    return x.ravel(), y.ravel()


def _detector_weights(side: int, angle: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel lower bin index and fractional weight for one view angle.

    Shared by the forward splat and the adjoint gather so that the two
    operators are exact transposes of each other.
    """
    x, y = _pixel_grid(side)
    length = detector_length(side)
    u = x * math.cos(angle) + y * math.sin(angle) + (length - 1) // 2
    return _splat_weights(u, length)


def _splat_weights(u: np.ndarray, length: int) -> tuple[np.ndarray, np.ndarray]:
    # Even sides put the farthest corner pixel up to 0.26 bins past the last
    # detector bin at diagonal angles; clamp so mass is conserved and the
    # forward/adjoint pair stays an exact transpose.
    i0 = np.clip(np.floor(u).astype(np.intp), 0, length - 2)
    t = np.clip(u - i0, 0.0, 1.0)
    return i0, t


def radon_forward(image: np.ndarray, angle: float) -> np.ndarray:
    """Project `image` at `angle`; returns the detector bin vector."""
    image = _check_image(image)
    side = image.shape[0]
    length = detector_length(side)
    i0, t = _detector_weights(side, angle)
    z = image.ravel()
    proj = np.bincount(i0, weights=z * (1.0 - t), minlength=length)
    proj += np.bincount(i0 + 1, weights=z * t, minlength=length)
    return proj


def radon_forward_many(image: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Stack of projections of one image at many angles, one row per angle."""
    image = _check_image(image)
    side = image.shape[0]
    length = detector_length(side)
    x, y = _pixel_grid(side)
    mid = (length - 1) // 2
    z = image.ravel()
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    sino = np.empty((angles.size, length))
    for k, angle in enumerate(angles):
        u = x * math.cos(angle) + y * math.sin(angle) + mid
        i0, t = _splat_weights(u, length)
        row = np.bincount(i0, weights=z * (1.0 - t), minlength=length)
        row += np.bincount(i0 + 1, weights=z * t, minlength=length)
        sino[k] = row
    return sino


def radon_adjoint(projection: np.ndarray, angle: float, side: int) -> np.ndarray:
    """Exact transpose of radon_forward: smear bin values back along rays."""
    projection = np.asarray(projection, dtype=np.float64)
    if projection.ndim != 1 or projection.size != detector_length(side):
        raise ValueError("projection length does not match detector_length(side)")
    i0, t = _detector_weights(side, angle)
    out = projection[i0] * (1.0 - t) + projection[i0 + 1] * t
    return out.reshape(side, side)


def shift_projection(projection: np.ndarray, amount: float) -> np.ndarray:
    """Translate bin contents by `amount` bins (linear interpolation, zero fill)."""
    projection = np.asarray(projection, dtype=np.float64)
    if projection.ndim != 1:
        raise ValueError("projection must be 1D")
    grid = np.arange(projection.size, dtype=np.float64)
    return np.interp(grid - amount, grid, projection, left=0.0, right=0.0)


def _ramp_filter(sino: np.ndarray, filter_name: str) -> np.ndarray:
    """Frequency-domain ramp filter applied row-wise, zero-padded against wraparound.

    The ramp response is the DFT of the band-limited spatial kernel
    (h[0] = 1/4, h[odd m] = -1/(pi*m)^2, h[even m] = 0) rather than a bare
    |f|, which would zero the DC bin and bias the reconstruction.
    """
    length = sino.shape[1]
    n_fft = max(64, 1 << math.ceil(math.log2(2 * length)))
    kernel = np.zeros(n_fft)
    kernel[0] = 0.25
    odd = np.arange(1, n_fft // 2 + 1, 2)
    kernel[odd] = -1.0 / (np.pi * odd) ** 2
    kernel[-odd] = -1.0 / (np.pi * odd) ** 2
    ramp = np.fft.rfft(kernel).real
    if filter_name == "hann":
        ramp *= 0.5 * (1.0 + np.cos(2.0 * np.pi * np.fft.rfftfreq(n_fft)))
    elif filter_name != "ramlak":
        raise ValueError(f"unknown filter {filter_name!r}")
    spectrum = np.fft.rfft(sino, n=n_fft, axis=1) * ramp
    return np.fft.irfft(spectrum, n=n_fft, axis=1)[:, :length]


def voronoi_angle_weights(angles: np.ndarray) -> np.ndarray:
    """Angular quadrature weight per view: half the gap to each neighbor.

    Angles are folded to [0, pi) and treated as points on the projective
    semicircle (wrap-around between the largest angle and smallest + pi).
    The weights sum to pi, and for uniformly spaced angles every weight is
    pi / n, matching the plain FBP scale. Coincident angles share their
    Voronoi cell.
    """
    folded = np.asarray(angles, dtype=np.float64) % math.pi
    n = folded.size
    if n == 0:
        raise ValueError("need at least one angle")
    if n == 1:
        return np.array([math.pi])
    order = np.argsort(folded, kind="stable")
    srt = folded[order]
    gaps = np.empty(n)
    gaps[:-1] = np.diff(srt)
    gaps[-1] = srt[0] + math.pi - srt[-1]
    cells = np.empty(n)
    cells[0] = 0.5 * (gaps[-1] + gaps[0])
    cells[1:] = 0.5 * (gaps[:-1] + gaps[1:])
    weights = np.empty(n)
    weights[order] = cells
    return weights


def fbp_reconstruct(
    projections: np.ndarray,
    poses: Sequence[Pose],
    side: int,
    filter_name: str = "ramlak",
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Filtered backprojection at the given poses.

    Each projection is first translated by -shift to undo its pose shift,
    ramp filtered, and backprojected at its pose angle. By default each
    view contributes with weight pi / (number of projections); passing
    `weights` (e.g. voronoi_angle_weights of the pose angles) replaces the
    uniform scale with a per-view angular quadrature weight, which removes
    the density bias when the view angles are unevenly spaced.
    """
    sino = np.atleast_2d(np.asarray(projections, dtype=np.float64))
    if len(poses) != sino.shape[0]:
        raise ValueError("need one pose per projection")
    if sino.shape[1] != detector_length(side):
        raise ValueError("projection length does not match detector_length(side)")
    if weights is None:
        weights = np.full(sino.shape[0], math.pi / sino.shape[0])
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (sino.shape[0],):
            raise ValueError("need one weight per projection")
    unshifted = np.stack([shift_projection(p, -pose.shift) for p, pose in zip(sino, poses)])
    filtered = _ramp_filter(unshifted, filter_name)
    x, y = _pixel_grid(side)
    mid = (sino.shape[1] - 1) // 2
    out = np.zeros(side * side)
    for row, pose, w in zip(filtered, poses, weights):
        u = x * math.cos(pose.angle) + y * math.sin(pose.angle) + mid
        i0, t = _splat_weights(u, sino.shape[1])
        out += w * (row[i0] * (1.0 - t) + row[i0 + 1] * t)
    return out.reshape(side, side)


def dct2_forward(image: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT-II coefficients, flattened row-major to length side**2."""
    image = _check_image(image)
    return sfft.dctn(image, type=2, norm="ortho").ravel()


def dct2_inverse(coeffs: np.ndarray, side: int) -> np.ndarray:
    """Inverse of dct2_forward."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.size != side * side:
        raise ValueError("coefficient vector length must be side**2")
    return sfft.idctn(coeffs.reshape(side, side), type=2, norm="ortho")


def rotate_image(image: np.ndarray, angle: float) -> np.ndarray:
    """Rotate image content by `angle` radians about the coordinate origin pixel.

    Bilinear interpolation, zero fill outside the input support. Rotation
    direction matches the projection geometry: radon_forward(rotate_image(z, d), t)
    approximates radon_forward(z, t - d).
    """
    image = _check_image(image)
    side = image.shape[0]
    x, y = _pixel_grid(side)
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    src_x = x * cos_a + y * sin_a + side // 2
    src_y = -x * sin_a + y * cos_a + side // 2
    return _bilinear_sample(image, src_y, src_x).reshape(side, side)


def mirror_image(image: np.ndarray) -> np.ndarray:
    """Mirror image content about the origin pixel's column (x -> -x).

    Exact column permutation, zero fill for the one column reflected out
    of the support when the side is even. Reflecting about the origin
    pixel (not the array midline, which sits half a pixel off for even
    sides) keeps the result aligned with the projection geometry:
    radon_forward(mirror_image(z), t) approximates radon_forward(z, pi - t).
    """
    image = _check_image(image)
    side = image.shape[0]
    out = np.zeros_like(image)
    src = 2 * (side // 2) - np.arange(side)
    ok = (src >= 0) & (src < side)
    out[:, ok] = image[:, src[ok]]
    return out


def _bilinear_sample(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample image at fractional (row, col) positions; zero outside."""
    h, w = image.shape
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    tr = rows - r0
    tc = cols - c0
    out = np.zeros(rows.shape)
    for dr, dc, wgt in (
        (0, 0, (1 - tr) * (1 - tc)),
        (0, 1, (1 - tr) * tc),
        (1, 0, tr * (1 - tc)),
        (1, 1, tr * tc),
    ):
        rr = r0 + dr
        cc = c0 + dc
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        out[ok] += wgt[ok] * image[rr[ok], cc[ok]]
    return out


def bilinear_resize(image: np.ndarray, side: int) -> np.ndarray:
    """Resample image to side x side with bilinear interpolation."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ValueError("image must be a non-empty 2D array")
    h, w = image.shape
    rows = (np.arange(side) + 0.5) * (h / side) - 0.5
    cols = (np.arange(side) + 0.5) * (w / side) - 0.5
    rr, cc = np.meshgrid(np.clip(rows, 0, h - 1), np.clip(cols, 0, w - 1), indexing="ij")
    return _bilinear_sample(image, rr.ravel(), cc.ravel()).reshape(side, side)
