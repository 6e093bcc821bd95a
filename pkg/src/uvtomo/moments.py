"""Moment-consistency pose initialization.

The order-n moment of a projection taken at angle theta equals a fixed
linear combination of the order-n geometric moments of the image:

    m_theta^(n) = sum_j C(n, j) cos(theta)^(n-j) sin(theta)^j v_{n-j, j}

with v_{p, q} = sum_xy z(x, y) x^p y^q. Fitting the image moments v and
per-cluster poses (theta_i, s_i) jointly against the measured projection
moments gives pose estimates without knowing the image.

Pixel and detector coordinates are normalized by a common `scale`
(side / 2 in the pipeline) so that moments of different orders are
comparable; the consistency identity requires the same scale on both
sides. Projection moments integrate over the normalized domain
|rho| <= scale only: an object inside the inscribed disk has no mass
beyond it, while detector bins out there carry pure noise that the
rho^n weight would otherwise amplify hardest (|rho|/scale reaches 1.41
at the corners of the detector).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Pose, shift_projection


@dataclass
class PoseSolution:
    poses: list[Pose]
    image_moments: list[np.ndarray]  # order n entry: [v_{n,0}, v_{n-1,1}, ..., v_{0,n}]
    energy: float


def image_moments(image: np.ndarray, k: int, scale: float | None = None) -> list[np.ndarray]:
    """Geometric moments v_{n-j, j} for n = 0..k over the normalized pixel lattice."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError("image must be square")
    if k < 0:
        raise ValueError("k must be non-negative")
    side = image.shape[0]
    if scale is None:
        scale = side / 2.0
    coords = (np.arange(side) - side // 2) / scale
    ygrid, xgrid = np.meshgrid(coords, coords, indexing="ij")
    out = []
    for n in range(k + 1):
        row = np.array([
            float((image * xgrid ** (n - j) * ygrid**j).sum()) for j in range(n + 1)
        ])
        out.append(row)
    return out


def projection_moment(projection: np.ndarray, n: int, unshift: float = 0.0, *, scale: float) -> float:
    """Order-n moment of the projection after undoing a shift of `unshift` bins.

    Bins outside the normalized domain (|rho| > scale) are excluded; see
    the module docstring.
    """
    projection = np.asarray(projection, dtype=np.float64)
    if unshift != 0.0:
        projection = shift_projection(projection, -unshift)
    rho = (np.arange(projection.size) - (projection.size - 1) // 2) / scale
    weight = np.where(np.abs(rho) <= 1.0, rho**n, 0.0)
    return float((projection * weight).sum())


def design_row(angle: float, n: int) -> np.ndarray:
    """Coefficients C(n, j) cos^(n-j) sin^j multiplying v_{n-j, j}."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([math.comb(n, j) * c ** (n - j) * s**j for j in range(n + 1)])


def hlcc_energy(
    poses: list[Pose],
    moments: list[np.ndarray],
    projections: np.ndarray,
    k: int,
    *,
    scale: float,
) -> float:
    """Total squared moment-consistency residual over orders 0..k and all projections."""
    total = 0.0
    for i, pose in enumerate(poses):
        for n in range(k + 1):
            measured = projection_moment(projections[i], n, unshift=pose.shift, scale=scale)
            predicted = float(design_row(pose.angle, n) @ moments[n])
            total += (measured - predicted) ** 2
    return total


def _moment_table(projections: np.ndarray, shift_grid: np.ndarray, k: int, scale: float) -> np.ndarray:
    """measured moments per (projection, candidate shift, order)."""
    count, length = projections.shape
    rho = (np.arange(length) - (length - 1) // 2) / scale
    inside = np.abs(rho) <= 1.0
    powers = np.stack([np.where(inside, rho**n, 0.0) for n in range(k + 1)])  # (k+1, L)
    table = np.empty((count, shift_grid.size, k + 1))
    for i in range(count):
        for si, s in enumerate(shift_grid):
            row = shift_projection(projections[i], -s) if s != 0.0 else projections[i]
            table[i, si] = powers @ row
    return table


def _design_tables(angle_grid: np.ndarray, k: int) -> list[np.ndarray]:
    cos_t, sin_t = np.cos(angle_grid), np.sin(angle_grid)
    return [
        np.stack([math.comb(n, j) * cos_t ** (n - j) * sin_t**j for j in range(n + 1)], axis=1)
        for n in range(k + 1)
    ]


def solve_poses(
    projections: np.ndarray,
    k: int = 3,
    num_starts: int = 10,
    seed: int = 0,
    *,
    scale: float,
    shift_bound: float = 0.0,
    shift_step: float = 0.5,
    angle_step_deg: float = 1.0,
    max_sweeps: int = 200,
    tol: float = 1e-6,
    threads: int = 1,
) -> PoseSolution:
    """Estimate per-projection poses by moment-consistency coordinate descent.

    Alternates (a) exact least-squares for the image moments given poses
    with (b) an exhaustive per-projection grid search over angles
    (angle_step_deg steps over [0, 360)) and shifts (shift_step steps over
    [-shift_bound, shift_bound]). Angles are directed: odd-order moments
    flip sign when the detector axis reverses, so a view and its
    180-degree opposite are distinguishable and folding them together
    would corrupt the views that land on the far side of the fold. Runs
    `num_starts` independent starts
    with poses drawn uniformly from the grid and keeps the lowest-energy
    result. The energy never increases within a sweep; a start stops when
    the relative decrease falls below `tol` or after `max_sweeps`.
    """
    projections = np.atleast_2d(np.asarray(projections, dtype=np.float64))
    count = projections.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if num_starts < 1:
        raise ValueError("num_starts must be at least 1")

    angle_grid = np.deg2rad(np.arange(0.0, 360.0, angle_step_deg))
    if shift_bound > 0.0:
        shift_grid = np.arange(-shift_bound, shift_bound + shift_step / 2.0, shift_step)
    else:
        shift_grid = np.zeros(1)
    mtable = _moment_table(projections, shift_grid, k, scale)
    designs = _design_tables(angle_grid, k)

    child_seeds = np.random.SeedSequence(seed).spawn(num_starts)

    def run_start(start: int) -> tuple[float, np.ndarray, np.ndarray, list[np.ndarray]]:
        rng = np.random.default_rng(child_seeds[start])
        ang_idx = rng.integers(0, angle_grid.size, size=count)
        shf_idx = rng.integers(0, shift_grid.size, size=count)
        moments: list[np.ndarray] = []
        energy_prev = np.inf
        rows = np.arange(count)
        for _ in range(max_sweeps):
            moments = []
            for n in range(k + 1):
                design = designs[n][ang_idx]
                target = mtable[rows, shf_idx, n]
                sol, *_ = np.linalg.lstsq(design, target, rcond=None)
                moments.append(sol)
            # residual over the whole (angle, shift) grid, per projection
            grid_energy = np.zeros((count, angle_grid.size, shift_grid.size))
            for n in range(k + 1):
                predicted = designs[n] @ moments[n]  # (angles,)
                grid_energy += (mtable[:, None, :, n] - predicted[None, :, None]) ** 2
            flat = grid_energy.reshape(count, -1).argmin(axis=1)
            ang_idx = flat // shift_grid.size
            shf_idx = flat % shift_grid.size
            energy = float(grid_energy.reshape(count, -1)[rows, flat].sum())
            assert energy <= energy_prev * (1.0 + 1e-9) + 1e-12, "energy increased in sweep"
            if energy_prev - energy < tol * max(energy_prev, 1e-300):
                energy_prev = energy
                break
            energy_prev = energy
        return energy_prev, ang_idx, shf_idx, moments

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_start, range(num_starts)))
    else:
        results = [run_start(s) for s in range(num_starts)]

    best = min(range(num_starts), key=lambda s: results[s][0])
    energy, ang_idx, shf_idx, moments = results[best]
    poses = [Pose(float(angle_grid[a]), float(shift_grid[s])) for a, s in zip(ang_idx, shf_idx)]
    return PoseSolution(poses=poses, image_moments=moments, energy=energy)
