"""Gauge-aware evaluation against ground truth.

Reconstructions are recovered only up to a global rotation, a possible
reflection, and (with shifts) a global translation component; every
comparison here first removes those ambiguities explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Pose, mirror_image, rotate_image
from .simulate import CLASS1


@dataclass
class Registration:
    rmse: float
    delta: float  # radians: recon is approximately truth rotated by delta
    reflected: bool


@dataclass
class PoseAlignment:
    delta: float  # radians, fitted global angle offset
    reflected: bool
    angle_errors: np.ndarray  # (Kc,) radians, axial distance after alignment
    aligned_angles: np.ndarray  # (Kc,) radians in [0, pi)
    cluster_true_angles: np.ndarray  # (Kc,) radians
    shift_errors: np.ndarray  # (Kc,) bins, signed, after global sign and offset removal
    shift_sign: float
    shift_offset: float


def inscribed_mask(side: int) -> np.ndarray:
    """Pixels within the inscribed circle (radius side/2 - 1 about the origin pixel)."""
    c = side // 2
    rows, cols = np.indices((side, side))
    return (cols - c) ** 2 + (rows - c) ** 2 <= (side / 2.0 - 1.0) ** 2


def register_and_rmse(truth: np.ndarray, recon: np.ndarray, step_deg: float = 0.5) -> Registration:
    """Relative l2 error inside the inscribed circle after brute-force alignment.

    Searches rotations (step_deg steps over the full circle) and the
    mirrored image for the transform minimizing
    ||truth - aligned(recon)|| / ||truth||. Returns that minimum with the
    aligning rotation delta (recon ~ truth rotated by delta) and whether a
    reflection was applied.
    """
    truth = np.asarray(truth, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    if truth.shape != recon.shape or truth.ndim != 2:
        raise ValueError("truth and recon must be equal-shape square images")
    mask = inscribed_mask(truth.shape[0])
    norm = np.linalg.norm(truth[mask])
    if norm == 0.0:
        raise ValueError("truth image is zero inside the evaluation mask")
    best = Registration(rmse=np.inf, delta=0.0, reflected=False)
    deltas = np.deg2rad(np.arange(0.0, 360.0, step_deg))
    for reflected in (False, True):
        base = mirror_image(recon) if reflected else recon
        for delta in deltas:
            aligned = rotate_image(base, -delta)
            rmse = float(np.linalg.norm((truth - aligned)[mask]) / norm)
            if rmse < best.rmse:
                best = Registration(rmse=rmse, delta=float(delta), reflected=reflected)
    return best


def axial_distance(a, b) -> np.ndarray:
    """Distance between undirected angles (lines), in [0, pi/2]."""
    diff = np.mod(np.asarray(a) - np.asarray(b), math.pi)
    return np.minimum(diff, math.pi - diff)


def _axial_mean(angles: np.ndarray) -> float:
    """Circular mean of undirected angles via the doubled-angle embedding."""
    s = np.sin(2.0 * angles).sum()
    c = np.cos(2.0 * angles).sum()
    return float(np.mod(0.5 * math.atan2(s, c), math.pi))


def align_poses(
    est_poses: list[Pose],
    true_angles: np.ndarray,
    true_shifts: np.ndarray,
    assignments: np.ndarray,
    discarded: np.ndarray,
    delta_step_deg: float = 0.1,
) -> PoseAlignment:
    """Fit the global angle offset (and reflection) between estimated and true poses.

    Each cluster's true angle is the circular mean of its retained
    members' true angles (doubled-angle mean, since view angles are
    undirected); its true shift is the members' mean shift. The fitted
    transform minimizes the sum of axial distances. Shift errors are
    reported after removing the global shift ambiguity: a sign (the
    point-reflection gauge negates every shift) and a single offset.
    """
    num = len(est_poses)
    est_angles = np.array([p.angle for p in est_poses])
    est_shifts = np.array([p.shift for p in est_poses])
    cluster_angles = np.empty(num)
    cluster_shifts = np.empty(num)
    for j in range(num):
        members = (np.asarray(assignments) == j) & ~np.asarray(discarded, dtype=bool)
        if not members.any():
            raise ValueError(f"cluster {j} has no retained members to align against")
        cluster_angles[j] = _axial_mean(true_angles[members])
        cluster_shifts[j] = float(true_shifts[members].mean())

    deltas = np.deg2rad(np.arange(0.0, 180.0, delta_step_deg))
    best_cost = np.inf
    best = (1.0, 0.0)
    for sign in (1.0, -1.0):
        costs = axial_distance(
            sign * est_angles[None, :] + deltas[:, None], cluster_angles[None, :]
        ).sum(axis=1)
        idx = int(costs.argmin())
        if costs[idx] < best_cost:
            best_cost = float(costs[idx])
            best = (sign, float(deltas[idx]))
    sign, delta = best
    aligned = np.mod(sign * est_angles + delta, math.pi)
    angle_errors = axial_distance(aligned, cluster_angles)

    best_shift = (np.inf, 1.0, 0.0)
    for shift_sign in (1.0, -1.0):
        offset = float(np.mean(shift_sign * est_shifts - cluster_shifts))
        errors = shift_sign * est_shifts - offset - cluster_shifts
        score = float(np.abs(errors).mean())
        if score < best_shift[0]:
            best_shift = (score, shift_sign, offset)
    _, shift_sign, shift_offset = best_shift
    shift_errors = shift_sign * est_shifts - shift_offset - cluster_shifts

    return PoseAlignment(
        delta=delta,
        reflected=sign < 0,
        angle_errors=angle_errors,
        aligned_angles=aligned,
        cluster_true_angles=cluster_angles,
        shift_errors=shift_errors,
        shift_sign=shift_sign,
        shift_offset=shift_offset,
    )


def outlier_metrics(discarded: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """(recall, precision) of the discard mask against true class-1 labels.

    An empty mask has precision 1 by convention; recall is 1 when there
    are no true class-1 projections.
    """
    discarded = np.asarray(discarded, dtype=bool)
    actual = np.asarray(labels) == CLASS1
    true_pos = int((discarded & actual).sum())
    recall = true_pos / actual.sum() if actual.any() else 1.0
    precision = true_pos / discarded.sum() if discarded.any() else 1.0
    return float(recall), float(precision)
