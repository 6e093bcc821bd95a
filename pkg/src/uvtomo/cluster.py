"""Robust lq clustering of projection vectors and outlier rejection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class EmptyClusterError(RuntimeError):
    """Raised when every member of a cluster has been discarded."""


@dataclass
class Clustering:
    assignments: np.ndarray  # (Q,) cluster index per projection
    centroids: np.ndarray  # (Kc, L) lq centroids
    q: float
    num_clusters: int


def _lq_power_distances(data: np.ndarray, centroids: np.ndarray, q: float) -> np.ndarray:
    """sum_d |x_d - c_d|^q for every (projection, centroid) pair."""
    if q == 1.0:
        return cdist(data, centroids, "cityblock")
    out = np.empty((data.shape[0], centroids.shape[0]))
    chunk = max(1, int(2**24 / max(1, centroids.size)))
    for start in range(0, data.shape[0], chunk):
        diff = np.abs(data[start : start + chunk, None, :] - centroids[None, :, :])
        out[start : start + chunk] = (diff**q).sum(axis=2)
    return out


def _knn_distance(data: np.ndarray, k: int) -> np.ndarray:
    """l2 distance from each row to its k-th nearest other row (chunked)."""
    n = data.shape[0]
    k = min(k, n - 1)
    sq = (data**2).sum(axis=1)
    out = np.empty(n)
    chunk = max(1, int(2**26 / max(1, n)))
    for start in range(0, n, chunk):
        block = data[start : start + chunk]
        d2 = sq[start : start + chunk, None] + sq[None, :] - 2.0 * (block @ data.T)
        np.maximum(d2, 0.0, out=d2)
        # index k of the partition skips the zero self-distance
        out[start : start + chunk] = np.sqrt(np.partition(d2, k, axis=1)[:, k])
    return out


def _seed_candidates(data: np.ndarray, num_clusters: int) -> np.ndarray:
    """Rows eligible to become centroid seeds: those with nearby neighbors.

    A row whose 5th-nearest neighbor is more than 2x the median such
    distance is isolated (a vector unlike everything else in the set);
    planting a centroid there creates a junk cluster that survives every
    later update. Isolated rows can still be assigned and still be
    flagged by outlier detection, they just never seed a centroid. If the
    filter leaves fewer rows than clusters, the least isolated
    num_clusters rows become the candidates instead.
    """
    n = data.shape[0]
    if n <= 2:
        return np.ones(n, dtype=bool)
    dk = _knn_distance(data, 5)
    mask = dk <= 2.0 * np.median(dk)
    if mask.sum() < num_clusters:
        mask = np.zeros(n, dtype=bool)
        mask[np.argsort(dk, kind="stable")[:num_clusters]] = True
    return mask


def _farthest_point_init(data: np.ndarray, num_clusters: int, candidates: np.ndarray) -> np.ndarray:
    """Greedy farthest-point traversal (l2) over the candidate rows.

    Starts at the candidate farthest from the data mean. Deterministic
    and order-invariant up to exact distance ties, which is what makes
    clustering equivariant under permutations of the input.
    """
    cand = np.flatnonzero(candidates)
    sub = data[cand]
    first = int(np.argmax(((sub - data.mean(axis=0)) ** 2).sum(axis=1)))
    chosen = [first]
    nearest = ((sub - sub[first]) ** 2).sum(axis=1)
    for _ in range(num_clusters - 1):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, ((sub - sub[nxt]) ** 2).sum(axis=1))
    return sub[chosen].copy()


def _centroid_1d_irls(members: np.ndarray, q: float, iterations: int = 10) -> np.ndarray:
    """Element-wise minimizer of sum_i |x_id - c_d|^q via reweighted averaging."""
    center = np.median(members, axis=0)
    eps = 1e-8
    for _ in range(iterations):
        w = np.maximum(np.abs(members - center), eps) ** (q - 2.0)
        center = (w * members).sum(axis=0) / w.sum(axis=0)
    return center


def lq_kmeans(
    projections: np.ndarray,
    num_clusters: int,
    q: float = 1.0,
    seed: int = 0,
    max_iters: int = 100,
) -> Clustering:
    """Cluster projection vectors by minimizing sum_i ||z_i - xi_a(i)||_q.

    Assignment minimizes the lq quasi-norm to the nearest centroid; the
    centroid update is the element-wise median for q = 1 and an
    element-wise IRLS minimizer for q < 1 (kept only if it does not
    increase the cluster cost, so the objective never increases). Seeding
    and empty-cluster reseeding only consider non-isolated rows (see
    _seed_candidates); empty clusters are reseeded to the eligible
    projection farthest from its assigned centroid. `seed` is part of
    the interface for reproducibility bookkeeping; the initialization is
    deterministic.
    """
    data = np.asarray(projections, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("projections must be a non-empty (Q, L) array")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must be in (0, 1]")
    if not 1 <= num_clusters <= data.shape[0]:
        raise ValueError("need 1 <= num_clusters <= number of projections")

    candidates = _seed_candidates(data, num_clusters)
    cand_idx = np.flatnonzero(candidates)
    centroids = _farthest_point_init(data, num_clusters, candidates)
    assignments = np.full(data.shape[0], -1, dtype=np.int64)
    objective = np.inf

    for _ in range(max_iters):
        power = _lq_power_distances(data, centroids, q)
        new_assign = power.argmin(axis=1)
        member_power = power[np.arange(data.shape[0]), new_assign]

        present = np.bincount(new_assign, minlength=num_clusters) > 0
        for j in np.flatnonzero(~present):
            far = int(cand_idx[np.argmax(member_power[cand_idx])])
            centroids[j] = data[far]
            new_assign[far] = j
            member_power[far] = 0.0

        after_assign = float((member_power ** (1.0 / q)).sum())
        assert after_assign <= objective * (1.0 + 1e-12) + 1e-12, "objective increased on assignment"

        for j in range(num_clusters):
            members = data[new_assign == j]
            if q == 1.0:
                centroids[j] = np.median(members, axis=0)
            else:
                candidate = _centroid_1d_irls(members, q)
                old_cost = ((np.abs(members - centroids[j]) ** q).sum(axis=1) ** (1.0 / q)).sum()
                new_cost = ((np.abs(members - candidate) ** q).sum(axis=1) ** (1.0 / q)).sum()
                if new_cost <= old_cost:
                    centroids[j] = candidate

        diff = np.abs(data - centroids[new_assign])
        objective_new = float(((diff**q).sum(axis=1) ** (1.0 / q)).sum())
        assert objective_new <= after_assign * (1.0 + 1e-12) + 1e-12, "objective increased on update"
        objective = objective_new

        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign

    return Clustering(assignments=assignments, centroids=centroids, q=q, num_clusters=num_clusters)


def detect_class1_outliers(clustering: Clustering, projections: np.ndarray, f: float) -> np.ndarray:
    """Mark the floor(f * Q) projections with largest l2 distance to their nearest centroid.

    Ties break toward the lower projection index. f = 0 returns an empty mask.
    """
    if not 0.0 <= f < 1.0:
        raise ValueError("f must be in [0, 1)")
    data = np.asarray(projections, dtype=np.float64)
    count = int(f * data.shape[0] + 1e-9)
    mask = np.zeros(data.shape[0], dtype=bool)
    if count == 0:
        return mask
    dist = cdist(data, clustering.centroids, "euclidean").min(axis=1)
    order = np.argsort(-dist, kind="stable")
    mask[order[:count]] = True
    return mask


def drop_discarded_clusters(
    clustering: Clustering, discarded: np.ndarray
) -> tuple[Clustering, np.ndarray]:
    """Remove clusters whose every member is discarded; remap the rest.

    A cluster the outlier filter emptied entirely held nothing but
    rejected projections, so it represents no view of the object and
    would make robust averaging fail. Returns the reduced clustering
    (assignments renumbered to the retained clusters, -1 for members of
    dropped ones) and the retained original cluster indices.
    """
    discarded = np.asarray(discarded, dtype=bool)
    keep = np.array(
        [
            ((clustering.assignments == j) & ~discarded).any()
            for j in range(clustering.num_clusters)
        ]
    )
    kept = np.flatnonzero(keep)
    remap = np.full(clustering.num_clusters, -1, dtype=np.int64)
    remap[kept] = np.arange(kept.size)
    new_assign = remap[clustering.assignments]
    reduced = Clustering(
        assignments=new_assign,
        centroids=clustering.centroids[kept].copy(),
        q=clustering.q,
        num_clusters=int(kept.size),
    )
    return reduced, kept


def robust_average(projections: np.ndarray, clustering: Clustering, discarded: np.ndarray) -> np.ndarray:
    """Mean of the retained members of each cluster, one row per cluster."""
    data = np.asarray(projections, dtype=np.float64)
    discarded = np.asarray(discarded, dtype=bool)
    centers = np.empty((clustering.num_clusters, data.shape[1]))
    for j in range(clustering.num_clusters):
        keep = (clustering.assignments == j) & ~discarded
        if not keep.any():
            raise EmptyClusterError(
                f"cluster {j} has no retained members; lower f or the number of clusters"
            )
        centers[j] = data[keep].mean(axis=0)
    return centers
