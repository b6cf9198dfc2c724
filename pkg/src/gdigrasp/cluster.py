"""Lloyd k-means over pose centers, and the corner-point family of each cluster."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import LinePose, corners


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Clustering:
    k: int
    centroids: np.ndarray  # (k, 2)
    assignment: np.ndarray  # (n,) cluster index per input point, input order
    inertia: float
    iterations: int
    inertia_history: tuple[float, ...] = ()

    def members(self, cluster_index: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster_index)


@dataclass(frozen=True, eq=False)
class PointFamily:
    cluster_index: int
    points: np.ndarray  # (2S, 2) corner points, two per member pose
    source_poses: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.source_poses)


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    dx = points[:, 0, None] - centroids[None, :, 0]
    dy = points[:, 1, None] - centroids[None, :, 1]
    return dx * dx + dy * dy


def _means(points, labels, k, fallback):
    counts = np.bincount(labels, minlength=k)
    sx = np.bincount(labels, weights=points[:, 0], minlength=k)
    sy = np.bincount(labels, weights=points[:, 1], minlength=k)
    out = fallback.copy()
    nz = counts > 0
    out[nz, 0] = sx[nz] / counts[nz]
    out[nz, 1] = sy[nz] / counts[nz]
    return out


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: each new seed is the best of a few D^2-weighted draws."""
    n = len(points)
    trials = 2 + int(np.log(k))
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a seed
            idx = int(np.setdiff1d(np.arange(n), chosen)[0])
        else:
            draws = np.searchsorted(np.cumsum(closest), rng.random(trials) * total, side="right")
            draws = np.minimum(draws, n - 1)
            cand = np.minimum(closest[None, :], _sq_dists(points, points[draws]).T)
            best = int(np.argmin(cand.sum(axis=1)))
            idx = int(draws[best])
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(points, points[[idx]])[:, 0])
    return points[chosen].copy()


def _assign(points, centroids):
    d = _sq_dists(points, centroids)
    labels = np.argmin(d, axis=1)  # first minimum: lowest cluster index wins ties
    return labels, d[np.arange(len(points)), labels]


def _lloyd(points, centroids, max_iter, tol, history):
    k = len(centroids)
    labels, dist = _assign(points, centroids)
    history.append(float(dist.sum()))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new = _means(points, labels, k, centroids)
        shift = float(np.max(np.sum((new - centroids) ** 2, axis=1)))
        centroids = new
        labels, dist = _assign(points, centroids)
        # empty clusters respawn on the point worst served by its centroid
        for j in np.flatnonzero(np.bincount(labels, minlength=k) == 0):
            centroids[j] = points[int(np.argmax(dist))]
            labels, dist = _assign(points, centroids)
        history.append(float(dist.sum()))
        if shift < tol:
            break
    return centroids, labels, iterations


def _transfer_polish(points, labels, k, history, max_moves=10000):
    """Single-point transfers (Hartigan) that strictly lower the inertia.

    A Lloyd fixed point can still improve by moving one point, because moving
    it also shifts both means. Each accepted move is the best available one.
    """
    labels = labels.copy()
    n = len(points)
    rows = np.arange(n)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, 2))
    np.add.at(sums, labels, points)
    for moves in range(max_moves + 1):
        means = sums / np.maximum(counts, 1)[:, None]
        d = _sq_dists(points, means)
        own_n = counts[labels]
        own_d = d[rows, labels]
        # exact inertia of the current partition about its own means
        history.append(float(own_d.sum()))
        with np.errstate(divide="ignore", invalid="ignore"):
            saved = np.where(own_n > 1, own_n / (own_n - 1) * own_d, -np.inf)
        added = counts[None, :] / (counts[None, :] + 1) * d
        added[rows, labels] = np.inf
        target = np.argmin(added, axis=1)
        delta = added[rows, target] - saved
        i = int(np.argmin(delta))
        if moves == max_moves or not delta[i] < -1e-12 * max(1.0, history[-1]):
            break
        a, b = labels[i], target[i]
        counts[a] -= 1
        counts[b] += 1
        sums[a] -= points[i]
        sums[b] += points[i]
        labels[i] = b
    return means, labels, history[-1]


def kmeans(
    centers,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-4,
    n_init: int = 10,
) -> Clustering:
    """Lloyd k-means from greedy k-means++ seeds, polished by point transfers.

    Points are sorted lexicographically before seeding, so the result does
    not depend on input order. ``n_init`` independent seedings are run and
    the lowest-inertia one is kept (first wins ties). ``k`` is clamped to the
    number of points. Lloyd stops once the largest squared centroid move is
    below ``tol`` (px^2) or after ``max_iter`` updates.

    ``inertia_history`` of the kept run has one entry per Lloyd assignment,
    one for the final mean update and one per accepted transfer; it never
    increases.
    """
    pts = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise ClusteringError("cannot cluster an empty point set")
    if k < 1:
        raise ClusteringError("k must be at least 1")
    k = min(int(k), n)

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    sorted_pts = pts[order]
    rng = np.random.default_rng(seed)

    best = None
    for _ in range(max(1, n_init)):
        history: list[float] = []
        centroids, labels, iterations = _lloyd(
            sorted_pts, _kmeanspp(sorted_pts, k, rng), max_iter, tol, history
        )
        centroids, labels, inertia = _transfer_polish(sorted_pts, labels, k, history)
        if best is None or inertia < best[2]:
            best = (centroids, labels, inertia, iterations, history)
    centroids, labels_sorted, inertia, iterations, history = best

    labels = np.empty(n, dtype=np.int64)
    labels[order] = labels_sorted
    return Clustering(
        k=k,
        centroids=centroids,
        assignment=labels,
        inertia=inertia,
        iterations=iterations,
        inertia_history=tuple(history),
    )


def assign_families(clustering: Clustering, poses: Sequence[LinePose]) -> list[PointFamily]:
    if len(clustering.assignment) != len(poses):
        raise ClusteringError("assignment does not cover every pose")
    families = []
    for j in range(clustering.k):
        members = clustering.members(j)
        if members.size == 0:
            continue
        pts = []
        for i in members:
            a, b = corners(poses[i])
            pts.extend((a, b))
        families.append(
            PointFamily(
                cluster_index=j,
                points=np.asarray(pts, dtype=np.float64),
                source_poses=tuple(int(i) for i in members),
            )
        )
    return families
