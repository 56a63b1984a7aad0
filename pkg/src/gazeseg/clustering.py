"""Saccade-outlier removal via density-based clustering of projected gaze
points, and selection of the on-object (largest) cluster."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

NOISE = -1


@dataclass(frozen=True)
class ClusterConfig:
    """epsilon in pixels; min_points counts the point itself."""

    epsilon: float = 1.4
    min_points: int = 2

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.min_points < 2:
            raise ValueError("min_points must be at least 2")

    @staticmethod
    def for_window(window_size: int, epsilon: float = 1.4) -> "ClusterConfig":
        """Default min_points tracks the temporal window size, floored at 2."""
        return ClusterConfig(epsilon=epsilon, min_points=max(2, window_size))


@dataclass
class PointCluster:
    member_points: np.ndarray       # Kx2 pixels
    member_indices: list[int]       # indices into the clustered point list
    centroid: np.ndarray            # (x, y)
    size: int
    depth_mm: Optional[float] = None


def dbscan(points: np.ndarray, config: ClusterConfig) -> np.ndarray:
    """Standard DBSCAN over 2D pixel points.

    Returns one integer label per point; NOISE (-1) marks points not
    density-reachable from any core point. Core points have at least
    ``min_points`` neighbors (self included) within ``epsilon``.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(points)
    if n == 0:
        raise ValueError("no points to cluster")
    tree = cKDTree(points)
    neighbors = tree.query_ball_point(points, r=config.epsilon)
    core = np.array([len(nb) >= config.min_points for nb in neighbors])

    labels = np.full(n, NOISE, dtype=np.int64)
    cluster_id = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster_id
        frontier = [j for j in neighbors[i] if j != i]
        while frontier:
            j = frontier.pop()
            if labels[j] != NOISE:
                continue
            labels[j] = cluster_id
            if core[j]:
                frontier.extend(k for k in neighbors[j] if labels[k] == NOISE)
        cluster_id += 1
    return labels


def select_object_cluster(
    labels: np.ndarray,
    points: np.ndarray,
    current_gaze: Optional[tuple[float, float]] = None,
    depths: Optional[Sequence[Optional[float]]] = None,
) -> Optional[PointCluster]:
    """Pick the cluster most likely on the object: the largest one.

    Size ties break by centroid distance to the current frame's raw gaze
    point (when given), then by lowest first-member index. Returns None when
    every point is noise, signaling no reliable fixation.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    labels = np.asarray(labels)
    candidates = []
    for cid in sorted(set(labels[labels != NOISE])):
        idx = np.nonzero(labels == cid)[0]
        centroid = points[idx].mean(axis=0)
        if current_gaze is not None:
            gaze_dist = float(np.hypot(centroid[0] - current_gaze[0],
                                       centroid[1] - current_gaze[1]))
        else:
            gaze_dist = 0.0
        candidates.append((-len(idx), gaze_dist, int(idx[0]), idx, centroid))
    if not candidates:
        return None
    _, _, _, idx, centroid = min(candidates)
    depth = None
    if depths is not None:
        known = [depths[i] for i in idx if depths[i] is not None]
        if known:
            depth = float(np.median(known))
    return PointCluster(
        member_points=points[idx],
        member_indices=[int(i) for i in idx],
        centroid=centroid,
        size=len(idx),
        depth_mm=depth,
    )
