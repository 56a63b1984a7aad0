"""Inter-frame homography estimation and chained gaze-point projection.

Past gaze points are carried onto the current frame by composing the pairwise
homographies of a sliding temporal window (matrix product of the 3x3
transforms), so a blurry or featureless frame only poisons its own pair.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter

from .errors import HomographyEstimationError
from .gaze import FrameGaze

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class Homography:
    """A normalized, invertible 3x3 projective transform."""

    matrix: np.ndarray

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Homography":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(m[2, 2]) > 1e-8:
            m = m / m[2, 2]
        else:
            m = m / np.linalg.norm(m)
        if abs(np.linalg.det(m)) <= 1e-12:
            raise ValueError("homography is singular")
        m = m.copy()
        m.flags.writeable = False
        return Homography(m)

    @staticmethod
    def identity() -> "Homography":
        return Homography.from_matrix(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography.from_matrix(np.linalg.inv(self.matrix))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map Nx2 pixel points through the transform (dehomogenized)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        homog = np.hstack([points, np.ones((len(points), 1))])
        mapped = homog @ self.matrix.T
        return mapped[:, :2] / mapped[:, 2:3]


@dataclass(frozen=True)
class Correspondence:
    source: tuple[float, float]
    target: tuple[float, float]
    score: float = 1.0


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 2000
    inlier_threshold_px: float = 3.0
    confidence: float = 0.995
    seed: int = 0


@dataclass
class ProjectedGazeSet:
    """Window gaze points expressed in the current frame's coordinates."""

    frame_index: int
    points: np.ndarray            # Nx2 pixels
    origin_frames: list[int]
    depths: list[Optional[float]]
    dropped: int = 0


def rgb_to_gray(image: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299/0.587/0.114); passthrough for 2D input."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    return image @ LUMA_WEIGHTS


def detect_corners(image: np.ndarray, max_corners: int = 200,
                   nms_radius: float = 8.0) -> np.ndarray:
    """Corner points ranked by the minimum eigenvalue of the 3x3 structure
    tensor, non-maximum suppressed. Returns an Mx2 array of (x, y)."""
    gray = rgb_to_gray(image)
    gy, gx = np.gradient(gray)
    ixx = uniform_filter(gx * gx, size=3)
    iyy = uniform_filter(gy * gy, size=3)
    ixy = uniform_filter(gx * gy, size=3)
    trace_half = (ixx + iyy) / 2.0
    score = trace_half - np.sqrt(((ixx - iyy) / 2.0) ** 2 + ixy * ixy)
    peak = score.max(initial=0.0)
    if peak <= 1e-12:
        return np.empty((0, 2))
    ys, xs = np.nonzero(score > 0.01 * peak)
    order = np.argsort(-score[ys, xs], kind="stable")
    ys, xs = ys[order], xs[order]
    kept: list[tuple[float, float]] = []
    r2 = nms_radius * nms_radius
    for x, y in zip(xs, ys):
        if all((x - kx) ** 2 + (y - ky) ** 2 > r2 for kx, ky in kept):
            kept.append((float(x), float(y)))
            if len(kept) >= max_corners:
                break
    return np.array(kept).reshape(-1, 2)


def match_correspondences(image_a: np.ndarray, image_b: np.ndarray,
                          corners_a: np.ndarray, patch_size: int = 11,
                          search_radius: int = 32,
                          min_ncc: float = 0.8) -> list[Correspondence]:
    """Best NCC match in B within a search window around each corner of A."""
    gray_a = rgb_to_gray(image_a)
    gray_b = rgb_to_gray(image_b)
    if gray_a.shape != gray_b.shape:
        raise ValueError("images must have the same dimensions")
    h, w = gray_a.shape
    half = patch_size // 2
    matches = []
    for cx, cy in np.atleast_2d(corners_a):
        x, y = int(round(cx)), int(round(cy))
        if not (half <= x < w - half and half <= y < h - half):
            continue
        patch = gray_a[y - half:y + half + 1, x - half:x + half + 1]
        pstd = patch.std()
        if pstd < 1e-12:
            continue
        y0 = max(half, y - search_radius)
        y1 = min(h - half - 1, y + search_radius)
        x0 = max(half, x - search_radius)
        x1 = min(w - half - 1, x + search_radius)
        region = gray_b[y0 - half:y1 + half + 1, x0 - half:x1 + half + 1]
        windows = sliding_window_view(region, (patch_size, patch_size))
        wmean = windows.mean(axis=(2, 3), keepdims=True)
        wcentered = windows - wmean
        wnorm = np.sqrt((wcentered ** 2).sum(axis=(2, 3)))
        pcentered = patch - patch.mean()
        pnorm = np.sqrt((pcentered ** 2).sum())
        with np.errstate(invalid="ignore", divide="ignore"):
            ncc = (wcentered * pcentered).sum(axis=(2, 3)) / (wnorm * pnorm)
        ncc = np.nan_to_num(ncc, nan=-1.0)
        by, bx = np.unravel_index(np.argmax(ncc), ncc.shape)
        best = float(ncc[by, bx])
        if best < min_ncc:
            continue
        matches.append(Correspondence((float(cx), float(cy)),
                                      (float(x0 + bx), float(y0 + by)), best))
    return matches


def _hartley_normalize(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = points.mean(axis=0)
    dist = np.sqrt(((points - centroid) ** 2).sum(axis=1)).mean()
    scale = np.sqrt(2.0) / dist if dist > 1e-12 else 1.0
    transform = np.array([
        [scale, 0.0, -scale * centroid[0]],
        [0.0, scale, -scale * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    normalized = (points - centroid) * scale
    return normalized, transform


def _dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized direct linear transform over >= 4 correspondences."""
    src_n, t_src = _hartley_normalize(src)
    dst_n, t_dst = _hartley_normalize(dst)
    n = len(src)
    a = np.zeros((2 * n, 9))
    x, y = src_n[:, 0], src_n[:, 1]
    u, v = dst_n[:, 0], dst_n[:, 1]
    a[0::2, 0] = -x
    a[0::2, 1] = -y
    a[0::2, 2] = -1.0
    a[0::2, 6] = u * x
    a[0::2, 7] = u * y
    a[0::2, 8] = u
    a[1::2, 3] = -x
    a[1::2, 4] = -y
    a[1::2, 5] = -1.0
    a[1::2, 6] = v * x
    a[1::2, 7] = v * y
    a[1::2, 8] = v
    _, _, vt = np.linalg.svd(a)
    h_n = vt[-1].reshape(3, 3)
    return np.linalg.inv(t_dst) @ h_n @ t_src


def _collinear_triple(p: np.ndarray, tol: float = 1e-9) -> bool:
    for i in range(4):
        idx = [j for j in range(4) if j != i]
        a, b, c = p[idx]
        area = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        span = max(np.abs(p).max(), 1.0)
        if area < tol * span * span:
            return True
    return False


def _reprojection_errors(h: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    homog = np.hstack([src, np.ones((len(src), 1))]) @ h.T
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = homog[:, :2] / homog[:, 2:3]
    err = np.sqrt(((proj - dst) ** 2).sum(axis=1))
    return np.where(np.isfinite(err), err, np.inf)


def estimate_homography(
    pairs: Sequence[Correspondence],
    config: RansacConfig = RansacConfig(),
) -> tuple[Homography, np.ndarray]:
    """RANSAC over 4-point samples with Hartley-normalized DLT, refit on the
    inlier consensus. Returns the homography and a boolean inlier mask."""
    if len(pairs) < 4:
        raise HomographyEstimationError(
            f"need at least 4 correspondences, got {len(pairs)}")
    src = np.array([p.source for p in pairs], dtype=np.float64)
    dst = np.array([p.target for p in pairs], dtype=np.float64)
    n = len(pairs)
    rng = np.random.default_rng(config.seed)

    best_inliers: np.ndarray | None = None
    best_count = 0
    iterations = config.max_iterations
    i = 0
    while i < iterations:
        i += 1
        idx = rng.choice(n, 4, replace=False)
        if _collinear_triple(src[idx]) or _collinear_triple(dst[idx]):
            continue
        try:
            h = _dlt(src[idx], dst[idx])
        except np.linalg.LinAlgError:
            continue
        if abs(np.linalg.det(h)) < 1e-12:
            continue
        errors = _reprojection_errors(h, src, dst)
        inliers = errors < config.inlier_threshold_px
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
            ratio = count / n
            if ratio > 0:
                denom = np.log(max(1e-12, 1.0 - ratio ** 4))
                if denom < 0:
                    needed = int(np.ceil(np.log(1.0 - config.confidence) / denom))
                    iterations = min(iterations, max(i, needed))
    if best_inliers is None or best_count < 4:
        raise HomographyEstimationError(
            f"no model with >= 4 inliers after {config.max_iterations} iterations")
    refined = _dlt(src[best_inliers], dst[best_inliers])
    errors = _reprojection_errors(refined, src, dst)
    mask = errors < config.inlier_threshold_px
    return Homography.from_matrix(refined), mask


def compose_chain(homographies: Sequence[Homography]) -> Homography:
    """Matrix product in listed order; an empty chain is the identity."""
    m = np.eye(3)
    for h in homographies:
        m = m @ h.matrix
    return Homography.from_matrix(m)


def project_points_to_current(
    frame_gazes: Sequence[FrameGaze],
    pairwise: Sequence[Homography],
    frame_dims: tuple[int, int],
) -> ProjectedGazeSet:
    """Project a window of past gaze points onto the newest frame.

    ``frame_gazes`` is ordered oldest to newest; ``pairwise[i]`` maps frame i
    of the window onto frame i+1 and must have length len(frame_gazes) - 1.
    Points landing outside the frame (or with a vanishing homogeneous w) are
    dropped and counted.
    """
    if len(pairwise) != len(frame_gazes) - 1:
        raise ValueError("need one pairwise homography per consecutive frame pair")
    w, h = frame_dims
    current = frame_gazes[-1]
    points: list[tuple[float, float]] = []
    origins: list[int] = []
    depths: list[Optional[float]] = []
    dropped = 0
    # chains[k] maps window frame k onto the current frame
    chain = np.eye(3)
    chains = [np.eye(3)]
    for hom in reversed(pairwise):
        chain = chain @ hom.matrix
        chains.append(chain)
    chains.reverse()
    for k, fg in enumerate(frame_gazes[:-1]):
        if not fg.valid:
            continue
        vec = chains[k] @ np.array([fg.x, fg.y, 1.0])
        if abs(vec[2]) < 1e-9:
            dropped += 1
            continue
        px, py = vec[0] / vec[2], vec[1] / vec[2]
        if not (0.0 <= px < w and 0.0 <= py < h):
            dropped += 1
            continue
        points.append((px, py))
        origins.append(fg.frame_index)
        depths.append(fg.depth_mm)
    if current.valid:
        if 0.0 <= current.x < w and 0.0 <= current.y < h:
            points.append((current.x, current.y))
            origins.append(current.frame_index)
            depths.append(current.depth_mm)
        else:
            dropped += 1
    return ProjectedGazeSet(
        frame_index=current.frame_index,
        points=np.array(points).reshape(-1, 2),
        origin_frames=origins,
        depths=depths,
        dropped=dropped,
    )


@dataclass
class PairwiseHomographyCache:
    """Thread-safe insert-or-get cache keyed by consecutive frame pair."""

    _store: dict[tuple[int, int], Homography] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def get_or_compute(self, key: tuple[int, int], compute) -> Homography:
        with self._lock:
            if key in self._store:
                return self._store[key]
        value = compute()
        with self._lock:
            return self._store.setdefault(key, value)


def load_homography_file(path) -> list[Homography]:
    """Read one row-major 3x3 homography per line (9 whitespace-separated
    reals), one line per consecutive frame pair."""
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            vals = [float(tok) for tok in line.split()]
            if len(vals) != 9:
                raise ValueError(f"{path}:{lineno}: expected 9 values, got {len(vals)}")
            out.append(Homography.from_matrix(np.array(vals).reshape(3, 3)))
    return out


def save_homography_file(path, homographies: Sequence[Homography]) -> None:
    with open(path, "w") as f:
        for hom in homographies:
            f.write(" ".join(repr(v) for v in hom.matrix.ravel()) + "\n")
