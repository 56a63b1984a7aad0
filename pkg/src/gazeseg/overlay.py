"""Deterministic diagnostic overlays: gaze points, cluster hull, mask
contour, and bounding box drawn directly onto the frame raster."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

COLOR_RECENT = (255, 40, 40)      # most recent gaze point
COLOR_PAST = (255, 220, 60)
COLOR_HULL = (60, 200, 255)
COLOR_CONTOUR = (80, 255, 120)
COLOR_BBOX = (255, 120, 255)


def _draw_disc(img: np.ndarray, x: float, y: float, radius: int, color) -> bool:
    h, w = img.shape[:2]
    cx, cy = int(round(x)), int(round(y))
    if not (0 <= cx < w and 0 <= cy < h):
        return False
    y0, y1 = max(0, cy - radius), min(h, cy + radius + 1)
    x0, x1 = max(0, cx - radius), min(w, cx + radius + 1)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= radius * radius
    img[y0:y1, x0:x1][mask] = color
    return True


def _draw_line(img: np.ndarray, p0, p1, color) -> None:
    h, w = img.shape[:2]
    x0, y0 = p0
    x1, y1 = p1
    steps = int(max(abs(x1 - x0), abs(y1 - y0), 1)) * 2
    for t in np.linspace(0.0, 1.0, steps + 1):
        x = int(round(x0 + t * (x1 - x0)))
        y = int(round(y0 + t * (y1 - y0)))
        if 0 <= x < w and 0 <= y < h:
            img[y, x] = color


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices in order."""
    pts = sorted(map(tuple, points))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _mask_contour(bits: np.ndarray) -> np.ndarray:
    """Boundary pixels: foreground with at least one 4-neighbor background."""
    fg = bits.astype(bool)
    padded = np.pad(fg, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return fg & ~interior


def render_overlay(
    frame: np.ndarray,
    points: Optional[np.ndarray] = None,
    recent_point: Optional[tuple[float, float]] = None,
    cluster_points: Optional[np.ndarray] = None,
    mask_bits: Optional[np.ndarray] = None,
    bbox=None,
) -> tuple[np.ndarray, int]:
    """Annotated copy of the frame; returns (image, skipped_point_count).

    All layers are optional. The most recent gaze point is drawn in a
    distinct color on top of the others.
    """
    img = np.array(frame, dtype=np.uint8, copy=True)
    skipped = 0
    if mask_bits is not None:
        contour = _mask_contour(np.asarray(mask_bits))
        img[contour] = COLOR_CONTOUR
    if cluster_points is not None and len(cluster_points) >= 3:
        hull = _convex_hull(np.asarray(cluster_points))
        for i in range(len(hull)):
            _draw_line(img, hull[i], hull[(i + 1) % len(hull)], COLOR_HULL)
    if bbox is not None:
        corners = [(bbox.x_min, bbox.y_min), (bbox.x_max, bbox.y_min),
                   (bbox.x_max, bbox.y_max), (bbox.x_min, bbox.y_max)]
        for i in range(4):
            _draw_line(img, corners[i], corners[(i + 1) % 4], COLOR_BBOX)
    if points is not None:
        for x, y in np.atleast_2d(points):
            if not _draw_disc(img, x, y, 2, COLOR_PAST):
                skipped += 1
    if recent_point is not None:
        if not _draw_disc(img, recent_point[0], recent_point[1], 3, COLOR_RECENT):
            skipped += 1
    return img, skipped
