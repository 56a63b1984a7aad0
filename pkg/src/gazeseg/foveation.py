"""Foveation footprint, bounding-box approximation from an object shape
prior, and distance-weighted support-point sampling.

The fovea covers roughly 2 visual degrees; at gaze depth z its spatial
extent is z*tan(alpha) millimeters, converted to pixels through the camera
field of view.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError

DEFAULT_ALPHA_DEG = 2.0
DEFAULT_DEPTH_MM = 600.0
DEFAULT_SHAPE_K = 1.5


@dataclass(frozen=True)
class CameraModel:
    width: int
    height: int
    fov_angle_x_deg: float
    fov_angle_y_deg: float
    default_depth_mm: float = DEFAULT_DEPTH_MM

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("camera dimensions must be positive")
        if not (0 < self.fov_angle_x_deg < 180 and 0 < self.fov_angle_y_deg < 180):
            raise ConfigError("camera FOV angles must be in (0, 180) degrees")

    @staticmethod
    def load(path) -> "CameraModel":
        """Key-value text file: W, H, fov_angle_x, fov_angle_y, default_depth_mm."""
        fields: dict[str, float] = {}
        with open(path) as f:
            for line in f:
                line = line.split("#")[0].strip()
                if not line:
                    continue
                key, _, value = line.partition(" ")
                fields[key.strip()] = float(value)
        try:
            return CameraModel(
                width=int(fields["W"]),
                height=int(fields["H"]),
                fov_angle_x_deg=fields["fov_angle_x"],
                fov_angle_y_deg=fields["fov_angle_y"],
                default_depth_mm=fields.get("default_depth_mm", DEFAULT_DEPTH_MM),
            )
        except KeyError as exc:
            raise ConfigError(f"camera config {path} missing field {exc.args[0]}") from None


@dataclass(frozen=True)
class FoveationFootprint:
    sigma_mm: float
    sigma_px_x: float
    sigma_px_y: float
    depth_used_mm: float
    alpha_deg: float = DEFAULT_ALPHA_DEG


@dataclass(frozen=True)
class ObjectShapePrior:
    class_name: str
    k_x: float = DEFAULT_SHAPE_K
    k_y: float = DEFAULT_SHAPE_K

    def __post_init__(self):
        if self.k_x <= 0 or self.k_y <= 0:
            raise ConfigError("shape prior factors must be positive")


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    clamped: bool = False

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class WeightedPoint:
    x: float
    y: float
    weight: float


def load_shape_priors(path) -> dict[str, ObjectShapePrior]:
    """One line per class: class_name K_x K_y."""
    priors = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            parts = line.rsplit(None, 2)
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 'class K_x K_y'")
            name, kx, ky = parts
            priors[name] = ObjectShapePrior(name, float(kx), float(ky))
    return priors


def compute_footprint(depth_mm: Optional[float], camera: CameraModel,
                      alpha_deg: float = DEFAULT_ALPHA_DEG) -> FoveationFootprint:
    """Foveation extent: sigma_mm = z*tan(alpha); per axis the camera FOV at
    depth z is 2z*tan(fov/2) mm, and sigma_px = sigma_mm * dim / fov_mm."""
    z = camera.default_depth_mm if depth_mm is None else depth_mm
    if z <= 0:
        raise ValueError(f"gaze depth must be positive, got {z}")
    sigma_mm = z * math.tan(math.radians(alpha_deg))
    fov_mm_x = 2.0 * z * math.tan(math.radians(camera.fov_angle_x_deg) / 2.0)
    fov_mm_y = 2.0 * z * math.tan(math.radians(camera.fov_angle_y_deg) / 2.0)
    return FoveationFootprint(
        sigma_mm=sigma_mm,
        sigma_px_x=sigma_mm * camera.width / fov_mm_x,
        sigma_px_y=sigma_mm * camera.height / fov_mm_y,
        depth_used_mm=z,
        alpha_deg=alpha_deg,
    )


def approximate_bbox(centroid: tuple[float, float], footprint: FoveationFootprint,
                     prior: ObjectShapePrior, camera: CameraModel) -> BoundingBox:
    """Rectangle centroid +/- K * sigma_px per axis, clamped to the frame."""
    xc, yc = centroid
    x_min = xc - prior.k_x * footprint.sigma_px_x
    x_max = xc + prior.k_x * footprint.sigma_px_x
    y_min = yc - prior.k_y * footprint.sigma_px_y
    y_max = yc + prior.k_y * footprint.sigma_px_y
    clamped = (x_min < 0 or y_min < 0 or x_max > camera.width
               or y_max > camera.height)
    return BoundingBox(
        x_min=max(0.0, x_min),
        y_min=max(0.0, y_min),
        x_max=min(float(camera.width), x_max),
        y_max=min(float(camera.height), y_max),
        clamped=clamped,
    )


def support_point_weight(distance: float, y0: float, lambda_decay: float) -> float:
    """Exponential decay from the cluster centroid: y0 * exp(-lambda * d)."""
    return y0 * math.exp(-lambda_decay * distance)


def sample_support_points(
    bbox: BoundingBox,
    centroid: tuple[float, float],
    count: int,
    y0: float = 1.0,
    lambda_decay: float | None = None,
    rng: np.random.Generator | None = None,
    sigma_px_x: float | None = None,
) -> list[WeightedPoint]:
    """Draw ``count`` uniform points over the bbox, weighted by distance decay.

    ``lambda_decay`` defaults to 1/sigma_px_x when a footprint scale is given.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if bbox.width <= 0 or bbox.height <= 0:
        raise ValueError("bounding box is empty")
    if lambda_decay is None:
        if sigma_px_x is None or sigma_px_x <= 0:
            raise ValueError("need lambda_decay or a positive sigma_px_x")
        lambda_decay = 1.0 / sigma_px_x
    if rng is None:
        rng = np.random.default_rng(0)
    xs = rng.uniform(bbox.x_min, bbox.x_max, size=count)
    ys = rng.uniform(bbox.y_min, bbox.y_max, size=count)
    out = []
    for x, y in zip(xs, ys):
        d = math.hypot(x - centroid[0], y - centroid[1])
        out.append(WeightedPoint(float(x), float(y),
                                 support_point_weight(d, y0, lambda_decay)))
    return out
