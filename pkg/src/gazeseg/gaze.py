"""Gaze log parsing and interpolation to video frame timestamps.

Logs store normalized [0,1]^2 gaze positions; conversion to pixels happens
here, once, when samples are interpolated onto frame times.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import EmptyLogError, GazeLogParseError, InsufficientDataError

DEFAULT_GAP_THRESHOLD_US = 100_000


@dataclass(frozen=True)
class GazeSample:
    """One eye-tracker reading: microsecond timestamp, normalized position."""

    timestamp_us: int
    x: float
    y: float
    depth_mm: Optional[float] = None
    valid: bool = True


@dataclass(frozen=True)
class FrameGaze:
    """Gaze position interpolated onto one video frame, in pixels."""

    frame_index: int
    x: float
    y: float
    depth_mm: Optional[float] = None
    interpolated: bool = True
    valid: bool = True


def _parse_gitw_record(rec: dict) -> GazeSample:
    ts = rec.get("Timestamp", rec.get("timestamp"))
    if ts is None:
        raise ValueError("missing timestamp")
    pos = rec.get("GazePoint2D", rec.get("gaze2d"))
    point3d = rec.get("GazePoint3D", rec.get("gaze3d"))
    valid = bool(rec.get("Validity", rec.get("valid", pos is not None)))
    if pos is None:
        return GazeSample(int(ts), float("nan"), float("nan"), None, False)
    x, y = float(pos[0]), float(pos[1])
    depth = float(point3d[2]) if point3d is not None else None
    return GazeSample(int(ts), x, y, depth, valid)


def _parse_simple_record(rec: dict) -> GazeSample:
    if "t" not in rec:
        raise ValueError("missing timestamp field 't'")
    valid = bool(rec.get("valid", "x" in rec and "y" in rec))
    x = float(rec["x"]) if "x" in rec else float("nan")
    y = float(rec["y"]) if "y" in rec else float("nan")
    depth = float(rec["z"]) if "z" in rec else None
    return GazeSample(int(rec["t"]), x, y, depth, valid)


SCHEMAS: dict[str, Callable[[dict], GazeSample]] = {
    "gitw": _parse_gitw_record,
    "simple": _parse_simple_record,
}


def parse_gaze_log(raw: bytes | str, schema: str = "gitw") -> list[GazeSample]:
    """Parse a UTF-8 JSON array or JSON-lines gaze log.

    Invalid records (unparseable position, validity flag unset) are kept with
    ``valid=False``; structurally malformed records raise GazeLogParseError
    with the line or array index.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        parse_record = SCHEMAS[schema]
    except KeyError:
        raise GazeLogParseError(f"unknown gaze log schema {schema!r}") from None

    stripped = raw.lstrip()
    records: list[tuple[int, dict]] = []
    if not stripped:
        raise EmptyLogError("gaze log is empty")
    if stripped.startswith("["):
        try:
            array = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise GazeLogParseError(str(exc), line=exc.lineno) from exc
        records = [(i + 1, rec) for i, rec in enumerate(array)]
    else:
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise GazeLogParseError(str(exc), line=lineno) from exc
    if not records:
        raise EmptyLogError("gaze log contains no records")

    samples = []
    for lineno, rec in records:
        if not isinstance(rec, dict):
            raise GazeLogParseError("record is not an object", line=lineno)
        try:
            sample = parse_record(rec)
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            raise GazeLogParseError(str(exc), line=lineno) from exc
        if sample.valid and not (np.isfinite(sample.x) and np.isfinite(sample.y)):
            sample = GazeSample(sample.timestamp_us, sample.x, sample.y,
                                sample.depth_mm, False)
        samples.append(sample)
    samples.sort(key=lambda s: s.timestamp_us)
    if not any(s.valid for s in samples):
        raise EmptyLogError("gaze log contains no valid samples")
    return samples


def interpolate_to_frames(
    samples: Sequence[GazeSample],
    frame_times_us: Iterable[int],
    frame_dims: tuple[int, int],
    gap_threshold_us: int = DEFAULT_GAP_THRESHOLD_US,
) -> list[FrameGaze]:
    """Interpolate gaze onto frame timestamps with a natural cubic spline.

    Only frames inside the valid-sample time span produce output. Frames
    falling in a validity gap longer than ``gap_threshold_us`` are emitted
    with ``valid=False`` rather than extrapolated through a blink.
    """
    w, h = frame_dims
    valid = [s for s in samples if s.valid]
    if len(valid) < 2:
        raise InsufficientDataError(
            f"need at least 2 valid samples, got {len(valid)}")
    t = np.array([s.timestamp_us for s in valid], dtype=np.float64)
    if np.any(np.diff(t) <= 0):
        raise InsufficientDataError("valid sample timestamps are not strictly increasing")
    x = np.array([s.x for s in valid])
    y = np.array([s.y for s in valid])
    spline_x = CubicSpline(t, x, bc_type="natural")
    spline_y = CubicSpline(t, y, bc_type="natural")

    depth_t = np.array([s.timestamp_us for s in valid if s.depth_mm is not None],
                       dtype=np.float64)
    depth_v = np.array([s.depth_mm for s in valid if s.depth_mm is not None],
                       dtype=np.float64)

    timestamps = set(int(s.timestamp_us) for s in valid)
    gaps = [(t[i], t[i + 1]) for i in np.nonzero(np.diff(t) > gap_threshold_us)[0]]

    out = []
    for idx, ft in enumerate(frame_times_us):
        if ft < t[0] or ft > t[-1]:
            continue
        in_gap = any(lo < ft < hi for lo, hi in gaps)
        if in_gap:
            out.append(FrameGaze(idx, float("nan"), float("nan"), None,
                                 interpolated=True, valid=False))
            continue
        px = float(spline_x(ft)) * w
        py = float(spline_y(ft)) * h
        depth = None
        if depth_t.size >= 1 and depth_t[0] <= ft <= depth_t[-1]:
            depth = float(np.interp(ft, depth_t, depth_v))
        out.append(FrameGaze(idx, px, py, depth,
                             interpolated=int(ft) not in timestamps, valid=True))
    return out


def load_frame_times(path=None, fps: float | None = None, count: int | None = None,
                     start_us: int = 0) -> list[int]:
    """Frame timestamps from a one-integer-per-line file or a constant fps."""
    if path is not None:
        with open(path) as f:
            return [int(line) for line in f if line.strip()]
    if fps is None or count is None:
        raise ValueError("need either a timestamp file or fps + frame count")
    step = 1_000_000.0 / fps
    return [int(round(start_us + i * step)) for i in range(count)]
