"""Prompt assembly and the segmenter wire protocol client.

A prompt is a small set of foreground pixel points plus, optionally, a
256x256 low-resolution fuzzy mask. Segmenters are either in-process mocks
(oracle / disk / flood) or an external adapter process speaking
newline-delimited JSON on stdio, with masks exchanged as file paths.
"""
from __future__ import annotations

import json
import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from . import pnm
from .clustering import PointCluster
from .errors import (ConfigError, SegmentationError, SegmenterProtocolError,
                     SegmenterTimeoutError)
from .fuzzymask import BinaryMask, FuzzyMask, downscale_for_prompt

DEFAULT_MAX_POINTS = 5
PROTOCOL_VERSION = 1

MODE_POINTS = "points"
MODE_POINTS_MASK = "points+mask"


@dataclass
class PromptSet:
    frame_ref: str
    foreground_points: np.ndarray           # Nx2 pixels, all label 1
    low_res_mask: Optional[np.ndarray] = None   # 256x256, [0,1]
    mode: str = MODE_POINTS


def select_prompt_points(cluster: PointCluster, n: int = DEFAULT_MAX_POINTS) -> np.ndarray:
    """Up to n cluster members, centroid-nearest first, then spread out by
    farthest-point sampling (ties by lowest member index)."""
    if n < 1:
        raise ValueError("need at least one prompt point")
    pts = cluster.member_points
    dist_c = np.sqrt(((pts - cluster.centroid) ** 2).sum(axis=1))
    first = int(np.argmin(dist_c))
    if cluster.size <= n:
        order = [first] + [i for i in np.argsort(dist_c, kind="stable") if i != first]
        return pts[order]
    chosen = [first]
    min_dist = np.sqrt(((pts - pts[first]) ** 2).sum(axis=1))
    while len(chosen) < n:
        nxt = int(np.argmax(min_dist))  # argmax takes the lowest index on ties
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, np.sqrt(((pts - pts[nxt]) ** 2).sum(axis=1)))
    return pts[chosen]


def build_prompt(frame_ref: str, points: np.ndarray,
                 fuzzy: Optional[FuzzyMask] = None,
                 mode: str = MODE_POINTS,
                 max_points: int = DEFAULT_MAX_POINTS) -> PromptSet:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.size == 0 or len(points) < 1:
        raise ValueError("a prompt needs at least one foreground point")
    if len(points) > max_points:
        raise ValueError(f"prompt exceeds the {max_points}-point cap")
    if mode == MODE_POINTS_MASK:
        if fuzzy is None:
            raise ConfigError("mode points+mask requires a fuzzy mask")
        low_res = downscale_for_prompt(fuzzy)
    elif mode == MODE_POINTS:
        low_res = None
    else:
        raise ConfigError(f"unknown prompt mode {mode!r}")
    return PromptSet(frame_ref, points, low_res, mode)


# ---------------------------------------------------------------------------
# Mock segmenters

def mock_flood_segmenter(image: np.ndarray, points: np.ndarray,
                         color_tolerance: int = 8) -> BinaryMask:
    """4-connected region grow from each seed over pixels whose per-channel
    absolute difference from the seed color is within tolerance; union."""
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[..., None]
    h, w = image.shape[:2]
    out = np.zeros((h, w), dtype=np.uint8)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    for px, py in np.atleast_2d(points):
        x, y = int(round(px)), int(round(py))
        if not (0 <= x < w and 0 <= y < h):
            raise ValueError(f"seed ({px}, {py}) outside image")
        seed_color = image[y, x].astype(np.int32)
        similar = (np.abs(image.astype(np.int32) - seed_color)
                   <= color_tolerance).all(axis=-1)
        labels, _ = ndimage.label(similar, structure=structure)
        out |= (labels == labels[y, x]).astype(np.uint8)
    return BinaryMask(out)


class FloodMockSegmenter:
    """Deterministic stand-in model: color region growing from the prompts."""

    deterministic = True
    accepts_mask = False

    def __init__(self, color_tolerance: int = 8):
        self.color_tolerance = color_tolerance

    def segment(self, image_path, points, fuzzy_mask_path=None,
                gt_mask_path=None, frame_id=None) -> tuple[BinaryMask, float]:
        image = pnm.read_ppm(image_path)
        mask = mock_flood_segmenter(image, points, self.color_tolerance)
        # a fixed reported time keeps rerun artifacts byte-identical
        return mask, 0.0


class OracleMockSegmenter:
    """Returns the ground-truth mask; isolates pipeline plumbing from model
    quality in tests."""

    deterministic = True
    accepts_mask = True

    def segment(self, image_path, points, fuzzy_mask_path=None,
                gt_mask_path=None, frame_id=None) -> tuple[BinaryMask, float]:
        if gt_mask_path is None:
            raise SegmentationError("oracle segmenter needs a ground-truth mask")
        return BinaryMask.load(gt_mask_path), 0.0


class DiskMockSegmenter:
    """Replays precomputed masks by frame id from a directory."""

    deterministic = True
    accepts_mask = False

    def __init__(self, directory, frame_id_resolver=None):
        self.directory = directory
        self._resolve = frame_id_resolver or (lambda p: p)

    def segment(self, image_path, points, fuzzy_mask_path=None,
                gt_mask_path=None, frame_id=None) -> tuple[BinaryMask, float]:
        if frame_id is None:
            raise SegmentationError("disk segmenter needs a frame id")
        path = f"{self.directory}/{self._resolve(frame_id)}.pgm"
        return BinaryMask.load(path), 0.0


# ---------------------------------------------------------------------------
# Subprocess adapter client

@dataclass
class SegmenterCapabilities:
    accepts_mask: bool = False
    deterministic: bool = False


class SubprocessSegmenter:
    """One-request-in-flight client for a stdio adapter process.

    The adapter's first line must be the handshake
    ``{"protocol": 1, "accepts_mask": ..., "deterministic": ...}``; every
    response must echo the strictly increasing request id.
    """

    def __init__(self, command: str | Sequence[str], timeout_s: float = 60.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.timeout_s = timeout_s
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._next_id = 1
        self._lock = threading.Lock()
        self.capabilities = SegmenterCapabilities()
        self.usable = False

    @property
    def deterministic(self) -> bool:
        return self.capabilities.deterministic

    @property
    def accepts_mask(self) -> bool:
        return self.capabilities.accepts_mask

    def open(self) -> "SubprocessSegmenter":
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)
        threading.Thread(target=self._reader, daemon=True).start()
        handshake = self._read_line(self.timeout_s)
        try:
            hello = json.loads(handshake)
        except json.JSONDecodeError:
            raise SegmenterProtocolError(f"bad handshake: {handshake!r}")
        if hello.get("protocol") != PROTOCOL_VERSION:
            raise SegmenterProtocolError(
                f"unsupported protocol version {hello.get('protocol')!r}")
        self.capabilities = SegmenterCapabilities(
            accepts_mask=bool(hello.get("accepts_mask", False)),
            deterministic=bool(hello.get("deterministic", False)))
        self.usable = True
        return self

    def _reader(self):
        proc = self._proc
        for line in proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)

    def _read_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            self.usable = False
            raise SegmenterTimeoutError(
                f"no response within {timeout} s") from None
        if line is None:
            self.usable = False
            raise SegmenterProtocolError("adapter closed its output stream")
        return line

    def segment(self, image_path, points, fuzzy_mask_path=None,
                gt_mask_path=None, frame_id=None,
                timeout_s: Optional[float] = None) -> tuple[BinaryMask, float]:
        if not self.usable:
            raise SegmenterProtocolError("segmenter handle is not open")
        timeout = self.timeout_s if timeout_s is None else timeout_s
        mask_ref = fuzzy_mask_path if self.capabilities.accepts_mask else None
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            request = {
                "id": req_id,
                "op": "segment",
                "image": str(image_path),
                "points": [{"x": float(x), "y": float(y), "label": 1}
                           for x, y in np.atleast_2d(points)],
                "mask": str(mask_ref) if mask_ref is not None else None,
            }
            try:
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self.usable = False
                raise SegmenterProtocolError(f"adapter pipe closed: {exc}") from exc
            line = self._read_line(timeout)
        try:
            response = json.loads(line)
        except json.JSONDecodeError:
            self.usable = False
            raise SegmenterProtocolError(f"malformed response: {line!r}")
        if response.get("id") != req_id:
            self.usable = False
            raise SegmenterProtocolError(
                f"response id {response.get('id')!r} does not echo request {req_id}")
        status = response.get("status")
        if status == "error":
            raise SegmentationError(response.get("message", "adapter error"))
        if status != "ok" or "mask" not in response:
            self.usable = False
            raise SegmenterProtocolError(f"malformed response: {line!r}")
        mask = BinaryMask.load(response["mask"])
        return mask, float(response.get("time_s", math.nan))

    def close(self):
        self.usable = False
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self.open()

    def __exit__(self, *exc):
        self.close()


def run_segmenter(handle, prompt: PromptSet, timeout_s: float = 60.0,
                  fuzzy_mask_path=None, gt_mask_path=None,
                  frame_id=None) -> tuple[BinaryMask, float]:
    """One request/response exchange against any segmenter implementation."""
    kwargs = {"frame_id": frame_id}
    if isinstance(handle, SubprocessSegmenter):
        kwargs["timeout_s"] = timeout_s
    return handle.segment(prompt.frame_ref, prompt.foreground_points,
                          fuzzy_mask_path, gt_mask_path, **kwargs)
