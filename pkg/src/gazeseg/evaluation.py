"""Pipeline orchestration: gaze window -> projection -> clustering ->
prompts (with optional fuzzy mask) -> segmenter -> IoU records."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import geometry, pnm
from .clustering import ClusterConfig, PointCluster, dbscan, select_object_cluster
from .dataset import FrameRef, ManifestEntry
from .errors import (ConfigError, GazeSegError, HomographyEstimationError,
                     SegmentationError, SegmenterProtocolError,
                     SegmenterTimeoutError)
from .foveation import (DEFAULT_ALPHA_DEG, CameraModel, ObjectShapePrior,
                        WeightedPoint, approximate_bbox, compute_footprint,
                        sample_support_points)
from .fuzzymask import BinaryMask, FuzzyMask, build_fuzzy_mask
from .gaze import FrameGaze, interpolate_to_frames, load_frame_times, parse_gaze_log
from .metrics import EvalRecord, iou
from .prompts import (DEFAULT_MAX_POINTS, MODE_POINTS, MODE_POINTS_MASK,
                      PromptSet, build_prompt, select_prompt_points)
from .util import substream, substream_seed

FLAG_NO_FIXATION = "no-fixation"
FLAG_SEGMENTER_ERROR = "segmenter-error"
FLAG_HOMOGRAPHY_FALLBACK = "homography-fallback"


@dataclass
class PipelineConfig:
    window: int = 5
    epsilon: float = 1.4
    min_points: Optional[int] = None     # None -> max(2, window)
    camera: Optional[CameraModel] = None
    shape_priors: dict[str, ObjectShapePrior] = field(default_factory=dict)
    mode: str = MODE_POINTS
    point_cap: int = DEFAULT_MAX_POINTS
    bandwidth_px: Optional[float] = None  # None -> footprint sigma_px_x
    alpha_deg: float = DEFAULT_ALPHA_DEG
    support_count: int = 32
    support_y0: float = 1.0
    lambda_decay: Optional[float] = None  # None -> 1 / sigma_px_x
    seed: int = 0
    workers: int = 1
    record_mode: str = "mock"
    segmenter_timeout_s: float = 60.0

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("temporal window must be >= 1")
        if self.point_cap < 1:
            raise ConfigError("point cap must be >= 1")

    @property
    def cluster_config(self) -> ClusterConfig:
        if self.min_points is not None:
            return ClusterConfig(epsilon=self.epsilon, min_points=self.min_points)
        return ClusterConfig.for_window(self.window, epsilon=self.epsilon)


@dataclass
class FramePromptResult:
    frame_index: int
    prompt: Optional[PromptSet]
    cluster: Optional[PointCluster]
    projected: Optional[geometry.ProjectedGazeSet]
    fuzzy: Optional[FuzzyMask] = None
    bbox: Optional[object] = None
    flags: list[str] = field(default_factory=list)


class PromptPipeline:
    """Per-entry state: gaze interpolation, pairwise homographies, prompts."""

    def __init__(self, entry: ManifestEntry, config: PipelineConfig):
        self.entry = entry
        self.config = config
        self.camera = self._load_camera()
        self.prior = config.shape_priors.get(
            entry.class_name, ObjectShapePrior(entry.class_name))
        with open(entry.gaze_log_ref, "rb") as f:
            samples = parse_gaze_log(f.read(), schema=entry.gaze_schema)
        max_index = max(fr.index for fr in entry.frames)
        times = load_frame_times(path=entry.frame_times_ref, fps=entry.fps,
                                 count=max_index + 1)
        dims = (self.camera.width, self.camera.height)
        self.frame_gazes: dict[int, FrameGaze] = {
            fg.frame_index: fg
            for fg in interpolate_to_frames(samples, times, dims)
        }
        self.dims = dims
        self._precomputed: Optional[list[geometry.Homography]] = None
        if entry.homographies_ref is not None:
            self._precomputed = geometry.load_homography_file(entry.homographies_ref)
        self._cache = geometry.PairwiseHomographyCache()
        self._fallbacks: set[int] = set()

    def _load_camera(self) -> CameraModel:
        if self.entry.camera_ref is not None:
            return CameraModel.load(self.entry.camera_ref)
        if self.config.camera is not None:
            return self.config.camera
        raise ConfigError(
            f"no camera model for entry {self.entry.class_name}: set camera_ref "
            "in the manifest or pass --camera")

    def pairwise_homography(self, index: int) -> geometry.Homography:
        """Homography mapping frame ``index`` onto frame ``index + 1``."""
        if self._precomputed is not None:
            if index >= len(self._precomputed):
                raise ConfigError(
                    f"homography file has no line for frame pair ({index}, {index + 1})")
            return self._precomputed[index]
        return self._cache.get_or_compute((index, index + 1),
                                          lambda: self._estimate_pair(index))

    def _estimate_pair(self, index: int) -> geometry.Homography:
        path_a = self.entry.image_for_index(index)
        path_b = self.entry.image_for_index(index + 1)
        if path_a is None or path_b is None:
            self._fallbacks.add(index)
            return geometry.Homography.identity()
        try:
            img_a = pnm.read_ppm(path_a)
            img_b = pnm.read_ppm(path_b)
            corners = geometry.detect_corners(img_a)
            pairs = geometry.match_correspondences(img_a, img_b, corners)
            hom, _ = geometry.estimate_homography(
                pairs, geometry.RansacConfig(
                    seed=substream_seed(self.config.seed, "ransac",
                                        self.entry.scene_id, index)))
            return hom
        except (HomographyEstimationError, OSError, ValueError):
            self._fallbacks.add(index)
            return geometry.Homography.identity()

    def prompt_for(self, index: int) -> FramePromptResult:
        t0 = max(0, index - self.config.window + 1)
        window = [self.frame_gazes.get(i) for i in range(t0, index + 1)]
        window = [fg if fg is not None else
                  FrameGaze(i, float("nan"), float("nan"), None, True, False)
                  for i, fg in zip(range(t0, index + 1), window)]
        pairwise = [self.pairwise_homography(i) for i in range(t0, index)]
        flags = []
        if any(i in self._fallbacks for i in range(t0, index)):
            flags.append(FLAG_HOMOGRAPHY_FALLBACK)
        projected = geometry.project_points_to_current(window, pairwise, self.dims)
        if len(projected.points) == 0:
            return FramePromptResult(index, None, None, projected,
                                     flags=flags + [FLAG_NO_FIXATION])
        labels = dbscan(projected.points, self.config.cluster_config)
        current = self.frame_gazes.get(index)
        current_xy = (current.x, current.y) if current is not None and current.valid else None
        cluster = select_object_cluster(labels, projected.points,
                                        current_gaze=current_xy,
                                        depths=projected.depths)
        if cluster is None:
            return FramePromptResult(index, None, None, projected,
                                     flags=flags + [FLAG_NO_FIXATION])
        points = select_prompt_points(cluster, self.config.point_cap)
        fuzzy = None
        bbox = None
        if self.config.mode == MODE_POINTS_MASK:
            fuzzy, bbox = self.fuzzy_mask_for(index, cluster)
        frame_ref = self.entry.image_for_index(index) or ""
        prompt = build_prompt(frame_ref, points, fuzzy, self.config.mode,
                              max_points=self.config.point_cap)
        return FramePromptResult(index, prompt, cluster, projected, fuzzy,
                                 bbox=bbox, flags=flags)

    def fuzzy_mask_for(self, index: int, cluster: PointCluster):
        cfg = self.config
        footprint = compute_footprint(cluster.depth_mm, self.camera, cfg.alpha_deg)
        bbox = approximate_bbox(tuple(cluster.centroid), footprint, self.prior,
                                self.camera)
        rng = substream(cfg.seed, "support", self.entry.scene_id,
                        self.entry.class_name, index)
        support = sample_support_points(
            bbox, tuple(cluster.centroid), cfg.support_count, y0=cfg.support_y0,
            lambda_decay=cfg.lambda_decay, rng=rng,
            sigma_px_x=footprint.sigma_px_x)
        points = [WeightedPoint(float(x), float(y), cfg.support_y0)
                  for x, y in cluster.member_points] + support
        h = cfg.bandwidth_px if cfg.bandwidth_px is not None else footprint.sigma_px_x
        return build_fuzzy_mask(points, self.dims, h), bbox


def _sequence_id(entry: ManifestEntry) -> str:
    return f"{entry.class_name}/{entry.participant_id}/{entry.scene_id}"


def _evaluate_ref(pipeline: PromptPipeline, ref: FrameRef, config: PipelineConfig,
                  segmenter, workdir: Optional[str]) -> EvalRecord:
    seq = _sequence_id(ref.entry)
    result = pipeline.prompt_for(ref.frame.index)
    if result.prompt is None:
        return EvalRecord(ref.class_name, ref.frame.frame_id, 0.0, 0.0,
                          config.record_mode, result.flags, seq)
    fuzzy_path = None
    if result.fuzzy is not None and workdir is not None:
        fuzzy_path = os.path.join(workdir, f"{ref.frame.frame_id}_fuzzy.pgm")
        result.fuzzy.save(fuzzy_path)
    try:
        pred, time_s = segmenter.segment(
            ref.frame.image, result.prompt.foreground_points,
            fuzzy_mask_path=fuzzy_path, gt_mask_path=ref.frame.gt_mask,
            frame_id=ref.frame.frame_id)
    except (SegmentationError, SegmenterProtocolError, SegmenterTimeoutError) as exc:
        return EvalRecord(ref.class_name, ref.frame.frame_id, 0.0, 0.0,
                          config.record_mode,
                          result.flags + [FLAG_SEGMENTER_ERROR, str(exc)], seq)
    gt = BinaryMask.load(ref.frame.gt_mask)
    if not np.isfinite(time_s):
        time_s = 0.0
    return EvalRecord(ref.class_name, ref.frame.frame_id, iou(gt, pred),
                      float(time_s), config.record_mode, result.flags, seq)


def run_evaluation(
    refs: Sequence[FrameRef],
    config: PipelineConfig,
    segmenter_factory: Callable[[], object],
    workdir: Optional[str] = None,
) -> list[EvalRecord]:
    """Evaluate every frame reference; one record per frame, canonically
    ordered by (class, frame id). Segmenter errors are recorded, not fatal."""
    by_entry: dict[int, tuple[ManifestEntry, list[FrameRef]]] = {}
    for ref in refs:
        by_entry.setdefault(id(ref.entry), (ref.entry, []))[1].append(ref)

    records: list[EvalRecord] = []
    if config.workers <= 1:
        segmenter = segmenter_factory()
        try:
            for entry, entry_refs in by_entry.values():
                pipeline = PromptPipeline(entry, config)
                for ref in entry_refs:
                    records.append(_evaluate_ref(pipeline, ref, config,
                                                 segmenter, workdir))
        finally:
            _close(segmenter)
    else:
        def eval_entry(item):
            entry, entry_refs = item
            segmenter = segmenter_factory()
            try:
                pipeline = PromptPipeline(entry, config)
                return [_evaluate_ref(pipeline, ref, config, segmenter, workdir)
                        for ref in entry_refs]
            finally:
                _close(segmenter)

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for chunk in pool.map(eval_entry, by_entry.values()):
                records.extend(chunk)
    records.sort(key=lambda r: (r.class_name, r.frame_id))
    return records


def _close(segmenter) -> None:
    close = getattr(segmenter, "close", None)
    if callable(close):
        close()


def ablation_temporal_window(
    refs: Sequence[FrameRef],
    t_values: Sequence[int],
    config: PipelineConfig,
    segmenter_factory: Callable[[], object],
    workdir: Optional[str] = None,
) -> dict[int, list[EvalRecord]]:
    """Full evaluation per temporal window length."""
    if not t_values:
        raise ConfigError("temporal window sweep range is empty")
    out = {}
    for t in t_values:
        if t < 1:
            raise ConfigError(f"invalid temporal window {t}")
        cfg = replace(config, window=t,
                      min_points=(config.min_points if config.min_points is not None
                                  else None))
        out[t] = run_evaluation(refs, cfg, segmenter_factory, workdir)
    return out


def write_prompt_files(
    entry: ManifestEntry,
    indices: Sequence[int],
    config: PipelineConfig,
    outdir: str,
) -> list[str]:
    """Write per-frame prompt JSON (+ fuzzy PGM in points+mask mode)."""
    os.makedirs(outdir, exist_ok=True)
    pipeline = PromptPipeline(entry, config)
    written = []
    for index in sorted(indices):
        result = pipeline.prompt_for(index)
        stem = os.path.join(outdir, f"prompt_{index:05d}")
        payload = {
            "frame_index": index,
            "class_name": entry.class_name,
            "mode": config.mode,
            "flags": result.flags,
        }
        if result.prompt is None:
            payload["points"] = []
        else:
            payload["points"] = [
                {"x": round(float(x), 6), "y": round(float(y), 6), "label": 1}
                for x, y in result.prompt.foreground_points]
            if result.fuzzy is not None:
                mask_path = stem + "_fuzzy.pgm"
                result.fuzzy.save(mask_path)
                payload["fuzzy_mask"] = os.path.basename(mask_path)
        path = stem + ".json"
        with open(path, "w") as f:
            json.dump(payload, f, sort_keys=True)
            f.write("\n")
        written.append(path)
    return written
