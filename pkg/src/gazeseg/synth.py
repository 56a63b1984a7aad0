"""Synthetic scene fixture: a colored rectangle watched by a jittery gaze
under a scripted camera translation.

Emits PPM frames, PGM ground-truth masks, a 50 Hz gaze log (with brief
saccade outliers), the exact pairwise homographies, a camera config, and a
JSONL manifest. Everything is seeded and byte-reproducible.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import pnm
from .util import substream

FPS = 25.0
SAMPLE_STEP_US = 20_000            # 50 Hz
FRAME_STEP_US = 40_000


@dataclass
class SynthConfig:
    frames: int = 104              # total video frames, including warmup
    warmup: int = 4                # leading frames excluded from the manifest
    width: int = 320
    height: int = 240
    rect_size: tuple[int, int] = (64, 44)
    rect_color: tuple[int, int, int] = (200, 40, 40)
    camera_step: tuple[int, int] = (2, 1)   # px of camera drift per frame
    gaze_jitter_px: float = 0.3
    outlier_period: int = 5        # every Nth frame-aligned sample is a saccade
    outlier_min_dist_px: float = 80.0
    depth_mm: float = 500.0
    class_name: str = "SynthBox"
    participant_id: str = "1"
    scene_id: str = "scene0"
    seed: int = 0
    fov_x_deg: float = 90.0
    fov_y_deg: float = 70.0


def _background(canvas_h: int, canvas_w: int, rng: np.random.Generator,
                block: int = 4) -> np.ndarray:
    """Blocky color noise: enough gradient structure for corner detection,
    red channel capped below the rectangle color so flood fill cannot leak."""
    bh = canvas_h // block + 1
    bw = canvas_w // block + 1
    blocks = np.stack([
        rng.integers(60, 160, size=(bh, bw)),     # red stays far from the rect
        rng.integers(60, 200, size=(bh, bw)),
        rng.integers(60, 200, size=(bh, bw)),
    ], axis=-1).astype(np.uint8)
    full = np.repeat(np.repeat(blocks, block, axis=0), block, axis=1)
    return full[:canvas_h, :canvas_w]


def _rect_scene_origin(cfg: SynthConfig) -> tuple[int, int]:
    # keep the rectangle inside every frame across the whole camera sweep
    drift_x = cfg.camera_step[0] * (cfg.frames - 1)
    drift_y = cfg.camera_step[1] * (cfg.frames - 1)
    ox = min(cfg.width - cfg.rect_size[0] - 20, 20 + drift_x + 10)
    oy = min(cfg.height - cfg.rect_size[1] - 20, 20 + drift_y + 10)
    return ox + 0, oy + 0


def _outlier_frames(cfg: SynthConfig) -> set[int]:
    return {f for f in range(cfg.frames)
            if f % cfg.outlier_period == 2 and f >= 1}


def generate_scene(outdir: str, cfg: SynthConfig) -> dict:
    """Write one object-instance sequence under ``outdir``; returns the
    manifest entry (with paths relative to ``outdir``)."""
    rng_bg = substream(cfg.seed, "synth-bg", cfg.scene_id, cfg.participant_id)
    rng_gaze = substream(cfg.seed, "synth-gaze", cfg.scene_id, cfg.participant_id)
    rng_outlier = substream(cfg.seed, "synth-outlier", cfg.scene_id, cfg.participant_id)

    dx, dy = cfg.camera_step
    w, h = cfg.width, cfg.height
    rw, rh = cfg.rect_size
    canvas_w = w + dx * (cfg.frames - 1) + 8
    canvas_h = h + dy * (cfg.frames - 1) + 8
    canvas = _background(canvas_h, canvas_w, rng_bg)
    ox, oy = _rect_scene_origin(cfg)
    canvas[oy:oy + rh, ox:ox + rw] = cfg.rect_color

    frames_dir = os.path.join(outdir, "frames")
    masks_dir = os.path.join(outdir, "masks")
    os.makedirs(frames_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)

    for t in range(cfg.frames):
        cx, cy = t * dx, t * dy
        frame = canvas[cy:cy + h, cx:cx + w]
        pnm.write_ppm(os.path.join(frames_dir, f"frame_{t:05d}.ppm"), frame)
        mask = np.zeros((h, w), dtype=np.uint8)
        x0, y0 = ox - cx, oy - cy
        mask[max(0, y0):max(0, y0 + rh), max(0, x0):max(0, x0 + rw)] = 1
        pnm.write_binary_pgm(os.path.join(masks_dir, f"mask_{t:05d}.pgm"), mask)

    hom_path = os.path.join(outdir, "homographies.txt")
    with open(hom_path, "w") as f:
        for _ in range(cfg.frames - 1):
            f.write(f"1 0 {-dx} 0 1 {-dy} 0 0 1\n")

    outliers = _outlier_frames(cfg)

    def center_at(t: float) -> tuple[float, float]:
        return (ox - t * dx + rw / 2.0, oy - t * dy + rh / 2.0)

    records = []
    n_samples = 2 * (cfg.frames - 1) + 1
    for k in range(n_samples):
        t = k / 2.0
        frame_aligned = (k % 2 == 0)
        if frame_aligned and (k // 2) in outliers:
            # brief saccade: a far-away fixation at a frame-aligned sample
            while True:
                gx = float(rng_outlier.uniform(5, w - 5))
                gy = float(rng_outlier.uniform(5, h - 5))
                cxn, cyn = center_at(t)
                if np.hypot(gx - cxn, gy - cyn) >= cfg.outlier_min_dist_px:
                    break
        else:
            cxn, cyn = center_at(t)
            gx = cxn + float(rng_gaze.normal(0.0, cfg.gaze_jitter_px))
            gy = cyn + float(rng_gaze.normal(0.0, cfg.gaze_jitter_px))
        records.append({
            "Timestamp": k * SAMPLE_STEP_US,
            "GazePoint2D": [round(gx / w, 9), round(gy / h, 9)],
            "GazePoint3D": [0.0, 0.0, cfg.depth_mm],
            "Validity": True,
        })
    gaze_path = os.path.join(outdir, "gaze.json")
    with open(gaze_path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")

    camera_path = os.path.join(outdir, "camera.txt")
    with open(camera_path, "w") as f:
        f.write(f"W {w}\nH {h}\nfov_angle_x {cfg.fov_x_deg}\n"
                f"fov_angle_y {cfg.fov_y_deg}\ndefault_depth_mm 600\n")

    entry = {
        "class_name": cfg.class_name,
        "participant_id": cfg.participant_id,
        "scene_id": cfg.scene_id,
        "video_ref": "frames",
        "gaze_log_ref": "gaze.json",
        "camera_ref": "camera.txt",
        "homographies_ref": "homographies.txt",
        "frame_pattern": "frames/frame_%05d.ppm",
        "fps": FPS,
        "gaze_schema": "gitw",
        "frames": [
            {
                "frame_id": f"{cfg.class_name}_{cfg.scene_id}_p{cfg.participant_id}_{t:05d}",
                "index": t,
                "image": f"frames/frame_{t:05d}.ppm",
                "gt_mask": f"masks/mask_{t:05d}.pgm",
            }
            for t in range(cfg.warmup, cfg.frames)
        ],
    }
    return entry


def generate_dataset(outdir: str, configs: list[SynthConfig]) -> str:
    """Write one sequence per config plus a combined manifest; returns the
    manifest path."""
    os.makedirs(outdir, exist_ok=True)
    lines = []
    for cfg in configs:
        sub = f"{cfg.class_name}_p{cfg.participant_id}_{cfg.scene_id}"
        entry = generate_scene(os.path.join(outdir, sub), cfg)
        entry = _prefix_paths(entry, sub)
        lines.append(json.dumps(entry, sort_keys=True))
    manifest_path = os.path.join(outdir, "manifest.jsonl")
    with open(manifest_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return manifest_path


def _prefix_paths(entry: dict, prefix: str) -> dict:
    out = dict(entry)
    for key in ("video_ref", "gaze_log_ref", "camera_ref", "homographies_ref",
                "frame_pattern"):
        out[key] = f"{prefix}/{entry[key]}"
    out["frames"] = [
        {**fr, "image": f"{prefix}/{fr['image']}",
         "gt_mask": f"{prefix}/{fr['gt_mask']}"}
        for fr in entry["frames"]
    ]
    return out
