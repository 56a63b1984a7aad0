"""Dataset manifests (JSON-lines) and train/test splitting."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ManifestError

GITW_CLASSES = (
    "Bowl", "CanOfCocaCola", "FryingPan", "Glass", "Jam", "Lid",
    "MilkBottle", "Mug", "OilBottle", "Plate", "Rice", "Saucepan",
    "Sponge", "Sugar", "VinegarBottle", "WashLiquid",
)


@dataclass(frozen=True)
class FrameSpec:
    frame_id: str
    index: int
    image: str
    gt_mask: Optional[str] = None


@dataclass
class ManifestEntry:
    class_name: str
    participant_id: str
    scene_id: str
    video_ref: str
    gaze_log_ref: str
    frames: list[FrameSpec]
    fps: Optional[float] = None
    frame_times_ref: Optional[str] = None
    homographies_ref: Optional[str] = None
    camera_ref: Optional[str] = None
    gaze_schema: str = "gitw"
    # printf-style pattern (one %d) resolving any frame index to an image,
    # used when pairwise homographies must be estimated for window frames
    # that are not themselves evaluated
    frame_pattern: Optional[str] = None

    def image_for_index(self, index: int) -> Optional[str]:
        if self.frame_pattern is not None:
            return self.frame_pattern % index
        for fr in self.frames:
            if fr.index == index:
                return fr.image
        return None


def _resolve(base: str, path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))


def load_manifest(path, taxonomy: Optional[Sequence[str]] = None) -> list[ManifestEntry]:
    """Load and validate a JSONL manifest; paths resolve relative to it."""
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(str(exc), line=lineno) from exc
            for key in ("class_name", "participant_id", "gaze_log_ref", "frames"):
                if key not in obj:
                    raise ManifestError(f"missing field {key!r}", line=lineno)
            if not obj["participant_id"]:
                raise ManifestError("participant_id is empty", line=lineno)
            if taxonomy is not None and obj["class_name"] not in taxonomy:
                raise ManifestError(
                    f"class {obj['class_name']!r} not in taxonomy", line=lineno)
            if not obj["frames"]:
                raise ManifestError("entry has no frames", line=lineno)
            frames = []
            for i, fr in enumerate(obj["frames"]):
                try:
                    frames.append(FrameSpec(
                        frame_id=str(fr["frame_id"]),
                        index=int(fr["index"]),
                        image=_resolve(base, fr["image"]),
                        gt_mask=_resolve(base, fr.get("gt_mask")),
                    ))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ManifestError(f"frame {i}: {exc}", line=lineno) from exc
            entries.append(ManifestEntry(
                class_name=obj["class_name"],
                participant_id=str(obj["participant_id"]),
                scene_id=str(obj.get("scene_id", "")),
                video_ref=_resolve(base, obj.get("video_ref")) or base,
                gaze_log_ref=_resolve(base, obj["gaze_log_ref"]),
                frames=frames,
                fps=obj.get("fps"),
                frame_times_ref=_resolve(base, obj.get("frame_times_ref")),
                homographies_ref=_resolve(base, obj.get("homographies_ref")),
                camera_ref=_resolve(base, obj.get("camera_ref")),
                gaze_schema=obj.get("gaze_schema", "gitw"),
                frame_pattern=_resolve(base, obj.get("frame_pattern")),
            ))
    if not entries:
        raise ManifestError(f"manifest {path} is empty")
    return entries


@dataclass(frozen=True)
class FrameRef:
    """One evaluable unit: a frame within its manifest entry."""

    entry: ManifestEntry
    frame: FrameSpec

    @property
    def class_name(self) -> str:
        return self.entry.class_name


def all_frame_refs(entries: Sequence[ManifestEntry]) -> list[FrameRef]:
    return [FrameRef(e, fr) for e in entries for fr in e.frames]


def split_dataset(
    entries: Sequence[ManifestEntry],
    mode: str = "random",
    ratio: float = 0.7,
    participants: Optional[Sequence[str]] = None,
    seed: int = 0,
) -> tuple[list[FrameRef], list[FrameRef]]:
    """Disjoint, exhaustive train/test split.

    random mode shuffles frames within each class (seeded) and splits at the
    ratio, rounding half up; by_participant keeps whole video sequences
    together and assigns the listed participant ids to train.
    """
    if not entries:
        raise ConfigError("cannot split an empty manifest")
    if mode == "random":
        refs = all_frame_refs(entries)
        by_class: dict[str, list[FrameRef]] = {}
        for ref in refs:
            by_class.setdefault(ref.class_name, []).append(ref)
        train, test = [], []
        for cls in sorted(by_class):
            group = by_class[cls]
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, _stable_hash(cls)]))
            order = rng.permutation(len(group))
            n_train = int(np.floor(ratio * len(group) + 0.5))
            for rank, idx in enumerate(order):
                (train if rank < n_train else test).append(group[idx])
        return train, test
    if mode == "by_participant":
        if not participants:
            raise ConfigError("by_participant split needs participant ids")
        wanted = {str(p) for p in participants}
        known = {e.participant_id for e in entries}
        unknown = wanted - known
        if unknown:
            raise ConfigError(f"unknown participant ids: {sorted(unknown)}")
        train = [FrameRef(e, fr) for e in entries if e.participant_id in wanted
                 for fr in e.frames]
        test = [FrameRef(e, fr) for e in entries if e.participant_id not in wanted
                for fr in e.frames]
        return train, test
    raise ConfigError(f"unknown split mode {mode!r}")


def _stable_hash(text: str) -> int:
    import zlib

    return zlib.crc32(text.encode("utf-8"))
