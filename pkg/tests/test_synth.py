import filecmp
import json
from pathlib import Path

import numpy as np

from gazeseg import pnm
from gazeseg.dataset import load_manifest
from gazeseg.gaze import interpolate_to_frames, load_frame_times, parse_gaze_log
from gazeseg.geometry import compose_chain, load_homography_file
from gazeseg.synth import SynthConfig, generate_dataset, generate_scene


def small_cfg(**kw):
    defaults = dict(frames=16, warmup=4, width=200, height=160,
                    rect_size=(40, 30), seed=0)
    defaults.update(kw)
    return SynthConfig(**defaults)


def test_scene_outputs_exist_and_manifest_excludes_warmup(tmp_path):
    cfg = small_cfg()
    entry = generate_scene(str(tmp_path), cfg)
    assert len(list((tmp_path / "frames").glob("*.ppm"))) == cfg.frames
    assert len(list((tmp_path / "masks").glob("*.pgm"))) == cfg.frames
    indices = [fr["index"] for fr in entry["frames"]]
    assert indices == list(range(cfg.warmup, cfg.frames))


def test_mask_matches_rect_color_in_frame(tmp_path):
    cfg = small_cfg()
    generate_scene(str(tmp_path), cfg)
    for t in (0, 7, 15):
        frame = pnm.read_ppm(tmp_path / "frames" / f"frame_{t:05d}.ppm")
        mask = pnm.read_binary_mask(tmp_path / "masks" / f"mask_{t:05d}.pgm")
        is_rect = (frame == np.array(cfg.rect_color)).all(axis=-1)
        assert np.array_equal(is_rect.astype(np.uint8), mask)
        assert mask.sum() == cfg.rect_size[0] * cfg.rect_size[1]


def test_homography_file_is_exact(tmp_path):
    cfg = small_cfg()
    generate_scene(str(tmp_path), cfg)
    homs = load_homography_file(tmp_path / "homographies.txt")
    assert len(homs) == cfg.frames - 1
    # a scene pixel at (x, y) in frame t appears at (x - dx, y - dy) in t+1
    mapped = homs[0].apply([(50.0, 50.0)])[0]
    assert mapped.tolist() == [50.0 - cfg.camera_step[0],
                               50.0 - cfg.camera_step[1]]
    chain = compose_chain(homs[3:7])
    assert chain.apply([(100.0, 100.0)])[0].tolist() == [
        100.0 - 4 * cfg.camera_step[0], 100.0 - 4 * cfg.camera_step[1]]


def test_gaze_log_tracks_object_with_scripted_outliers(tmp_path):
    cfg = small_cfg()
    generate_scene(str(tmp_path), cfg)
    samples = parse_gaze_log((tmp_path / "gaze.json").read_bytes(), schema="gitw")
    times = load_frame_times(fps=25.0, count=cfg.frames)
    gazes = {g.frame_index: g
             for g in interpolate_to_frames(samples, times,
                                            (cfg.width, cfg.height))}
    masks = {t: pnm.read_binary_mask(tmp_path / "masks" / f"mask_{t:05d}.pgm")
             for t in range(cfg.frames)}
    for t, g in gazes.items():
        ys, xs = np.nonzero(masks[t])
        cx, cy = xs.mean() + 0.5, ys.mean() + 0.5
        dist = np.hypot(g.x - cx, g.y - cy)
        if t % 5 == 2 and t >= 1:
            assert dist >= cfg.outlier_min_dist_px - 1.0
        else:
            assert dist < 2.0, f"frame {t}: gaze {dist:.2f}px off center"


def test_generation_is_byte_reproducible(tmp_path):
    cfg = small_cfg()
    a, b = tmp_path / "a", tmp_path / "b"
    generate_dataset(str(a), [cfg])
    generate_dataset(str(b), [cfg])
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert filecmp.cmp(a / rel, b / rel, shallow=False), rel


def test_dataset_manifest_loads(tmp_path):
    path = generate_dataset(str(tmp_path), [
        small_cfg(participant_id="1", scene_id="s0"),
        small_cfg(participant_id="2", scene_id="s1", seed=1),
    ])
    entries = load_manifest(path)
    assert len(entries) == 2
    assert {e.participant_id for e in entries} == {"1", "2"}
    for e in entries:
        assert Path(e.gaze_log_ref).is_file()
        assert Path(e.camera_ref).is_file()
        for fr in e.frames:
            assert Path(fr.image).is_file()
            assert Path(fr.gt_mask).is_file()


def test_distinct_seeds_distinct_pixels(tmp_path):
    a = generate_scene(str(tmp_path / "a"), small_cfg(seed=0))
    b = generate_scene(str(tmp_path / "b"), small_cfg(seed=1))
    img_a = pnm.read_ppm(tmp_path / "a" / "frames" / "frame_00000.ppm")
    img_b = pnm.read_ppm(tmp_path / "b" / "frames" / "frame_00000.ppm")
    assert not np.array_equal(img_a, img_b)
