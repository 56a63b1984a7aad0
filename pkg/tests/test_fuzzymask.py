import math

import numpy as np
import pytest

from gazeseg.foveation import WeightedPoint
from gazeseg.fuzzymask import (FuzzyMask, build_fuzzy_mask, downscale_for_prompt,
                               kde_mask, normalize_mask)


def literal_kde(points, dims, h):
    """Unweighted textbook evaluation: mean of Gaussian kernels, no
    truncation. Oracle for the uniform-weight path."""
    w, hgt = dims
    xs, ys = np.meshgrid(np.arange(w), np.arange(hgt))
    grid = np.zeros((hgt, w))
    for p in points:
        grid += np.exp(-((xs - p.x) ** 2 + (ys - p.y) ** 2) / (2 * h * h))
    return grid / (len(points) * 2 * math.pi * h * h)


class TestKde:
    def test_single_point_peak_value(self):
        pt = [WeightedPoint(10.0, 10.0, 1.0)]
        grid = kde_mask(pt, (32, 32), h=2.0)
        assert np.unravel_index(grid.argmax(), grid.shape) == (10, 10)
        assert grid[10, 10] == pytest.approx(1.0 / (8 * math.pi), rel=1e-9)

    def test_mirror_symmetry(self):
        pts = [WeightedPoint(10.0, 16.0, 1.0), WeightedPoint(21.0, 16.0, 1.0)]
        grid = kde_mask(pts, (32, 32), h=3.0)
        assert np.abs(grid - grid[:, ::-1]).max() < 1e-12

    def test_riemann_sum_normalization(self):
        pt = [WeightedPoint(40.0, 40.0, 1.0)]
        grid = kde_mask(pt, (81, 81), h=4.0)
        assert grid.sum() == pytest.approx(1.0, rel=0.02)

    def test_uniform_weights_match_literal_form(self):
        rng = np.random.default_rng(0)
        pts = [WeightedPoint(float(x), float(y), 1.0)
               for x, y in rng.uniform(10, 22, size=(5, 2))]
        grid = kde_mask(pts, (32, 32), h=4.0)
        oracle = literal_kde(pts, (32, 32), h=4.0)
        assert np.abs(grid - oracle).max() < 1e-12

    def test_larger_bandwidth_never_raises_peak(self):
        rng = np.random.default_rng(1)
        pts = [WeightedPoint(float(x), float(y), 1.0)
               for x, y in rng.uniform(20, 44, size=(6, 2))]
        peaks = [kde_mask(pts, (64, 64), h=h).max() for h in (1.0, 2.0, 4.0, 8.0)]
        assert all(a >= b for a, b in zip(peaks, peaks[1:]))

    def test_far_field_is_negligible(self):
        pt = [WeightedPoint(100.0, 100.0, 1.0)]
        h = 3.0
        grid = kde_mask(pt, (200, 200), h=h)
        xs, ys = np.meshgrid(np.arange(200), np.arange(200))
        far = np.hypot(xs - 100, ys - 100) > 6 * h
        assert grid[far].max() < 1e-6 * grid.max()

    def test_empty_points_rejected(self):
        with pytest.raises(ValueError):
            kde_mask([], (10, 10), h=1.0)


class TestNormalize:
    def test_scales_to_unit_max(self):
        grid = np.array([[0.0, 0.02], [0.04, 0.01]])
        mask = normalize_mask(grid)
        assert mask.values.max() == 1.0
        assert mask.values[1, 0] == 1.0

    def test_idempotent(self):
        grid = np.array([[0.5, 1.0], [0.25, 0.0]])
        mask = normalize_mask(grid)
        assert np.array_equal(mask.values, grid)

    def test_argmax_preserved(self):
        rng = np.random.default_rng(2)
        grid = rng.uniform(size=(20, 20))
        mask = normalize_mask(grid)
        assert np.array_equal(np.argwhere(grid == grid.max()),
                              np.argwhere(mask.values == 1.0))

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            normalize_mask(np.zeros((4, 4)))


class TestDownscale:
    def test_constant_preserved(self):
        mask = FuzzyMask(np.full((512, 512), 0.37), 1.0, 1)
        low = downscale_for_prompt(mask, (256, 256))
        assert low.shape == (256, 256)
        assert np.abs(low - 0.37).max() < 1e-12

    def test_single_block_area_average(self):
        values = np.zeros((512, 512))
        values[100:102, 200:202] = 1.0
        low = downscale_for_prompt(FuzzyMask(values, 1.0, 1), (256, 256))
        assert low[50, 100] == pytest.approx(1.0)
        assert low.sum() == pytest.approx(1.0)

    def test_range_contraction(self):
        rng = np.random.default_rng(3)
        values = rng.uniform(size=(300, 400))
        low = downscale_for_prompt(FuzzyMask(values, 1.0, 1), (256, 256))
        assert low.min() >= values.min() - 1e-12
        assert low.max() <= values.max() + 1e-12

    def test_mass_preserved_non_integer_ratio(self):
        rng = np.random.default_rng(4)
        values = rng.uniform(size=(130, 70))
        low = downscale_for_prompt(FuzzyMask(values, 1.0, 1), (32, 64))
        # area averaging preserves the mean exactly
        assert low.mean() == pytest.approx(values.mean(), rel=1e-12)


def test_build_fuzzy_mask_roundtrip(tmp_path):
    pts = [WeightedPoint(8.0, 9.0, 1.0), WeightedPoint(12.0, 9.0, 0.5)]
    mask = build_fuzzy_mask(pts, (24, 20), h=2.0)
    assert mask.values.max() == 1.0
    assert mask.source_point_count == 2
    path = tmp_path / "fuzzy.pgm"
    mask.save(path)
    back = FuzzyMask.load(path)
    assert np.abs(back.values - mask.values).max() <= 0.5 / 65535
