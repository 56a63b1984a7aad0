import numpy as np
import pytest

from gazeseg.errors import HomographyEstimationError
from gazeseg.gaze import FrameGaze
from gazeseg.geometry import (Correspondence, Homography, RansacConfig,
                              compose_chain, detect_corners,
                              estimate_homography, match_correspondences,
                              project_points_to_current, rgb_to_gray)


def translation(tx, ty):
    return Homography.from_matrix(np.array([[1, 0, tx], [0, 1, ty], [0, 0, 1]],
                                           dtype=float))


def random_homography(rng):
    """A well-conditioned projective transform near the identity."""
    m = np.eye(3) + rng.uniform(-0.1, 0.1, size=(3, 3))
    m[2, :2] = rng.uniform(-1e-4, 1e-4, size=2)
    m[2, 2] = 1.0
    return Homography.from_matrix(m)


def make_pairs(hom, points):
    mapped = hom.apply(points)
    return [Correspondence(tuple(s), tuple(t)) for s, t in zip(points, mapped)]


class TestCorners:
    def test_uniform_image_has_no_corners(self):
        assert len(detect_corners(np.full((64, 64), 0.5))) == 0

    def test_white_square_corners(self):
        img = np.zeros((64, 64))
        img[20:41, 24:45] = 1.0
        corners = detect_corners(img, max_corners=8)
        expected = [(24, 20), (44, 20), (24, 40), (44, 40)]
        for ex, ey in expected:
            d = np.sqrt(((corners - [ex, ey]) ** 2).sum(axis=1)).min()
            assert d <= 2.0, f"corner ({ex},{ey}) missed by {d:.2f}px"

    def test_max_corners_cap(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(size=(16, 16)).repeat(6, axis=0).repeat(6, axis=1)
        corners = detect_corners(img, max_corners=10)
        assert len(corners) == 10


class TestMatching:
    def make_texture(self, seed=0, shape=(80, 80)):
        rng = np.random.default_rng(seed)
        base = rng.uniform(size=(shape[0] // 4, shape[1] // 4))
        return base.repeat(4, axis=0).repeat(4, axis=1)

    def test_self_match(self):
        img = self.make_texture()
        corners = detect_corners(img, max_corners=20)
        matches = match_correspondences(img, img, corners)
        assert matches
        for m in matches:
            assert m.source == m.target
            assert m.score == pytest.approx(1.0)

    def test_translation_by_five(self):
        img = self.make_texture()
        shifted = np.roll(img, 5, axis=1)
        corners = detect_corners(img, max_corners=20)
        matches = match_correspondences(img, shifted, corners)
        assert matches
        for m in matches:
            if m.source[0] + 5 < 70:    # avoid the wrap-around column
                assert abs(m.target[0] - m.source[0] - 5) <= 1
                assert abs(m.target[1] - m.source[1]) <= 1

    def test_uncorrelated_noise_rejected(self):
        img = self.make_texture(seed=1)
        rng = np.random.default_rng(2)
        noise = rng.uniform(size=img.shape)
        corners = detect_corners(img, max_corners=20)
        matches = match_correspondences(img, noise, corners)
        assert len(matches) <= len(corners) // 4


class TestEstimateHomography:
    def test_exact_recovery_noise_free(self):
        rng = np.random.default_rng(11)
        hom = random_homography(rng)
        points = rng.uniform(20, 600, size=(50, 2))
        est, mask = estimate_homography(make_pairs(hom, points))
        err = np.sqrt(((est.apply(points) - hom.apply(points)) ** 2).sum(axis=1))
        assert err.max() < 1e-6
        assert mask.all()

    def test_identity_pairs(self):
        rng = np.random.default_rng(5)
        points = rng.uniform(0, 100, size=(30, 2))
        est, _ = estimate_homography(make_pairs(Homography.identity(), points))
        assert np.abs(est.matrix - np.eye(3)).max() < 1e-9

    def test_outlier_robustness(self):
        rng = np.random.default_rng(23)
        hom = random_homography(rng)
        inlier_pts = rng.uniform(20, 600, size=(200, 2))
        pairs = make_pairs(hom, inlier_pts)
        n_out = int(0.3 * len(pairs) / 0.7)
        outliers = [Correspondence(tuple(rng.uniform(0, 640, 2)),
                                   tuple(rng.uniform(0, 640, 2)))
                    for _ in range(n_out)]
        est, _ = estimate_homography(pairs + outliers, RansacConfig(seed=1))
        err = np.sqrt(((est.apply(inlier_pts) - hom.apply(inlier_pts)) ** 2).sum(axis=1))
        assert err.max() < 0.5

    def test_too_few_pairs(self):
        with pytest.raises(HomographyEstimationError):
            estimate_homography([Correspondence((0, 0), (0, 0))] * 3)

    def test_seeded_reproducibility(self):
        rng = np.random.default_rng(9)
        hom = random_homography(rng)
        pts = rng.uniform(0, 500, size=(40, 2))
        pairs = make_pairs(hom, pts)
        pairs += [Correspondence(tuple(rng.uniform(0, 500, 2)),
                                 tuple(rng.uniform(0, 500, 2))) for _ in range(10)]
        a, mask_a = estimate_homography(pairs, RansacConfig(seed=42))
        b, mask_b = estimate_homography(pairs, RansacConfig(seed=42))
        assert np.array_equal(a.matrix, b.matrix)
        assert np.array_equal(mask_a, mask_b)


class TestCompose:
    def test_identity_chain(self):
        chain = compose_chain([Homography.identity()] * 5)
        assert np.abs(chain.matrix - np.eye(3)).max() < 1e-9

    def test_translation_composition(self):
        chain = compose_chain([translation(1, 2), translation(3, 4)])
        assert chain.apply([(0.0, 0.0)])[0] == pytest.approx([4.0, 6.0])

    def test_inverse_cancellation(self):
        rng = np.random.default_rng(2)
        hom = random_homography(rng)
        chain = compose_chain([hom, hom.inverse()])
        assert np.abs(chain.matrix - np.eye(3)).max() < 1e-9

    def test_empty_chain_is_identity(self):
        assert np.array_equal(compose_chain([]).matrix, np.eye(3))

    def test_associativity(self):
        rng = np.random.default_rng(8)
        a, b, c = (random_homography(rng) for _ in range(3))
        left = compose_chain([compose_chain([a, b]), c])
        right = compose_chain([a, compose_chain([b, c])])
        assert np.abs(left.matrix - right.matrix).max() < 1e-9

    def test_roundtrip_point_projection(self):
        rng = np.random.default_rng(4)
        hom = random_homography(rng)
        pts = rng.uniform(0, 500, size=(20, 2))
        back = hom.inverse().apply(hom.apply(pts))
        assert np.abs(back - pts).max() < 1e-6


class TestProjection:
    def fg(self, idx, x, y, valid=True):
        return FrameGaze(idx, x, y, None, True, valid)

    def test_identity_homographies_passthrough(self):
        window = [self.fg(i, 10.0 + i, 20.0) for i in range(3)]
        pairwise = [Homography.identity()] * 2
        proj = project_points_to_current(window, pairwise, (100, 100))
        assert proj.points.tolist() == [[10, 20], [11, 20], [12, 20]]
        assert proj.origin_frames == [0, 1, 2]

    def test_accumulated_translations(self):
        window = [self.fg(0, 10.0, 10.0), self.fg(1, 50.0, 50.0),
                  self.fg(2, 60.0, 60.0)]
        pairwise = [translation(1, 0), translation(2, 0)]
        proj = project_points_to_current(window, pairwise, (100, 100))
        assert proj.points[0].tolist() == [13.0, 10.0]
        assert proj.points[1].tolist() == [52.0, 50.0]

    def test_out_of_bounds_dropped(self):
        window = [self.fg(0, 1.0, 10.0), self.fg(1, 50.0, 50.0)]
        pairwise = [translation(-10, 0)]
        proj = project_points_to_current(window, pairwise, (100, 100))
        assert proj.dropped == 1
        assert len(proj.points) == 1

    def test_invalid_frames_skipped(self):
        window = [self.fg(0, 10.0, 10.0, valid=False), self.fg(1, 5.0, 5.0)]
        proj = project_points_to_current(window, [Homography.identity()], (10, 10))
        assert proj.points.tolist() == [[5.0, 5.0]]


def test_rgb_to_gray_weights():
    pixel = np.array([[[255, 0, 0]]], dtype=float)
    assert rgb_to_gray(pixel)[0, 0] == pytest.approx(0.299 * 255)
