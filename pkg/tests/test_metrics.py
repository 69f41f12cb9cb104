import numpy as np
import pytest

from sgedit.metrics import (mae, predicate_matches_offset, ssim, ssim_map,
                            SSIM_WINDOW, SSIM_SIGMA, SSIM_K1, SSIM_K2)


def brute_force_mae(a, b, roi_mask=None):
    total, count = 0.0, 0
    c, h, w = a.shape
    for ch in range(c):
        for y in range(h):
            for x in range(w):
                if roi_mask is not None and not roi_mask[y, x]:
                    continue
                total += abs(float(a[ch, y, x]) - float(b[ch, y, x]))
                count += 1
    return total / count * 255.0


def brute_force_ssim_map(a, b):
    """Window-by-window reference SSIM, valid centers only."""
    size, sigma = SSIM_WINDOW, SSIM_SIGMA
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    ch, h, wd = a.shape
    out = np.zeros((h - size + 1, wd - size + 1))
    for y in range(out.shape[0]):
        for x in range(out.shape[1]):
            vals = []
            for c in range(ch):
                pa = a[c, y:y + size, x:x + size].astype(np.float64)
                pb = b[c, y:y + size, x:x + size].astype(np.float64)
                mu_a = (w * pa).sum()
                mu_b = (w * pb).sum()
                var_a = (w * pa * pa).sum() - mu_a ** 2
                var_b = (w * pb * pb).sum() - mu_b ** 2
                cov = (w * pa * pb).sum() - mu_a * mu_b
                vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                            / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
            out[y, x] = np.mean(vals)
    return out


class TestMae:
    def test_identical_zero(self, rng):
        a = rng.random((3, 8, 8))
        assert mae(a, a.copy()) == 0.0

    def test_black_vs_white(self):
        a = np.zeros((3, 8, 8))
        b = np.ones((3, 8, 8))
        assert mae(a, b) == pytest.approx(255.0)

    def test_matches_double_loop(self, rng):
        a = rng.random((3, 8, 8))
        b = rng.random((3, 8, 8))
        assert mae(a, b) == pytest.approx(brute_force_mae(a, b), abs=1e-9)

    def test_roi_matches_double_loop(self, rng):
        a = rng.random((3, 8, 8))
        b = rng.random((3, 8, 8))
        roi = [(0.25, 0.25, 0.75, 0.75)]
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:6, 2:6] = True
        assert mae(a, b, roi) == pytest.approx(brute_force_mae(a, b, mask), abs=1e-9)

    def test_empty_roi_warns_zero(self, rng):
        a = rng.random((3, 8, 8))
        with pytest.warns(UserWarning):
            assert mae(a, a, roi=[]) == 0.0

    def test_symmetry(self, rng):
        a = rng.random((3, 8, 8))
        b = rng.random((3, 8, 8))
        assert mae(a, b) == pytest.approx(mae(b, a), abs=1e-12)

    def test_shape_mismatch_raises(self, rng):
        with pytest.raises(ValueError):
            mae(rng.random((3, 8, 8)), rng.random((3, 8, 9)))


class TestSsim:
    def test_identical_hundred(self, rng):
        a = rng.random((3, 16, 16))
        assert ssim(a, a.copy()) == pytest.approx(100.0, abs=1e-9)

    def test_inverted_below_hundred(self, rng):
        a = rng.random((3, 16, 16))
        assert ssim(a, 1.0 - a) < 100.0

    def test_matches_brute_force(self, rng):
        a = rng.random((3, 16, 16))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        got = ssim_map(a, b)
        expected = brute_force_ssim_map(a, b)
        assert np.allclose(got, expected, atol=1e-9)
        assert ssim(a, b) == pytest.approx(expected.mean() * 100.0, abs=1e-6)

    def test_roi_variant_averages_centers(self, rng):
        a = rng.random((3, 16, 16))
        b = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
        roi = [(0.3, 0.3, 0.8, 0.8)]
        full = brute_force_ssim_map(a, b)
        mask = np.zeros((16, 16), dtype=bool)
        mask[5:13, 5:13] = True
        centers = mask[5:11, 5:11]
        assert ssim(a, b, roi) == pytest.approx(full[centers].mean() * 100.0, abs=1e-6)

    def test_symmetry(self, rng):
        a = rng.random((3, 16, 16))
        b = rng.random((3, 16, 16))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-9)

    def test_too_small_raises(self, rng):
        with pytest.raises(ValueError):
            ssim(rng.random((3, 8, 8)), rng.random((3, 8, 8)))

    def test_grayscale_supported(self, rng):
        a = rng.random((16, 16))
        assert ssim(a, a.copy()) == pytest.approx(100.0, abs=1e-9)


class TestPredicateGeometry:
    def test_signs(self):
        assert predicate_matches_offset("left of", -0.2, 0.0)
        assert not predicate_matches_offset("left of", 0.2, 0.0)
        assert predicate_matches_offset("right of", 0.2, 0.0)
        assert predicate_matches_offset("in front of", 0.0, 0.3)
        assert predicate_matches_offset("behind", 0.0, -0.3)
        with pytest.raises(ValueError):
            predicate_matches_offset("near", 0.0, 0.0)
