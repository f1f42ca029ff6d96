import math

import numpy as np
import pytest

from scribbleprop import errors
from scribbleprop.core import LabelMap, Scribble, ScribbleSet, polyline_chain, rasterize
from scribbleprop.evaluation import (SynthSpec, generate_synthetic, miou,
                                     shorten_scribbles, _chain_steps)


class TestMiou:
    def test_identity(self):
        m = LabelMap(np.array([[0, 1], [2, 1]], dtype=np.uint8))
        assert miou(m, m, 3).mean == 1.0

    def test_disjoint_predictions(self):
        pred = LabelMap(np.zeros((2, 2), dtype=np.uint8))
        gt = LabelMap(np.ones((2, 2), dtype=np.uint8))
        report = miou(pred, gt, 2)
        assert report.per_class[0] == 0.0
        assert report.per_class[1] == 0.0
        assert report.mean == 0.0

    def test_hand_counted_case(self):
        gt = LabelMap(np.array([[0, 0, 1, 1]], dtype=np.uint8))
        pred = LabelMap(np.array([[0, 1, 1, 1]], dtype=np.uint8))
        report = miou(pred, gt, 2)
        assert report.per_class[0] == pytest.approx(1 / 2)
        assert report.per_class[1] == pytest.approx(2 / 3)
        assert report.mean == pytest.approx(7 / 12)

    def test_absent_class_is_none(self):
        m = LabelMap(np.zeros((2, 2), dtype=np.uint8))
        report = miou(m, m, 3)
        assert report.per_class[0] == 1.0
        assert report.per_class[1] is None
        assert report.per_class[2] is None
        assert report.mean == 1.0

    def test_unknown_gt_pixels_excluded(self):
        gt = LabelMap(np.array([[255, 0], [1, 1]], dtype=np.uint8))
        pred = LabelMap(np.array([[1, 0], [1, 1]], dtype=np.uint8))
        report = miou(pred, gt, 2)
        # the (255) pixel does not count against class 1
        assert report.per_class[0] == 1.0
        assert report.per_class[1] == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(errors.DimensionMismatch):
            miou(LabelMap(np.zeros((2, 2), dtype=np.uint8)),
                 LabelMap(np.zeros((3, 2), dtype=np.uint8)), 2)

    def test_identity_on_random_sentinel_free_maps(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            m = LabelMap(rng.integers(0, 5, size=(6, 7)).astype(np.uint8))
            assert miou(m, m, 5).mean == 1.0


class TestShorten:
    def make_set(self):
        return ScribbleSet("x", 120, 40, [
            Scribble(1, [(5, 5), (104, 5)]),          # straight 100-px line
            Scribble(2, [(10, 30), (40, 10), (70, 30)]),
            Scribble(0, [(100, 35)]),
        ])

    def test_ratio_one_is_identity(self):
        sset = self.make_set()
        out = shorten_scribbles(sset, 1.0, seed=3)
        assert [s.polyline for s in out.scribbles] == [s.polyline for s in sset.scribbles]
        assert [s.category for s in out.scribbles] == [1, 2, 0]

    def test_ratio_zero_gives_spots(self):
        out = shorten_scribbles(self.make_set(), 0.0, seed=3)
        for s in out.scribbles:
            assert len(s.polyline) == 1

    def test_spot_is_an_original_endpoint(self):
        sset = self.make_set()
        out = shorten_scribbles(sset, 0.0, seed=3)
        for orig, spot in zip(sset.scribbles, out.scribbles):
            chain = polyline_chain(orig.polyline)
            assert spot.polyline[0] in (chain[0], chain[-1])

    def test_straight_line_half_length(self):
        sset = ScribbleSet("x", 120, 10, [Scribble(1, [(5, 5), (104, 5)])])
        out = shorten_scribbles(sset, 0.5, seed=0)
        chain = polyline_chain(out.scribbles[0].polyline)
        kept = sum(_chain_steps(chain))
        assert 49 <= kept <= 51

    def test_containment_in_original_raster(self):
        sset = self.make_set()
        for ratio in (0.0, 0.3, 0.5, 0.8, 1.0):
            out = shorten_scribbles(sset, ratio, seed=7)
            for orig, short in zip(sset.scribbles, out.scribbles):
                orig_pix = rasterize(orig, 120, 40)
                short_pix = rasterize(short, 120, 40)
                assert short_pix <= orig_pix

    def test_nested_for_decreasing_ratios_same_seed(self):
        sset = self.make_set()
        r_hi = shorten_scribbles(sset, 0.8, seed=11)
        r_lo = shorten_scribbles(sset, 0.3, seed=11)
        for hi, lo in zip(r_hi.scribbles, r_lo.scribbles):
            assert rasterize(lo, 120, 40) <= rasterize(hi, 120, 40)

    def test_seed_controls_endpoint_choice(self):
        sset = ScribbleSet("x", 120, 10, [Scribble(1, [(5, 5), (104, 5)])])
        spots = {shorten_scribbles(sset, 0.0, seed=s).scribbles[0].polyline[0]
                 for s in range(10)}
        assert spots == {(5, 5), (104, 5)}

    def test_category_and_radius_preserved(self):
        sset = ScribbleSet("x", 50, 50, [Scribble(4, [(10, 10), (30, 30)], 2)])
        out = shorten_scribbles(sset, 0.5, seed=0)
        assert out.scribbles[0].category == 4
        assert out.scribbles[0].brush_radius == 2

    def test_invalid_ratio(self):
        with pytest.raises(errors.InvalidParameter):
            shorten_scribbles(self.make_set(), 1.5)


class TestGenerate:
    def test_deterministic_per_seed(self):
        a_img, a_gt, a_ss = generate_synthetic(SynthSpec(seed=9, noise_std=15.0))
        b_img, b_gt, b_ss = generate_synthetic(SynthSpec(seed=9, noise_std=15.0))
        assert np.array_equal(a_img.pixels, b_img.pixels)
        assert np.array_equal(a_gt.labels, b_gt.labels)
        assert [s.polyline for s in a_ss.scribbles] == [s.polyline for s in b_ss.scribbles]

    def test_scribbles_sit_on_their_category(self):
        for seed in range(8):
            img, gt, sset = generate_synthetic(SynthSpec(seed=seed))
            for s in sset.scribbles:
                for x, y in rasterize(s, gt.width, gt.height):
                    assert gt.labels[y, x] == s.category

    def test_scribbles_keep_margin_from_boundaries(self):
        for seed in range(8):
            img, gt, sset = generate_synthetic(SynthSpec(seed=seed))
            for s in sset.scribbles:
                for x, y in rasterize(s, gt.width, gt.height):
                    # no differently-labeled pixel closer than 2 px
                    for dx in range(-1, 2):
                        for dy in range(-1, 2):
                            px = min(max(x + dx, 0), gt.width - 1)
                            py = min(max(y + dy, 0), gt.height - 1)
                            assert gt.labels[py, px] == s.category

    def test_region_count_and_palette(self):
        spec = SynthSpec(seed=4, min_regions=3, max_regions=5)
        img, gt, sset = generate_synthetic(spec)
        used = set(np.unique(gt.labels).tolist())
        assert 0 in used
        assert 3 <= len(used) <= 5
        assert used <= set(range(len(spec.palette)))
        assert len(sset.scribbles) == len(used)

    def test_scribble_length_tracks_fraction(self):
        # a wide rectangle-dominated case: check the generated arc length
        spec = SynthSpec(width=160, height=120, seed=2, scribble_fraction=0.7)
        img, gt, sset = generate_synthetic(spec)
        for s in sset.scribbles[1:]:  # skip background stroke
            ys, xs = np.nonzero(gt.labels == s.category)
            bw = xs.max() - xs.min() + 1
            bh = ys.max() - ys.min() + 1
            target = 0.7 * max(bw, bh)
            kept = sum(_chain_steps(polyline_chain(s.polyline)))
            # clamped only when the margin rule bites; never longer than target
            assert kept <= target + 1
            assert kept >= min(target - 1, target * 0.75)

    def test_noise_zero_is_exact_palette(self):
        spec = SynthSpec(seed=0, noise_std=0.0)
        img, gt, sset = generate_synthetic(spec)
        for c in np.unique(gt.labels):
            region = gt.labels == c
            assert np.array_equal(
                np.unique(img.pixels[region].reshape(-1, 3), axis=0),
                np.array([spec.palette[int(c)]], dtype=np.uint8))

    def test_invalid_spec(self):
        with pytest.raises(errors.InvalidSpec):
            SynthSpec(min_regions=1).validate()
        with pytest.raises(errors.InvalidSpec):
            SynthSpec(scribble_fraction=1.2).validate()
        with pytest.raises(errors.InvalidSpec):
            SynthSpec(max_regions=100).validate()
