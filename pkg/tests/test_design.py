import numpy as np
import pytest

from gpbayes.design import (
    EmptyRegionError,
    GaussianDesign,
    PosteriorTruncatedDesign,
    RejectionCapError,
    UniformBoxDesign,
    fill_decay_study,
    fill_distance,
    partition_report,
    sample_design,
    truncation_region,
)


def std_normal_pdf(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))[0]
    return np.exp(-0.5 * x**2) / np.sqrt(2 * np.pi)


class TestSampling:
    def test_uniform_moments(self):
        measure = UniformBoxDesign([-1.0], [1.0])
        draws = sample_design(measure, 10_000, seed=0)[:, 0]
        assert abs(draws.mean()) < 0.03
        assert draws.var() == pytest.approx(1.0 / 3.0, rel=0.05)

    def test_gaussian_moments(self):
        measure = GaussianDesign([1.0], [1.0])
        draws = sample_design(measure, 10_000, seed=1)[:, 0]
        assert draws.mean() == pytest.approx(1.0, abs=0.04)
        assert draws.var() == pytest.approx(1.0, rel=0.05)

    def test_densities(self):
        g = GaussianDesign([0.0], [1.0])
        assert g.density(0.0) == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-12)
        u = UniformBoxDesign([0.0], [2.0])
        assert u.density(1.0) == 0.5
        assert u.density(3.0) == 0.0

    def test_truncated_draws_respect_support_exactly(self):
        measure = PosteriorTruncatedDesign(
            std_normal_pdf, threshold=std_normal_pdf(1.5),
            proposal_box=([-4.0], [4.0]),
        )
        draws = sample_design(measure, 10_000, seed=2)
        vals = np.array([std_normal_pdf(x) for x in draws[:, 0]])
        assert np.all(vals > std_normal_pdf(1.5))
        assert np.abs(draws[:, 0]).max() < 1.5

    def test_truncated_threshold_above_max_hits_cap(self):
        measure = PosteriorTruncatedDesign(
            std_normal_pdf, threshold=1.0,  # density max is ~0.399
            proposal_box=([-4.0], [4.0]), rejection_cap=2000,
        )
        with pytest.raises(RejectionCapError, match="acceptance rate"):
            sample_design(measure, 10, seed=3)

    def test_truncated_density_zero_below_threshold(self):
        t = std_normal_pdf(1.0)
        measure = PosteriorTruncatedDesign(std_normal_pdf, t, ([-4.0], [4.0]))
        assert measure.density(2.0) == 0.0
        assert measure.density(0.0) > 0.0

    def test_reproducible(self):
        measure = GaussianDesign([0.0, 1.0], [1.0, 2.0])
        a = sample_design(measure, 50, seed=11)
        b = sample_design(measure, 50, seed=11)
        np.testing.assert_array_equal(a, b)


class TestFillDistance:
    def test_single_midpoint(self):
        fd = fill_distance(np.array([0.5]), (np.array([0.0]), np.array([1.0])))
        assert fd.value == pytest.approx(0.5, abs=0.0)
        assert fd.method == "exact-1d"

    def test_two_endpoints(self):
        fd = fill_distance(np.array([0.0, 1.0]), (np.array([0.0]), np.array([1.0])))
        assert fd.value == pytest.approx(0.5, abs=0.0)

    def test_uniform_grid_value(self):
        pts = np.linspace(0, 1, 5)
        fd = fill_distance(pts, (np.array([0.0]), np.array([1.0])))
        assert fd.value == pytest.approx(0.125, abs=1e-15)

    def test_exact_agrees_with_brute_force_grid(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(0, 1, size=12)
        exact = fill_distance(pts, (np.array([0.0]), np.array([1.0]))).value
        cand = np.linspace(0, 1, 100_001)
        brute = np.min(np.abs(cand[:, None] - pts[None, :]), axis=1).max()
        assert exact == pytest.approx(brute, abs=1e-5)

    def test_monotone_under_added_points(self):
        rng = np.random.default_rng(6)
        box = (np.array([0.0]), np.array([1.0]))
        for _ in range(20):
            pts = rng.uniform(0, 1, size=6)
            extra = np.append(pts, rng.uniform(0, 1))
            assert fill_distance(extra, box).value <= fill_distance(pts, box).value

    def test_no_point_in_region_is_infinite(self):
        fd = fill_distance(np.array([5.0]), (np.array([0.0]), np.array([1.0])))
        assert fd.value == np.inf

    def test_2d_corner_point(self):
        fd = fill_distance(
            np.array([[0.0, 0.0]]),
            (np.array([0.0, 0.0]), np.array([1.0, 1.0])),
            resolution=64,
        )
        assert fd.value == pytest.approx(np.sqrt(2.0), abs=1e-12)
        assert fd.method == "grid-64"

    def test_region_restricts_design(self):
        # the far point is outside the region, so only 0.2 counts
        fd = fill_distance(np.array([0.2, 9.0]), (np.array([0.0]), np.array([1.0])))
        assert fd.value == pytest.approx(0.8, abs=0.0)


class TestTruncationRegion:
    def test_zero_threshold_keeps_whole_box(self):
        region = truncation_region(std_normal_pdf, 0.0, ([-2.0], [2.0]), resolution=256)
        assert region.contains(-1.9) and region.contains(1.9)
        assert region.intervals[0][0] == pytest.approx(-2.0)
        assert region.intervals[0][1] == pytest.approx(2.0)

    def test_standard_normal_superlevel_interval(self):
        t = std_normal_pdf(1.0)
        region = truncation_region(std_normal_pdf, t, ([-4.0], [4.0]), resolution=512)
        assert len(region.intervals) == 1
        lo, hi = region.intervals[0]
        assert lo == pytest.approx(-1.0, abs=1e-6)
        assert hi == pytest.approx(1.0, abs=1e-6)

    def test_threshold_above_max_is_empty(self):
        with pytest.raises(EmptyRegionError):
            truncation_region(std_normal_pdf, 1.0, ([-4.0], [4.0]))

    def test_bimodal_gives_two_intervals(self):
        def bimodal(x):
            x = np.atleast_1d(x)[0]
            return np.exp(-0.5 * (x - 2) ** 2) + np.exp(-0.5 * (x + 2) ** 2)

        region = truncation_region(bimodal, 0.5, ([-6.0], [6.0]), resolution=1024)
        assert len(region.intervals) == 2

    def test_fill_distance_within_truncation_region(self):
        t = std_normal_pdf(1.0)
        region = truncation_region(std_normal_pdf, t, ([-4.0], [4.0]), resolution=512)
        fd = fill_distance(np.array([0.0]), region)
        assert fd.value == pytest.approx(1.0, abs=1e-5)


class TestFillDecayStudy:
    def test_1d_uniform_rate(self):
        measure = UniformBoxDesign([0.0], [1.0])
        study = fill_decay_study(
            measure, (np.array([0.0]), np.array([1.0])),
            n_list=[16, 32, 64, 128, 256], replications=60, seed=0,
        )
        assert -1.4 <= study.slope <= -0.7

    def test_tail_probability_nonincreasing(self):
        measure = UniformBoxDesign([0.0], [1.0])
        study = fill_decay_study(
            measure, (np.array([0.0]), np.array([1.0])),
            n_list=[16, 64, 256], replications=80, seed=1, tail_threshold=0.05,
        )
        tails = [row.tail_prob for row in study.rows]
        assert tails[0] >= tails[1] >= tails[2]

    def test_mean_h_decreasing(self):
        measure = UniformBoxDesign([0.0, 0.0], [1.0, 1.0])
        study = fill_decay_study(
            measure, (np.array([0.0, 0.0]), np.array([1.0, 1.0])),
            n_list=[8, 32, 128], replications=30, seed=2, resolution=64,
        )
        means = [row.mean_h for row in study.rows]
        assert means[0] > means[1] > means[2]

    def test_samples_recorded(self):
        measure = UniformBoxDesign([0.0], [1.0])
        study = fill_decay_study(
            measure, (np.array([0.0]), np.array([1.0])),
            n_list=[4, 8], replications=5, seed=3,
        )
        assert len(study.samples) == 10
        assert study.samples[0][:2] == (4, 0)


class TestPartitionReport:
    def test_rows_and_sup_density(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(-2, 2, size=40)
        rows = partition_report(pts, std_normal_pdf, (-2.0, 2.0), n_cells=4)
        assert len(rows) == 4
        sups = [r[2] for r in rows]
        assert max(sups) == pytest.approx(std_normal_pdf(0.0), rel=0.01)
        for a, b, _, h in rows:
            assert h <= (b - a) or h == np.inf
