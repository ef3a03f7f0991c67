import math

import numpy as np
import pytest
from scipy import stats

from smoothcert import (
    DomainError,
    RandomStream,
    SamplerAbortError,
    SingularityError,
    SmoothingFamily,
    UnsupportedError,
    log_density_ratio_shift,
    log_unnormalized_density,
    matched_sigma,
    radius_stats,
    sample,
    sample_chunks,
)
from smoothcert.families import _log_kernel_batch


class TestConstruction:
    def test_variants(self):
        SmoothingFamily.gaussian(3, 1.0)
        SmoothingFamily.laplacian(3, 0.5)
        SmoothingFamily.l2_power_tail(5, 2.0, 1.0)
        SmoothingFamily.l1_power_tail(5, 2.0, 1.0)
        SmoothingFamily.linf_pure(5, 2.0, 1.0)
        SmoothingFamily.mixed_norm(5, 2.0, 1.0)

    def test_scale_validation(self):
        with pytest.raises(DomainError):
            SmoothingFamily.gaussian(3, 0.0)
        with pytest.raises(DomainError):
            SmoothingFamily.laplacian(3, -1.0)
        with pytest.raises(DomainError):
            SmoothingFamily("gaussian", 3, b=1.0)

    def test_k_bounds(self):
        # the radius law needs k < d; k = d is not normalizable
        with pytest.raises(DomainError):
            SmoothingFamily.l2_power_tail(4, 4.0, 1.0)
        with pytest.raises(DomainError):
            SmoothingFamily.mixed_norm(4, -0.5, 1.0)
        with pytest.raises(DomainError):
            SmoothingFamily("gaussian", 3, k=1.0, sigma=1.0)
        # k in [d-1, d) is legal at type level (d=2 vertex checks use k = d-1)
        SmoothingFamily.mixed_norm(2, 1.0, 1.0)


class TestDensities:
    def test_gaussian_value(self):
        fam = SmoothingFamily.gaussian(4, 1.0)
        z = np.array([2.0, 0.0, 0.0, 0.0])  # ||z||^2 = 4
        assert abs(log_unnormalized_density(fam, z) - (-2.0)) <= 1e-12

    def test_power_tail_k0_equals_gaussian(self):
        g = SmoothingFamily.gaussian(6, 0.8)
        p = SmoothingFamily.l2_power_tail(6, 0.0, 0.8)
        rng = np.random.default_rng(1)
        for _ in range(100):
            z = rng.normal(size=6)
            assert log_unnormalized_density(g, z) == log_unnormalized_density(p, z)

    def test_mixed_norm_power_term(self):
        fam = SmoothingFamily.mixed_norm(4, 3.0, 1.0)
        z = np.array([1.0, 0.0, 0.0, 0.0])  # ||z||_inf = 1, power term contributes 0
        assert abs(log_unnormalized_density(fam, z) - (-0.5)) <= 1e-12

    def test_origin_singularity(self):
        fam = SmoothingFamily.l2_power_tail(3, 1.0, 1.0)
        with pytest.raises(SingularityError):
            log_unnormalized_density(fam, np.zeros(3))

    def test_dimension_checked(self):
        fam = SmoothingFamily.gaussian(3, 1.0)
        with pytest.raises(DomainError):
            log_unnormalized_density(fam, np.zeros(4))


class TestDensityRatio:
    def test_identity_shift(self):
        rng = np.random.default_rng(2)
        for fam in (
            SmoothingFamily.gaussian(5, 1.3),
            SmoothingFamily.laplacian(5, 0.7),
            SmoothingFamily.mixed_norm(5, 2.0, 1.0),
        ):
            z = rng.normal(size=5)
            assert log_density_ratio_shift(fam, z, np.zeros(5)) == 0.0

    def test_equidistant_point(self):
        fam = SmoothingFamily.gaussian(1, 1.0)
        assert abs(log_density_ratio_shift(fam, np.array([1.0]), np.array([2.0]))) <= 1e-12

    def test_direct_formula_1d(self):
        fam = SmoothingFamily.gaussian(1, 1.0)
        got = log_density_ratio_shift(fam, np.array([0.0]), np.array([1.0]))
        assert abs(got - (-0.5)) <= 1e-12

    def test_matches_kernel_difference(self):
        # the optimized ratio paths must agree with direct density evaluation
        rng = np.random.default_rng(3)
        families = [
            SmoothingFamily.gaussian(6, 0.9),
            SmoothingFamily.laplacian(6, 1.2),
            SmoothingFamily.l2_power_tail(6, 2.5, 1.1),
            SmoothingFamily.l1_power_tail(6, 1.5, 0.8),
            SmoothingFamily.linf_pure(6, 2.0, 1.0),
            SmoothingFamily.mixed_norm(6, 2.0, 1.0),
        ]
        for fam in families:
            for _ in range(50):
                z = rng.normal(size=6) * 2.0
                delta = rng.normal(size=6)
                direct = float(
                    _log_kernel_batch(fam, (z - delta)[None, :])[0]
                    - _log_kernel_batch(fam, z[None, :])[0]
                )
                assert abs(log_density_ratio_shift(fam, z, delta) - direct) <= 1e-9

    def test_translation_invariance_gaussian(self):
        # ratio depends on (z, delta) only through the formula's norms:
        # adding c to z changes the value per the dot-product formula only
        fam = SmoothingFamily.gaussian(4, 1.0)
        rng = np.random.default_rng(4)
        z, delta = rng.normal(size=4), rng.normal(size=4)
        got = log_density_ratio_shift(fam, z, delta)
        expect = (2.0 * z @ delta - delta @ delta) / 2.0
        assert abs(got - expect) <= 1e-12

    def test_singularity_at_delta(self):
        fam = SmoothingFamily.mixed_norm(3, 1.0, 1.0)
        delta = np.array([0.5, 0.0, 0.0])
        with pytest.raises(SingularityError):
            log_density_ratio_shift(fam, delta.copy(), delta)


class TestSamplers:
    def test_chi_square_mean(self):
        batch = sample(SmoothingFamily.l2_power_tail(10, 0.0, 1.0), 1_000_000, RandomStream(10))
        assert abs((batch.points**2).sum(axis=1).mean() - 10.0) <= 0.05

    def test_l2_power_tail_second_moment(self):
        batch = sample(SmoothingFamily.l2_power_tail(4, 2.0, 1.0), 1_000_000, RandomStream(11))
        assert abs((batch.points**2).sum(axis=1).mean() - 2.0) <= 0.02

    def test_l1_power_tail_norm_mean(self):
        batch = sample(SmoothingFamily.l1_power_tail(5, 1.0, 1.0), 1_000_000, RandomStream(12))
        assert abs(np.abs(batch.points).sum(axis=1).mean() - 4.0) <= 0.02

    def test_mixed_norm_scalar_reduction(self):
        # at d=1 every direction proposal is accepted
        batch = sample(SmoothingFamily.mixed_norm(1, 0.5, 1.0), 10_000, RandomStream(13))
        assert batch.acceptance_rate == 1.0

    def test_rows_never_at_origin(self):
        for fam in (
            SmoothingFamily.mixed_norm(4, 2.0, 1.0),
            SmoothingFamily.l1_power_tail(4, 1.0, 1.0),
            SmoothingFamily.linf_pure(4, 1.0, 1.0),
        ):
            batch = sample(fam, 10_000, RandomStream(14))
            assert np.abs(batch.points).max(axis=1).min() > 0.0

    def test_sampling_pure(self):
        fam = SmoothingFamily.mixed_norm(3, 1.0, 1.0)
        a = sample(fam, 500, RandomStream(15, 2))
        b = sample(fam, 500, RandomStream(15, 2))
        assert np.array_equal(a.points, b.points)

    def test_chunked_draws_cover_n(self):
        fam = SmoothingFamily.gaussian(1000, 1.0)
        total = sum(block.shape[0] for block in sample_chunks(fam, 12_345, RandomStream(16)))
        assert total == 12_345

    def test_sampler_abort_names_parameters(self):
        fam = SmoothingFamily.mixed_norm(50, 40.0, 1.0)
        with pytest.raises(SamplerAbortError, match=r"k=40.0, d=50"):
            sample(fam, 100, RandomStream(17))


class TestReductionLaws:
    def test_gaussian_reduction_two_sample(self):
        a = sample(SmoothingFamily.gaussian(8, 1.0), 100_000, RandomStream(20))
        b = sample(SmoothingFamily.l2_power_tail(8, 0.0, 1.0), 100_000, RandomStream(21))
        p = stats.ks_2samp(
            np.linalg.norm(a.points, axis=1), np.linalg.norm(b.points, axis=1)
        ).pvalue
        assert p > 0.01

    def test_laplacian_reduction_two_sample(self):
        a = sample(SmoothingFamily.laplacian(8, 1.0), 100_000, RandomStream(22))
        b = sample(SmoothingFamily.l1_power_tail(8, 0.0, 1.0), 100_000, RandomStream(23))
        p = stats.ks_2samp(
            np.abs(a.points).sum(axis=1), np.abs(b.points).sum(axis=1)
        ).pvalue
        assert p > 0.01

    def test_reduction_identical_ratios(self):
        g = SmoothingFamily.gaussian(6, 1.1)
        p = SmoothingFamily.l2_power_tail(6, 0.0, 1.1)
        rng = np.random.default_rng(6)
        for _ in range(1000):
            z, delta = rng.normal(size=6), rng.normal(size=6) * 0.5
            assert abs(
                log_density_ratio_shift(g, z, delta) - log_density_ratio_shift(p, z, delta)
            ) <= 1e-12

    def test_radius_law_ks(self):
        d, k, sigma = 7, 2.5, 1.3
        batch = sample(SmoothingFamily.l2_power_tail(d, k, sigma), 100_000, RandomStream(24))
        norms = np.linalg.norm(batch.points, axis=1)
        # r = sigma sqrt(2 G), G ~ Gamma((d-k)/2) => G = r^2 / (2 sigma^2)
        cdf = lambda r: stats.gamma.cdf(r * r / (2.0 * sigma**2), a=(d - k) / 2.0)
        ks = stats.kstest(norms, cdf).statistic
        assert ks < 0.005

    def test_linf_pure_mode(self):
        d, k = 20, 4.0
        batch = sample(SmoothingFamily.linf_pure(d, k, 1.0), 1_000_000, RandomStream(25))
        ninf = np.abs(batch.points).max(axis=1)
        hist, edges = np.histogram(ninf, bins=120, range=(2.0, 6.0))
        mode_emp = 0.5 * (edges[np.argmax(hist)] + edges[np.argmax(hist) + 1])
        mode_true = math.sqrt(d - 1.0 - k)
        assert abs(mode_emp - mode_true) <= 0.05 * mode_true

    def test_mixed_norm_2d_histogram_tv(self):
        # binned sample law vs quadrature-normalized density
        fam = SmoothingFamily.mixed_norm(2, 0.5, 1.0)
        n = 1_000_000
        batch = sample(fam, n, RandomStream(26))
        extent, bins = 4.0, 24
        hist, _, _ = np.histogram2d(
            batch.points[:, 0], batch.points[:, 1],
            bins=bins, range=[[-extent, extent], [-extent, extent]],
        )
        emp = hist / n
        # true bin masses on a 20x20 midpoint subgrid per bin
        sub = 20
        m = bins * sub
        step = 2.0 * extent / m
        centers = -extent + (np.arange(m) + 0.5) * step
        xx, yy = np.meshgrid(centers, centers, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        with np.errstate(divide="ignore"):
            density = np.exp(_log_kernel_batch(fam, pts)).reshape(m, m)
        true = density.reshape(bins, sub, bins, sub).sum(axis=(1, 3))
        true /= density.sum()
        inside = emp.sum()
        tv = 0.5 * (np.abs(emp - true).sum() + (1.0 - inside))
        assert tv < 0.01

    def test_thin_shell_gaussian(self):
        d, n = 1000, 100_000
        hits = 0
        target = math.sqrt(d)
        for block in sample_chunks(SmoothingFamily.gaussian(d, 1.0), n, RandomStream(27)):
            norms = np.linalg.norm(block, axis=1)
            hits += int(((norms >= target - 4.0) & (norms <= target + 4.0)).sum())
        assert hits / n >= 0.99

    def test_thin_shell_laplacian(self):
        d, n, delta = 1000, 100_000, 0.05
        width = 1.0 / math.sqrt(d * delta)
        hits = 0
        for block in sample_chunks(SmoothingFamily.laplacian(d, 1.0), n, RandomStream(28)):
            means = np.abs(block).sum(axis=1) / d
            hits += int(((means >= 1.0 - width) & (means <= 1.0 + width)).sum())
        assert hits / n >= 0.95


class TestRadiusStats:
    def test_l2_modes(self):
        assert radius_stats(SmoothingFamily.l2_power_tail(10, 0.0, 1.0)).mode == 3.0
        assert radius_stats(SmoothingFamily.l2_power_tail(10, 5.0, 1.0)).mode == 2.0

    def test_l1_mean(self):
        assert radius_stats(SmoothingFamily.l1_power_tail(5, 1.0, 2.0)).mean == 8.0

    def test_gaussian_mean_d100(self):
        stats_ = radius_stats(SmoothingFamily.gaussian(100, 1.0))
        assert abs(stats_.mean - 9.975031639550789) <= 1e-9

    def test_second_moment_identity(self):
        st_ = radius_stats(SmoothingFamily.l2_power_tail(12, 3.0, 0.7))
        m = 12 - 1 - 3.0
        assert abs((st_.variance + st_.mean**2) - 0.7**2 * (m + 1.0)) <= 1e-12

    def test_variance_nonnegative(self):
        for k in (0.0, 0.5, 3.0, 8.5):
            assert radius_stats(SmoothingFamily.l2_power_tail(10, k, 2.0)).variance >= 0.0

    def test_mixed_unsupported(self):
        with pytest.raises(UnsupportedError):
            radius_stats(SmoothingFamily.mixed_norm(5, 1.0, 1.0))

    def test_sample_moment_agreement(self):
        fam = SmoothingFamily.l2_power_tail(9, 2.0, 1.2)
        st_ = radius_stats(fam)
        norms = np.linalg.norm(sample(fam, 1_000_000, RandomStream(29)).points, axis=1)
        se_mean = norms.std() / math.sqrt(norms.size)
        assert abs(norms.mean() - st_.mean) <= 4.0 * se_mean
        centered = (norms - norms.mean()) ** 2
        se_var = centered.std() / math.sqrt(norms.size)
        assert abs(norms.var() - st_.variance) <= 4.0 * se_var


class TestMatchedSigma:
    def test_identity_at_k0(self):
        assert matched_sigma(10, 0.0, 0.37) == 0.37

    def test_sqrt_two(self):
        assert abs(matched_sigma(101, 50.0, 1.0) - math.sqrt(2.0)) <= 1e-12

    def test_cifar_scale(self):
        # d = 3*32*32, k = 500 at sigma0 = 0.5
        assert abs(matched_sigma(3073, 500.0, 0.5) - 0.5 * math.sqrt(3072.0 / 2572.0)) <= 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            matched_sigma(10, 9.0, 1.0)
        with pytest.raises(DomainError):
            matched_sigma(10, 9.5, 1.0)


class TestSampleBatchExport:
    def test_csv_roundtrip(self, tmp_path):
        batch = sample(SmoothingFamily.gaussian(3, 1.0), 50, RandomStream(30))
        path = tmp_path / "samples.csv"
        batch.to_csv(path)
        header, *rows = path.read_text().strip().splitlines()
        assert header == "z0,z1,z2"
        parsed = np.array([[float(v) for v in row.split(",")] for row in rows])
        assert np.array_equal(parsed, batch.points)
