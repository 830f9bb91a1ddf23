import numpy as np
import pytest

from gpbayes.bayes import (
    BayesProblem,
    GaussianDiagPrior,
    Identity,
    NoiseModel,
    evidence,
)
from gpbayes.kernels import KernelSpec
from gpbayes.surrogate import (
    SurrogatePosterior,
    emulate_forward,
    emulate_phi,
    monte_carlo_marginal_check,
)


def conjugate_problem():
    return BayesProblem(
        forward=Identity(1),
        y=[1.0],
        noise=NoiseModel([1.0]),
        prior=GaussianDiagPrior([0.0], [1.0]),
    )


def dense_phi_emulator(problem, n=20, span=(-4.0, 5.0), family="matern32"):
    design = np.linspace(*span, n)
    kernel = KernelSpec(family, lengthscale=1.0, variance=4.0)
    return emulate_phi(problem, kernel, design)


class TestPhiEmulatorDensities:
    def test_mean_based_matches_truth_at_design_points(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem)
        surr = SurrogatePosterior(problem, emu, "mean")
        for u in emu.design[:, 0]:
            assert surr.unnormalized_log_density(u) == pytest.approx(
                problem.log_unnormalized_posterior(u), abs=1e-8
            )

    def test_marginal_exceeds_mean_by_half_variance(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem, n=4, span=(-1.0, 2.0))
        mean_s = SurrogatePosterior(problem, emu, "mean")
        marg_s = SurrogatePosterior(problem, emu, "marginal")
        from gpbayes.gp import predict_var

        for u in (-2.0, 0.3, 1.7, 4.0):
            gap = marg_s.unnormalized_log_density(u) - mean_s.unnormalized_log_density(u)
            assert gap == pytest.approx(0.5 * predict_var(emu.gp, u), abs=1e-12)
            assert gap >= 0

    def test_collapse_when_variance_vanishes(self):
        # evaluated on the design itself the predictive variance is ~0,
        # so mean-based and marginal agree pointwise
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem)
        mean_s = SurrogatePosterior(problem, emu, "mean")
        marg_s = SurrogatePosterior(problem, emu, "marginal")
        for u in emu.design[:, 0]:
            assert marg_s.unnormalized_log_density(u) == pytest.approx(
                mean_s.unnormalized_log_density(u), abs=1e-10
            )

    def test_outside_prior_support_is_minus_inf(self):
        from gpbayes.bayes import UniformBoxPrior

        problem = BayesProblem(Identity(1), [0.5], NoiseModel([1.0]),
                               UniformBoxPrior([0.0], [1.0]))
        emu = emulate_phi(problem, KernelSpec("matern12", 1.0, 1.0),
                          np.linspace(0.1, 0.9, 5))
        surr = SurrogatePosterior(problem, emu, "mean")
        assert surr.unnormalized_log_density(1.5) == -np.inf


class TestGEmulatorDensities:
    def test_variance_inflation_single_output(self):
        # far from the design the predictive variance is ~ kernel variance,
        # inflating Gamma in the marginal likelihood
        problem = BayesProblem(Identity(1), [2.0], NoiseModel([1.0]),
                               GaussianDiagPrior([0.0], [4.0]))
        kernel = KernelSpec("matern12", 1.0, 1.0)
        emu = emulate_forward(problem, kernel, np.array([50.0]))
        mean_s = SurrogatePosterior(problem, emu, "mean")
        marg_s = SurrogatePosterior(problem, emu, "marginal")
        u = 0.0  # 50 lengthscales from the design: m ~ 0, k ~ 1; resid = 2
        lp = problem.prior.log_density(u)
        mean_ll = mean_s.unnormalized_log_density(u) - lp + 0.5 * np.log(2 * np.pi)
        marg_ll = marg_s.unnormalized_log_density(u) - lp + 0.5 * np.log(2 * np.pi)
        assert mean_ll == pytest.approx(-2.0, abs=1e-5)
        assert marg_ll == pytest.approx(-0.5 * np.log(2.0) - 1.0, abs=1e-5)
        assert marg_ll > mean_ll  # heavier tail under inflation

    def test_likelihoods_coincide_at_design_points(self):
        problem = BayesProblem(Identity(1), [2.0], NoiseModel([1.0]),
                               GaussianDiagPrior([0.0], [4.0]))
        kernel = KernelSpec("matern32", 1.0, 1.0)
        design = np.array([-1.0, 0.5, 2.0])
        emu = emulate_forward(problem, kernel, design)
        mean_s = SurrogatePosterior(problem, emu, "mean")
        marg_s = SurrogatePosterior(problem, emu, "marginal")
        for u in design:
            assert marg_s.unnormalized_log_density(u) == pytest.approx(
                mean_s.unnormalized_log_density(u), abs=1e-10
            )

    def test_requires_shared_design(self):
        from gpbayes.gp import GPPrior, fit
        from gpbayes.surrogate import GEmulator

        kernel = KernelSpec("matern12", 1.0, 1.0)
        gp1 = fit(GPPrior(kernel), [0.0, 1.0], [0.0, 1.0])
        gp2 = fit(GPPrior(kernel), [0.0, 2.0], [0.0, 1.0])
        with pytest.raises(ValueError, match="share"):
            GEmulator([gp1, gp2])


class TestNormalization:
    def test_dense_emulator_recovers_true_evidence(self):
        problem = conjugate_problem()
        z_true = evidence(problem, "quadrature").value
        emu = dense_phi_emulator(problem)
        surr = SurrogatePosterior(problem, emu, "mean").normalize()
        assert surr.z == pytest.approx(z_true, rel=1e-3)

    def test_eight_point_emulator_within_one_percent(self):
        problem = conjugate_problem()
        z_true = evidence(problem, "quadrature").value
        design = np.linspace(-3.0, 3.0, 8)
        emu = emulate_phi(problem, KernelSpec("sqexp", 1.5, 4.0), design)
        surr = SurrogatePosterior(problem, emu, "mean").normalize()
        assert surr.z == pytest.approx(z_true, rel=0.01)

    def test_marginal_evidence_dominates_mean_based(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem, n=4, span=(-1.0, 2.0))
        z_mean = SurrogatePosterior(problem, emu, "mean").normalize().z
        z_marg = SurrogatePosterior(problem, emu, "marginal").normalize().z
        assert z_marg >= z_mean

    def test_monte_carlo_normalization_agrees(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem)
        sq = SurrogatePosterior(problem, emu, "mean").normalize()
        smc = SurrogatePosterior(problem, emu, "mean").normalize(
            "monte_carlo", n_samples=20_000, seed=3
        )
        assert abs(smc.z - sq.z) < 3 * smc.z_info.std_error

    def test_density_integrates_to_one(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem)
        surr = SurrogatePosterior(problem, emu, "marginal").normalize()
        grid = problem.quadrature_grid()
        dens = surr.density_on_grid(grid)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-4)


class TestSampleBased:
    def test_same_seed_reproducible(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem, n=2, span=(0.0, 1.0))
        grid = np.linspace(-8, 8, 257)
        s1 = SurrogatePosterior(problem, emu, "sample", sample_grid=grid, sample_seed=5)
        s2 = SurrogatePosterior(problem, emu, "sample", sample_grid=grid, sample_seed=5)
        xs = np.linspace(-6, 6, 50)
        v1 = [s1.unnormalized_log_density(x) for x in xs]
        v2 = [s2.unnormalized_log_density(x) for x in xs]
        np.testing.assert_array_equal(v1, v2)

    def test_coarse_emulator_seeds_visibly_differ(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem, n=2, span=(0.0, 1.0))
        grid = np.linspace(-8, 8, 257)
        s1 = SurrogatePosterior(problem, emu, "sample", sample_grid=grid, sample_seed=1).normalize()
        s2 = SurrogatePosterior(problem, emu, "sample", sample_grid=grid, sample_seed=2).normalize()
        xs = np.linspace(-4, 4, 200)
        d1 = s1.density_on_grid(xs)
        d2 = s2.density_on_grid(xs)
        assert np.abs(d1 - d2).max() > 1e-3

    def test_extrapolation_outside_grid_rejected(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem, n=3, span=(0.0, 1.0))
        grid = np.linspace(-2, 2, 65)
        surr = SurrogatePosterior(problem, emu, "sample", sample_grid=grid, sample_seed=0)
        with pytest.raises(ValueError, match="outside"):
            surr.unnormalized_log_density(3.0)

    def test_sample_kind_requires_seed(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem, n=3)
        with pytest.raises(ValueError, match="seed"):
            SurrogatePosterior(problem, emu, "sample", sample_grid=np.linspace(-1, 1, 9))


class TestMarginalClosedForm:
    def test_zero_variance_reduces_to_exp_of_mean(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem)
        surr = SurrogatePosterior(problem, emu, "marginal")
        u = emu.design[3]
        from gpbayes.gp import predict_mean

        got = monte_carlo_marginal_check(surr, u, n_draws=100, seed=0)
        assert got == pytest.approx(np.exp(-predict_mean(emu.gp, u)), rel=1e-10)

    @pytest.mark.parametrize("m,k", [(1.0, 2.0), (0.0, 0.5)])
    def test_against_lognormal_mean(self, m, k):
        rng = np.random.default_rng(14)
        draws = m + np.sqrt(k) * rng.standard_normal(100_000)
        vals = np.exp(-draws)
        mc = vals.mean()
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(mc - np.exp(-m + 0.5 * k)) < 3 * se

    def test_check_rejects_wrong_kind(self):
        problem = conjugate_problem()
        emu = dense_phi_emulator(problem)
        surr = SurrogatePosterior(problem, emu, "mean")
        with pytest.raises(ValueError, match="marginal"):
            monte_carlo_marginal_check(surr, 0.0, 10, 0)
