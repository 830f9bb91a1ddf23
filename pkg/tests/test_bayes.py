import numpy as np
import pytest

from gpbayes.bayes import (
    BayesProblem,
    Darcy1D,
    EvidenceUnderflowError,
    GaussianDiagPrior,
    Identity,
    LogNormalDiagPrior,
    NoiseModel,
    Scalar1D,
    UniformBoxPrior,
    evidence,
    posterior_density_on_grid,
    posterior_log_density,
    solve_darcy,
)


def conjugate_problem():
    """1-d problem with closed-form posterior N(1/2, 1/2)."""
    return BayesProblem(
        forward=Identity(1),
        y=[1.0],
        noise=NoiseModel([1.0]),
        prior=GaussianDiagPrior([0.0], [1.0]),
    )


class TestMisfit:
    def test_zero_at_exact_fit(self):
        problem = BayesProblem(Identity(1), [2.0], NoiseModel([1.0]), GaussianDiagPrior([0], [1]))
        assert problem.neg_log_likelihood(2.0) == 0.0

    def test_scalar_identity_value(self):
        problem = BayesProblem(Identity(1), [0.0], NoiseModel([1.0]), GaussianDiagPrior([0], [1]))
        assert problem.neg_log_likelihood(2.0) == pytest.approx(2.0, abs=1e-14)

    def test_noise_scaling(self):
        problem = BayesProblem(Identity(1), [0.0], NoiseModel([4.0]), GaussianDiagPrior([0], [1]))
        assert problem.neg_log_likelihood(2.0) == pytest.approx(0.5, abs=1e-14)

    def test_whitening_identity(self):
        rng = np.random.default_rng(8)
        for d in range(1, 9):
            a = rng.standard_normal((d, d))
            gamma = a @ a.T + d * np.eye(d)
            noise = NoiseModel(gamma)
            v = rng.standard_normal(d)
            direct = v @ np.linalg.inv(gamma) @ v
            assert noise.mahalanobis_sq(v) == pytest.approx(direct, abs=1e-10)

    def test_eval_counter(self):
        fwd = Identity(2)
        problem = BayesProblem(fwd, [0.0, 0.0], NoiseModel([1.0, 1.0]),
                               GaussianDiagPrior([0, 0], [1, 1]))
        problem.neg_log_likelihood([0.1, 0.2])
        problem.neg_log_likelihood([0.3, 0.4])
        assert fwd.eval_count == 2


class TestPriors:
    @pytest.mark.parametrize("prior", [
        GaussianDiagPrior([0.5], [2.0]),
        UniformBoxPrior([-1.0], [3.0]),
        LogNormalDiagPrior([0.1], [0.5]),
    ])
    def test_density_integrates_to_one(self, prior):
        lo, hi = prior.effective_box()
        xs = np.linspace(lo[0], hi[0], 200_001)
        dens = np.exp([prior.log_density(x) for x in xs])
        assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("prior,mean,var", [
        (GaussianDiagPrior([0.5], [2.0]), 0.5, 2.0),
        (UniformBoxPrior([-1.0], [3.0]), 1.0, 16.0 / 12.0),
        (LogNormalDiagPrior([0.0], [0.25]), np.exp(0.125), (np.exp(0.25) - 1) * np.exp(0.25)),
    ])
    def test_sampler_matches_density_moments(self, prior, mean, var):
        rng = np.random.default_rng(21)
        draws = prior.sample(200_000, rng)[:, 0]
        assert draws.mean() == pytest.approx(mean, abs=4 * np.sqrt(var / 200_000) + 1e-3)
        assert draws.var() == pytest.approx(var, rel=0.05)

    def test_uniform_prior_outside_support(self):
        prior = UniformBoxPrior([0.0], [1.0])
        assert prior.log_density(2.0) == -np.inf

    def test_lognormal_outside_support(self):
        prior = LogNormalDiagPrior([0.0], [1.0])
        assert prior.log_density(-0.5) == -np.inf


class TestEvidence:
    def test_perfect_forward_gives_peak_data_density(self):
        # forward model reproducing y exactly everywhere: zero misfit, so
        # Z is the peak of the data density N(y; y, Gamma) = 1/sqrt(2 pi)
        class Constant(Identity):
            def _evaluate(self, u):
                return np.array([3.0])

        problem = BayesProblem(Constant(1), [3.0], NoiseModel([1.0]),
                               GaussianDiagPrior([0.0], [1.0]))
        z = evidence(problem, "quadrature")
        assert z.value == pytest.approx(1.0 / np.sqrt(2 * np.pi), abs=1e-8)

    def test_conjugate_value(self):
        z = evidence(conjugate_problem(), "quadrature")
        expected = np.exp(-0.25) / np.sqrt(4 * np.pi)
        assert z.value == pytest.approx(expected, abs=1e-6)

    def test_monte_carlo_agrees_with_quadrature(self):
        problem = conjugate_problem()
        zq = evidence(problem, "quadrature")
        zmc = evidence(problem, "monte_carlo", n_samples=20_000, seed=4)
        assert abs(zmc.value - zq.value) < 3 * zmc.std_error

    def test_underflow_error(self):
        problem = BayesProblem(Identity(1), [1e6], NoiseModel([1e-6]),
                               GaussianDiagPrior([0.0], [1.0]))
        with pytest.raises(EvidenceUnderflowError, match="log"):
            evidence(problem, "quadrature")


class TestPosteriorDensity:
    def test_conjugate_log_density_at_mode(self):
        problem = conjugate_problem()
        z = evidence(problem, "quadrature").value
        # posterior is N(1/2, 1/2); its log density at the mean is -log(pi)/2
        got = posterior_log_density(problem, 0.5, z)
        assert got == pytest.approx(-0.5 * np.log(np.pi), abs=1e-6)

    def test_outside_uniform_support_is_minus_inf(self):
        problem = BayesProblem(Identity(1), [0.5], NoiseModel([1.0]),
                               UniformBoxPrior([0.0], [1.0]))
        z = evidence(problem, "quadrature").value
        assert posterior_log_density(problem, 2.0, z) == -np.inf

    def test_density_integrates_to_one(self):
        problem = conjugate_problem()
        z = evidence(problem, "quadrature").value
        grid = problem.quadrature_grid()
        dens = posterior_density_on_grid(problem, grid, z)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)

    def test_conjugate_closure_moments(self):
        problem = conjugate_problem()
        z = evidence(problem, "quadrature").value
        grid = problem.quadrature_grid()
        dens = posterior_density_on_grid(problem, grid, z)
        mean = np.trapezoid(grid * dens, grid)
        var = np.trapezoid((grid - mean) ** 2 * dens, grid)
        assert mean == pytest.approx(0.5, abs=1e-6)
        assert var == pytest.approx(0.5, abs=1e-6)


class TestDarcy:
    def test_constant_k_linear_pressure(self):
        model = Darcy1D(breakpoints=[], observe_at=[0.25, 0.75],
                        grid_size=64, p_left=0.0, p_right=1.0, source=0.0)
        p, obs = solve_darcy(model, [1.0])
        np.testing.assert_allclose(p, model.nodes, atol=1e-12)
        np.testing.assert_allclose(obs, [0.25, 0.75], atol=1e-12)

    def test_constant_k_with_source(self):
        # -2 p'' = 1, p(0)=p(1)=0  ->  p = (x - x^2) / 4
        model = Darcy1D(breakpoints=[], observe_at=[0.5],
                        grid_size=1024, p_left=0.0, p_right=0.0, source=1.0)
        p, _ = solve_darcy(model, [2.0])
        exact = (model.nodes - model.nodes**2) / 4.0
        assert np.abs(p - exact).max() < 1e-6

    def test_two_layer_interface_solution(self):
        # k=(1,2), breakpoint on a cell interface: flux continuity gives
        # slopes 4/3 and 2/3 with p(1/2) = 2/3
        model = Darcy1D(breakpoints=[0.5], observe_at=[0.5],
                        grid_size=64, p_left=0.0, p_right=1.0, source=0.0)
        p, obs = solve_darcy(model, [1.0, 2.0])
        x = model.nodes
        exact = np.where(x <= 0.5, 4 * x / 3, 2 / 3 + 2 * (x - 0.5) / 3)
        assert np.abs(p - exact).max() < 1e-8
        assert obs[0] == pytest.approx(2 / 3, abs=1e-8)

    def test_flux_conservation(self):
        model = Darcy1D(breakpoints=[0.3, 0.7], observe_at=[0.5],
                        grid_size=128, p_left=1.0, p_right=0.0, source=0.0)
        u = np.array([0.5, 2.0, 1.3])
        p, _ = solve_darcy(model, u)
        h = 1.0 / model.grid_size
        t = model._transmissibilities(u)
        flux = t * np.diff(p) / h
        assert np.abs(flux - flux[0]).max() < 1e-8 * abs(flux[0])

    def test_rejects_nonpositive_permeability(self):
        model = Darcy1D(breakpoints=[0.5], observe_at=[0.5])
        with pytest.raises(ValueError, match="positive"):
            solve_darcy(model, [1.0, -1.0])

    def test_breakpoint_validation(self):
        with pytest.raises(ValueError):
            Darcy1D(breakpoints=[1.5], observe_at=[0.5])
        with pytest.raises(ValueError):
            Darcy1D(breakpoints=[0.5], observe_at=[1.5])

    def test_scalar1d_registry(self):
        fwd = Scalar1D("sin_shifted_square")
        assert fwd(2.5)[0] == pytest.approx(0.0, abs=1e-14)
        with pytest.raises(ValueError, match="unknown scalar function"):
            Scalar1D("nope")
