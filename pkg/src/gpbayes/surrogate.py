"""Surrogate posterior densities built from GP emulators.

Three approximations of the posterior are supported, each from an
emulator of either the misfit Phi or the forward map G:

* mean-based:  likelihood exp(-m_N(u)) using only the predictive mean;
* marginal:    expected likelihood E[exp(-Phi_N(u))] over the emulator's
  predictive distribution, which has closed forms (a log-normal mean
  when emulating Phi; a variance-inflated Gaussian when emulating G);
* sample-based: one frozen draw of the emulator used as if it were the
  truth.
"""

from __future__ import annotations

import numpy as np

from .bayes import BayesProblem, EvidenceResult, _integrate_exp_on_grid
from .gp import GPPosterior, predict_mean, predict_var, sample_path_on_grid
from .util import as_point, as_points

__all__ = [
    "PhiEmulator",
    "GEmulator",
    "SurrogatePosterior",
    "emulate_phi",
    "emulate_forward",
    "monte_carlo_marginal_check",
]


def _scalar(x) -> float:
    # predict_* returns a length-1 vector for 1-d single-point queries
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size != 1:
        raise ValueError("expected a scalar prediction")
    return float(arr[0])


class PhiEmulator:
    """GP emulator of the scalar misfit Phi."""

    def __init__(self, gp: GPPosterior):
        self.gp = gp

    @property
    def dim(self) -> int:
        return self.gp.dim

    @property
    def design(self) -> np.ndarray:
        return self.gp.design


class GEmulator:
    """Independent per-output GP emulators of the forward map, shared design."""

    def __init__(self, gps: list[GPPosterior]):
        if not gps:
            raise ValueError("need at least one output emulator")
        base = gps[0].design
        for gp in gps[1:]:
            if gp.design.shape != base.shape or not np.array_equal(gp.design, base):
                raise ValueError("output emulators must share the design")
        self.gps = gps

    @property
    def dim(self) -> int:
        return self.gps[0].dim

    @property
    def design(self) -> np.ndarray:
        return self.gps[0].design

    def predict(self, u):
        means = np.array([_scalar(predict_mean(gp, u)) for gp in self.gps])
        variances = np.array([_scalar(predict_var(gp, u)) for gp in self.gps])
        return means, variances


def emulate_phi(problem: BayesProblem, kernel, design, noise_variance: float = 0.0, mean=0.0) -> PhiEmulator:
    """Train a misfit emulator on Phi evaluated at the design points."""
    from .gp import GPPrior, fit

    pts = as_points(design, dim=problem.dim)
    values = problem.neg_log_likelihood_many(pts)
    return PhiEmulator(fit(GPPrior(kernel, mean=mean), pts, values, noise_variance))


def emulate_forward(problem: BayesProblem, kernel, design, noise_variance: float = 0.0) -> GEmulator:
    """Train one emulator per output of the forward map on a shared design."""
    from .gp import GPPrior, fit

    pts = as_points(design, dim=problem.dim)
    outputs = np.array([problem.forward(p) for p in pts])  # (n, d_y)
    gps = [
        fit(GPPrior(kernel), pts, outputs[:, j], noise_variance)
        for j in range(outputs.shape[1])
    ]
    return GEmulator(gps)


class SurrogatePosterior:
    """Approximate posterior density from a GP emulator.

    Parameters
    ----------
    problem : BayesProblem
    target : PhiEmulator or GEmulator
    kind : str
        One of ``mean``, ``marginal``, ``sample``.
    sample_grid, sample_seed
        For ``kind="sample"`` only (1-d): the grid on which one emulator
        draw is realized once and then interpolated piecewise-linearly.
    """

    def __init__(self, problem: BayesProblem, target, kind: str,
                 sample_grid=None, sample_seed: int | None = None):
        if kind not in ("mean", "marginal", "sample"):
            raise ValueError(f"unknown surrogate kind {kind!r}")
        if target.dim != problem.dim:
            raise ValueError("emulator and problem dimensions differ")
        self.problem = problem
        self.target = target
        self.kind = kind
        self.z = None
        self.z_info: EvidenceResult | None = None
        self._path_grid = None
        self._path_values = None
        self.sample_seed = sample_seed
        if kind == "sample":
            if not isinstance(target, PhiEmulator):
                raise ValueError("sample-based surrogates require a misfit emulator")
            if problem.dim != 1:
                raise ValueError("sample-based surrogates are 1-d only")
            if sample_grid is None:
                sample_grid = self.problem.quadrature_grid()
            if sample_seed is None:
                raise ValueError("sample-based surrogates need a seed")
            grid = np.asarray(sample_grid, dtype=np.float64).reshape(-1)
            self._path_grid = grid
            self._path_values = sample_path_on_grid(target.gp, grid, sample_seed)

    @property
    def dim(self) -> int:
        return self.problem.dim

    def _log_likelihood(self, u) -> float:
        """Log of the surrogate data likelihood at u (prior excluded).

        Likelihoods carry their Gaussian normalization constants (as in
        the exact problem), so surrogate evidence values are directly
        comparable with the true evidence and, for forward-map
        emulators, the mean-based and variance-inflated likelihoods
        agree pointwise wherever the predictive variance vanishes.
        """
        u = as_point(u, dim=self.dim)
        if isinstance(self.target, PhiEmulator):
            const = self.problem.noise.log_norm_const
            if self.kind == "sample":
                x = u[0]
                if x < self._path_grid[0] or x > self._path_grid[-1]:
                    raise ValueError(
                        f"point {x} outside the realized sample grid "
                        f"[{self._path_grid[0]}, {self._path_grid[-1]}]"
                    )
                return const - float(np.interp(x, self._path_grid, self._path_values))
            m = _scalar(predict_mean(self.target.gp, u))
            if self.kind == "mean":
                return const - m
            return const - m + 0.5 * _scalar(predict_var(self.target.gp, u))

        means, variances = self.target.predict(u)
        resid = self.problem.y - means
        gamma = self.problem.noise.gamma
        if self.kind == "mean":
            cov = gamma
        elif self.kind == "marginal":
            cov = gamma + np.diag(variances)
        else:  # pragma: no cover - blocked in __init__
            raise AssertionError
        lower = np.linalg.cholesky(cov)
        w = np.linalg.solve(lower, resid)
        return (
            -0.5 * resid.size * np.log(2.0 * np.pi)
            - float(np.sum(np.log(np.diag(lower))))
            - 0.5 * float(w @ w)
        )

    def unnormalized_log_density(self, u) -> float:
        """log prior + surrogate log likelihood (no normalization)."""
        lp = self.problem.prior.log_density(u)
        if lp == -np.inf:
            return -np.inf
        return lp + self._log_likelihood(u)

    def normalize(self, method: str = "quadrature", n_nodes: int | None = None,
                  n_samples: int = 10_000, seed: int = 0) -> "SurrogatePosterior":
        """Compute the normalization constant; returns self (updated)."""
        if method == "quadrature":
            grid = self.problem.quadrature_grid(n_nodes)
            if isinstance(grid, tuple):
                ax, ay = grid
                log_vals = np.empty((ax.size, ay.size))
                for i, x in enumerate(ax):
                    for j, yv in enumerate(ay):
                        log_vals[i, j] = self.unnormalized_log_density((x, yv))
                n_pts = ax.size * ay.size
            else:
                log_vals = np.array(
                    [self.unnormalized_log_density(x) for x in grid]
                )
                n_pts = grid.size
            z = _integrate_exp_on_grid(log_vals, grid)
            self.z_info = EvidenceResult(z, "quadrature", n_pts)
        elif method == "monte_carlo":
            rng = np.random.default_rng(seed)
            draws = self.problem.prior.sample(n_samples, rng)
            vals = np.exp([self._log_likelihood(p) for p in draws])
            z = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / np.sqrt(n_samples))
            self.z_info = EvidenceResult(z, "monte_carlo", n_samples, std_error=se)
        else:
            raise ValueError(f"unknown normalization method {method!r}")
        if not z > 0:
            raise ArithmeticError("surrogate normalization constant is zero")
        self.z = z
        return self

    def log_density(self, u) -> float:
        if self.z is None:
            raise RuntimeError("call normalize() before evaluating the density")
        val = self.unnormalized_log_density(u)
        return val - np.log(self.z) if val != -np.inf else -np.inf

    def density_on_grid(self, grid) -> np.ndarray:
        """Normalized density on a 1-d array grid or (axis_x, axis_y) pair."""
        if self.z is None:
            raise RuntimeError("call normalize() before evaluating the density")
        if isinstance(grid, tuple):
            ax, ay = grid
            out = np.empty((ax.size, ay.size))
            for i, x in enumerate(ax):
                for j, yv in enumerate(ay):
                    out[i, j] = np.exp(self.log_density((x, yv)))
            return out
        grid = np.asarray(grid, dtype=np.float64).reshape(-1)
        return np.exp([self.log_density(x) for x in grid])


def monte_carlo_marginal_check(s: SurrogatePosterior, u, n_draws: int, seed: int) -> float:
    """Monte Carlo estimate of E[exp(-Phi_N(u))] for a marginal misfit surrogate.

    Test oracle for the closed form exp(-m + k/2): draws Phi_N(u) from
    its predictive normal and averages exp(-draw).
    """
    if s.kind != "marginal" or not isinstance(s.target, PhiEmulator):
        raise ValueError("check applies to marginal surrogates of the misfit")
    u = as_point(u, dim=s.dim)
    m = _scalar(predict_mean(s.target.gp, u))
    k = _scalar(predict_var(s.target.gp, u))
    rng = np.random.default_rng(seed)
    draws = m + np.sqrt(k) * rng.standard_normal(n_draws)
    return float(np.mean(np.exp(-draws)))
