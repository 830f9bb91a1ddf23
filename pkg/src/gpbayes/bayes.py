"""Inverse-problem primitives: forward models, likelihood, prior, posterior.

The data model is y = G(u) + eta with Gaussian noise eta ~ N(0, Gamma),
so the data likelihood is the Gaussian density N(y; G(u), Gamma) and the
misfit is Phi(u) = 0.5 ||y - G(u)||^2_Gamma (Mahalanobis norm). The
evidence Z is the marginal density of the data,

    Z = integral of N(y; G(u), Gamma) pi0(u) du,

and the posterior density is N(y; G(u), Gamma) pi0(u) / Z. Keeping the
Gaussian normalization constant in the likelihood makes Z the actual
data density (for the 1-d conjugate case Z = N(y; 0, 1 + Gamma)); the
constant cancels from the posterior itself.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular, solveh_banded

from .util import as_point, as_points

#: Named scalar test functions usable as 1-d forward models / regression
#: targets in config files.
SCALAR_FUNCTIONS = {
    "identity": lambda x: x,
    "sin_shifted_square": lambda x: np.sin((x - 2.5) ** 2),
    "square": lambda x: x**2,
    "cubic": lambda x: x**3,
    "abs": lambda x: np.abs(x),
}


class EvidenceUnderflowError(ArithmeticError):
    """Evidence estimate underflowed; inspect densities in log domain."""


class ForwardModel:
    """Deterministic map G: R^{d_in} -> R^{d_out} with an evaluation counter."""

    d_in: int
    d_out: int

    def __init__(self):
        self._n_evals = 0
        self._lock = threading.Lock()

    def _evaluate(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, u) -> np.ndarray:
        u = as_point(u, dim=self.d_in)
        with self._lock:
            self._n_evals += 1
        return self._evaluate(u)

    @property
    def eval_count(self) -> int:
        return self._n_evals

    def reset_eval_count(self):
        with self._lock:
            self._n_evals = 0


class Identity(ForwardModel):
    """G(u) = u."""

    def __init__(self, dim: int = 1):
        super().__init__()
        self.d_in = dim
        self.d_out = dim

    def _evaluate(self, u):
        return u.copy()


class Scalar1D(ForwardModel):
    """Scalar map of a scalar parameter, from the named-function registry."""

    def __init__(self, name: str):
        super().__init__()
        if name not in SCALAR_FUNCTIONS:
            raise ValueError(
                f"unknown scalar function {name!r}; choose from {sorted(SCALAR_FUNCTIONS)}"
            )
        self.name = name
        self._fun = SCALAR_FUNCTIONS[name]
        self.d_in = 1
        self.d_out = 1

    def _evaluate(self, u):
        return np.atleast_1d(np.asarray(self._fun(u[0]), dtype=np.float64))


class Darcy1D(ForwardModel):
    """Steady 1-d flow: -(k(x) p'(x))' = g(x) on (0, 1), Dirichlet ends.

    The permeability is piecewise constant on the layers defined by
    ``breakpoints``; the parameter vector u holds one positive value per
    layer. The solver is a conservative finite-difference scheme on a
    uniform grid whose interface transmissibilities are harmonic averages
    of k over each cell (exact integration of 1/k against the layer
    structure). Observations are pressures at ``observe_at``, linearly
    interpolated between grid nodes.
    """

    def __init__(
        self,
        breakpoints,
        observe_at,
        grid_size: int = 256,
        p_left: float = 0.0,
        p_right: float = 0.0,
        source=0.0,
    ):
        super().__init__()
        bp = np.sort(np.asarray(breakpoints, dtype=np.float64).reshape(-1))
        if bp.size and (bp[0] <= 0.0 or bp[-1] >= 1.0):
            raise ValueError("breakpoints must lie strictly inside (0, 1)")
        if bp.size > 1 and np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        obs = np.asarray(observe_at, dtype=np.float64).reshape(-1)
        if np.any(obs <= 0.0) or np.any(obs >= 1.0):
            raise ValueError("observation locations must be interior to (0, 1)")
        if grid_size < 8:
            raise ValueError("grid_size must be at least 8")
        self.breakpoints = bp
        self.layer_edges = np.concatenate(([0.0], bp, [1.0]))
        self.observe_at = obs
        self.grid_size = int(grid_size)
        self.p_left = float(p_left)
        self.p_right = float(p_right)
        self.source = source
        self.d_in = bp.size + 1
        self.d_out = obs.size
        self.nodes = np.linspace(0.0, 1.0, self.grid_size + 1)

    def _transmissibilities(self, u: np.ndarray) -> np.ndarray:
        # Harmonic average of k over each cell: h / int_cell dx / k(x).
        lo = self.nodes[:-1]
        hi = self.nodes[1:]
        h = hi - lo
        resist = np.zeros_like(lo)
        for j in range(self.d_in):
            a = np.maximum(lo, self.layer_edges[j])
            b = np.minimum(hi, self.layer_edges[j + 1])
            resist += np.clip(b - a, 0.0, None) / u[j]
        return h / resist

    def solve(self, u):
        """Pressure at all grid nodes plus the observation vector."""
        u = as_point(u, dim=self.d_in)
        if np.any(u <= 0.0):
            raise ValueError("permeability values must be positive")
        m = self.grid_size
        h = 1.0 / m
        t = self._transmissibilities(u)  # one per cell, length m
        x_int = self.nodes[1:-1]
        g = self.source(x_int) if callable(self.source) else np.full(m - 1, float(self.source))

        # SPD tridiagonal system for interior pressures, upper banded form.
        ab = np.zeros((2, m - 1))
        ab[1, :] = (t[:-1] + t[1:]) / h**2
        ab[0, 1:] = -t[1:-1] / h**2
        rhs = np.asarray(g, dtype=np.float64).copy()
        rhs[0] += t[0] * self.p_left / h**2
        rhs[-1] += t[-1] * self.p_right / h**2
        p_int = solveh_banded(ab, rhs)

        p = np.empty(m + 1)
        p[0] = self.p_left
        p[-1] = self.p_right
        p[1:-1] = p_int
        obs = np.interp(self.observe_at, self.nodes, p)
        return p, obs

    def _evaluate(self, u):
        return self.solve(u)[1]


def solve_darcy(model: Darcy1D, u):
    """Solve the flow problem; returns (pressure on grid nodes, observations)."""
    return model.solve(u)


class NoiseModel:
    """Gaussian observation noise N(0, Gamma) with cached factorization."""

    def __init__(self, gamma):
        g = np.asarray(gamma, dtype=np.float64)
        if g.ndim == 1:
            g = np.diag(g)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("Gamma must be square (or a diagonal vector)")
        if not np.allclose(g, g.T):
            raise ValueError("Gamma must be symmetric")
        self.gamma = g
        try:
            self.chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Gamma must be positive definite") from exc
        self.dim = g.shape[0]
        # log of the N(0, Gamma) density normalization constant
        self.log_norm_const = float(
            -0.5 * self.dim * np.log(2.0 * np.pi)
            - np.sum(np.log(np.diag(self.chol)))
        )

    def mahalanobis_sq(self, v) -> float:
        """||v||^2_Gamma = v^T Gamma^{-1} v."""
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        w = solve_triangular(self.chol, v, lower=True)
        return float(w @ w)

    def sample(self, rng) -> np.ndarray:
        return self.chol @ rng.standard_normal(self.dim)


class GaussianDiagPrior:
    """Independent Gaussian components N(mean_i, var_i)."""

    def __init__(self, means, variances):
        self.means = np.asarray(means, dtype=np.float64).reshape(-1)
        self.variances = np.asarray(variances, dtype=np.float64).reshape(-1)
        if self.means.shape != self.variances.shape:
            raise ValueError("means and variances must have equal length")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")
        self.dim = self.means.size

    def log_density(self, u) -> float:
        u = as_point(u, dim=self.dim)
        z = (u - self.means) ** 2 / self.variances
        return float(
            -0.5 * np.sum(z)
            - 0.5 * np.sum(np.log(2.0 * np.pi * self.variances))
        )

    def sample(self, n, rng) -> np.ndarray:
        return self.means + np.sqrt(self.variances) * rng.standard_normal(
            (n, self.dim)
        )

    def effective_box(self, n_sd: float = 8.0):
        sd = np.sqrt(self.variances)
        return self.means - n_sd * sd, self.means + n_sd * sd


class UniformBoxPrior:
    """Uniform density on an axis-aligned box."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=np.float64).reshape(-1)
        self.upper = np.asarray(upper, dtype=np.float64).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper must have equal length")
        if np.any(self.upper <= self.lower):
            raise ValueError("upper bounds must exceed lower bounds")
        self.dim = self.lower.size
        self._log_vol = float(np.sum(np.log(self.upper - self.lower)))

    def log_density(self, u) -> float:
        u = as_point(u, dim=self.dim)
        if np.any(u < self.lower) or np.any(u > self.upper):
            return -np.inf
        return -self._log_vol

    def sample(self, n, rng) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def effective_box(self, n_sd: float = 8.0):
        return self.lower.copy(), self.upper.copy()


class LogNormalDiagPrior:
    """Independent log-normal components: log(u_i) ~ N(mu_i, var_i)."""

    def __init__(self, log_means, log_variances):
        self.log_means = np.asarray(log_means, dtype=np.float64).reshape(-1)
        self.log_variances = np.asarray(log_variances, dtype=np.float64).reshape(-1)
        if self.log_means.shape != self.log_variances.shape:
            raise ValueError("log-means and log-variances must have equal length")
        if np.any(self.log_variances <= 0):
            raise ValueError("log-variances must be positive")
        self.dim = self.log_means.size

    def log_density(self, u) -> float:
        u = as_point(u, dim=self.dim)
        if np.any(u <= 0.0):
            return -np.inf
        z = (np.log(u) - self.log_means) ** 2 / self.log_variances
        return float(
            -0.5 * np.sum(z)
            - np.sum(np.log(u))
            - 0.5 * np.sum(np.log(2.0 * np.pi * self.log_variances))
        )

    def sample(self, n, rng) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return np.exp(self.log_means + np.sqrt(self.log_variances) * z)

    def effective_box(self, n_sd: float = 8.0):
        sd = np.sqrt(self.log_variances)
        return (
            np.exp(self.log_means - n_sd * sd),
            np.exp(self.log_means + n_sd * sd),
        )


@dataclass
class EvidenceResult:
    """Evidence estimate plus how it was obtained."""

    value: float
    method: str
    n_points: int
    std_error: float | None = None

    def __float__(self):
        return self.value


class BayesProblem:
    """Forward model + data + noise + prior; the exact posterior target."""

    def __init__(self, forward: ForwardModel, y, noise: NoiseModel, prior, domain_box=None):
        self.forward = forward
        self.y = np.asarray(y, dtype=np.float64).reshape(-1)
        if self.y.shape[0] != forward.d_out:
            raise ValueError(
                f"data has dimension {self.y.shape[0]}, forward model outputs {forward.d_out}"
            )
        if noise.dim != forward.d_out:
            raise ValueError("noise covariance dimension must match the data")
        self.noise = noise
        self.prior = prior
        if domain_box is None:
            domain_box = prior.effective_box()
        lo, hi = domain_box
        self.domain_lo = np.asarray(lo, dtype=np.float64).reshape(-1)
        self.domain_hi = np.asarray(hi, dtype=np.float64).reshape(-1)

    @property
    def dim(self) -> int:
        return self.prior.dim

    def neg_log_likelihood(self, u) -> float:
        """Misfit Phi(u) = 0.5 ||y - G(u)||^2_Gamma."""
        return 0.5 * self.noise.mahalanobis_sq(self.y - self.forward(u))

    def neg_log_likelihood_many(self, points) -> np.ndarray:
        pts = as_points(points, dim=self.dim)
        return np.array([self.neg_log_likelihood(p) for p in pts])

    def log_likelihood(self, u) -> float:
        """log N(y; G(u), Gamma), i.e. the misfit plus the Gaussian constant."""
        return self.noise.log_norm_const - self.neg_log_likelihood(u)

    def log_unnormalized_posterior(self, u) -> float:
        lp = self.prior.log_density(u)
        if lp == -np.inf:
            return -np.inf
        return lp + self.log_likelihood(u)

    def quadrature_grid(self, n_nodes: int | None = None):
        """Tensor grid over the domain box: 1-d array, or (axis_x, axis_y)."""
        if self.dim == 1:
            n = n_nodes or 4096
            return np.linspace(self.domain_lo[0], self.domain_hi[0], n)
        if self.dim == 2:
            n = n_nodes or 512
            return (
                np.linspace(self.domain_lo[0], self.domain_hi[0], n),
                np.linspace(self.domain_lo[1], self.domain_hi[1], n),
            )
        raise ValueError("quadrature grids are supported in 1 and 2 dimensions only")


def _integrate_exp_on_grid(log_vals, grid):
    """Integral of exp(log_vals) over a 1-d grid or 2-d tensor grid.

    Uses max-subtraction so strongly negative log values cannot
    underflow the whole integral.
    """
    finite = np.isfinite(log_vals)
    if not finite.any():
        return 0.0
    shift = float(log_vals[finite].max())
    vals = np.exp(np.where(finite, log_vals - shift, -np.inf))
    if isinstance(grid, tuple):
        ax, ay = grid
        inner = np.trapezoid(vals, ay, axis=1)
        integral = np.trapezoid(inner, ax)
    else:
        integral = np.trapezoid(vals, grid)
    return float(np.exp(shift + np.log(integral))) if integral > 0 else 0.0


def evidence(
    problem: BayesProblem,
    method: str = "quadrature",
    n_nodes: int | None = None,
    n_samples: int = 10_000,
    seed: int = 0,
) -> EvidenceResult:
    """Model evidence Z: the marginal density of the data.

    ``quadrature`` integrates N(y; G(u), Gamma) pi0(u) on the problem's
    tensor grid (1-d / 2-d); ``monte_carlo`` averages the likelihood
    density over prior draws and reports a standard error.
    """
    if method == "quadrature":
        grid = problem.quadrature_grid(n_nodes)
        if isinstance(grid, tuple):
            ax, ay = grid
            log_vals = np.empty((ax.size, ay.size))
            for i, x in enumerate(ax):
                for j, yv in enumerate(ay):
                    log_vals[i, j] = problem.log_unnormalized_posterior((x, yv))
            n_pts = ax.size * ay.size
        else:
            log_vals = np.array(
                [problem.log_unnormalized_posterior(x) for x in grid]
            )
            n_pts = grid.size
        z = _integrate_exp_on_grid(log_vals, grid)
        result = EvidenceResult(z, "quadrature", n_pts)
    elif method == "monte_carlo":
        rng = np.random.default_rng(seed)
        draws = problem.prior.sample(n_samples, rng)
        vals = np.exp(
            problem.noise.log_norm_const - problem.neg_log_likelihood_many(draws)
        )
        z = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / np.sqrt(n_samples))
        result = EvidenceResult(z, "monte_carlo", n_samples, std_error=se)
    else:
        raise ValueError(f"unknown evidence method {method!r}")
    if result.value < 1e-300:
        raise EvidenceUnderflowError(
            f"evidence estimate {result.value:.3e} underflowed; work with "
            "log-densities (the data misfit is likely enormous everywhere)"
        )
    return result


def posterior_log_density(problem: BayesProblem, u, z: float) -> float:
    """log posterior density: log pi0(u) + log N(y; G(u), Gamma) - log Z."""
    if not z > 0:
        raise ValueError("normalization constant must be positive")
    lp = problem.prior.log_density(u)
    if lp == -np.inf:
        return -np.inf
    return lp + problem.log_likelihood(u) - np.log(z)


def posterior_density_on_grid(problem: BayesProblem, grid, z: float) -> np.ndarray:
    """Normalized posterior density evaluated on a 1-d or tensor grid."""
    if isinstance(grid, tuple):
        ax, ay = grid
        out = np.empty((ax.size, ay.size))
        for i, x in enumerate(ax):
            for j, yv in enumerate(ay):
                out[i, j] = np.exp(posterior_log_density(problem, (x, yv), z))
        return out
    grid = np.asarray(grid, dtype=np.float64)
    return np.exp(
        np.array([posterior_log_density(problem, x, z) for x in grid])
    )
