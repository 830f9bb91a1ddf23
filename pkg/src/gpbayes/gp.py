"""Gaussian process regression: conditioning, prediction, sampling, fitting.

The predictive process conditioned on observations (f(u^1), ..., f(u^N))
at design points D_N has

    mean(u) = m(u) + k(u, D_N)^T (K + sigma2 I)^{-1} (f(D_N) - m(D_N))
    cov(u, v) = k(u, v) - k(u, D_N)^T (K + sigma2 I)^{-1} k(v, D_N)

with K the kernel matrix on the design and sigma2 an optional
observation-noise variance. With sigma2 = 0 the mean interpolates the
data and the variance vanishes at the design points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernels import KernelSpec, cross_matrix, kernel_matrix
from .util import as_points, coerce_query

# Relative jitter ladder used when factorizing kernel matrices: scaled by
# the marginal variance, escalated deterministically until the Cholesky
# factorization succeeds.
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)

# A factorization is only trusted for *solving* when its pivot ratio
# (max L_ii / min L_ii)^2 stays below this cap; beyond it the computed
# coefficients live on noise-level eigendirections and the interpolant
# can oscillate wildly between clustered design points.
PIVOT_RATIO_CAP = 1e12


class IllConditionedKernelError(np.linalg.LinAlgError):
    """Kernel matrix could not be factorized even with maximum jitter."""


def _chol_with_jitter(mat: np.ndarray, scale: float, pivot_cap: float | None = PIVOT_RATIO_CAP):
    """Lower Cholesky factor of ``mat + jitter*I``, escalating the jitter.

    Returns ``(L, jitter)``; raises IllConditionedKernelError when the
    whole ladder fails, reporting the smallest-eigenvalue estimate.
    ``pivot_cap`` (when set) additionally rejects factors whose squared
    pivot ratio exceeds the cap, except at the final ladder level.
    """
    last = len(JITTER_LADDER) - 1
    for idx, rel in enumerate(JITTER_LADDER):
        jitter = rel * scale
        try:
            lower = np.linalg.cholesky(
                mat if jitter == 0.0 else mat + jitter * np.eye(mat.shape[0])
            )
        except np.linalg.LinAlgError:
            continue
        if pivot_cap is not None and idx < last:
            d = np.diag(lower)
            if (d.max() / d.min()) ** 2 > pivot_cap:
                continue
        return lower, jitter
    try:
        min_eig = float(np.linalg.eigvalsh(mat)[0])
    except np.linalg.LinAlgError:
        min_eig = float("nan")
    raise IllConditionedKernelError(
        f"kernel matrix factorization failed at maximum jitter "
        f"{JITTER_LADDER[-1] * scale:.3e} (min eigenvalue estimate {min_eig:.3e})"
    )


class GPPrior:
    """Zero-mean, constant-mean, polynomial-mean or callable-mean GP prior.

    ``mean`` may be a scalar (constant mean), a 1-d coefficient array for
    ``numpy.polyval`` (1-d inputs only, highest degree first), or a
    callable mapping an (n, d) array to n mean values.
    """

    def __init__(self, kernel: KernelSpec, mean=0.0):
        self.kernel = kernel
        self.mean = mean

    def mean_at(self, points) -> np.ndarray:
        pts = as_points(points)
        if callable(self.mean):
            out = np.asarray(self.mean(pts), dtype=np.float64)
            return out.reshape(pts.shape[0])
        if np.ndim(self.mean) == 1:
            if pts.shape[1] != 1:
                raise ValueError("polynomial mean requires 1-d inputs")
            return np.polyval(np.asarray(self.mean, dtype=np.float64), pts[:, 0])
        return np.full(pts.shape[0], float(self.mean))


@dataclass
class GPPosterior:
    """GP conditioned on observations; built by :func:`fit`."""

    prior: GPPrior
    design: np.ndarray
    observations: np.ndarray
    noise_variance: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    n_var_clamps: int = field(default=0)

    @property
    def kernel(self) -> KernelSpec:
        return self.prior.kernel

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    @property
    def n_train(self) -> int:
        return self.design.shape[0]


def fit(prior: GPPrior, design, observations, noise_variance: float = 0.0) -> GPPosterior:
    """Condition ``prior`` on observed values at the design points.

    Parameters
    ----------
    prior : GPPrior
    design : array_like, shape (n, d)
        Training points; must be distinct when ``noise_variance`` is 0.
    observations : array_like, shape (n,)
        Observed function values f(design).
    noise_variance : float
        Variance of i.i.d. Gaussian observation noise (0 for exact
        interpolation).
    """
    pts = as_points(design)
    obs = np.asarray(observations, dtype=np.float64).reshape(-1)
    if pts.shape[0] < 1:
        raise ValueError("need at least one design point")
    if obs.shape[0] != pts.shape[0]:
        raise ValueError(
            f"{obs.shape[0]} observations for {pts.shape[0]} design points"
        )
    if noise_variance < 0:
        raise ValueError("noise variance must be non-negative")

    kernel = prior.kernel
    mat = kernel_matrix(kernel, pts)
    if noise_variance > 0:
        mat = mat + noise_variance * np.eye(pts.shape[0])
    lower, jitter = _chol_with_jitter(mat, kernel.variance)
    resid = obs - prior.mean_at(pts)
    alpha = cho_solve((lower, True), resid)
    return GPPosterior(
        prior=prior,
        design=pts,
        observations=obs,
        noise_variance=float(noise_variance),
        chol=lower,
        alpha=alpha,
        jitter=jitter,
    )


def predict_mean(post: GPPosterior, u):
    """Predictive mean at ``u`` (single point or (m, d) batch)."""
    pts, squeeze = coerce_query(u, post.dim)
    cross = cross_matrix(post.kernel, pts, post.design)
    vals = post.prior.mean_at(pts) + cross @ post.alpha
    return float(vals[0]) if squeeze else vals


def predict_cov(post: GPPosterior, u, v) -> float:
    """Predictive covariance between two points."""
    ua, _ = coerce_query(u, post.dim)
    va, _ = coerce_query(v, post.dim)
    if ua.shape[0] != 1 or va.shape[0] != 1:
        raise ValueError("predict_cov expects single points")
    prior_cov = float(
        cross_matrix(post.kernel, ua, va)[0, 0]
    )
    ku = cross_matrix(post.kernel, ua, post.design)[0]
    kv = cross_matrix(post.kernel, va, post.design)[0]
    val = prior_cov - float(ku @ cho_solve((post.chol, True), kv))
    if np.array_equal(ua, va):
        if val < 0.0:
            post.n_var_clamps += 1
            val = 0.0
        val = min(val, post.kernel.variance)
    return val


def predict_var(post: GPPosterior, u):
    """Predictive variance at ``u``; clamped to [0, marginal variance]."""
    pts, squeeze = coerce_query(u, post.dim)
    cross = cross_matrix(post.kernel, pts, post.design)
    half = solve_triangular(post.chol, cross.T, lower=True)
    var = post.kernel.variance - np.einsum("ij,ij->j", half, half)
    n_neg = int(np.count_nonzero(var < 0.0))
    if n_neg:
        post.n_var_clamps += n_neg
    var = np.clip(var, 0.0, post.kernel.variance)
    return float(var[0]) if squeeze else var


def predict_cov_matrix(post: GPPosterior, points) -> np.ndarray:
    """Full predictive covariance matrix on a set of points."""
    pts = as_points(points, dim=post.dim)
    prior_cov = kernel_matrix(post.kernel, pts)
    cross = cross_matrix(post.kernel, pts, post.design)
    half = solve_triangular(post.chol, cross.T, lower=True)
    return prior_cov - half.T @ half


def _grid_moments(process, grid):
    pts = as_points(grid)
    if isinstance(process, GPPosterior):
        mean = predict_mean(process, pts)
        cov = predict_cov_matrix(process, pts)
        scale = process.kernel.variance
    elif isinstance(process, GPPrior):
        mean = process.mean_at(pts)
        cov = kernel_matrix(process.kernel, pts)
        scale = process.kernel.variance
    else:
        raise TypeError("process must be a GPPrior or GPPosterior")
    return pts, mean, cov, scale


def sample_paths_on_grid(process, grid, n_paths: int, rng_seed: int) -> np.ndarray:
    """Draw ``n_paths`` joint samples of the process on a grid.

    Returns an array of shape (n_paths, len(grid)). Deterministic for a
    fixed seed; the covariance matrix is factorized with the same jitter
    ladder as :func:`fit`.
    """
    pts, mean, cov, scale = _grid_moments(process, grid)
    if pts.shape[0] < 1:
        raise ValueError("grid must be non-empty")
    # drawing only multiplies by L, so rank-deficient grid covariances are
    # fine at the first jitter that factorizes
    lower, _ = _chol_with_jitter(cov, scale, pivot_cap=None)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((pts.shape[0], n_paths))
    return (mean[:, None] + lower @ z).T


def sample_path_on_grid(process, grid, rng_seed: int) -> np.ndarray:
    """Single joint draw of the process on a grid (vector of values)."""
    return sample_paths_on_grid(process, grid, 1, rng_seed)[0]


def log_marginal_likelihood(
    prior: GPPrior, design, observations, noise_variance: float = 0.0
) -> float:
    """Log density of the observations under the prior at the design.

    log N(f(D); m(D), K + sigma2 I)
      = -0.5 r^T alpha - sum(log L_ii) - (n/2) log(2 pi)
    """
    post = fit(prior, design, observations, noise_variance)
    resid = post.observations - prior.mean_at(post.design)
    n = post.n_train
    return float(
        -0.5 * resid @ post.alpha
        - np.sum(np.log(np.diag(post.chol)))
        - 0.5 * n * np.log(2.0 * np.pi)
    )


def _golden_max(fun, lo: float, hi: float, iters: int = 25) -> float:
    # Golden-section maximization of a unimodal-ish slice; returns argmax.
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def fit_hyperparameters(
    family: str,
    design,
    observations,
    lengthscale_bounds=(1e-2, 1e1),
    variance_bounds=(1e-2, 1e1),
    n_grid: int = 25,
    noise_variance: float = 0.0,
) -> KernelSpec:
    """Maximum-likelihood kernel hyperparameters over a log grid.

    Scans an ``n_grid`` x ``n_grid`` logarithmic grid in (lengthscale,
    variance), then refines each coordinate once by golden-section
    search. Ties on the grid break toward the larger lengthscale.
    """
    pts = as_points(design)
    obs = np.asarray(observations, dtype=np.float64).reshape(-1)
    lams = np.geomspace(*lengthscale_bounds, n_grid)
    sig2s = np.geomspace(*variance_bounds, n_grid)

    def lml(lam, sig2):
        spec = KernelSpec(family, lengthscale=lam, variance=sig2)
        try:
            return log_marginal_likelihood(
                GPPrior(spec), pts, obs, noise_variance
            )
        except IllConditionedKernelError:
            return -np.inf

    best = (-np.inf, None, None)
    for lam in lams:
        for sig2 in sig2s:
            val = lml(lam, sig2)
            if val > best[0] or (val == best[0] and best[1] is not None and lam > best[1]):
                best = (val, lam, sig2)
    if best[1] is None:
        raise IllConditionedKernelError(
            "log-marginal-likelihood evaluation failed on the entire grid"
        )

    _, lam0, sig20 = best
    i = int(np.searchsorted(lams, lam0))
    lam_lo = lams[max(i - 1, 0)]
    lam_hi = lams[min(i + 1, n_grid - 1)]
    lam1 = np.exp(
        _golden_max(lambda t: lml(np.exp(t), sig20), np.log(lam_lo), np.log(lam_hi))
    )
    j = int(np.searchsorted(sig2s, sig20))
    sig_lo = sig2s[max(j - 1, 0)]
    sig_hi = sig2s[min(j + 1, n_grid - 1)]
    sig21 = np.exp(
        _golden_max(lambda t: lml(lam1, np.exp(t)), np.log(sig_lo), np.log(sig_hi))
    )
    if lml(lam1, sig21) < best[0]:
        lam1, sig21 = lam0, sig20
    return KernelSpec(family, lengthscale=float(lam1), variance=float(sig21))


def rkhs_norm(kernel: KernelSpec, centers, coefficients) -> float:
    """RKHS norm of the kernel combination sum_i c_i k(., centers[i]).

    Equals sqrt(c^T K c) with K the kernel matrix on the centers.
    """
    c = np.asarray(coefficients, dtype=np.float64).reshape(-1)
    pts = as_points(centers)
    if pts.shape[0] != c.shape[0]:
        raise ValueError(
            f"{c.shape[0]} coefficients for {pts.shape[0]} centers"
        )
    if c.shape[0] == 0:
        return 0.0
    quad = float(c @ kernel_matrix(kernel, pts) @ c)
    return float(np.sqrt(max(quad, 0.0)))
