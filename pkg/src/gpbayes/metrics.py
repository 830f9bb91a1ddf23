"""Distances and error functionals for surrogate-quality studies.

* Hellinger distance between densities on a quadrature grid.
* L2 error between functions weighted by a (posterior) density.
* The replicated design-error functional

      e(N, nu) = integral of E_nu |m_N(u) - f(u)|^2  mu(du),

  estimated by fitting a fresh GP interpolant to each of R designs
  drawn from the measure nu and integrating the squared error against
  the weight density mu. The replication loop is the hottest path in
  the package and routes through the numba/numpy switch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._accel import USE_NUMBA, njit
from .gp import JITTER_LADDER, PIVOT_RATIO_CAP
from .kernels import KernelSpec, _kern_r, _kern_from_dist
from .util import split_seed, trapezoid_weights

__all__ = [
    "hellinger",
    "weighted_L2_error",
    "ErrorReport",
    "design_error_study",
]


def _density_on_grid(obj, grid):
    if callable(obj):
        if isinstance(grid, tuple):
            ax, ay = grid
            return np.array([[float(obj((x, y))) for y in ay] for x in ax])
        return np.array([float(obj(x)) for x in np.asarray(grid)])
    vals = np.asarray(obj, dtype=np.float64)
    if isinstance(grid, tuple):
        if vals.shape != (grid[0].size, grid[1].size):
            raise ValueError("density array does not match the grid shape")
    elif vals.shape != np.asarray(grid).shape:
        raise ValueError("density array does not match the grid shape")
    return vals


def _grid_integral(vals, grid):
    if isinstance(grid, tuple):
        ax, ay = grid
        return float(np.trapezoid(np.trapezoid(vals, ay, axis=1), ax))
    return float(np.trapezoid(vals, grid))


def _normalized(vals, grid, what: str):
    if np.any(vals < 0):
        raise ValueError(f"{what} takes negative values on the grid")
    mass = _grid_integral(vals, grid)
    if mass <= 0:
        raise ValueError(f"{what} has zero mass on the grid")
    if abs(mass - 1.0) > 1e-3:
        warnings.warn(
            f"{what} integrates to {mass:.6g} on the grid; renormalizing",
            stacklevel=3,
        )
    return vals / mass


def hellinger(p, q, grid) -> float:
    """Hellinger distance between two densities on a quadrature grid.

    ``p`` and ``q`` are callables or precomputed arrays; ``grid`` is a
    1-d node array or an (axis_x, axis_y) pair. Densities off by more
    than 1e-3 in mass trigger a warning and are renormalized. The value
    lies in [0, 1]: 0 for equal densities, 1 for disjoint supports.
    """
    pv = _normalized(_density_on_grid(p, grid), grid, "density p")
    qv = _normalized(_density_on_grid(q, grid), grid, "density q")
    val = 0.5 * _grid_integral((np.sqrt(pv) - np.sqrt(qv)) ** 2, grid)
    return float(min(np.sqrt(max(val, 0.0)), 1.0 + 1e-8))


def weighted_L2_error(f, approx, weight, grid) -> float:
    """Weighted L2 distance (integral of (f-approx)^2 d(weight))^(1/2)."""
    fv = _density_on_grid(f, grid) if callable(f) else np.asarray(f, dtype=np.float64)
    gv = (
        _density_on_grid(approx, grid)
        if callable(approx)
        else np.asarray(approx, dtype=np.float64)
    )
    wv = _normalized(_density_on_grid(weight, grid), grid, "weight density")
    val = _grid_integral((fv - gv) ** 2 * wv, grid)
    return float(np.sqrt(max(val, 0.0)))


# ---------------------------------------------------------------------------
# Replicated design-error study
# ---------------------------------------------------------------------------


@njit(cache=True)
def _chol_lower_inplace(a):
    # In-place lower Cholesky; returns False instead of raising on failure.
    n = a.shape[0]
    for j in range(n):
        s = a[j, j]
        for t in range(j):
            s -= a[j, t] * a[j, t]
        if s <= 0.0 or not np.isfinite(s):
            return False
        d = math.sqrt(s)
        a[j, j] = d
        inv = 1.0 / d
        for i in range(j + 1, n):
            s2 = a[i, j]
            for t in range(j):
                s2 -= a[i, t] * a[j, t]
            a[i, j] = s2 * inv
    return True


@njit(cache=True)
def _design_error_reps_loops(designs, f_design, grid, f_grid, w, fam, lam, var, jitters, pivot_cap):
    # One GP interpolation per replication; e[r] = sum_g w_g (m(g)-f(g))^2.
    n_rep, n_train, d = designs.shape
    n_grid = grid.shape[0]
    e = np.empty(n_rep)
    ok = np.zeros(n_rep, dtype=np.bool_)
    kmat = np.empty((n_train, n_train))
    lower = np.empty((n_train, n_train))
    alpha = np.empty(n_train)
    n_ladder = jitters.shape[0]
    for r in range(n_rep):
        pts = designs[r]
        for i in range(n_train):
            kmat[i, i] = var
            for j in range(i + 1, n_train):
                s = 0.0
                for t in range(d):
                    diff = pts[i, t] - pts[j, t]
                    s += diff * diff
                kij = _kern_r(math.sqrt(s), fam, lam, var)
                kmat[i, j] = kij
                kmat[j, i] = kij
        success = False
        for jj in range(n_ladder):
            for i in range(n_train):
                for j in range(n_train):
                    lower[i, j] = kmat[i, j]
                lower[i, i] += jitters[jj]
            if not _chol_lower_inplace(lower):
                continue
            if jj < n_ladder - 1:
                dmin = lower[0, 0]
                dmax = lower[0, 0]
                for i in range(1, n_train):
                    if lower[i, i] < dmin:
                        dmin = lower[i, i]
                    if lower[i, i] > dmax:
                        dmax = lower[i, i]
                if (dmax / dmin) ** 2 > pivot_cap:
                    continue
            success = True
            break
        if not success:
            e[r] = np.nan
            continue
        for i in range(n_train):
            s = f_design[r, i]
            for j in range(i):
                s -= lower[i, j] * alpha[j]
            alpha[i] = s / lower[i, i]
        for i in range(n_train - 1, -1, -1):
            s = alpha[i]
            for j in range(i + 1, n_train):
                s -= lower[j, i] * alpha[j]
            alpha[i] = s / lower[i, i]
        acc = 0.0
        for g in range(n_grid):
            m = 0.0
            for n in range(n_train):
                s = 0.0
                for t in range(d):
                    diff = grid[g, t] - pts[n, t]
                    s += diff * diff
                m += alpha[n] * _kern_r(math.sqrt(s), fam, lam, var)
            diff2 = m - f_grid[g]
            acc += w[g] * diff2 * diff2
        e[r] = acc
        ok[r] = True
    return e, ok


def _design_error_reps_numpy(designs, f_design, grid, f_grid, w, fam, lam, var, jitters, pivot_cap):
    n_rep, n_train, _ = designs.shape
    e = np.empty(n_rep)
    ok = np.zeros(n_rep, dtype=bool)
    eye = np.eye(n_train)
    for r in range(n_rep):
        pts = designs[r]
        diff = pts[:, None, :] - pts[None, :, :]
        kmat = _kern_from_dist(
            np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)), fam, lam, var
        )
        np.fill_diagonal(kmat, var)
        lower = None
        for idx, jit in enumerate(jitters):
            try:
                cand = np.linalg.cholesky(kmat + jit * eye)
            except np.linalg.LinAlgError:
                continue
            if idx < len(jitters) - 1:
                dg = np.diag(cand)
                if (dg.max() / dg.min()) ** 2 > pivot_cap:
                    continue
            lower = cand
            break
        if lower is None:
            e[r] = np.nan
            continue
        half = np.linalg.solve(lower, f_design[r])
        alpha = np.linalg.solve(lower.T, half)
        gdiff = grid[:, None, :] - pts[None, :, :]
        cross = _kern_from_dist(
            np.sqrt(np.einsum("ijk,ijk->ij", gdiff, gdiff)), fam, lam, var
        )
        resid = cross @ alpha - f_grid
        e[r] = float(w @ resid**2)
        ok[r] = True
    return e, ok


if USE_NUMBA:
    _design_error_reps = _design_error_reps_loops
else:
    _design_error_reps = _design_error_reps_numpy


@dataclass
class ErrorReport:
    """Replicated design-error estimates over an (N, measure) grid."""

    rows: list  # (n, measure_param, e_estimate, std_error, resamples)
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def estimate(self, n: int, param: float) -> tuple[float, float]:
        for row in self.rows:
            if row[0] == n and row[1] == param:
                return row[2], row[3]
        raise KeyError(f"no cell for N={n}, param={param}")


def design_error_study(
    f,
    kernel: KernelSpec,
    weight_density,
    measures,
    n_list,
    replications: int,
    seed: int,
    support,
    quad_points: int = 2048,
    max_resample_rounds: int = 20,
) -> ErrorReport:
    """Estimate e(N, nu) over design sizes and design measures.

    Parameters
    ----------
    f : callable
        Target function, vectorized over (m, d) point arrays or 1-d grids.
    kernel : KernelSpec
        Interpolation kernel; fits use zero observation noise plus the
        standard jitter ladder.
    weight_density : callable
        Weight mu for the squared-error integral, normalized internally.
    measures : list of (param, measure)
        Design measures labelled by the scalar swept in the study.
    n_list, replications, seed
        Design sizes, replications per cell, master seed. Replicate
        designs use split RNG streams; failed factorizations are
        resampled (counted per cell) and reductions run over sorted
        values so replication order is immaterial.
    support : (lo, hi)
        Quadrature window for the weight integral.
    quad_points : int
        Trapezoid nodes on the window.
    """
    lo, hi = float(support[0]), float(support[1])
    grid1d = np.linspace(lo, hi, quad_points)
    wts = trapezoid_weights(grid1d)
    dens = np.asarray([float(weight_density(x)) for x in grid1d])
    if np.any(dens < 0):
        raise ValueError("weight density takes negative values")
    mass = float(wts @ dens)
    if mass <= 0:
        raise ValueError("weight density has zero mass on the support")
    w = wts * dens / mass

    grid = np.ascontiguousarray(grid1d.reshape(-1, 1))
    f_grid = np.asarray(f(grid1d), dtype=np.float64).reshape(-1)
    jitters = np.asarray(JITTER_LADDER, dtype=np.float64) * kernel.variance

    rows = []
    notes = []
    stream = 0
    for param, measure in measures:
        if getattr(measure, "dim", 1) != 1:
            raise ValueError("the design-error study is 1-d")
        for n in n_list:
            designs = np.empty((replications, n, 1))
            for r in range(replications):
                rng = np.random.default_rng(split_seed(seed, stream))
                stream += 1
                designs[r] = measure.sample(n, rng)
            f_design = np.asarray(
                [f(designs[r][:, 0]) for r in range(replications)], dtype=np.float64
            )
            e, ok = _design_error_reps(
                designs, f_design, grid, f_grid, w,
                kernel.family_id, kernel.lengthscale, kernel.variance,
                jitters, PIVOT_RATIO_CAP,
            )
            resamples = 0
            rounds = 0
            while not ok.all():
                rounds += 1
                if rounds > max_resample_rounds:
                    raise ArithmeticError(
                        f"cell N={n}, param={param}: designs keep failing "
                        f"factorization after {resamples} resamples"
                    )
                bad = np.flatnonzero(~ok)
                resamples += bad.size
                re_designs = np.empty((bad.size, n, 1))
                for idx in range(bad.size):
                    rng = np.random.default_rng(split_seed(seed, stream))
                    stream += 1
                    re_designs[idx] = measure.sample(n, rng)
                re_f = np.asarray(
                    [f(re_designs[idx][:, 0]) for idx in range(bad.size)],
                    dtype=np.float64,
                )
                e_new, ok_new = _design_error_reps(
                    re_designs, re_f, grid, f_grid, w,
                    kernel.family_id, kernel.lengthscale, kernel.variance,
                    jitters, PIVOT_RATIO_CAP,
                )
                e[bad] = e_new
                ok[bad] = ok_new
            if resamples > 0.1 * replications:
                notes.append(
                    f"cell N={n}, param={param}: resample rate "
                    f"{resamples / replications:.1%} exceeds 10%"
                )
            e_sorted = np.sort(e)  # deterministic, order-independent reduction
            est = float(np.mean(e_sorted))
            se = (
                float(np.std(e_sorted, ddof=1) / np.sqrt(replications))
                if replications > 1
                else 0.0
            )
            rows.append((int(n), float(param), est, se, int(resamples)))
    return ErrorReport(
        rows=rows,
        metadata={
            "kernel": kernel,
            "seed": int(seed),
            "replications": int(replications),
            "quad_points": int(quad_points),
            "support": (lo, hi),
        },
        warnings=notes,
    )
