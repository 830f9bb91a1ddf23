"""Stationary covariance kernels and kernel-matrix assembly.

Implemented families (isotropic, Euclidean distance r = ||u - v||):

* ``matern12``   sigma2 * exp(-r / l)
* ``matern32``   sigma2 * (1 + sqrt(3) r / l) * exp(-sqrt(3) r / l)
* ``matern52``   sigma2 * (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) * exp(-sqrt(5) r / l)
* ``sqexp``      sigma2 * exp(-r^2 / (2 l^2))

These are the half-integer closed forms (smoothness 1/2, 3/2, 5/2) plus
the squared-exponential limit; other smoothness values would need Bessel
functions and are out of scope.

Matrix assembly is a hot path and is routed through the numba/numpy
switch in :mod:`gpbayes._accel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, njit
from .util import as_points

FAMILIES = {"matern12": 0, "matern32": 1, "matern52": 2, "sqexp": 3}

# Below this fraction of the lengthscale, distances are treated as zero
# so k(u, u) is exactly the marginal variance.
_ZERO_DIST_FACTOR = 1e-14

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    """Covariance family plus hyperparameters.

    Parameters
    ----------
    family : str
        One of ``matern12``, ``matern32``, ``matern52``, ``sqexp``.
    lengthscale : float
        Correlation length (input units), > 0.
    variance : float
        Marginal variance k(u, u) (output units squared), > 0.
    """

    family: str
    lengthscale: float
    variance: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; "
                f"choose from {sorted(FAMILIES)}"
            )
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")
        if not self.variance > 0:
            raise ValueError("variance must be positive")

    @property
    def family_id(self) -> int:
        return FAMILIES[self.family]


@njit(cache=True)
def _kern_r(r, fam, lam, var):
    # Scalar kernel value at distance r >= 0.
    if r < _ZERO_DIST_FACTOR * lam:
        return var
    if fam == 0:
        return var * math.exp(-r / lam)
    if fam == 1:
        s = _SQRT3 * r / lam
        return var * (1.0 + s) * math.exp(-s)
    if fam == 2:
        s = _SQRT5 * r / lam
        return var * (1.0 + s + s * s / 3.0) * math.exp(-s)
    t = r / lam
    return var * math.exp(-0.5 * t * t)


@njit(cache=True)
def _kernel_matrix_loops(pts, fam, lam, var):
    n = pts.shape[0]
    d = pts.shape[1]
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = var
        for j in range(i + 1, n):
            s = 0.0
            for t in range(d):
                diff = pts[i, t] - pts[j, t]
                s += diff * diff
            k = _kern_r(math.sqrt(s), fam, lam, var)
            out[i, j] = k
            out[j, i] = k
    return out


@njit(cache=True)
def _cross_matrix_loops(a, b, fam, lam, var):
    m = a.shape[0]
    n = b.shape[0]
    d = a.shape[1]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(d):
                diff = a[i, t] - b[j, t]
                s += diff * diff
            out[i, j] = _kern_r(math.sqrt(s), fam, lam, var)
    return out


def _kern_from_dist(r, fam, lam, var):
    # Vectorized kernel value at distances r >= 0 (numpy path).
    r = np.asarray(r, dtype=np.float64)
    if fam == 0:
        k = var * np.exp(-r / lam)
    elif fam == 1:
        s = _SQRT3 * r / lam
        k = var * (1.0 + s) * np.exp(-s)
    elif fam == 2:
        s = _SQRT5 * r / lam
        k = var * (1.0 + s + s * s / 3.0) * np.exp(-s)
    else:
        t = r / lam
        k = var * np.exp(-0.5 * t * t)
    return np.where(r < _ZERO_DIST_FACTOR * lam, var, k)


def _kernel_matrix_numpy(pts, fam, lam, var):
    # Pairwise differences keep the matrix bitwise symmetric; the diagonal
    # is pinned to the marginal variance afterwards.
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    out = _kern_from_dist(r, fam, lam, var)
    np.fill_diagonal(out, var)
    return out


def _cross_matrix_numpy(a, b, fam, lam, var):
    diff = a[:, None, :] - b[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return _kern_from_dist(r, fam, lam, var)


if USE_NUMBA:
    _kernel_matrix_impl = _kernel_matrix_loops
    _cross_matrix_impl = _cross_matrix_loops
else:
    _kernel_matrix_impl = _kernel_matrix_numpy
    _cross_matrix_impl = _cross_matrix_numpy


def eval_kernel(spec: KernelSpec, u, v) -> float:
    """Pointwise kernel value k(u, v)."""
    ua = np.atleast_1d(np.asarray(u, dtype=np.float64))
    va = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if ua.shape != va.shape or ua.ndim != 1:
        raise ValueError(f"point dimensions differ: {ua.shape} vs {va.shape}")
    r = float(np.linalg.norm(ua - va))
    return float(
        _kern_from_dist(r, spec.family_id, spec.lengthscale, spec.variance)
    )


def kernel_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Symmetric kernel matrix K with K[i, j] = k(points[i], points[j])."""
    pts = as_points(points)
    return _kernel_matrix_impl(
        pts, spec.family_id, spec.lengthscale, spec.variance
    )


def kernel_cross(spec: KernelSpec, u, design) -> np.ndarray:
    """Vector of kernel values [k(u, design[0]), ..., k(u, design[n-1])]."""
    d_pts = as_points(design)
    if d_pts.shape[0] == 0:
        return np.empty(0)
    ua = as_points(u, dim=d_pts.shape[1])
    if ua.shape[0] != 1:
        raise ValueError("kernel_cross expects a single query point")
    return _cross_matrix_impl(
        ua, d_pts, spec.family_id, spec.lengthscale, spec.variance
    )[0]


def cross_matrix(spec: KernelSpec, points, design) -> np.ndarray:
    """Cross-kernel matrix of shape (len(points), len(design))."""
    d_pts = as_points(design)
    p_pts = as_points(points, dim=d_pts.shape[1] if d_pts.size else None)
    if d_pts.shape[0] == 0:
        return np.empty((p_pts.shape[0], 0))
    if p_pts.shape[1] != d_pts.shape[1]:
        raise ValueError(
            f"dimension mismatch: {p_pts.shape[1]} vs {d_pts.shape[1]}"
        )
    return _cross_matrix_impl(
        p_pts, d_pts, spec.family_id, spec.lengthscale, spec.variance
    )
