"""Small shared helpers: array coercion, seeding, quadrature weights."""

from __future__ import annotations

import numpy as np

# Additive constant for deriving replicate seeds from a master seed
# (64-bit golden-ratio increment; wraps modulo 2**64 so any stream count
# stays collision-free in practice).
_SEED_INCREMENT = 0x9E3779B97F4A7C15


def split_seed(master_seed: int, stream: int) -> int:
    """Seed for independent RNG stream ``stream`` derived from a master seed.

    The rule is ``(master + stream * increment) mod 2**64`` with a fixed
    odd 64-bit increment, so distinct streams never collide and results
    are reproducible across platforms.
    """
    if stream < 0:
        raise ValueError("stream index must be non-negative")
    return (int(master_seed) + stream * _SEED_INCREMENT) % (1 << 64)


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce input to a C-contiguous float64 array of shape (n, d).

    Scalars become a single 1-D point. A 1-D array of length n is read
    as n points in one dimension, unless ``dim`` says it is a single
    point in d dimensions.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        if dim is not None and dim > 1:
            if a.shape[0] != dim:
                raise ValueError(
                    f"point has dimension {a.shape[0]}, expected {dim}"
                )
            a = a.reshape(1, dim)
        else:
            a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ValueError(f"expected at most 2-d point array, got shape {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise ValueError(f"points have dimension {a.shape[1]}, expected {dim}")
    return np.ascontiguousarray(a)


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce a single point to a float64 array of shape (d,)."""
    a = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if a.ndim != 1:
        raise ValueError(f"expected a single point, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"point has dimension {a.shape[0]}, expected {dim}")
    return a


def coerce_query(x, dim: int):
    """Normalize a query (single point or batch) to (m, d) + squeeze flag.

    Returns ``(points, squeeze)`` where ``squeeze`` is True when the
    caller passed a single point and expects a scalar back.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        if dim != 1:
            raise ValueError(f"scalar query but points have dimension {dim}")
        return a.reshape(1, 1), True
    if a.ndim == 1:
        if dim == 1:
            return np.ascontiguousarray(a.reshape(-1, 1)), False
        if a.shape[0] == dim:
            return np.ascontiguousarray(a.reshape(1, dim)), True
        raise ValueError(f"query has dimension {a.shape[0]}, expected {dim}")
    if a.ndim == 2:
        if a.shape[1] != dim:
            raise ValueError(f"query points have dimension {a.shape[1]}, expected {dim}")
        return np.ascontiguousarray(a), False
    raise ValueError(f"expected at most 2-d query array, got shape {a.shape}")


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    """Trapezoid-rule weights for nodes ``x`` (sorted, length >= 2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-d grid with at least two nodes")
    dx = np.diff(x)
    w = np.empty_like(x)
    w[0] = 0.5 * dx[0]
    w[-1] = 0.5 * dx[-1]
    w[1:-1] = 0.5 * (dx[:-1] + dx[1:])
    return w
