"""Design measures, fill distances, and truncation regions.

A design measure is the probability law training points are drawn from.
The fill distance of a design D within a region R,

    h(D, R) = sup_{u in R} min_{p in D ∩ R} ||u - p||,

is the largest gap the design leaves in the region; interpolation error
bounds are driven by it. The grid-based sup for d >= 2 is a hot loop and
routes through the numba/numpy switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from ._accel import USE_NUMBA, njit
from .util import as_points, split_seed


class RejectionCapError(RuntimeError):
    """Rejection sampler hit its attempt cap (threshold likely too high)."""


class EmptyRegionError(ValueError):
    """No point of the scan grid lies above the threshold."""


class GaussianDesign:
    """Independent Gaussian design measure N(center_i, sd_i^2)."""

    def __init__(self, center, sd):
        self.center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        self.sd = np.broadcast_to(
            np.asarray(sd, dtype=np.float64), self.center.shape
        ).copy()
        if np.any(self.sd <= 0):
            raise ValueError("design standard deviations must be positive")
        self.dim = self.center.size

    def sample(self, n: int, rng) -> np.ndarray:
        return self.center + self.sd * rng.standard_normal((n, self.dim))

    def density(self, u) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        z = (u - self.center) / self.sd
        return float(
            np.exp(-0.5 * np.sum(z**2))
            / np.prod(self.sd * np.sqrt(2.0 * np.pi))
        )


class UniformBoxDesign:
    """Uniform design measure on an axis-aligned box."""

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise ValueError("invalid box bounds")
        self.dim = self.lower.size
        self._vol = float(np.prod(self.upper - self.lower))

    def sample(self, n: int, rng) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def density(self, u) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        inside = np.all(u >= self.lower) and np.all(u <= self.upper)
        return 1.0 / self._vol if inside else 0.0


class PosteriorTruncatedDesign:
    """Reference density restricted to its superlevel set {rho > threshold}.

    Samples by rejection from a uniform proposal on ``proposal_box``:
    accept u when reference(u) > threshold and a uniform draw falls under
    reference(u) / bound, with the bound estimated from a scan grid over
    the box. ``density`` returns the unnormalized restricted density.
    """

    def __init__(
        self,
        reference_density: Callable,
        threshold: float,
        proposal_box,
        rejection_cap: int = 1_000_000,
        scan_resolution: int = 256,
    ):
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        lo, hi = proposal_box
        self.lower = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        self.upper = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise ValueError("invalid proposal box")
        self.reference_density = reference_density
        self.threshold = float(threshold)
        self.rejection_cap = int(rejection_cap)
        self.dim = self.lower.size
        self._bound = 1.1 * self._scan_max(scan_resolution)

    def _scan_max(self, resolution: int) -> float:
        axes = [
            np.linspace(self.lower[i], self.upper[i], resolution)
            for i in range(self.dim)
        ]
        mesh = np.stack(
            [m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1
        )
        vals = np.array([self.reference_density(p) for p in mesh])
        top = float(vals.max())
        if top <= 0:
            raise ValueError("reference density vanishes on the proposal box")
        return top

    def sample(self, n: int, rng) -> np.ndarray:
        out = np.empty((n, self.dim))
        got = 0
        attempts = 0
        while got < n:
            if attempts >= self.rejection_cap:
                rate = got / attempts if attempts else 0.0
                raise RejectionCapError(
                    f"rejection sampling exceeded {self.rejection_cap} attempts "
                    f"(acceptance rate {rate:.2e}); lower the threshold"
                )
            cand = rng.uniform(self.lower, self.upper, size=self.dim)
            v = rng.uniform()
            attempts += 1
            dens = self.reference_density(cand)
            if dens > self.threshold and v * self._bound < dens:
                out[got] = cand
                got += 1
        return out

    def density(self, u) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        if np.any(u < self.lower) or np.any(u > self.upper):
            return 0.0
        dens = float(self.reference_density(u))
        return dens if dens > self.threshold else 0.0


def sample_design(measure, n: int, seed: int) -> np.ndarray:
    """Draw n i.i.d. training points from a design measure."""
    if n < 1:
        raise ValueError("need at least one design point")
    rng = np.random.default_rng(seed)
    return measure.sample(n, rng)


@dataclass
class TruncationRegion:
    """Superlevel set {u : density(u) > threshold} of a reference density.

    In one dimension the region also carries the interval decomposition
    found by grid scan + bisection.
    """

    density: Callable
    threshold: float
    lower: np.ndarray
    upper: np.ndarray
    intervals: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, u) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        if np.any(u < self.lower) or np.any(u > self.upper):
            return False
        return float(self.density(u)) > self.threshold

    def contains_many(self, points) -> np.ndarray:
        pts = as_points(points, dim=self.dim)
        return np.array([self.contains(p) for p in pts])


def truncation_region(
    density: Callable, threshold: float, scan_box, resolution: int = 1024
) -> TruncationRegion:
    """Locate the superlevel set of ``density`` above ``threshold``.

    In 1-d the interval endpoints are refined by bisection to 1e-8. A
    scan grid with no point above the threshold raises EmptyRegionError.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    lo, hi = scan_box
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    region = TruncationRegion(density=density, threshold=float(threshold), lower=lo, upper=hi)

    if lo.size == 1:
        xs = np.linspace(lo[0], hi[0], resolution)
        vals = np.array([float(density(x)) - threshold for x in xs])
        above = vals > 0
        if not above.any():
            raise EmptyRegionError(
                f"no scan point has density above threshold {threshold:.3e}"
            )

        def refine(a, b):
            # bisect density(x) - threshold between a sign change
            fa = float(density(a)) - threshold
            for _ in range(200):
                mid = 0.5 * (a + b)
                if abs(b - a) < 1e-8:
                    break
                fm = float(density(mid)) - threshold
                if (fa > 0) == (fm > 0):
                    a, fa = mid, fm
                else:
                    b = mid
            return 0.5 * (a + b)

        intervals = []
        start = None
        for i in range(resolution):
            if above[i] and start is None:
                start = xs[i] if i == 0 else refine(xs[i - 1], xs[i])
            elif not above[i] and start is not None:
                intervals.append((start, refine(xs[i], xs[i - 1])))
                start = None
        if start is not None:
            intervals.append((start, xs[-1]))
        region.intervals = intervals
    else:
        axes = [np.linspace(lo[i], hi[i], resolution) for i in range(lo.size)]
        mesh = np.stack(
            [m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1
        )
        if not any(float(density(p)) > threshold for p in mesh):
            raise EmptyRegionError(
                f"no scan point has density above threshold {threshold:.3e}"
            )
    return region


class FillDistance(NamedTuple):
    value: float
    method: str

    def __float__(self):
        return self.value


@njit(cache=True)
def _max_min_dist_loops(candidates, pts):
    best = 0.0
    for c in range(candidates.shape[0]):
        dmin = np.inf
        for n in range(pts.shape[0]):
            s = 0.0
            for t in range(pts.shape[1]):
                diff = candidates[c, t] - pts[n, t]
                s += diff * diff
            if s < dmin:
                dmin = s
        if dmin > best:
            best = dmin
    return math.sqrt(best)


def _max_min_dist_numpy(candidates, pts):
    # KD-tree nearest-neighbour queries; exact Euclidean distances.
    dists, _ = cKDTree(pts).query(candidates)
    return float(dists.max())


if USE_NUMBA:
    _max_min_dist = _max_min_dist_loops
else:
    _max_min_dist = _max_min_dist_numpy


def _exact_fill_1d(pts: np.ndarray, segments) -> float:
    """Exact 1-d fill distance over a union of closed intervals.

    Supremum candidates are segment endpoints and midpoints between
    consecutive design points; distances are taken to the globally
    nearest design point.
    """
    s = np.sort(pts)
    cands = []
    for lo, hi in segments:
        cands.extend((lo, hi))
    cands.extend(0.5 * (s[:-1] + s[1:]))
    cands = np.asarray(cands)
    keep = np.zeros(cands.size, dtype=bool)
    for lo, hi in segments:
        keep |= (cands >= lo) & (cands <= hi)
    cands = cands[keep]
    idx = np.searchsorted(s, cands)
    left = np.where(idx > 0, np.abs(cands - s[np.maximum(idx - 1, 0)]), np.inf)
    right = np.where(idx < s.size, np.abs(s[np.minimum(idx, s.size - 1)] - cands), np.inf)
    return float(np.maximum(0.0, np.minimum(left, right)).max())


def fill_distance(design, region, resolution: int = 512) -> FillDistance:
    """Fill distance of a design within a region.

    ``region`` is either a box (lower, upper) or a TruncationRegion. In
    one dimension the value is exact (sorting); otherwise the supremum
    is approximated on a tensor candidate grid with ``resolution`` points
    per dimension, intersected with the region.
    """
    pts = as_points(design)
    if isinstance(region, TruncationRegion):
        lo, hi = region.lower, region.upper
        inside = region.contains_many(pts)
    else:
        lo, hi = region
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    pts_in = pts[inside]
    if pts_in.shape[0] == 0:
        return FillDistance(np.inf, "empty-design")

    if lo.size == 1:
        if isinstance(region, TruncationRegion):
            segments = region.intervals or [(lo[0], hi[0])]
        else:
            segments = [(lo[0], hi[0])]
        return FillDistance(_exact_fill_1d(pts_in[:, 0], segments), "exact-1d")

    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(lo.size)]
    cands = np.stack(
        [m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1
    )
    if isinstance(region, TruncationRegion):
        cands = cands[region.contains_many(cands)]
        if cands.shape[0] == 0:
            return FillDistance(np.inf, "empty-region-grid")
    value = _max_min_dist(
        np.ascontiguousarray(cands), np.ascontiguousarray(pts_in)
    )
    return FillDistance(float(value), f"grid-{resolution}")


@dataclass
class FillStudyRow:
    n: int
    mean_h: float
    std_error: float
    q10: float
    q90: float
    tail_prob: float


@dataclass
class FillStudyResult:
    rows: list
    slope: float
    tail_threshold: float
    samples: list  # (n, replicate, h) triples


def fill_decay_study(
    measure,
    region,
    n_list,
    replications: int,
    seed: int,
    resolution: int = 512,
    tail_threshold: float | None = None,
) -> FillStudyResult:
    """Monte Carlo decay of the fill distance as the design grows.

    For each N in ``n_list``, draws ``replications`` designs from the
    measure, records the fill distance within the region, and fits the
    log-log slope of the mean against N. ``tail_threshold`` sets h0 for
    the empirical tail P[h > h0]; by default the pooled median is used.
    Replicate RNG streams come from the documented seed-splitting rule,
    and reductions run over sorted values so results do not depend on
    replication order.
    """
    n_list = [int(n) for n in n_list]
    if sorted(n_list) != n_list:
        raise ValueError("n_list must be increasing")
    if replications < 1:
        raise ValueError("need at least one replication")
    all_h: dict[int, np.ndarray] = {}
    samples = []
    stream = 0
    for n in n_list:
        h_vals = np.empty(replications)
        for r in range(replications):
            design = sample_design(measure, n, split_seed(seed, stream))
            stream += 1
            h_vals[r] = fill_distance(design, region, resolution).value
            samples.append((n, r, float(h_vals[r])))
        all_h[n] = np.sort(h_vals)

    if tail_threshold is None:
        pooled = np.sort(np.concatenate(list(all_h.values())))
        tail_threshold = float(np.median(pooled))

    rows = []
    for n in n_list:
        h = all_h[n]  # sorted: deterministic reduction
        rows.append(
            FillStudyRow(
                n=n,
                mean_h=float(np.mean(h)),
                std_error=float(np.std(h, ddof=1) / np.sqrt(h.size)) if h.size > 1 else 0.0,
                q10=float(np.quantile(h, 0.1)),
                q90=float(np.quantile(h, 0.9)),
                tail_prob=float(np.mean(h > tail_threshold)),
            )
        )
    log_n = np.log([row.n for row in rows])
    log_h = np.log([row.mean_h for row in rows])
    slope = float(np.polyfit(log_n, log_h, 1)[0])
    return FillStudyResult(
        rows=rows, slope=slope, tail_threshold=tail_threshold, samples=samples
    )


def partition_report(design, density: Callable, box, n_cells: int, resolution: int = 512):
    """Per-cell sup of a density and fill distance on a 1-d uniform partition.

    Returns rows (cell_lo, cell_hi, sup_density, fill_distance); cells
    with no design point report an infinite fill distance.
    """
    lo, hi = box
    edges = np.linspace(float(lo), float(hi), n_cells + 1)
    pts = as_points(design)
    if pts.shape[1] != 1:
        raise ValueError("partition report is 1-d only")
    rows = []
    for i in range(n_cells):
        a, b = edges[i], edges[i + 1]
        xs = np.linspace(a, b, max(resolution // n_cells, 8))
        sup_d = float(max(float(density(x)) for x in xs))
        h = fill_distance(pts, (np.array([a]), np.array([b]))).value
        rows.append((float(a), float(b), sup_d, h))
    return rows
