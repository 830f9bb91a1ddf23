"""Random-walk Metropolis-Hastings sampling and chain diagnostics.

The sampler targets an arbitrary log-density. At state u it proposes
u' = u + step * xi with xi ~ N(0, I) (symmetric, so the proposal-density
ratio cancels) and accepts with probability min(1, pi(u') / pi(u)),
evaluated in the log domain. Rejected steps repeat the current state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import as_point, split_seed

__all__ = [
    "RandomWalkProposal",
    "random_walk_proposal",
    "Chain",
    "metropolis_hastings",
    "ChainDiagnostics",
    "chain_diagnostics",
    "chain_seeds",
]


@dataclass(frozen=True)
class RandomWalkProposal:
    """Gaussian-increment proposal u' = u + step * N(0, I)."""

    step: np.ndarray

    def sample(self, rng, u: np.ndarray) -> np.ndarray:
        return u + self.step * rng.standard_normal(u.shape)


def random_walk_proposal(step) -> RandomWalkProposal:
    """Proposal with a scalar or per-dimension positive step size."""
    arr = np.atleast_1d(np.asarray(step, dtype=np.float64))
    if np.any(arr <= 0):
        raise ValueError("proposal step must be positive")
    return RandomWalkProposal(step=arr)


@dataclass
class Chain:
    """Sampled chain with per-step bookkeeping.

    ``log_densities[i]`` is the target log-density of ``samples[i]``;
    ``proposal_log_densities[i]`` is the log-density of the point that
    was *proposed* at step i (kept or not), so likelihood-evaluation
    cost is one per step.
    """

    samples: np.ndarray
    log_densities: np.ndarray
    accepted: np.ndarray
    proposal: RandomWalkProposal
    seed: int
    proposal_log_densities: np.ndarray

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def metropolis_hastings(log_target, proposal: RandomWalkProposal, init, n: int, seed: int) -> Chain:
    """Run ``n`` states of random-walk Metropolis-Hastings from ``init``.

    ``log_target`` must be finite at ``init``. The chain is deterministic
    given the seed: one proposal draw and one uniform draw per step, in
    that order. NaN from the target aborts with the offending point.
    """
    u = as_point(init)
    if proposal.step.size not in (1, u.size):
        raise ValueError(
            f"proposal step has dimension {proposal.step.size}, state has {u.size}"
        )
    if n < 1:
        raise ValueError("chain length must be at least 1")
    lp = float(log_target(u))
    if np.isnan(lp):
        raise ArithmeticError(f"log-target returned NaN at initial point {u}")
    if lp == -np.inf:
        raise ValueError("initial point has zero target density")

    rng = np.random.default_rng(seed)
    d = u.size
    samples = np.empty((n, d))
    log_densities = np.empty(n)
    proposal_log_densities = np.empty(n)
    accepted = np.zeros(n, dtype=bool)
    samples[0] = u
    log_densities[0] = lp
    proposal_log_densities[0] = lp
    accepted[0] = True

    for i in range(1, n):
        cand = proposal.sample(rng, u)
        lp_cand = float(log_target(cand))
        if np.isnan(lp_cand):
            raise ArithmeticError(f"log-target returned NaN at {cand}")
        proposal_log_densities[i] = lp_cand
        # accept iff log U < log alpha; symmetric proposal cancels q.
        if np.log(rng.uniform()) < lp_cand - lp:
            u = cand
            lp = lp_cand
            accepted[i] = True
        samples[i] = u
        log_densities[i] = lp
    return Chain(
        samples=samples,
        log_densities=log_densities,
        accepted=accepted,
        proposal=proposal,
        seed=int(seed),
        proposal_log_densities=proposal_log_densities,
    )


@dataclass
class ChainDiagnostics:
    acceptance_rate: float
    mean: np.ndarray
    variance: np.ndarray
    iact: np.ndarray
    n_used: int

    def as_dict(self) -> dict:
        out = {"acceptance_rate": self.acceptance_rate, "n_used": self.n_used}
        for i in range(self.mean.size):
            out[f"mean_{i}"] = float(self.mean[i])
            out[f"variance_{i}"] = float(self.variance[i])
            out[f"iact_{i}"] = float(self.iact[i])
        return out


def _iact_initial_positive(x: np.ndarray) -> float:
    """Integrated autocorrelation time by initial-positive-sequence truncation.

    Sums adjacent autocorrelation pairs while the pair sums stay
    positive (a standard estimator for reversible chains); a constant
    series reports 1.
    """
    n = x.size
    x = x - x.mean()
    c0 = float(x @ x) / n
    if c0 == 0.0:
        return 1.0
    # autocovariances via FFT
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conjugate(f), m)[:n].real / n
    rho = acov / c0
    total = 0.0
    k = 0
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        total += pair
        k += 2
    return max(2.0 * total - 1.0, 0.0)


def chain_diagnostics(chain: Chain, burn_in: int) -> ChainDiagnostics:
    """Acceptance rate, moments and IACT of the post-burn-in samples."""
    n = len(chain)
    if burn_in >= n:
        raise ValueError(f"burn-in {burn_in} leaves no samples from a chain of {n}")
    kept = chain.samples[burn_in:]
    acc = chain.accepted[max(burn_in, 1):]
    rate = float(np.mean(acc)) if acc.size else 1.0
    return ChainDiagnostics(
        acceptance_rate=rate,
        mean=kept.mean(axis=0),
        variance=kept.var(axis=0, ddof=1) if kept.shape[0] > 1 else np.zeros(chain.dim),
        iact=np.array([_iact_initial_positive(kept[:, j]) for j in range(chain.dim)]),
        n_used=kept.shape[0],
    )


def chain_seeds(master_seed: int, n_chains: int) -> list[int]:
    """Disjoint per-chain seeds derived from a master seed.

    Stream i uses ``split_seed(master_seed, i)`` (fixed 64-bit additive
    rule), so independent chains can run in parallel reproducibly.
    """
    return [split_seed(master_seed, i) for i in range(n_chains)]
