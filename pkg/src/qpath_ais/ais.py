"""Annealed importance sampling over a path schedule, plus two-sided bounds.

Weights are accumulated entirely in the log domain.  For each chain:
draw from the base, then for every temperature add the log increment
``log pi_t(z) - log pi_{t-1}(z)`` before refreshing z with HMC targeting
pi_t.  The mean weight is unbiased for the endpoint mass ratio for any
path, which :func:`enumerate_discrete_ais` verifies exactly on small
discrete instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .deformed import log_power_mean
from .errors import (
    CapabilityError,
    DomainError,
    NumericalFailureError,
    PreconditionError,
)
from .hmc import HmcConfig, RngStream, as_generator, hmc_transition
from .paths import QPath, Schedule, log_density_at

__all__ = [
    "AisResult",
    "BdmcResult",
    "log_mean_exp",
    "effective_sample_size",
    "run_ais",
    "run_bdmc",
    "discrete_path_pmf",
    "metropolis_kernel",
    "enumerate_discrete_ais",
]

# Fraction of NaN-weight chains tolerated before a run is declared failed.
INVALID_CHAIN_BUDGET = 0.01


def log_mean_exp(xs) -> float:
    """log((1/n) sum exp(x_i)) with max-shift; exact on constant input."""
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        raise PreconditionError("log_mean_exp of an empty sequence")
    m = float(np.max(x))
    if m == -math.inf:
        return -math.inf
    return float(m + np.log(np.mean(np.exp(x - m))))


def effective_sample_size(log_weights) -> float:
    """(sum w)^2 / sum w^2 in the log domain; n for uniform weights."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0:
        raise PreconditionError("effective_sample_size of an empty sequence")
    m = float(np.max(lw))
    if m == -math.inf:
        raise DomainError("effective sample size undefined for all-zero weights")
    t = np.exp(lw - m)
    return float(np.sum(t) ** 2 / np.sum(t * t))


@dataclass(frozen=True)
class AisResult:
    """Per-chain log weights (valid chains only) and derived diagnostics."""

    log_weights: np.ndarray
    log_ratio_estimate: float
    ess: float
    n_invalid: int
    per_step_log_increments: Optional[np.ndarray]
    seed: RngStream


@dataclass(frozen=True)
class BdmcResult:
    """Forward lower / reverse upper stochastic bounds on the log ratio."""

    lower: float
    upper: float
    gap: float
    forward: AisResult
    reverse: AisResult


def run_ais(
    path: QPath,
    schedule: Schedule,
    cfg: HmcConfig,
    n_chains: int,
    rng: RngStream,
    keep_increments: bool = True,
) -> AisResult:
    """Run annealed importance sampling along the schedule.

    The base handle must be normalized and exactly samplable.  Chains are
    vectorized: all draws come from the stream's generator in a fixed
    order, so results are reproducible given (seed, stream_id).  Chains
    whose weight turns NaN are excluded with a count; more than
    INVALID_CHAIN_BUDGET of them fails the run loudly.  Chains resting at
    zero density stop moving but keep their (zero) weight.
    """
    if int(n_chains) != n_chains or n_chains < 1:
        raise PreconditionError(f"n_chains must be a positive integer, got {n_chains}")
    base = path.base
    if not base.is_normalized or base.exact_sampler is None:
        raise CapabilityError("run_ais needs a normalized base with an exact sampler")
    betas = schedule.betas
    T = schedule.n_temperatures
    gen = as_generator(rng)
    n = int(n_chains)

    z = np.asarray(base.exact_sampler(gen, n), dtype=float)
    logw = np.zeros(n)
    incs = np.zeros((n, T)) if keep_increments else None

    for t in range(1, T + 1):
        with np.errstate(invalid="ignore"):
            lcur = np.asarray(log_density_at(path, betas[t], z), dtype=float)
            lprev = np.asarray(log_density_at(path, betas[t - 1], z), dtype=float)
            inc = lcur - lprev  # -inf minus -inf marks the chain invalid
        logw = logw + inc
        if incs is not None:
            incs[:, t - 1] = inc
        movable = np.isfinite(logw) & np.isfinite(lcur)
        if cfg.transitions_per_temperature > 0 and np.any(movable):
            zm = z[movable]
            for _ in range(cfg.transitions_per_temperature):
                zm, _acc = hmc_transition(path, betas[t], zm, cfg, gen)
            z = z.copy()
            z[movable] = zm

    invalid = np.isnan(logw)
    n_invalid = int(np.count_nonzero(invalid))
    if n_invalid > INVALID_CHAIN_BUDGET * n:
        raise NumericalFailureError(
            f"{n_invalid} of {n} chains produced NaN weights (budget "
            f"{INVALID_CHAIN_BUDGET:.0%})"
        )
    lw = logw[~invalid]
    est = log_mean_exp(lw)
    ess = effective_sample_size(lw)
    return AisResult(
        log_weights=lw,
        log_ratio_estimate=est,
        ess=ess,
        n_invalid=n_invalid,
        per_step_log_increments=incs[~invalid] if incs is not None else None,
        seed=rng if isinstance(rng, RngStream) else RngStream(0, 0),
    )


def run_bdmc(
    path: QPath, schedule: Schedule, cfg: HmcConfig, n_chains: int, rng: RngStream
) -> BdmcResult:
    """Forward and reverse AIS giving a stochastic sandwich on the log ratio.

    The reverse run swaps the endpoints and reflects the schedule, which
    traverses the identical bridge of intermediates backwards; both
    endpoints must therefore be normalized and samplable.  In expectation
    lower <= true log ratio <= upper.
    """
    if not path.target.is_normalized or path.target.exact_sampler is None:
        raise CapabilityError("run_bdmc needs a normalized, samplable target")
    if not isinstance(rng, RngStream):
        raise PreconditionError("run_bdmc derives substreams and needs an RngStream")
    forward = run_ais(path, schedule, cfg, n_chains, rng.child(0))
    rev_path = QPath(path.target, path.base, path.q)
    rev_sched = Schedule(tuple(1.0 - b for b in reversed(schedule.betas)))
    reverse = run_ais(rev_path, rev_sched, cfg, n_chains, rng.child(1))
    lower = forward.log_ratio_estimate
    upper = -reverse.log_ratio_estimate
    return BdmcResult(lower, upper, upper - lower, forward, reverse)


def discrete_path_pmf(unnorm_base, unnorm_target, q: float, beta: float) -> np.ndarray:
    """Unnormalized power-mean interpolation of two positive mass vectors."""
    b = np.asarray(unnorm_base, dtype=float)
    t = np.asarray(unnorm_target, dtype=float)
    if b.shape != t.shape or b.ndim != 1:
        raise PreconditionError("base and target vectors must share a 1-d shape")
    if not (np.all(b > 0.0) and np.all(t > 0.0)):
        raise DomainError("mass vectors must be strictly positive")
    lv = np.stack([np.log(b), np.log(t)])
    return np.exp(log_power_mean((1.0 - beta, beta), lv, q))


def metropolis_kernel(pmf) -> np.ndarray:
    """Uniform-proposal Metropolis matrix leaving pmf invariant.

    Detailed balance holds exactly: p_i K_ij = min(p_i, p_j) / S.
    """
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or not np.all(p > 0.0):
        raise DomainError("pmf must be a 1-d vector of positive masses")
    S = p.size
    K = np.minimum(1.0, p[None, :] / p[:, None]) / S
    np.fill_diagonal(K, 0.0)
    np.fill_diagonal(K, 1.0 - K.sum(axis=1))
    return K


def enumerate_discrete_ais(
    n_states: int,
    unnorm_base,
    unnorm_target,
    q: float,
    schedule: Schedule,
    kernels: Sequence[np.ndarray],
) -> float:
    """Exact expected AIS weight by summing over every state sequence.

    Serves as the exactness oracle for the unbiasedness of the sampled
    estimator: the returned E[w] equals the ratio of the target and base
    total masses, whatever the path order and schedule.  Each kernel t
    must be row-stochastic and leave the normalized path distribution at
    beta_t invariant (checked to 1e-12).  Sizes are capped so full
    enumeration stays exact and cheap.
    """
    if n_states > 8:
        raise PreconditionError("enumeration capped at 8 states")
    T = schedule.n_temperatures
    if T > 6:
        raise PreconditionError("enumeration capped at 6 temperatures")
    b = np.asarray(unnorm_base, dtype=float)
    t_vec = np.asarray(unnorm_target, dtype=float)
    if b.shape != (n_states,) or t_vec.shape != (n_states,):
        raise PreconditionError("mass vectors must have length n_states")
    if len(kernels) != T:
        raise PreconditionError(f"need one kernel per temperature ({T})")

    betas = schedule.betas
    pmfs = [discrete_path_pmf(b, t_vec, q, beta) for beta in betas]
    log_pmfs = [np.log(p) for p in pmfs]

    for t in range(1, T + 1):
        K = np.asarray(kernels[t - 1], dtype=float)
        if K.shape != (n_states, n_states):
            raise PreconditionError(f"kernel {t} has shape {K.shape}")
        if np.max(np.abs(K.sum(axis=1) - 1.0)) > 1e-12 or np.any(K < 0.0):
            raise PreconditionError(f"kernel {t} is not row-stochastic")
        pi = pmfs[t] / pmfs[t].sum()
        if np.max(np.abs(pi @ K - pi)) > 1e-12:
            raise PreconditionError(f"kernel {t} does not leave the path distribution invariant")

    p0 = pmfs[0] / pmfs[0].sum()
    total = 0.0
    # Sequences (z_0 .. z_{T-1}); the state after the final increment never
    # enters the weight, so the last kernel only needed validation.
    for seq in itertools.product(range(n_states), repeat=T):
        prob = p0[seq[0]]
        for t in range(1, T):
            prob *= kernels[t - 1][seq[t - 1], seq[t]]
        if prob == 0.0:
            continue
        logw = 0.0
        for t in range(1, T + 1):
            logw += log_pmfs[t][seq[t - 1]] - log_pmfs[t - 1][seq[t - 1]]
        total += prob * math.exp(logw)
    return float(total)
