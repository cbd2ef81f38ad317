"""Power-mean interpolation paths between a base and a target density.

The intermediate unnormalized density at mixing weight beta is the
weighted power mean of order q of the endpoint densities,

    pi_beta(z) = [ (1-beta) base(z)^(1-q) + beta target(z)^(1-q) ]^(1/(1-q)),

with the geometric mixture as the q = 1 branch.  Intermediates are only
ever evaluated unnormalized; normalization enters through importance
weights and :func:`estimate_partition`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .deformed import is_log_branch, ln_q, log_power_mean
from .densities import (
    DensityHandle,
    GaussianSpec,
    StudentTSpec,
    as_point_batch,
    gradient_like_input,
    make_gaussian,
    make_student_t,
    q_from_nu,
    student_t_log_norm_const,
    _spd_matrix,
    _vector,
)
from .errors import (
    CapabilityError,
    DegenerateInputError,
    DomainError,
    PreconditionError,
)

__all__ = [
    "QPath",
    "Schedule",
    "PartitionEstimate",
    "linear_schedule",
    "log_density_at",
    "grad_log_density_at",
    "sufficient_statistic",
    "q_exp_form_check",
    "estimate_partition",
    "reparameterize_theta_to_beta",
    "reparameterize_beta_to_theta",
    "interpolated_member_check",
]


@dataclass(frozen=True)
class QPath:
    """A base/target handle pair plus the order parameter of the mean."""

    base: DensityHandle
    target: DensityHandle
    q: float

    def __post_init__(self):
        if self.base.dim != self.target.dim:
            raise PreconditionError(
                f"endpoint dimensions differ: {self.base.dim} vs {self.target.dim}"
            )
        if not math.isfinite(self.q):
            raise DomainError(f"q must be finite, got {self.q}")

    @property
    def dim(self) -> int:
        return self.base.dim


@dataclass(frozen=True)
class Schedule:
    """Monotone mixing weights from 0 to 1 indexing the intermediates."""

    betas: tuple

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise PreconditionError("a schedule needs at least the two endpoints")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise PreconditionError("schedule must start at 0 and end at 1")
        if np.any(np.diff(b) <= 0.0):
            raise PreconditionError("schedule must be strictly increasing")
        object.__setattr__(self, "betas", tuple(float(x) for x in b))

    @property
    def n_temperatures(self) -> int:
        return len(self.betas) - 1


@dataclass(frozen=True)
class PartitionEstimate:
    """Monte Carlo normalizer estimate: log value, linear-scale std error."""

    log_z: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise PreconditionError("n_samples must be >= 1")
        if math.isnan(self.std_error) or self.std_error < 0.0:
            raise PreconditionError("std_error must be finite and non-negative")


def linear_schedule(T: int) -> Schedule:
    """Uniformly spaced schedule with T temperature steps (T + 1 grid points)."""
    if int(T) != T or T < 1:
        raise PreconditionError(f"T must be a positive integer, got {T}")
    return Schedule(tuple(np.linspace(0.0, 1.0, int(T) + 1)))


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if math.isnan(beta) or not (0.0 <= beta <= 1.0):
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    return beta


def log_density_at(path: QPath, beta: float, z):
    """Unnormalized log density of the path at mixing weight beta.

    The beta = 0 and beta = 1 branches return the endpoint log densities
    without any mean arithmetic.  Returns -inf where the interpolated
    density vanishes.
    """
    beta = _check_beta(beta)
    if beta == 0.0:
        return path.base.log_density(z)
    if beta == 1.0:
        return path.target.log_density(z)
    l0 = np.asarray(path.base.log_density(z), dtype=float)
    l1 = np.asarray(path.target.log_density(z), dtype=float)
    if is_log_branch(path.q):
        out = (1.0 - beta) * l0 + beta * l1
        out = np.where(l0 == l1, l0, out)  # exact when the endpoints agree
        return float(out) if out.ndim == 0 else out
    return log_power_mean((1.0 - beta, beta), np.stack([l0, l1]), path.q)


def _responsibilities(l0, l1, beta: float, q: float):
    """Normalized endpoint weights of the path gradient, plus a dead mask.

    Dead entries are points where the path density vanishes (gradient
    undefined there).
    """
    if is_log_branch(q):
        r0 = np.full_like(l0, 1.0 - beta)
        r1 = np.full_like(l1, beta)
        dead = np.isneginf(l0) | np.isneginf(l1)
        return r0, r1, dead
    s = 1.0 - q
    if s > 0.0:
        dead = np.isneginf(l0) & np.isneginf(l1)
    else:
        dead = np.isneginf(l0) | np.isneginf(l1)
    l0s = np.where(np.isneginf(l0), 0.0, l0)
    l1s = np.where(np.isneginf(l1), 0.0, l1)
    a0 = math.log1p(-beta) + s * l0s
    a1 = math.log(beta) + s * l1s
    a0 = np.where(np.isneginf(l0), -np.inf if s > 0 else np.inf, a0)
    a1 = np.where(np.isneginf(l1), -np.inf if s > 0 else np.inf, a1)
    m = np.maximum(a0, a1)
    with np.errstate(invalid="ignore"):
        e0 = np.where(dead, 0.0, np.exp(a0 - m))
        e1 = np.where(dead, 0.0, np.exp(a1 - m))
    tot = e0 + e1
    tot = np.where(dead, 1.0, tot)
    return e0 / tot, e1 / tot, dead


def _grad_batch(path: QPath, beta: float, zb: np.ndarray, *, nan_on_dead: bool):
    base, target = path.base, path.target
    if base.grad_log_density is None or target.grad_log_density is None:
        raise PreconditionError("both endpoint gradients are required")
    if beta == 0.0:
        return np.asarray(base.grad_log_density(zb), dtype=float)
    if beta == 1.0:
        return np.asarray(target.grad_log_density(zb), dtype=float)
    l0 = np.asarray(base.log_density(zb), dtype=float)
    l1 = np.asarray(target.log_density(zb), dtype=float)
    r0, r1, dead = _responsibilities(l0, l1, beta, path.q)
    if np.any(dead) and not nan_on_dead:
        raise DomainError("gradient undefined where the path density vanishes")
    g0 = np.asarray(base.grad_log_density(zb), dtype=float)
    g1 = np.asarray(target.grad_log_density(zb), dtype=float)
    out = np.where(r0[:, None] > 0.0, r0[:, None] * g0, 0.0) + np.where(
        r1[:, None] > 0.0, r1[:, None] * g1, 0.0
    )
    if np.any(dead):
        out = np.where(dead[:, None], np.nan, out)
    return out


def grad_log_density_at(path: QPath, beta: float, z):
    """Gradient in z of :func:`log_density_at`.

    Combines the endpoint gradients with responsibilities proportional to
    ``(1-beta) base^(1-q)`` and ``beta target^(1-q)``, computed in the log
    domain; the q = 1 branch uses the fixed pair (1-beta, beta).
    """
    beta = _check_beta(beta)
    zb, single = as_point_batch(z, path.dim)
    out = _grad_batch(path, beta, zb, nan_on_dead=False)
    return gradient_like_input(out, z, path.dim, single)


def sufficient_statistic(path: QPath, z):
    """Deformed log of the target/base ratio, from log densities directly.

    Equals ``ln_q(target(z) / base(z))`` but is computed as
    ``expm1((1-q) (l1 - l0)) / (1-q)`` so that extreme ratios stay stable.
    """
    l0 = np.asarray(path.base.log_density(z), dtype=float)
    l1 = np.asarray(path.target.log_density(z), dtype=float)
    if np.any(np.isneginf(l0)):
        raise DomainError("base density must be positive at z")
    delta = l1 - l0
    if is_log_branch(path.q):
        return float(delta) if delta.ndim == 0 else delta
    s = 1.0 - path.q
    with np.errstate(over="ignore"):
        out = np.expm1(s * delta) / s
    return float(out) if out.ndim == 0 else out


def q_exp_form_check(path: QPath, beta: float, z):
    """Log of ``base(z) * exp_q(beta * phi(z))`` with phi the sufficient statistic.

    Algebraically identical to :func:`log_density_at`; exposed so the
    deformed-exponential-family form of the path is directly testable.
    """
    beta = _check_beta(beta)
    l0 = np.asarray(path.base.log_density(z), dtype=float)
    l1 = np.asarray(path.target.log_density(z), dtype=float)
    if np.any(np.isneginf(l0)):
        raise DomainError("base density must be positive at z")
    delta = l1 - l0
    if is_log_branch(path.q):
        out = l0 + beta * delta
        return float(out) if out.ndim == 0 else out
    s = 1.0 - path.q
    with np.errstate(over="ignore", invalid="ignore"):
        arg = beta * np.expm1(s * delta)  # equals (1-q) * beta * phi(z)
        safe = np.where(arg > -1.0, arg, 0.0)
        out = l0 + np.where(arg > -1.0, np.log1p(safe) / s, -np.inf)
    return float(out) if out.ndim == 0 else out


def estimate_partition(path: QPath, beta: float, n: int, rng) -> PartitionEstimate:
    """Monte Carlo estimate of the path normalizer at beta.

    Averages ``exp_q(beta * phi(z))`` over exact draws from the base,
    which must be a normalized density with a sampler.  The mean is
    reduced in the log domain; the reported standard error is on the
    linear scale.
    """
    beta = _check_beta(beta)
    if int(n) != n or n < 1:
        raise PreconditionError(f"n must be a positive integer, got {n}")
    base = path.base
    if not base.is_normalized or base.exact_sampler is None:
        raise CapabilityError(
            "estimate_partition needs a normalized base with an exact sampler"
        )
    gen = rng.generator() if hasattr(rng, "generator") else rng
    z = base.exact_sampler(gen, int(n))
    l0 = np.asarray(base.log_density(z), dtype=float)
    l1 = np.asarray(path.target.log_density(z), dtype=float)
    delta = l1 - l0
    if is_log_branch(path.q):
        log_s = beta * delta
    else:
        s = 1.0 - path.q
        with np.errstate(over="ignore", invalid="ignore"):
            arg = beta * np.expm1(s * delta)
            safe = np.where(arg > -1.0, arg, 0.0)
            log_s = np.where(arg > -1.0, np.log1p(safe) / s, -np.inf)
    m = float(np.max(log_s))
    if m == -np.inf:
        return PartitionEstimate(-np.inf, 0.0, int(n))
    t = np.exp(log_s - m)
    log_z = m + math.log(float(np.mean(t)))
    if n >= 2:
        se = math.exp(m) * float(np.std(t, ddof=1)) / math.sqrt(n)
    else:
        se = 0.0
    return PartitionEstimate(float(log_z), se, int(n))


def reparameterize_theta_to_beta(theta: float, psi_q: float, q: float) -> tuple[float, float]:
    """Map free-energy parameters (theta, psi_q) to (beta, log Z).

    beta = theta / (1 + (1-q)(-psi_q)) and Z is the reciprocal of
    ``exp_q(-psi_q)``; the q = 1 branch is the identity map.
    """
    if is_log_branch(q):
        return float(theta), float(psi_q)
    s = 1.0 - q
    denom = 1.0 + s * (-psi_q)
    if denom <= 0.0:
        raise DegenerateInputError(
            "1 + (1-q)(-psi_q) must be positive (exp_q clamp would activate)"
        )
    beta = theta / denom
    log_z = -math.log(denom) / s
    return float(beta), float(log_z)


def reparameterize_beta_to_theta(beta: float, log_z: float, q: float) -> tuple[float, float]:
    """Inverse of :func:`reparameterize_theta_to_beta`."""
    if is_log_branch(q):
        return float(beta), float(log_z)
    s = 1.0 - q
    denom = math.exp(-s * log_z)
    psi_q = (1.0 - denom) / s
    return float(beta * denom), float(psi_q)


def _gaussian_member(spec0: GaussianSpec, spec1: GaussianSpec, beta: float):
    mu0 = _vector(spec0.mean)
    mu1 = _vector(spec1.mean)
    if mu0.size != mu1.size:
        raise PreconditionError("endpoint dimensions differ")
    d = mu0.size
    cov0, _ = _spd_matrix(spec0.variance, d, "variance")
    cov1, _ = _spd_matrix(spec1.variance, d, "variance")
    prec0 = np.linalg.solve(cov0, np.eye(d))
    prec1 = np.linalg.solve(cov1, np.eye(d))
    prec = (1.0 - beta) * prec0 + beta * prec1
    h = (1.0 - beta) * (prec0 @ mu0) + beta * (prec1 @ mu1)
    cov = np.linalg.solve(prec, np.eye(d))
    mean = cov @ h
    path = QPath(make_gaussian(spec0), make_gaussian(spec1), 1.0)
    return path, make_gaussian(GaussianSpec(mean, cov))


def _student_member(spec0: StudentTSpec, spec1: StudentTSpec, beta: float):
    nu = float(spec0.dof)
    if nu != float(spec1.dof):
        raise PreconditionError("student-t endpoints must share the dof")
    mu0 = _vector(spec0.mean)
    mu1 = _vector(spec1.mean)
    if mu0.size != mu1.size:
        raise PreconditionError("endpoint dimensions differ")
    d = mu0.size
    q = q_from_nu(nu, d)
    s = 1.0 - q  # negative

    # Each normalized endpoint is exp_q of a quadratic: fold the
    # normalization constant into the quadratic via
    # c * exp_q(u) = exp_q(ln_q(c) + c^(1-q) u), then mix coefficients.
    coeffs = []
    for spec in (spec0, spec1):
        mu = _vector(spec.mean)
        scale, chol = _spd_matrix(spec.scale_matrix, d, "scale_matrix")
        prec = np.linalg.solve(scale, np.eye(d))
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        log_c = student_t_log_norm_const(nu, d, log_det)
        k = math.exp(s * log_c)
        lnq_c = math.expm1(s * log_c) / s
        quad = k * prec / (s * nu)
        lin = -2.0 * k * (prec @ mu) / (s * nu)
        const = lnq_c + k * float(mu @ prec @ mu) / (s * nu)
        coeffs.append((const, lin, quad))

    w0, w1 = 1.0 - beta, beta
    const = w0 * coeffs[0][0] + w1 * coeffs[1][0]
    lin = w0 * coeffs[0][1] + w1 * coeffs[1][1]
    quad = w0 * coeffs[0][2] + w1 * coeffs[1][2]

    # Complete the square of 1 + (1-q) * (quadratic) back into a
    # Student-t of the same dof.
    A = s * quad
    c = s * lin
    e = 1.0 + s * const
    try:
        mean = np.linalg.solve(A, -0.5 * c)
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("interpolated quadratic form is singular") from exc
    D = e - float(mean @ A @ mean)
    if D <= 0.0:
        raise DegenerateInputError("interpolated member has non-positive core")
    scale = D * np.linalg.solve(A, np.eye(d)) / nu
    path = QPath(make_student_t(spec0), make_student_t(spec1), q)
    return path, make_student_t(StudentTSpec(mean, scale, nu))


def interpolated_member_check(
    family: str, spec0, spec1, beta: float, grid: Sequence
) -> float:
    """Max log-density gap between the path and the closed-family member.

    For ``gaussian-geometric`` the q = 1 path between two Gaussians is
    compared against the Gaussian with interpolated natural parameters
    (precision-weighted).  For ``student-t-q`` the endpoints must share
    the dof; the path order is derived from it and the member comes from
    interpolating the quadratic forms of the deformed-exponential
    representation.  A single multiplicative constant is fit at the
    middle grid point because the closure algebra holds for unnormalized
    forms while the endpoint handles are normalized.
    """
    beta = _check_beta(beta)
    if family == "gaussian-geometric":
        path, member = _gaussian_member(spec0, spec1, beta)
    elif family == "student-t-q":
        path, member = _student_member(spec0, spec1, beta)
    else:
        raise PreconditionError(f"unknown family {family!r}")
    pts, _ = as_point_batch(np.asarray(grid, dtype=float), path.dim)
    lp = np.asarray(log_density_at(path, beta, pts), dtype=float)
    lm = np.asarray(member.log_density(pts), dtype=float)
    mid = pts.shape[0] // 2
    offset = lp[mid] - lm[mid]
    return float(np.max(np.abs(lp - lm - offset)))
