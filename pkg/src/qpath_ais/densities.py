"""Density handles: Gaussian, Student-t, and user-supplied log densities.

A handle bundles a log-density evaluator with optional gradient, exact
sampler, and known log of its total mass.  Point batching convention:

* dim == 1: a python scalar maps to a scalar; a 1-d array of length n is
  a batch of n points and maps to shape (n,).
* dim >= 2: shape (dim,) is a single point (scalar out); (n, dim) is a
  batch (shape (n,) out).

Gradients use the same convention with points as outputs.  Samplers take
``(rng, n)`` and return ``(n, dim)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConstructionError, DomainError

__all__ = [
    "DensityHandle",
    "GaussianSpec",
    "StudentTSpec",
    "make_gaussian",
    "make_student_t",
    "make_custom",
    "finite_difference_gradient",
    "q_from_nu",
    "nu_from_q",
]


def as_point_batch(z, dim: int) -> tuple[np.ndarray, bool]:
    """Normalize a point or batch to shape (n, dim); also say if it was single."""
    z = np.asarray(z, dtype=float)
    if dim == 1:
        if z.ndim == 0:
            return z.reshape(1, 1), True
        if z.ndim == 1:
            return z.reshape(-1, 1), False
        if z.ndim == 2 and z.shape[1] == 1:
            return z, False
    else:
        if z.ndim == 1 and z.shape[0] == dim:
            return z.reshape(1, dim), True
        if z.ndim == 2 and z.shape[1] == dim:
            return z, False
    raise DomainError(f"point batch has shape {z.shape}, expected (..., {dim})")


def gradient_like_input(g: np.ndarray, z, dim: int, single: bool):
    """Shape a (n, dim) gradient to mirror how the points came in.

    dim == 1 gradients are scalar-valued: scalar in, float out; (n,) in,
    (n,) out.  Higher dimensions return points.
    """
    if single:
        return float(g[0, 0]) if dim == 1 else g[0]
    if dim == 1 and np.ndim(z) == 1:
        return g[:, 0]
    return g


@dataclass(frozen=True)
class DensityHandle:
    """An (optionally normalized) density on R^dim.

    ``log_density`` returns finite values or -inf, never NaN, for finite
    input.  ``log_normalizer`` is the log of the handle's total mass when
    known; 0.0 marks a normalized pdf.
    """

    dim: int
    log_density: Callable
    grad_log_density: Optional[Callable] = None
    exact_sampler: Optional[Callable] = None
    log_normalizer: Optional[float] = None

    @property
    def is_normalized(self) -> bool:
        return self.log_normalizer == 0.0


@dataclass(frozen=True)
class GaussianSpec:
    """Mean vector plus variance (scalar, diagonal vector, or full matrix)."""

    mean: object
    variance: object


@dataclass(frozen=True)
class StudentTSpec:
    """Mean, the positive-definite matrix of the quadratic form, and dof.

    ``scale_matrix`` is the matrix appearing inside the quadratic form of
    the density, not the covariance (the covariance is dof/(dof-2) times
    it when dof > 2).
    """

    mean: object
    scale_matrix: object
    dof: float


def _vector(mean) -> np.ndarray:
    mu = np.atleast_1d(np.asarray(mean, dtype=float))
    if mu.ndim != 1 or not np.all(np.isfinite(mu)):
        raise ConstructionError("mean must be a finite scalar or vector")
    return mu


def _spd_matrix(raw, dim: int, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Validate and return (matrix, cholesky). Scalars/vectors mean diagonal."""
    m = np.asarray(raw, dtype=float)
    if m.ndim == 0:
        m = np.eye(dim) * float(m)
    elif m.ndim == 1:
        if m.size != dim:
            raise ConstructionError(f"{what} diagonal has length {m.size}, expected {dim}")
        m = np.diag(m)
    elif m.ndim == 2:
        if m.shape != (dim, dim):
            raise ConstructionError(f"{what} has shape {m.shape}, expected ({dim}, {dim})")
    else:
        raise ConstructionError(f"{what} must be a scalar, vector, or matrix")
    if not np.all(np.isfinite(m)) or not np.allclose(m, m.T, atol=1e-12):
        raise ConstructionError(f"{what} must be finite and symmetric")
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ConstructionError(f"{what} is not positive definite") from exc
    return m, chol


def make_gaussian(spec: GaussianSpec) -> DensityHandle:
    """Normalized Gaussian handle with analytic gradient and exact sampler."""
    mu = _vector(spec.mean)
    d = mu.size
    cov, chol = _spd_matrix(spec.variance, d, "variance")
    prec = np.linalg.solve(cov, np.eye(d))
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    const = -0.5 * (d * math.log(2.0 * math.pi) + log_det)

    def log_density(z):
        zb, single = as_point_batch(z, d)
        delta = zb - mu
        quad = np.einsum("ni,ij,nj->n", delta, prec, delta)
        out = const - 0.5 * quad
        return float(out[0]) if single else out

    def grad_log_density(z):
        zb, single = as_point_batch(z, d)
        g = -(zb - mu) @ prec
        return gradient_like_input(g, z, d, single)

    def exact_sampler(rng, n):
        return mu + rng.standard_normal((n, d)) @ chol.T

    return DensityHandle(d, log_density, grad_log_density, exact_sampler, 0.0)


def student_t_log_norm_const(nu: float, dim: int, log_det_scale: float) -> float:
    """Log of the multiplicative constant normalizing the Student-t density."""
    return (
        math.lgamma(0.5 * (nu + dim))
        - math.lgamma(0.5 * nu)
        - 0.5 * dim * (math.log(nu) + math.log(math.pi))
        - 0.5 * log_det_scale
    )


def make_student_t(spec: StudentTSpec) -> DensityHandle:
    """Normalized Student-t handle with analytic gradient and exact sampler.

    The sampler uses the Gaussian / chi-square construction: a Gaussian
    draw scaled by sqrt(dof / chi2(dof)).
    """
    nu = float(spec.dof)
    if not (nu > 0.0) or not math.isfinite(nu):
        raise ConstructionError(f"dof must be positive and finite, got {nu}")
    mu = _vector(spec.mean)
    d = mu.size
    scale, chol = _spd_matrix(spec.scale_matrix, d, "scale_matrix")
    prec = np.linalg.solve(scale, np.eye(d))
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    const = student_t_log_norm_const(nu, d, log_det)
    expo = -0.5 * (nu + d)

    def log_density(z):
        zb, single = as_point_batch(z, d)
        delta = zb - mu
        quad = np.einsum("ni,ij,nj->n", delta, prec, delta)
        out = const + expo * np.log1p(quad / nu)
        return float(out[0]) if single else out

    def grad_log_density(z):
        zb, single = as_point_batch(z, d)
        delta = zb - mu
        quad = np.einsum("ni,ij,nj->n", delta, prec, delta)
        g = -(nu + d) * (delta @ prec) / (nu + quad)[:, None]
        return gradient_like_input(g, z, d, single)

    def exact_sampler(rng, n):
        y = rng.standard_normal((n, d)) @ chol.T
        u = rng.chisquare(nu, n)
        return mu + y * np.sqrt(nu / u)[:, None]

    return DensityHandle(d, log_density, grad_log_density, exact_sampler, 0.0)


def finite_difference_gradient(log_density: Callable, dim: int) -> Callable:
    """Central-difference gradient fallback, step 1e-5 * (1 + |z_j|)."""

    def grad(z):
        zb, single = as_point_batch(z, dim)
        g = np.empty_like(zb)
        for j in range(dim):
            h = 1e-5 * (1.0 + np.abs(zb[:, j]))
            zp = zb.copy()
            zp[:, j] += h
            zm = zb.copy()
            zm[:, j] -= h
            g[:, j] = (np.asarray(log_density(zp)) - np.asarray(log_density(zm))) / (2.0 * h)
        return gradient_like_input(g, z, dim, single)

    return grad


def make_custom(
    dim: int,
    log_density: Callable,
    grad_log_density: Optional[Callable] = None,
    exact_sampler: Optional[Callable] = None,
    log_normalizer: Optional[float] = None,
) -> DensityHandle:
    """Wrap a user log-density callable (same batching convention as above).

    A missing gradient falls back to central finite differences.
    """
    if dim < 1:
        raise ConstructionError("dim must be a positive integer")
    if grad_log_density is None:
        grad_log_density = finite_difference_gradient(log_density, dim)
    return DensityHandle(dim, log_density, grad_log_density, exact_sampler, log_normalizer)


def q_from_nu(nu: float, dim: int) -> float:
    """Deformed-family order of a Student-t with the given dof and dimension."""
    nu = float(nu)
    if not (nu > 0.0) or not math.isfinite(nu):
        raise DomainError(f"nu must be positive and finite, got {nu}")
    return (nu + dim + 2.0) / (nu + dim)


def nu_from_q(q: float, dim: int) -> float:
    """Student-t dof matching a deformed-family order; inverse of q_from_nu.

    Valid for q strictly inside (1, (dim + 2) / dim), the image of
    q_from_nu over dof > 0.
    """
    q = float(q)
    hi = (dim + 2.0) / dim
    if not (1.0 < q < hi):
        raise DomainError(f"q must lie in (1, {hi}) for dim={dim}, got {q}")
    return (dim - dim * q + 2.0) / (q - 1.0)
