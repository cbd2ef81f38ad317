"""Deformed logarithm/exponential kernel and weighted power means.

All functions are pure and accept scalars or numpy arrays (scalar in,
scalar out).  ``q`` selects the order of the deformation; values with
``|q - 1| < EPS_Q`` are routed to the logarithmic branch because the
generic formula loses all precision as ``1 - q -> 0``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateInputError, DomainError, PreconditionError

# |q - 1| below this uses the q = 1 (log/exp) branch.
EPS_Q = 1e-9

__all__ = [
    "EPS_Q",
    "is_log_branch",
    "ln_q",
    "exp_q",
    "power_mean",
    "log_power_mean",
    "q_sum_identity_sides",
    "q_product_identity_sides",
    "verify_q_identities",
]


def is_log_branch(q: float) -> bool:
    """True if ``q`` is treated as the q = 1 (geometric / log) branch."""
    q = float(q)
    if not math.isfinite(q):
        raise DomainError(f"q must be finite, got {q}")
    return abs(q - 1.0) < EPS_Q


def _maybe_scalar(out: np.ndarray):
    return float(out) if out.ndim == 0 else out


def ln_q(u, q: float):
    """Deformed logarithm ``(u^(1-q) - 1) / (1 - q)``; natural log at q = 1.

    Requires ``u > 0``.  Inverse of :func:`exp_q` wherever the clamp of
    ``exp_q`` is inactive.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(u > 0.0):  # also rejects NaN
        raise DomainError("ln_q requires u > 0 (and not NaN)")
    if is_log_branch(q):
        return _maybe_scalar(np.log(u))
    s = 1.0 - q
    return _maybe_scalar(np.expm1(s * np.log(u)) / s)


def exp_q(u, q: float):
    """Deformed exponential ``[1 + (1-q) u]_+^(1/(1-q))``; exp(u) at q = 1.

    The positive-part clamp makes 0 a valid return value, not an error.
    """
    u = np.asarray(u, dtype=float)
    if np.any(np.isnan(u)):
        raise DomainError("exp_q received NaN")
    if is_log_branch(q):
        with np.errstate(over="ignore"):
            return _maybe_scalar(np.exp(u))
    s = 1.0 - q
    base = 1.0 + s * u
    safe = np.where(base > 0.0, base, 1.0)
    with np.errstate(over="ignore"):
        out = np.where(base > 0.0, np.exp(np.log(safe) / s), 0.0)
    return _maybe_scalar(out)


def _check_weights(w: np.ndarray, n_values: int) -> None:
    if w.ndim != 1 or w.size < 1:
        raise PreconditionError("weights must be a non-empty 1-d sequence")
    if w.size != n_values:
        raise PreconditionError(
            f"weights ({w.size}) and values ({n_values}) differ in length"
        )
    if np.any(np.isnan(w)) or np.any(w < 0.0):
        raise PreconditionError("weights must be non-negative")
    total = float(np.sum(w))
    if abs(total - 1.0) > 1e-12:
        raise PreconditionError(f"weights must sum to 1, got {total!r}")


def power_mean(weights, values, q: float) -> float:
    """Weighted power mean ``(sum_i w_i u_i^(1-q))^(1/(1-q))``.

    The geometric mean at q = 1, arithmetic at q = 0.  Homogeneous of
    degree one in the values for every q.
    """
    w = np.asarray(weights, dtype=float)
    u = np.asarray(values, dtype=float)
    if u.ndim != 1:
        raise PreconditionError("values must be a 1-d sequence")
    _check_weights(w, u.size)
    if not np.all(u > 0.0) or not np.all(np.isfinite(u)):
        raise DomainError("power_mean requires finite values > 0")
    if is_log_branch(q):
        return float(np.exp(np.sum(w * np.log(u))))
    s = 1.0 - q
    return float(np.sum(w * u**s) ** (1.0 / s))


def log_power_mean(weights, log_values, q: float):
    """``log(power_mean(weights, exp(log_values), q))`` without leaving logs.

    ``log_values`` has shape ``(k,)`` or ``(k, n)`` (one row per component,
    reduced along axis 0).  ``-inf`` entries encode zero densities: they
    drop out of the mean for q < 1, while for q > 1 a ``-inf`` entry with
    positive weight forces the result to ``-inf``, matching the limit of
    the power mean.  Entries whose weight is exactly 0 never participate.
    """
    w = np.asarray(weights, dtype=float)
    lv = np.asarray(log_values, dtype=float)
    if lv.ndim not in (1, 2):
        raise PreconditionError("log_values must have shape (k,) or (k, n)")
    _check_weights(w, lv.shape[0])

    keep = w > 0.0
    w = w[keep]
    lv = lv[keep]
    if np.any(np.isnan(lv)) or np.any(np.isposinf(lv)):
        raise DomainError("log_power_mean values must be finite or -inf")

    scalar_in = lv.ndim == 1
    if scalar_in:
        lv = lv[:, None]

    # Equal log-values short-circuit to that value exactly: the weights sum
    # to one, so no reduction arithmetic may perturb the result.  AIS relies
    # on this for exact zero weights when both endpoints coincide.
    all_equal = np.all(lv == lv[0], axis=0)

    if is_log_branch(q):
        out = np.sum(w[:, None] * lv, axis=0)
    else:
        s = 1.0 - q
        logw = np.log(w)[:, None]
        if s > 0.0:
            a = logw + s * lv  # -inf rows vanish from the reduction
            m = np.max(a, axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(np.isneginf(m)[None, :], 0.0, np.exp(a - m))
                out = np.where(
                    np.isneginf(m), -np.inf, (m + np.log(np.sum(t, axis=0))) / s
                )
        else:
            dead = np.isneginf(lv).any(axis=0)
            lv_safe = np.where(np.isneginf(lv), 0.0, lv)
            a = logw + s * lv_safe
            m = np.max(a, axis=0)
            out = (m + np.log(np.sum(np.exp(a - m), axis=0))) / s
            out = np.where(dead, -np.inf, out)

    out = np.where(all_equal, lv[0], out)
    return float(out[0]) if scalar_in else out


def _as_finite_xs(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size < 1:
        raise PreconditionError("xs must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(xs)):
        raise DomainError("xs must be finite")
    return xs


def q_sum_identity_sides(xs, q: float) -> tuple[float, float]:
    """Both sides of the sum identity for deformed exponentials.

    ``exp_q(sum_n x_n) = prod_n exp_q(x_n / (1 + (1-q) sum_{i<n} x_i))``.
    Raises :class:`DegenerateInputError` when a denominator vanishes.
    """
    xs = _as_finite_xs(xs)
    lhs = float(exp_q(np.sum(xs), q))
    s = 1.0 - q
    denoms = 1.0 + s * np.concatenate([[0.0], np.cumsum(xs)[:-1]])
    if np.any(np.abs(denoms) < 1e-12):
        raise DegenerateInputError("vanishing denominator 1 + (1-q) * partial sum")
    rhs = float(np.prod([exp_q(x / d, q) for x, d in zip(xs, denoms)]))
    return lhs, rhs


def q_product_identity_sides(xs, q: float) -> tuple[float, float]:
    """Both sides of the product identity for deformed exponentials.

    ``prod_n exp_q(x_n) = exp_q(sum_n x_n prod_{i<n} (1 + (1-q) x_i))``.
    """
    xs = _as_finite_xs(xs)
    lhs = float(np.prod([exp_q(x, q) for x in xs]))
    s = 1.0 - q
    prefix = np.concatenate([[1.0], np.cumprod(1.0 + s * xs)[:-1]])
    rhs = float(exp_q(np.sum(xs * prefix), q))
    return lhs, rhs


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def verify_q_identities(xs, q: float, tol: float) -> bool:
    """True iff both deformed-exponential identities hold to relative tol.

    The caller must keep every intermediate exp_q argument clear of the
    clamp; a clamped side simply fails the comparison.
    """
    l1, r1 = q_sum_identity_sides(xs, q)
    l2, r2 = q_product_identity_sides(xs, q)
    return _rel_err(l1, r1) <= tol and _rel_err(l2, r2) <= tol
