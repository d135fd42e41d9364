"""Input validation helpers shared by the estimator-style API."""

import math

import numpy as np

from .errors import DomainError


def check_finite_scalar(x, name="value"):
    """Coerce to float, rejecting NaN and infinities."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return x


def check_positive_int(k, name="value", minimum=1):
    k = int(k)
    if k < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {k}")
    return k


def check_vector(x, n_dim=None, name="x"):
    """Coerce to a finite 1-d float64 array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError(f"{name} must be 1-dimensional, got shape {x.shape}")
    if n_dim is not None and x.shape[0] != n_dim:
        raise DomainError(f"{name} must have length {n_dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite everywhere")
    return x


def check_points(X, n_dim=None, name="X"):
    """Coerce to a finite 2-d float64 array of row points."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DomainError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if n_dim is not None and X.shape[1] != n_dim:
        raise DomainError(f"{name} must have {n_dim} columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DomainError(f"{name} must be finite everywhere")
    return X


def check_probability_vector(p, name="p"):
    p = np.ascontiguousarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DomainError(f"{name} must be a nonempty 1-d array")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise DomainError(f"{name} must be finite and nonnegative")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"{name} must sum to 1 (got {total!r})")
    return p
