"""Input checks shared by the public functions and estimators."""

import numpy as np


def check_sequence(X, name="X"):
    """Return ``X`` as a finite float64 matrix of shape (length, dim)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D (length, dim), got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_matrix(M, name="M", shape=None):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {M.shape}")
    if shape is not None and M.shape != tuple(shape):
        raise ValueError(f"{name} has shape {M.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def check_marginal(w, n, name="weights"):
    """Validate a probability vector of length ``n`` (``None`` means uniform)."""
    if w is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"{name} has shape {w.shape}, expected ({n},)")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError(f"{name} entries must be finite and strictly positive")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must sum to 1 (sum is {w.sum()!r})")
    return w


def check_length(n, name):
    if isinstance(n, (bool, np.bool_)) or int(n) != n or n < 1:
        raise ValueError(f"{name} must be a positive integer, got {n!r}")
    return int(n)
