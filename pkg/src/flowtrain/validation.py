"""Input-validation helpers used at the public API boundaries."""

from __future__ import annotations

import numpy as np


def as_rng(rng) -> np.random.Generator:
    """Coerce ``rng`` (Generator, seed int, or None) to a numpy Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_binary_matrix(X, name: str = "X") -> np.ndarray:
    """Validate a 2-D array of {0,1} entries; returns a uint8 copy-on-need view."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if X.size == 0:
        raise ValueError(f"{name} must be nonempty")
    vals = np.unique(X)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"{name} must contain only 0/1 entries")
    return X.astype(np.uint8, copy=False)


def check_binary_vector(x, length: int | None = None, name: str = "state") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isin(np.unique(x), (0, 1))):
        raise ValueError(f"{name} must contain only 0/1 entries")
    if length is not None and x.shape[0] != length:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {length}")
    return x.astype(np.uint8, copy=False)


def check_states(v, length: int, name: str = "state") -> np.ndarray:
    """Accept a single state (1-D) or a batch of states (2-D) of the given length."""
    v = np.asarray(v)
    if v.ndim == 1:
        return check_binary_vector(v, length, name)
    if v.ndim == 2:
        if v.shape[1] != length:
            raise ValueError(f"{name} has width {v.shape[1]}, expected {length}")
        return check_binary_matrix(v, name)
    raise ValueError(f"{name} must be 1-D or 2-D, got shape {v.shape}")


def check_probability_vector(p, n: int, name: str = "p") -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {p.shape}")
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (got {p.sum()!r})")
    return p
