"""Input validation helpers shared across estimators and attack routines."""

from __future__ import annotations

import numbers

import numpy as np


class DataError(ValueError):
    """Raised when input data violates a contract (non-finite values, bad shapes)."""


class ParameterError(ValueError):
    """Raised when a caller-supplied parameter is out of its allowed range."""


def check_feature_matrix(X, *, require_finite: bool = True, name: str = "features") -> np.ndarray:
    """Coerce ``X`` to a 2-D float array, optionally rejecting non-finite entries."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if require_finite and not np.isfinite(X).all():
        bad = np.argwhere(~np.isfinite(X))[0]
        raise DataError(f"{name} contains a non-finite value at position {tuple(bad)}")
    return X


def check_mask(mask, shape, name: str = "missing_mask") -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype != bool:
        raise ValueError(f"{name} must be boolean, got dtype {mask.dtype}")
    if mask.shape != tuple(shape):
        raise ValueError(f"{name} shape {mask.shape} does not match values shape {tuple(shape)}")
    return mask


def check_node_ids(ids, num_nodes: int, name: str = "node ids") -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64).ravel()
    if ids.size and (ids.min() < 0 or ids.max() >= num_nodes):
        raise ValueError(f"{name} must lie in [0, {num_nodes}), got range "
                         f"[{ids.min()}, {ids.max()}]")
    if len(np.unique(ids)) != len(ids):
        raise ValueError(f"{name} contains duplicates")
    return ids


def check_posterior_rows(posteriors, tol: float = 1e-6) -> np.ndarray:
    """Validate that every row is a probability distribution (sums to 1 within tol)."""
    P = np.asarray(posteriors, dtype=float)
    if P.ndim != 2 or P.shape[1] < 1:
        raise ValueError(f"posteriors must be a 2-D matrix of rows, got shape {P.shape}")
    if (P < -tol).any():
        raise DataError("posterior rows must be nonnegative")
    sums = P.sum(axis=1)
    off = np.abs(sums - 1.0)
    if (off > tol).any():
        i = int(np.argmax(off))
        raise DataError(f"posterior row {i} sums to {sums[i]:.8f}, not 1 within {tol}")
    return P


def make_rng(seed) -> np.random.Generator:
    """Turn a seed or existing Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    raise ValueError(f"seed must be an int, None or a numpy Generator, got {type(seed)!r}")
