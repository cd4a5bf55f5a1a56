"""Recovery metrics over masked cells."""

from __future__ import annotations

import numpy as np

from .validation import DataError, ParameterError, check_mask


def _prepare(inferred, truth, mask):
    inferred = np.asarray(inferred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if inferred.shape != truth.shape:
        raise ValueError(f"inferred shape {inferred.shape} does not match "
                         f"truth shape {truth.shape}")
    mask = check_mask(mask, inferred.shape)
    if not mask.any():
        raise ParameterError("mask selects no cells")
    return inferred, truth, mask


def hamming_percentage(inferred, truth, mask) -> float:
    """Percent of masked cells recovered exactly; binary values required there."""
    inferred, truth, mask = _prepare(inferred, truth, mask)
    for name, M in (("inferred", inferred), ("truth", truth)):
        vals = M[mask]
        if not np.isin(vals, (0.0, 1.0)).all():
            raise DataError(f"{name} holds a non-binary value at a masked cell")
    matches = (inferred[mask] == truth[mask]).sum()
    return 100.0 * float(matches) / int(mask.sum())


def masked_mse(inferred, truth, mask) -> float:
    """Mean over masked nodes of each node's mean squared error on its masked cells."""
    inferred, truth, mask = _prepare(inferred, truth, mask)
    if not (np.isfinite(inferred[mask]).all() and np.isfinite(truth[mask]).all()):
        raise DataError("masked positions must be finite in both matrices")
    rows = np.flatnonzero(mask.any(axis=1))
    sq = (inferred - truth) ** 2
    per_node = [sq[i, mask[i]].mean() for i in rows]
    return float(np.mean(per_node))
