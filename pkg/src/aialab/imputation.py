"""Diffusion-based and random imputers that fill hidden feature cells."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .data import PartialFeatureMatrix
from .graph import NORMALIZED_ADJACENCY, OPERATOR_KINDS, SparseGraph, propagation_operator
from .validation import ParameterError, make_rng

BINARY_ROUND = "binary_round"
NO_ROUNDING = "none"
ROUNDINGS = (BINARY_ROUND, NO_ROUNDING)


@dataclass(frozen=True)
class ImputerConfig:
    iterations: int = 40
    rounding: str = BINARY_ROUND
    operator_kind: str = NORMALIZED_ADJACENCY
    seed: int = 0

    def validate(self) -> None:
        if self.iterations < 1:
            raise ParameterError(f"iterations must be >= 1, got {self.iterations}")
        if self.rounding not in ROUNDINGS:
            raise ParameterError(f"rounding must be one of {ROUNDINGS}, "
                                 f"got {self.rounding!r}")
        if self.operator_kind not in OPERATOR_KINDS:
            raise ParameterError(f"operator_kind must be one of {OPERATOR_KINDS}, "
                                 f"got {self.operator_kind!r}")


def _column_stats(values: np.ndarray, mask: np.ndarray, cols: np.ndarray):
    """Per-column mean/std over the known cells; (0, 1) when nothing is known."""
    means = np.zeros(len(cols))
    stds = np.ones(len(cols))
    for i, j in enumerate(cols):
        known = values[~mask[:, j], j]
        if known.size:
            means[i] = known.mean()
            stds[i] = known.std()
    return means, stds


def _random_fill(values: np.ndarray, mask: np.ndarray, rounding: str,
                 rng: np.random.Generator) -> np.ndarray:
    """Fresh random draws at masked cells; known cells pass through bit-equal."""
    out = values.copy()
    if rounding == BINARY_ROUND:
        out[mask] = rng.integers(0, 2, size=int(mask.sum())).astype(float)
        return out
    cols = np.flatnonzero(mask.any(axis=0))
    means, stds = _column_stats(values, mask, cols)
    for i, j in enumerate(cols):
        rows = mask[:, j]
        out[rows, j] = means[i] + stds[i] * rng.standard_normal(int(rows.sum()))
    return out


def _propagation_init(values: np.ndarray, mask: np.ndarray, rounding: str,
                      rng: np.random.Generator) -> np.ndarray:
    """Masked cells start at uniform [0,1] (binary) or column-scaled normals."""
    out = values.copy()
    if rounding == BINARY_ROUND:
        out[mask] = rng.uniform(0.0, 1.0, size=int(mask.sum()))
        return out
    cols = np.flatnonzero(mask.any(axis=0))
    means, stds = _column_stats(values, mask, cols)
    for i, j in enumerate(cols):
        rows = mask[:, j]
        out[rows, j] = means[i] + stds[i] * rng.standard_normal(int(rows.sum()))
    return out


class FeaturePropagationImputer(BaseEstimator, TransformerMixin):
    """Iterative diffusion imputer.

    Each round multiplies the working matrix by the propagation operator,
    optionally rounds every cell at 0.5 (binary mode), then resets known
    cells to their true values, in that printed order. Diffusion acts
    column-wise, so only columns containing hidden cells are propagated; all
    other columns pass through untouched.
    """

    def __init__(self, iterations: int = 40, rounding: str = BINARY_ROUND,
                 operator_kind: str = NORMALIZED_ADJACENCY, seed: int = 0):
        self.iterations = iterations
        self.rounding = rounding
        self.operator_kind = operator_kind
        self.seed = seed

    def _config(self) -> ImputerConfig:
        cfg = ImputerConfig(self.iterations, self.rounding, self.operator_kind,
                            self.seed)
        cfg.validate()
        return cfg

    def fit(self, graph: SparseGraph, y=None):
        self._config()
        self.operator_ = propagation_operator(graph, self.operator_kind)
        return self

    def transform(self, x: PartialFeatureMatrix, rng=None) -> np.ndarray:
        if not hasattr(self, "operator_"):
            raise NotFittedError("imputer is not fitted; call fit(graph) first")
        cfg = self._config()
        rng = make_rng(self.seed if rng is None else rng)
        mask = x.missing_mask
        if not mask.any():
            return x.values.copy()

        out = _propagation_init(x.values, mask, cfg.rounding, rng)
        cols = np.flatnonzero(mask.any(axis=0))
        truth = x.values[:, cols]
        known = ~mask[:, cols]
        work = out[:, cols]
        M = self.operator_.matrix
        for _ in range(cfg.iterations):
            work = M @ work
            if cfg.rounding == BINARY_ROUND:
                work = (work >= 0.5).astype(float)
            work[known] = truth[known]
        out[:, cols] = work
        return out


class RandomImputer(BaseEstimator, TransformerMixin):
    """Baseline imputer: Bernoulli(0.5) bits or column-matched gaussians."""

    def __init__(self, rounding: str = BINARY_ROUND, seed: int = 0):
        self.rounding = rounding
        self.seed = seed

    def fit(self, graph=None, y=None):
        # structure-free baseline; fit only validates the config
        if self.rounding not in ROUNDINGS:
            raise ParameterError(f"rounding must be one of {ROUNDINGS}, "
                                 f"got {self.rounding!r}")
        self.fitted_ = True
        return self

    def transform(self, x: PartialFeatureMatrix, rng=None) -> np.ndarray:
        if not hasattr(self, "fitted_"):
            raise NotFittedError("imputer is not fitted; call fit() first")
        rng = make_rng(self.seed if rng is None else rng)
        return _random_fill(x.values, x.missing_mask, self.rounding, rng)


def feature_propagate(x: PartialFeatureMatrix, g: SparseGraph,
                      cfg: ImputerConfig, rng=None) -> np.ndarray:
    """Functional form of :class:`FeaturePropagationImputer`."""
    cfg.validate()
    imp = FeaturePropagationImputer(cfg.iterations, cfg.rounding,
                                    cfg.operator_kind, cfg.seed).fit(g)
    return imp.transform(x, rng=rng)


def random_impute(x: PartialFeatureMatrix, cfg: ImputerConfig, rng=None) -> np.ndarray:
    """Functional form of :class:`RandomImputer`."""
    cfg.validate()
    return RandomImputer(cfg.rounding, cfg.seed).fit().transform(x, rng=rng)
