"""Planted-partition datasets with community-aligned attributes, for tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BINARY, CONTINUOUS, FEATURE_KINDS, Dataset
from .graph import SparseGraph
from .validation import ParameterError, make_rng


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the generator.

    Nodes are split into ``num_classes`` near-equal communities; an edge
    appears with probability ``p_in`` inside a community and ``p_out``
    across. Column j of the attribute prototype for community c is
    ``(c + j) % 2`` (binary) or the same pattern as a real value
    (continuous), so every column is community-informative. ``flip_prob``
    flips binary cells; ``noise_scale`` is the gaussian sigma added to
    continuous cells.
    """

    num_nodes: int
    num_features: int
    num_classes: int = 2
    p_in: float = 0.2
    p_out: float = 0.01
    feature_kind: str = BINARY
    flip_prob: float = 0.0
    noise_scale: float = 0.0
    name: str = "synthetic"

    def validate(self) -> None:
        if self.num_classes < 1 or self.num_nodes < self.num_classes:
            raise ParameterError(f"need num_nodes >= num_classes >= 1, got "
                                 f"{self.num_nodes}/{self.num_classes}")
        if self.num_features < 1:
            raise ParameterError("num_features must be >= 1")
        for prob, what in ((self.p_in, "p_in"), (self.p_out, "p_out"),
                           (self.flip_prob, "flip_prob")):
            if not 0.0 <= prob <= 1.0:
                raise ParameterError(f"{what} must lie in [0, 1], got {prob}")
        if self.noise_scale < 0:
            raise ParameterError("noise_scale must be nonnegative")
        if self.feature_kind not in FEATURE_KINDS:
            raise ParameterError(f"feature_kind must be one of {FEATURE_KINDS}")


def _community_labels(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    base, extra = divmod(spec.num_nodes, spec.num_classes)
    sizes = np.full(spec.num_classes, base, dtype=np.int64)
    sizes[:extra] += 1
    labels = np.repeat(np.arange(spec.num_classes), sizes)
    return rng.permutation(labels)


def _planted_edges(labels: np.ndarray, p_in: float, p_out: float,
                   rng: np.random.Generator) -> np.ndarray:
    n = len(labels)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draw = rng.random((n, n))
    hit = (draw < prob) & np.triu(np.ones((n, n), dtype=bool), k=1)
    return np.argwhere(hit)


def _prototypes(spec: SyntheticSpec) -> np.ndarray:
    c = np.arange(spec.num_classes)[:, None]
    j = np.arange(spec.num_features)[None, :]
    return ((c + j) % 2).astype(float)


def generate_synthetic(spec: SyntheticSpec, seed=0) -> Dataset:
    """Deterministic planted-partition Dataset; labels are the communities."""
    spec.validate()
    rng = make_rng(seed)
    labels = _community_labels(spec, rng)
    edges = _planted_edges(labels, spec.p_in, spec.p_out, rng)
    X = _prototypes(spec)[labels]
    if spec.feature_kind == BINARY:
        if spec.flip_prob > 0:
            flips = rng.random(X.shape) < spec.flip_prob
            X[flips] = 1.0 - X[flips]
    else:
        if spec.noise_scale > 0:
            X = X + rng.normal(0.0, spec.noise_scale, size=X.shape)
    graph = SparseGraph(spec.num_nodes, edges)
    return Dataset(graph, X, labels, feature_kind=spec.feature_kind, name=spec.name)
