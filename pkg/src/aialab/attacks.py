"""Black-box attribute recovery attacks driven by posterior queries.

Four imputation attacks (single-pass and iterative, each with a diffusion or
random filler) plus a shadow-model attack. Everything here touches the model
only through :class:`BlackBoxHandle`; the shadow attack receives its trainers
as injected callables so no other model symbol is needed.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .data import BINARY, Dataset, PartialFeatureMatrix, Split
from .graph import SparseGraph
from .imputation import (BINARY_ROUND, FeaturePropagationImputer, ImputerConfig,
                         RandomImputer)
from .models import BlackBoxHandle
from .validation import ParameterError, check_posterior_rows, make_rng

logger = logging.getLogger(__name__)

ATTACK_FP = "fp"
ATTACK_RI = "ri"
ATTACK_FP_MA = "fp_ma"
ATTACK_RI_MA = "ri_ma"
ATTACK_SA = "sa"
ATTACKS = (ATTACK_FP, ATTACK_RI, ATTACK_FP_MA, ATTACK_RI_MA, ATTACK_SA)

INIT_FEATURE_PROPAGATION = "feature_propagation"
INIT_RANDOM = "random"
INITS = (INIT_FEATURE_PROPAGATION, INIT_RANDOM)


class UnsupportedConfigError(ValueError):
    """Raised when an attack cannot run on the given data (e.g. SA on continuous)."""


class AttackBudgetError(RuntimeError):
    """Internal error: the iteration budget was exhausted without termination."""


@dataclass
class AttackConfig:
    """Knobs shared by the query attacks.

    ``base_threshold`` is the confidence bar a node must beat to be fixed;
    between fixes it decays by ``decay`` per iteration and snaps back to base
    on every fix. The iteration budget is |candidates| * ``budget_factor``.
    """

    base_threshold: float = 0.9
    decay: float = 0.95
    imputer: ImputerConfig = field(default_factory=ImputerConfig)
    seed: int = 0
    budget_factor: int = 500

    def validate(self) -> None:
        # base 0 is allowed: with strict comparison any positive score fixes
        if not 0.0 <= self.base_threshold <= 1.0:
            raise ParameterError(f"base_threshold must lie in [0, 1], "
                                 f"got {self.base_threshold}")
        if not 0.0 < self.decay < 1.0:
            raise ParameterError(f"decay must lie in (0, 1), got {self.decay}")
        if self.budget_factor < 1:
            raise ParameterError("budget_factor must be >= 1")
        self.imputer.validate()


@dataclass(frozen=True)
class AttackTask:
    """Full description of one attack run, assembled by the harness."""

    attack: str
    candidate_ids: np.ndarray
    sensitive_attrs: np.ndarray
    setting: str
    structure_mode: str
    config: AttackConfig
    seed: int = 0


@dataclass
class AttackState:
    """Mutable loop state of the iterative attack."""

    working: PartialFeatureMatrix
    fixed_nodes: list
    threshold: float
    base_threshold: float
    query_log: list


@dataclass
class AttackOutcome:
    """What an attack returns: the completed matrix plus bookkeeping."""

    reconstructed: np.ndarray
    mean_confidence: float
    queries_used: int
    per_node_confidence: np.ndarray
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if np.isnan(self.reconstructed).any():
            raise ValueError("reconstructed matrix still contains masked cells")


def confidence_scores(posteriors) -> np.ndarray:
    """Per-row confidence: max probability minus the mean of the rest.

    One max entry is removed before averaging (ties broken toward the lowest
    class index, which leaves the value unchanged); scores live in [0, 1].
    """
    P = check_posterior_rows(posteriors)
    c = P.shape[1]
    if c < 2:
        raise ParameterError("confidence scores need at least 2 classes")
    p_max = P.max(axis=1)
    rest_mean = (P.sum(axis=1) - p_max) / (c - 1)
    return p_max - rest_mean


def _resolve_candidates(x: PartialFeatureMatrix, candidate_ids) -> np.ndarray:
    if candidate_ids is None:
        return x.masked_node_ids
    return np.asarray(candidate_ids, dtype=np.int64)


def _make_imputer(init: str, cfg: AttackConfig, g: SparseGraph):
    if init == INIT_FEATURE_PROPAGATION:
        imp = FeaturePropagationImputer(cfg.imputer.iterations, cfg.imputer.rounding,
                                        cfg.imputer.operator_kind, cfg.imputer.seed)
        return imp.fit(g)
    if init == INIT_RANDOM:
        return RandomImputer(cfg.imputer.rounding, cfg.imputer.seed).fit()
    raise ParameterError(f"init must be one of {INITS}, got {init!r}")


def _candidate_confidence(posteriors: np.ndarray, candidates: np.ndarray):
    per_node = confidence_scores(posteriors)[candidates]
    return per_node, float(per_node.mean())


def attack_single_pass(handle: BlackBoxHandle, x: PartialFeatureMatrix,
                       g: SparseGraph, init: str = INIT_FEATURE_PROPAGATION,
                       cfg: Optional[AttackConfig] = None,
                       candidate_ids=None) -> AttackOutcome:
    """Impute once, then spend the single query on the mean confidence score."""
    cfg = cfg or AttackConfig()
    cfg.validate()
    if not x.missing_mask.any():
        raise ParameterError("attack input has no masked cells")
    candidates = _resolve_candidates(x, candidate_ids)
    rng = make_rng(cfg.seed)
    imputer = _make_imputer(init, cfg, g)
    reconstructed = imputer.transform(x, rng=rng)
    start = handle.query_count
    posteriors = handle.query(reconstructed, g)
    per_node, mean_cs = _candidate_confidence(posteriors, candidates)
    return AttackOutcome(reconstructed, mean_cs, handle.query_count - start,
                         per_node)


def attack_iterative(handle: BlackBoxHandle, x: PartialFeatureMatrix,
                     g: SparseGraph, init: str = INIT_FEATURE_PROPAGATION,
                     cfg: Optional[AttackConfig] = None,
                     candidate_ids=None) -> AttackOutcome:
    """Fix one node at a time, guided by posterior confidence.

    Each iteration re-imputes the not-yet-fixed cells, queries the model,
    and compares the best confidence among still-masked nodes against the
    threshold: a strict pass freezes that node's inferred sensitive values
    and resets the threshold to base, otherwise the threshold decays by 5%.
    A final query prices the finished matrix.
    """
    cfg = cfg or AttackConfig()
    cfg.validate()
    if not x.missing_mask.any():
        raise ParameterError("attack input has no masked cells")
    candidates = _resolve_candidates(x, candidate_ids)
    rng = make_rng(cfg.seed)
    imputer = _make_imputer(init, cfg, g)

    state = AttackState(working=PartialFeatureMatrix(x.values.copy(),
                                                     x.missing_mask.copy(),
                                                     x.sensitive_attrs),
                        fixed_nodes=[], threshold=cfg.base_threshold,
                        base_threshold=cfg.base_threshold, query_log=[])
    values = state.working.values
    mask = state.working.missing_mask
    budget = len(candidates) * cfg.budget_factor
    start = handle.query_count
    iteration = 0

    while mask.any():
        iteration += 1
        if iteration > budget:
            raise AttackBudgetError(f"no termination within {budget} iterations; "
                                    f"{int(mask.any(axis=1).sum())} nodes still masked")
        estimate = imputer.transform(state.working, rng=rng)
        posteriors = handle.query(estimate, g)
        fixable = np.flatnonzero(mask.any(axis=1))
        scores = confidence_scores(posteriors[fixable])
        best = int(np.argmax(scores))
        best_node = int(fixable[best])
        best_score = float(scores[best])
        used_threshold = state.threshold
        if best_score > state.threshold:
            cells = mask[best_node]
            values[best_node, cells] = estimate[best_node, cells]
            mask[best_node] = False
            state.fixed_nodes.append(best_node)
            state.threshold = state.base_threshold
            fixed_field = best_node
        else:
            state.threshold *= cfg.decay
            fixed_field = None
        state.query_log.append({"iteration": iteration,
                                "threshold": used_threshold,
                                "fixed_node": fixed_field,
                                "max_confidence": best_score,
                                "query_count": handle.query_count - start})

    posteriors = handle.query(values, g)
    per_node, mean_cs = _candidate_confidence(posteriors, candidates)
    logger.debug("iterative attack fixed %d nodes in %d iterations",
                 len(state.fixed_nodes), iteration)
    return AttackOutcome(values, mean_cs, handle.query_count - start, per_node,
                         trace=state.query_log)


def attack_shadow(target: BlackBoxHandle, shadow_ds: Dataset, shadow_split: Split,
                  x: PartialFeatureMatrix, g: SparseGraph,
                  cfg: Optional[AttackConfig] = None, candidate_ids=None, *,
                  shadow_trainer: Callable[[Dataset, Split], BlackBoxHandle],
                  attack_trainer: Callable) -> AttackOutcome:
    """Shadow-model attack for binary sensitive attributes.

    A shadow model (trained by the injected ``shadow_trainer``) is queried
    with its candidates' true values (label 1) and with random values
    (label 0); the injected ``attack_trainer`` fits a classifier on those
    labeled posteriors. Each masked target candidate is then probed with
    every value combination v in {0,1}^m over a fixed random base fill, and
    the v whose posterior the classifier scores most label-1 wins; ties fall
    to the lexicographically first (all-zeros) combination.
    """
    cfg = cfg or AttackConfig()
    cfg.validate()
    if shadow_ds.feature_kind != BINARY:
        raise UnsupportedConfigError("shadow attack supports binary sensitive "
                                     "attributes only")
    if not x.missing_mask.any():
        raise ParameterError("attack input has no masked cells")
    attrs = x.sensitive_attrs
    known_sensitive = x.values[:, attrs][~x.missing_mask[:, attrs]]
    if not np.isin(known_sensitive, (0.0, 1.0)).all():
        raise UnsupportedConfigError("shadow attack supports binary sensitive "
                                     "attributes only")
    candidates = _resolve_candidates(x, candidate_ids)
    rng = make_rng(cfg.seed)

    # label posteriors on the attacker's own model
    shadow_handle = shadow_trainer(shadow_ds, shadow_split)
    sc = shadow_split.candidate_ids
    P_true = shadow_handle.query(shadow_ds.features, shadow_ds.graph)[sc]
    randomized = shadow_ds.features.copy()
    randomized[np.ix_(sc, attrs)] = rng.integers(
        0, 2, size=(len(sc), len(attrs))).astype(float)
    P_rand = shadow_handle.query(randomized, shadow_ds.graph)[sc]
    attack_model = attack_trainer(np.vstack([P_true, P_rand]),
                                  np.r_[np.ones(len(sc)), np.zeros(len(sc))])
    label1_col = 1
    model_classes = getattr(attack_model, "classes_", None)
    if model_classes is not None:
        label1_col = int(np.flatnonzero(np.asarray(model_classes) == 1)[0])

    # probe the target over a fixed random base fill
    masked_nodes = x.masked_node_ids
    working = x.values.copy()
    working[x.missing_mask] = rng.integers(
        0, 2, size=int(x.missing_mask.sum())).astype(float)
    base_fill = working.copy()
    combos = list(itertools.product((0.0, 1.0), repeat=len(attrs)))
    reconstructed = base_fill.copy()
    start = target.query_count
    for node in masked_nodes:
        cells = np.flatnonzero(x.missing_mask[node])
        best_score = -np.inf
        best_v = combos[0]
        for v in combos:
            working[node, cells] = v
            posteriors = target.query(working, g)
            score = float(attack_model.predict_proba(
                posteriors[node:node + 1])[0, label1_col])
            if score > best_score:
                best_score, best_v = score, v
        working[node, cells] = base_fill[node, cells]
        reconstructed[node, cells] = best_v

    posteriors = target.query(reconstructed, g)
    per_node, mean_cs = _candidate_confidence(posteriors, candidates)
    return AttackOutcome(reconstructed, mean_cs, target.query_count - start,
                         per_node)


def infer_multi(handle: BlackBoxHandle, x: PartialFeatureMatrix, g: SparseGraph,
                attack: str = ATTACK_FP, cfg: Optional[AttackConfig] = None,
                candidate_ids=None, **shadow_kwargs) -> AttackOutcome:
    """Dispatch one of the named attacks over the joint sensitive-column mask.

    Multi-attribute runs (m >= 2) need no special casing: imputers fill all
    masked columns simultaneously and the iterative attack fixes a node's
    whole sensitive vector at once. The shadow attack additionally needs
    ``shadow_ds``, ``shadow_split``, ``shadow_trainer`` and ``attack_trainer``.
    """
    if attack in (ATTACK_FP, ATTACK_RI):
        init = INIT_FEATURE_PROPAGATION if attack == ATTACK_FP else INIT_RANDOM
        return attack_single_pass(handle, x, g, init, cfg, candidate_ids)
    if attack in (ATTACK_FP_MA, ATTACK_RI_MA):
        init = INIT_FEATURE_PROPAGATION if attack == ATTACK_FP_MA else INIT_RANDOM
        return attack_iterative(handle, x, g, init, cfg, candidate_ids)
    if attack == ATTACK_SA:
        missing = {"shadow_ds", "shadow_split", "shadow_trainer",
                   "attack_trainer"} - set(shadow_kwargs)
        if missing:
            raise ParameterError(f"sa attack needs {sorted(missing)}")
        return attack_shadow(handle, shadow_kwargs.pop("shadow_ds"),
                             shadow_kwargs.pop("shadow_split"), x, g, cfg,
                             candidate_ids, **shadow_kwargs)
    raise ParameterError(f"attack must be one of {ATTACKS}, got {attack!r}")


def write_trace(path, trace) -> None:
    """Dump per-iteration attack records as line-delimited JSON."""
    path = Path(path)
    with path.open("w") as fh:
        for record in trace:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_trace(path) -> list:
    path = Path(path)
    records = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
