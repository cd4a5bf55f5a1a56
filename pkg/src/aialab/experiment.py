"""Experiment runner: config, per-seed protocol, sweeps, and result tables."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .attacks import (ATTACK_SA, ATTACKS, AttackConfig, attack_shadow,
                      infer_multi)
from .data import (BINARY, SETTINGS, Dataset, Split, load_dataset,
                   make_split, mask_sensitive)
from .graph import KNN_METRICS, NORMALIZED_ADJACENCY, build_knn_graph
from .imputation import BINARY_ROUND, NO_ROUNDING, ImputerConfig
from .metrics import hamming_percentage, masked_mse
from .models import train_gcn, train_mlp
from .synthetic import SyntheticSpec, generate_synthetic
from .validation import ParameterError

logger = logging.getLogger(__name__)

DATA_ROOT_ENV = "AIALAB_DATA_ROOT"

TRUE_GRAPH = "true_graph"
KNN = "knn"
STRUCTURE_MODES = (TRUE_GRAPH, KNN)


@dataclass
class ExperimentConfig:
    """Everything one experiment needs; JSON(-able) round-trip via to/from_dict.

    ``dataset`` is a directory under the data root unless ``synthetic`` is
    given, in which case it holds generator parameters. ``dataset_seed``
    pins both the synthetic draw and the candidate sample, so candidates
    stay fixed while per-run ``seeds`` vary everything else.
    """

    dataset: str = ""
    format: str = "edge_list_plus_csv"
    synthetic: Optional[dict] = None
    dataset_seed: int = 0
    sensitive_attrs: tuple = (0,)
    setting: str = "setting1"
    structure_mode: str = TRUE_GRAPH
    knn_k: int = 5
    knn_metric: str = "euclidean"
    attack: str = "fp"
    train_size: float = 0.5
    candidate_count: int = 100
    iterations: int = 40
    operator_kind: str = NORMALIZED_ADJACENCY
    base_threshold: float = 0.9
    decay: float = 0.95
    seeds: tuple = tuple(range(10))
    gcn: Optional[dict] = None
    mlp: Optional[dict] = None
    output: str = ""

    def validate(self) -> None:
        if self.attack not in ATTACKS:
            raise ParameterError(f"attack must be one of {ATTACKS}, got {self.attack!r}")
        if self.setting not in SETTINGS:
            raise ParameterError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.structure_mode not in STRUCTURE_MODES:
            raise ParameterError(f"structure_mode must be one of {STRUCTURE_MODES}, "
                                 f"got {self.structure_mode!r}")
        if self.knn_metric not in KNN_METRICS:
            raise ParameterError(f"knn_metric must be one of {KNN_METRICS}")
        if not self.seeds:
            raise ParameterError("seeds must be nonempty")
        if not self.sensitive_attrs:
            raise ParameterError("sensitive_attrs must be nonempty")
        if self.candidate_count < 1:
            raise ParameterError("candidate_count must be >= 1")
        if not self.dataset and self.synthetic is None:
            raise ParameterError("config needs a dataset path or synthetic parameters")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sensitive_attrs"] = list(self.sensitive_attrs)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        base = d.pop("base_seed", None)
        count = d.pop("num_seeds", 10)
        if "seeds" not in d and base is not None:
            d["seeds"] = [int(base) + i for i in range(int(count))]
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.sensitive_attrs = tuple(int(a) for a in np.atleast_1d(cfg.sensitive_attrs))
        cfg.seeds = tuple(int(s) for s in np.atleast_1d(cfg.seeds))
        return cfg


@dataclass
class ExperimentRecord:
    """Aggregated result of one config across its seeds."""

    config: dict
    metric_name: str
    per_seed: list
    mean: float
    std: float
    mean_confidence: float
    queries_used: float
    wall_clock: float
    partial: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        return cls(**d)


def resolve_data_root(explicit=None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(DATA_ROOT_ENV, "."))


def load_config_dataset(cfg: ExperimentConfig, data_root=None) -> Dataset:
    if cfg.synthetic is not None:
        return generate_synthetic(SyntheticSpec(**cfg.synthetic), cfg.dataset_seed)
    return load_dataset(resolve_data_root(data_root) / cfg.dataset, cfg.format)


def resolve_structure(ds, cfg: ExperimentConfig, x):
    """The graph the attacker runs on; KNN mode never touches true edges."""
    if cfg.structure_mode == TRUE_GRAPH:
        return ds.graph
    visible = np.setdiff1d(np.arange(x.values.shape[1]), x.sensitive_attrs)
    return build_knn_graph(x.values[:, visible], cfg.knn_k, cfg.knn_metric)


def _shadow_parts(ds: Dataset, split: Split, candidate_count: int, seed: int):
    """Induce the shadow dataset and an internal split over it."""
    order = np.concatenate([split.shadow_train_ids, split.shadow_test_ids])
    shadow_ds = Dataset(ds.graph.subgraph(order), ds.features[order],
                        ds.labels[order], feature_kind=ds.feature_kind,
                        name=f"{ds.name}-shadow")
    n_tr = len(split.shadow_train_ids)
    train = np.arange(n_tr)
    test = np.arange(n_tr, len(order))
    cc = min(candidate_count, n_tr)
    rng = np.random.default_rng(seed)
    cands = np.sort(rng.choice(train, size=cc, replace=False))
    return shadow_ds, Split(train, test, cands)


def run_seed(ds: Dataset, cfg: ExperimentConfig, seed: int) -> dict:
    """One instantiation: split, mask, train, attack, score."""
    split = make_split(ds, cfg.train_size, cfg.candidate_count,
                       shadow=cfg.attack == ATTACK_SA, seed=seed,
                       candidate_seed=cfg.dataset_seed)
    x = mask_sensitive(ds, split, cfg.sensitive_attrs, cfg.setting, seed=seed)
    gcn_hyper = {"seed": seed, **(cfg.gcn or {})}
    model = train_gcn(ds, split, gcn_hyper)
    handle = model.as_black_box()
    g = resolve_structure(ds, cfg, x)

    rounding = BINARY_ROUND if ds.feature_kind == BINARY else NO_ROUNDING
    attack_cfg = AttackConfig(base_threshold=cfg.base_threshold, decay=cfg.decay,
                              imputer=ImputerConfig(cfg.iterations, rounding,
                                                    cfg.operator_kind),
                              seed=seed)
    if cfg.attack == ATTACK_SA:
        shadow_ds, shadow_split = _shadow_parts(ds, split, cfg.candidate_count, seed)
        mlp_hyper = {"seed": seed, **(cfg.mlp or {})}
        outcome = attack_shadow(
            handle, shadow_ds, shadow_split, x, g, attack_cfg,
            candidate_ids=split.candidate_ids,
            shadow_trainer=lambda sds, ssp: train_gcn(sds, ssp, gcn_hyper).as_black_box(),
            attack_trainer=lambda P, y: train_mlp(P, y, mlp_hyper))
    else:
        outcome = infer_multi(handle, x, g, cfg.attack, attack_cfg,
                              candidate_ids=split.candidate_ids)

    if ds.feature_kind == BINARY:
        metric_name = "hamming_pct"
        value = hamming_percentage(outcome.reconstructed, ds.features, x.missing_mask)
    else:
        metric_name = "mse"
        value = masked_mse(outcome.reconstructed, ds.features, x.missing_mask)
    result = {"seed": seed, "metric": value, "metric_name": metric_name,
              "mean_confidence": outcome.mean_confidence,
              "queries_used": outcome.queries_used,
              "train_accuracy": model.train_accuracy_,
              "test_accuracy": getattr(model, "test_accuracy_", None)}
    logger.info("seed %d: %s=%.4f, queries=%d", seed, metric_name, value,
                outcome.queries_used)
    return result


def run_experiment(cfg: ExperimentConfig, data_root=None) -> ExperimentRecord:
    """Run all seeds of one config; aggregates and (optionally) persists."""
    cfg.validate()
    started = time.perf_counter()
    ds = load_config_dataset(cfg, data_root)
    per_seed = []
    for seed in cfg.seeds:
        try:
            per_seed.append(run_seed(ds, cfg, seed))
        except Exception as exc:  # noqa: BLE001 - per-seed faults are recorded
            logger.warning("seed %d failed: %s", seed, exc)
            per_seed.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
    good = [r for r in per_seed if "error" not in r]
    values = np.array([r["metric"] for r in good], dtype=float)
    record = ExperimentRecord(
        config=cfg.to_dict(),
        metric_name=good[0]["metric_name"] if good else "none",
        per_seed=per_seed,
        mean=float(values.mean()) if len(values) else float("nan"),
        std=float(values.std()) if len(values) else float("nan"),
        mean_confidence=float(np.mean([r["mean_confidence"] for r in good]))
        if good else float("nan"),
        queries_used=float(np.mean([r["queries_used"] for r in good]))
        if good else float("nan"),
        wall_clock=time.perf_counter() - started,
        partial=len(good) < len(per_seed))
    if cfg.output:
        write_records(cfg.output, [record])
    return record


def run_sweep(base: ExperimentConfig, axis: str, values, data_root=None) -> list:
    """Rerun ``base`` once per value of one config field."""
    if axis not in {f.name for f in dataclasses.fields(ExperimentConfig)}:
        raise ParameterError(f"unknown sweep axis {axis!r}")
    records = []
    for v in values:
        cfg = dataclasses.replace(base, output="")
        setattr(cfg, axis, v)
        if axis == "sensitive_attrs":
            cfg.sensitive_attrs = tuple(int(a) for a in np.atleast_1d(v))
        if axis == "seeds":
            cfg.seeds = tuple(int(s) for s in np.atleast_1d(v))
        logger.info("sweep %s=%r", axis, v)
        records.append(run_experiment(cfg, data_root))
    return records


# -- persistence -------------------------------------------------------------

TABLE_COLUMNS = ("dataset", "attack", "setting", "structure_mode", "knn_k",
                 "knn_metric", "train_size", "candidate_count", "m",
                 "iterations", "base_threshold", "metric_name", "mean", "std",
                 "mean_confidence", "queries_used", "num_seeds", "partial")

_TABLE_TYPES = {"knn_k": int, "candidate_count": int, "m": int,
                "iterations": int, "num_seeds": int,
                "train_size": float, "base_threshold": float, "mean": float,
                "std": float, "mean_confidence": float, "queries_used": float,
                "partial": lambda s: s == "True"}


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_records(path, records) -> None:
    """Line-delimited JSON, written atomically."""
    text = "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in records)
    _atomic_write(path, text)


def read_records(path) -> list:
    records = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ExperimentRecord.from_dict(json.loads(line)))
    return records


def _table_row(record: ExperimentRecord) -> dict:
    cfg = record.config
    if cfg.get("synthetic"):
        name = cfg["synthetic"].get("name", "synthetic")
    else:
        name = cfg["dataset"]
    return {"dataset": name, "attack": cfg["attack"], "setting": cfg["setting"],
            "structure_mode": cfg["structure_mode"], "knn_k": cfg["knn_k"],
            "knn_metric": cfg["knn_metric"], "train_size": float(cfg["train_size"]),
            "candidate_count": cfg["candidate_count"],
            "m": len(cfg["sensitive_attrs"]), "iterations": cfg["iterations"],
            "base_threshold": cfg["base_threshold"],
            "metric_name": record.metric_name, "mean": record.mean,
            "std": record.std, "mean_confidence": record.mean_confidence,
            "queries_used": record.queries_used,
            "num_seeds": len(cfg["seeds"]), "partial": record.partial}


def _format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_table(records) -> str:
    """CSV with a stable column order; wall-clock never appears here."""
    if not records:
        raise ParameterError("no records to tabulate")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for record in records:
        row = _table_row(record)
        writer.writerow({k: _format_cell(v) for k, v in row.items()})
    return buf.getvalue()


def parse_table(text: str) -> list:
    """Inverse of :func:`emit_table`: typed row dicts."""
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row = {}
        for key, value in raw.items():
            conv = _TABLE_TYPES.get(key)
            row[key] = conv(value) if conv else value
        rows.append(row)
    return rows


def write_table(path, records) -> None:
    _atomic_write(path, emit_table(records))
