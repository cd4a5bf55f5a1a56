"""Dataset containers, loaders and the train/test/candidate split machinery."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import numbers
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .graph import SparseGraph, read_edge_list, write_edge_list
from .validation import DataError, ParameterError, check_node_ids, make_rng

logger = logging.getLogger(__name__)

BINARY = "binary"
CONTINUOUS = "continuous"
FEATURE_KINDS = (BINARY, CONTINUOUS)

SETTING_ONE = "setting1"
SETTING_TWO = "setting2"
SETTINGS = (SETTING_ONE, SETTING_TWO)

FORMATS = ("edge_list_plus_csv", "planetoid_like")


class LoadError(DataError):
    """Raised when a dataset on disk cannot be parsed; names the offending record."""


@dataclass
class Dataset:
    """A node-attributed graph with class labels.

    Parameters
    ----------
    graph : SparseGraph
        Undirected structure over ``num_nodes`` nodes.
    features : ndarray of shape (num_nodes, d)
        Dense attribute matrix. Binary datasets hold only 0/1 values.
    labels : ndarray of shape (num_nodes,)
        Class id per node, contiguous from 0.
    feature_kind : {"binary", "continuous"}
    name : str
    """

    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    feature_kind: str = BINARY
    name: str = "unnamed"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        n = self.graph.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError(f"features shape {self.features.shape} does not match "
                            f"num_nodes={n}")
        if len(self.labels) != n:
            raise DataError(f"labels length {len(self.labels)} does not match num_nodes={n}")
        if not np.isfinite(self.features).all():
            bad = np.argwhere(~np.isfinite(self.features))[0]
            raise DataError(f"features contain a non-finite value at {tuple(bad)}")
        if len(self.labels) and self.labels.min() < 0:
            raise DataError("labels must be nonnegative class ids")
        if self.feature_kind not in FEATURE_KINDS:
            raise DataError(f"feature_kind must be one of {FEATURE_KINDS}, "
                            f"got {self.feature_kind!r}")
        if self.feature_kind == BINARY and not np.isin(self.features, (0.0, 1.0)).all():
            raise DataError("binary feature_kind requires every value in {0, 1}")

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


@dataclass
class Split:
    """Disjoint node-id pools for one experiment.

    ``candidate_ids`` is a subset of ``train_ids``; shadow pools, when present,
    are disjoint from both target pools.
    """

    train_ids: np.ndarray
    test_ids: np.ndarray
    candidate_ids: np.ndarray
    shadow_train_ids: Optional[np.ndarray] = None
    shadow_test_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.train_ids = np.asarray(self.train_ids, dtype=np.int64)
        self.test_ids = np.asarray(self.test_ids, dtype=np.int64)
        self.candidate_ids = np.asarray(self.candidate_ids, dtype=np.int64)
        train = set(self.train_ids.tolist())
        test = set(self.test_ids.tolist())
        if train & test:
            raise DataError("train_ids and test_ids overlap")
        if not set(self.candidate_ids.tolist()) <= train:
            raise DataError("candidate_ids must be a subset of train_ids")
        if self.shadow_train_ids is not None or self.shadow_test_ids is not None:
            self.shadow_train_ids = np.asarray(self.shadow_train_ids, dtype=np.int64)
            self.shadow_test_ids = np.asarray(self.shadow_test_ids, dtype=np.int64)
            shadow = set(self.shadow_train_ids.tolist()) | set(self.shadow_test_ids.tolist())
            if len(shadow) != len(self.shadow_train_ids) + len(self.shadow_test_ids):
                raise DataError("shadow train/test ids overlap")
            if shadow & (train | test):
                raise DataError("shadow ids overlap target train/test ids")

    @property
    def has_shadow(self) -> bool:
        return self.shadow_train_ids is not None


@dataclass
class PartialFeatureMatrix:
    """Feature matrix with hidden cells.

    ``values`` holds NaN exactly where ``missing_mask`` is true; the true
    values at those cells are known only to the evaluation harness.
    """

    values: np.ndarray
    missing_mask: np.ndarray
    sensitive_attrs: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        self.sensitive_attrs = np.asarray(self.sensitive_attrs, dtype=np.int64)
        if self.values.shape != self.missing_mask.shape:
            raise DataError("values and missing_mask shapes differ")

    @property
    def masked_node_ids(self) -> np.ndarray:
        """Ids of rows that still contain at least one hidden cell."""
        return np.flatnonzero(self.missing_mask.any(axis=1))


def _check_sensitive_attrs(attrs, d: int) -> np.ndarray:
    attrs = np.asarray(attrs, dtype=np.int64).ravel()
    if attrs.size == 0:
        raise ParameterError("sensitive_attrs must name at least one column")
    if attrs.min() < 0 or attrs.max() >= d:
        raise ParameterError(f"sensitive attribute index out of range [0, {d})")
    if len(np.unique(attrs)) != len(attrs):
        raise ParameterError("sensitive_attrs contains duplicates")
    return attrs


# -- loaders ---------------------------------------------------------------

def _load_csv_matrix(path: Path) -> np.ndarray:
    try:
        M = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
        return M
    except ValueError:
        pass
    # slow path only to produce a useful error message
    widths = set()
    with path.open() as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            widths.add(len(row))
            for col, cell in enumerate(row):
                try:
                    float(cell)
                except ValueError:
                    raise LoadError(f"{path}:{lineno}: unparseable value {cell!r} "
                                    f"in column {col}") from None
            if len(widths) > 1:
                raise LoadError(f"{path}:{lineno}: row has {len(row)} columns, "
                                f"expected {next(iter(widths))}")
    raise LoadError(f"{path}: could not parse as a numeric CSV matrix")


def _load_labels_txt(path: Path) -> np.ndarray:
    labels = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise LoadError(f"{path}:{lineno}: unparseable label {line!r}") from None
    return np.asarray(labels, dtype=np.int64)


def _check_edges_in_range(edges: np.ndarray, num_nodes: int, source: str) -> None:
    if edges.size == 0:
        return
    bad = np.flatnonzero((edges < 0).any(axis=1) | (edges >= num_nodes).any(axis=1))
    if bad.size:
        u, v = edges[bad[0]]
        raise LoadError(f"{source}: edge ({u}, {v}) has a dangling endpoint; "
                        f"dataset has {num_nodes} nodes")


def _read_meta(path: Path) -> dict:
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON metadata: {exc}") from None


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _verify_manifest(root: Path) -> None:
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        return
    manifest = _read_meta(manifest_path)
    for fname, expected in manifest.get("sha256", {}).items():
        target = root / fname
        if not target.exists():
            raise LoadError(f"{manifest_path}: checksummed file {fname!r} is missing")
        got = _sha256(target)
        if got != expected:
            raise LoadError(f"{target}: sha256 mismatch, expected {expected}, got {got}")


def _infer_feature_kind(X: np.ndarray) -> str:
    return BINARY if np.isin(X, (0.0, 1.0)).all() else CONTINUOUS


def load_dataset(path, format: str = "edge_list_plus_csv") -> Dataset:
    """Load a Dataset from ``path`` (a directory) in one of two layouts.

    edge_list_plus_csv
        ``edges.txt`` ("u v" per line), ``features.csv`` (headerless, d
        columns), ``labels.txt`` (one integer per line), optional
        ``meta.json`` with ``name`` / ``feature_kind``.
    planetoid_like
        ``features.npy``, ``labels.npy``, ``edges.npy`` (shape (E, 2)),
        ``meta.json``; an optional ``manifest.json`` carries sha256 digests
        that are verified before anything is parsed.
    """
    root = Path(path)
    if format not in FORMATS:
        raise ParameterError(f"unknown format {format!r}, expected one of {FORMATS}")
    if not root.is_dir():
        raise LoadError(f"{root}: dataset directory does not exist")

    if format == "edge_list_plus_csv":
        X = _load_csv_matrix(root / "features.csv")
        labels = _load_labels_txt(root / "labels.txt")
        if len(labels) != len(X):
            raise LoadError(f"{root}: features.csv has {len(X)} rows but labels.txt "
                            f"has {len(labels)} entries")
        edges = read_edge_list(root / "edges.txt")
        _check_edges_in_range(edges, len(X), str(root / "edges.txt"))
        meta = _read_meta(root / "meta.json")
    else:
        _verify_manifest(root)
        try:
            X = np.load(root / "features.npy")
            labels = np.load(root / "labels.npy")
            edges = np.load(root / "edges.npy")
        except FileNotFoundError as exc:
            raise LoadError(f"{root}: missing required file {exc.filename}") from None
        X = np.asarray(X, dtype=float)
        labels = np.asarray(labels, dtype=np.int64).ravel()
        edges = np.asarray(edges, dtype=np.int64)
        if edges.ndim != 2 or (edges.size and edges.shape[1] != 2):
            raise LoadError(f"{root / 'edges.npy'}: expected shape (E, 2), "
                            f"got {edges.shape}")
        if len(labels) != len(X):
            raise LoadError(f"{root}: features have {len(X)} rows but labels "
                            f"have {len(labels)} entries")
        edges = edges.reshape(-1, 2)
        _check_edges_in_range(edges, len(X), str(root / "edges.npy"))
        meta = _read_meta(root / "meta.json")

    graph = SparseGraph(len(X), edges)
    name = meta.get("name", root.name)
    kind = meta.get("feature_kind", _infer_feature_kind(X))
    try:
        return Dataset(graph, X, labels, feature_kind=kind, name=name)
    except DataError as exc:
        raise LoadError(f"{root}: {exc}") from None


def save_dataset(path, ds: Dataset, format: str = "edge_list_plus_csv") -> None:
    """Write ``ds`` under ``path`` so that :func:`load_dataset` round-trips it."""
    root = Path(path)
    if format not in FORMATS:
        raise ParameterError(f"unknown format {format!r}, expected one of {FORMATS}")
    root.mkdir(parents=True, exist_ok=True)
    meta = {"name": ds.name, "feature_kind": ds.feature_kind,
            "num_nodes": ds.num_nodes, "num_features": ds.num_features}
    if format == "edge_list_plus_csv":
        np.savetxt(root / "features.csv", ds.features, delimiter=",", fmt="%.17g")
        np.savetxt(root / "labels.txt", ds.labels, fmt="%d")
        write_edge_list(root / "edges.txt", ds.graph)
        (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    else:
        np.save(root / "features.npy", ds.features)
        np.save(root / "labels.npy", ds.labels)
        np.save(root / "edges.npy", ds.graph.edges)
        (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        digests = {f: _sha256(root / f)
                   for f in ("features.npy", "labels.npy", "edges.npy")}
        (root / "manifest.json").write_text(
            json.dumps({"sha256": digests}, indent=2) + "\n")


# -- splitting and masking -------------------------------------------------

def _resolve_count(value, n: int, what: str) -> int:
    if isinstance(value, numbers.Integral):
        count = int(value)
    elif isinstance(value, float):
        if not 0.0 < value < 1.0:
            raise ParameterError(f"{what} fraction must lie in (0, 1), got {value}")
        count = int(round(value * n))
    else:
        raise ParameterError(f"{what} must be an int count or float fraction")
    if count <= 0:
        raise ParameterError(f"{what} must be positive, got {count}")
    return count


def make_split(ds: Dataset, train_size, candidate_count: int, *,
               test_size=None, shadow: bool = False,
               shadow_train_size=None, shadow_test_size=None,
               seed=0, candidate_seed=None) -> Split:
    """Partition nodes into train/test (and optionally shadow) pools.

    Candidates are drawn with ``candidate_seed`` (defaults to ``seed``) so a
    dataset-level seed can pin them across runs; the train pool is then
    completed around them with the run ``seed``, which leaves the candidate
    set a uniform without-replacement sample of the train set.
    """
    n = ds.num_nodes
    n_train = _resolve_count(train_size, n, "train_size")
    if candidate_count <= 0:
        raise ParameterError(f"candidate_count must be positive, got {candidate_count}")
    if candidate_count > n_train:
        raise ParameterError(f"candidate_count={candidate_count} exceeds "
                             f"train_size={n_train}")

    if shadow:
        n_shadow_train = (n_train if shadow_train_size is None
                          else _resolve_count(shadow_train_size, n, "shadow_train_size"))
        leftover = n - n_train - n_shadow_train
        if test_size is None and shadow_test_size is None:
            if leftover < 2:
                raise ParameterError("not enough nodes left for test pools")
            n_test = leftover // 2
            n_shadow_test = leftover - n_test
        else:
            n_test = leftover if test_size is None else _resolve_count(test_size, n, "test_size")
            n_shadow_test = (leftover - n_test if shadow_test_size is None
                             else _resolve_count(shadow_test_size, n, "shadow_test_size"))
        total = n_train + n_test + n_shadow_train + n_shadow_test
        if min(n_test, n_shadow_test) <= 0 or total > n:
            raise ParameterError(f"split sizes ({n_train}/{n_test} target, "
                                 f"{n_shadow_train}/{n_shadow_test} shadow) "
                                 f"do not fit {n} nodes")
    else:
        n_test = (n - n_train if test_size is None
                  else _resolve_count(test_size, n, "test_size"))
        if n_test <= 0 or n_train + n_test > n:
            raise ParameterError(f"train_size={n_train} + test_size={n_test} "
                                 f"exceeds num_nodes={n}")
        n_shadow_train = n_shadow_test = 0

    cand_rng = make_rng(seed if candidate_seed is None else candidate_seed)
    candidates = np.sort(cand_rng.choice(n, size=candidate_count, replace=False))

    rng = make_rng(seed)
    rest = np.setdiff1d(np.arange(n), candidates, assume_unique=False)
    rest = rng.permutation(rest)
    fill = n_train - candidate_count
    train = np.sort(np.concatenate([candidates, rest[:fill]]))
    cursor = fill
    test = np.sort(rest[cursor:cursor + n_test]); cursor += n_test
    if shadow:
        shadow_train = np.sort(rest[cursor:cursor + n_shadow_train]); cursor += n_shadow_train
        shadow_test = np.sort(rest[cursor:cursor + n_shadow_test])
        return Split(train, test, candidates, shadow_train, shadow_test)
    return Split(train, test, candidates)


def mask_sensitive(ds: Dataset, split: Split, sensitive_attrs,
                   setting: str = SETTING_ONE, seed=0) -> PartialFeatureMatrix:
    """Hide sensitive columns on candidate nodes.

    Setting-1 masks every candidate; Setting-2 reveals a uniformly chosen
    ceil(half) of them, leaving the rest masked. Non-candidate rows are never
    touched.
    """
    if setting not in SETTINGS:
        raise ParameterError(f"setting must be one of {SETTINGS}, got {setting!r}")
    attrs = _check_sensitive_attrs(sensitive_attrs, ds.num_features)
    candidates = check_node_ids(split.candidate_ids, ds.num_nodes, "candidate_ids")

    if setting == SETTING_ONE:
        hidden_nodes = candidates
    else:
        reveal = math.ceil(len(candidates) / 2)
        rng = make_rng(seed)
        revealed = rng.choice(candidates, size=reveal, replace=False)
        hidden_nodes = np.setdiff1d(candidates, revealed)

    values = ds.features.copy()
    mask = np.zeros(values.shape, dtype=bool)
    mask[np.ix_(hidden_nodes, attrs)] = True
    values[mask] = np.nan
    logger.debug("masked %d cells over %d nodes (%s)", mask.sum(),
                 len(hidden_nodes), setting)
    return PartialFeatureMatrix(values, mask, attrs)
