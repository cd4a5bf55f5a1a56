"""Numbered acceptance suite.

Each marked test asserts one headline guarantee; the conftest reporter
prints a one-line verdict per criterion at the end of the run. The two
citation-network criteria need a local copy of Cora (this tree ships no
datasets and the test environment cannot download them); they skip with
that reason and a synthetic stand-in next to each covers the same code
path.
"""

import time

import numpy as np
import pytest
import yaml

import aialab as al
from aialab.cli import main as cli_main
from aialab.experiment import resolve_data_root
from conftest import HOMOPHILOUS_CONTINUOUS

DATA_ROOT = resolve_data_root(None)
CORA = DATA_ROOT / "cora"

needs_cora = pytest.mark.skipif(
    not CORA.exists(),
    reason=f"needs a local Cora copy at {CORA.resolve()} (or set "
           "AIALAB_DATA_ROOT); no dataset ships with this tree and the "
           "test environment cannot fetch one")

SA_ANALOGUE = dict(num_nodes=300, num_features=8, num_classes=2,
                   p_in=0.15, p_out=0.02, flip_prob=0.2, name="sa-analogue")


class RecordingHandle:
    """Black-box wrapper that snapshots every queried feature matrix."""

    def __init__(self, inner):
        self._inner = inner
        self.snapshots = []

    def query(self, features, graph=None):
        self.snapshots.append(np.array(features, copy=True))
        return self._inner.query(features, graph)

    @property
    def query_count(self):
        return self._inner.query_count


@pytest.mark.criterion(1, "target GCN reaches published-range Cora accuracy")
@needs_cora
def test_cora_target_fidelity():
    ds = al.load_dataset(CORA)
    split = al.make_split(ds, 1000, 100, seed=0)
    start = time.perf_counter()
    model = al.train_gcn(ds, split, {"seed": 0})
    elapsed = time.perf_counter() - start
    assert model.train_accuracy_ >= 0.90
    assert model.test_accuracy_ == pytest.approx(0.78, abs=0.05)
    assert elapsed < 120.0


def test_target_fidelity_synthetic_stand_in(trained_model):
    # same training path as the Cora criterion, separable communities
    assert trained_model.train_accuracy_ >= 0.90
    assert trained_model.test_accuracy_ >= 0.90


@pytest.mark.criterion(2, "analytic GCN gradients match central differences")
def test_gradient_check():
    from aialab.models import gcn_loss_and_grads

    start = time.perf_counter()
    g = al.SparseGraph(10, [[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [5, 6],
                            [6, 7], [7, 8], [8, 9], [0, 5], [2, 7]])
    rng = np.random.default_rng(42)
    X = rng.normal(size=(10, 4))
    y = np.array([0, 1, 0, 1, 2, 0, 1, 2, 2, 0])
    train_ids = np.array([0, 2, 3, 5, 6, 8])
    S = al.gcn_operator(g)
    wrng = np.random.default_rng(0)
    W0 = wrng.normal(scale=0.5, size=(4, 6))
    W1 = wrng.normal(scale=0.5, size=(6, 3))
    wd = 5e-4
    _, dW0, dW1 = gcn_loss_and_grads(S, X, y, train_ids, W0, W1, wd)

    eps = 1e-6
    for W, dW in ((W0, dW0), (W1, dW1)):
        numeric = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            orig = W[idx]
            W[idx] = orig + eps
            up, _, _ = gcn_loss_and_grads(S, X, y, train_ids, W0, W1, wd)
            W[idx] = orig - eps
            down, _, _ = gcn_loss_and_grads(S, X, y, train_ids, W0, W1, wd)
            W[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        rel = np.abs(dW - numeric) / np.maximum(np.abs(numeric), 1e-8)
        assert rel.max() < 1e-4
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion(3, "imputation oracle on the homophilous fixture")
def test_imputation_oracle(binary_setup):
    ds, split, x = binary_setup
    fp = al.feature_propagate(x, ds.graph, al.ImputerConfig(iterations=40))
    assert al.hamming_percentage(fp, ds.features, x.missing_mask) == 100.0
    scores = [al.hamming_percentage(
        al.random_impute(x, al.ImputerConfig(seed=seed)),
        ds.features, x.missing_mask) for seed in range(10)]
    assert np.mean(scores) == pytest.approx(50.0, abs=5.0)


@pytest.mark.criterion(4, "confidence score fixed points and bounds")
def test_confidence_score_suite():
    assert al.confidence_scores([[0.5, 0.5]])[0] == 0.0
    assert al.confidence_scores([[1.0, 0.0, 0.0]])[0] == 1.0
    got = al.confidence_scores([[0.7, 0.2, 0.1]])[0]
    assert got == pytest.approx(0.55, abs=1e-12)
    rng = np.random.default_rng(0)
    for c in (2, 3, 5, 10):
        s = al.confidence_scores(rng.dirichlet(np.ones(c), size=2500))
        assert s.min() >= 0.0 and s.max() <= 1.0


@pytest.mark.criterion(5, "iterative mechanics: decay, reset, stability, budget")
def test_iterative_attack_mechanics(binary_setup, trained_model):
    ds, split, x = binary_setup

    # decay path: an untrained model keeps every confidence low at first
    blind = al.GcnClassifier(epochs=0, seed=0).fit(ds.features, ds.labels,
                                                   ds.graph, split.train_ids)
    values = ds.features.copy()
    mask = np.zeros(values.shape, dtype=bool)
    mask[split.candidate_ids[:10], 0] = True
    values[mask] = np.nan
    xb = al.PartialFeatureMatrix(values, mask, np.array([0]))
    base = 0.8
    out = al.attack_iterative(blind.as_black_box(), xb, ds.graph,
                              cfg=al.AttackConfig(base_threshold=base))
    trace = out.trace
    assert trace[0]["threshold"] == pytest.approx(base, abs=1e-12)
    assert trace[1]["threshold"] == pytest.approx(0.76, abs=1e-12)
    assert trace[2]["threshold"] == pytest.approx(0.722, abs=1e-12)
    for prev, cur in zip(trace, trace[1:]):
        if prev["fixed_node"] is None:
            assert cur["threshold"] == pytest.approx(
                prev["threshold"] * 0.95, abs=1e-12)
        else:
            assert cur["threshold"] == base
    assert len(trace) <= 10 * 500

    # stability: once fixed, a node's sensitive cells never change again
    recorder = RecordingHandle(trained_model.as_black_box())
    out2 = al.attack_iterative(recorder, x, ds.graph)
    fixes = 0
    for rec in out2.trace:
        node = rec["fixed_node"]
        if node is None:
            continue
        fixes += 1
        cells = x.missing_mask[node]
        frozen = out2.reconstructed[node, cells]
        for snap in recorder.snapshots[rec["iteration"]:]:
            assert np.array_equal(snap[node, cells], frozen)
    assert fixes > 0
    n_masked = len(x.masked_node_ids)
    assert len(out2.trace) <= n_masked * 500


@pytest.mark.criterion(6, "query accounting for both attack families")
def test_query_accounting(binary_setup, trained_model):
    ds, _, x = binary_setup
    h1 = trained_model.as_black_box()
    single = al.attack_single_pass(h1, x, ds.graph)
    assert single.queries_used == 1
    assert h1.query_count == 1

    h2 = trained_model.as_black_box()
    out = al.attack_iterative(h2, x, ds.graph)
    assert out.queries_used == len(out.trace) + 1
    assert h2.query_count == out.queries_used
    assert out.trace[-1]["query_count"] == len(out.trace)


@pytest.mark.criterion(7, "shadow attack stays at chance level")
@needs_cora
def test_cora_shadow_attack_chance_level():
    cfg = al.ExperimentConfig(dataset="cora", attack="sa", train_size=1000,
                              candidate_count=100, seeds=tuple(range(10)))
    record = al.run_experiment(cfg, DATA_ROOT)
    assert not record.partial
    assert record.mean <= 55.0


def test_shadow_attack_chance_level_synthetic_stand_in():
    cfg = al.ExperimentConfig(synthetic=SA_ANALOGUE, dataset_seed=5,
                              attack="sa", train_size=70, candidate_count=40,
                              seeds=tuple(range(10)))
    record = al.run_experiment(cfg)
    assert not record.partial
    assert record.mean <= 55.0


@pytest.mark.criterion(8, "metrics agree with brute-force recomputation")
def test_metric_oracles():
    rng = np.random.default_rng(8)
    for _ in range(100):
        n, d = rng.integers(2, 30), rng.integers(1, 12)
        mask = rng.random((n, d)) < 0.4
        if not mask.any():
            mask[0, 0] = True

        truth = rng.integers(0, 2, size=(n, d)).astype(float)
        inferred = rng.integers(0, 2, size=(n, d)).astype(float)
        got = al.hamming_percentage(inferred, truth, mask)
        agree = sum(1 for i in range(n) for j in range(d)
                    if mask[i, j] and inferred[i, j] == truth[i, j])
        assert got == 100.0 * agree / mask.sum()

        ct = rng.normal(size=(n, d))
        ci = rng.normal(size=(n, d))
        got_mse = al.masked_mse(ci, ct, mask)
        per_node = []
        for i in range(n):
            errs = [(ci[i, j] - ct[i, j]) ** 2 for j in range(d) if mask[i, j]]
            if errs:
                per_node.append(sum(errs) / len(errs))
        assert got_mse == pytest.approx(sum(per_node) / len(per_node),
                                        abs=1e-12)


@pytest.mark.criterion(9, "extra attacker knowledge lowers continuous error")
def test_setting_knowledge_effect():
    means = {}
    for setting in ("setting1", "setting2"):
        cfg = al.ExperimentConfig(synthetic=dict(HOMOPHILOUS_CONTINUOUS),
                                  dataset_seed=3, attack="fp", setting=setting,
                                  train_size=198, candidate_count=196,
                                  seeds=tuple(range(10)))
        record = al.run_experiment(cfg)
        assert record.metric_name == "mse"
        means[setting] = record.mean
    assert means["setting2"] <= means["setting1"]


@pytest.mark.criterion(10, "sweep output is byte-identical across runs")
def test_sweep_determinism(tmp_path):
    cfg = {"synthetic": {"num_nodes": 120, "num_features": 6,
                         "num_classes": 2, "p_in": 0.25, "p_out": 0.0,
                         "name": "fast-bin"},
           "train_size": 80, "candidate_count": 30, "seeds": [0, 1],
           "gcn": {"epochs": 60}}
    cfg_file = tmp_path / "exp.yaml"
    cfg_file.write_text(yaml.safe_dump(cfg))
    payloads = []
    for run in ("first", "second"):
        table = tmp_path / f"{run}.csv"
        code = cli_main(["sweep", "--config", str(cfg_file),
                         "--axis", "attack", "--values", "fp,ri",
                         "--table", str(table)])
        assert code == 0
        payloads.append(table.read_bytes())
    assert payloads[0] == payloads[1]
