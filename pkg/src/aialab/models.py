"""Target/shadow GCN, its black-box query surface, and the MLP attack classifier."""

from __future__ import annotations

import logging
import threading
import warnings
from typing import Optional

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import ConvergenceWarning, NotFittedError
from sklearn.neural_network import MLPClassifier as _SkMlp

from .graph import SparseGraph, gcn_operator
from .validation import check_feature_matrix, check_node_ids, make_rng

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when model training cannot proceed (divergence, degenerate labels)."""


class QueryError(ValueError):
    """Raised when a posterior query is malformed (shape/dimension mismatch)."""


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    Z = np.asarray(logits, dtype=float)
    Z = Z - Z.max(axis=-1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=-1, keepdims=True)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def gcn_loss_and_grads(S: sp.spmatrix, X: np.ndarray, labels: np.ndarray,
                       train_ids: np.ndarray, W0: np.ndarray, W1: np.ndarray,
                       weight_decay: float):
    """Cross-entropy loss over ``train_ids`` plus L2 term, with analytic grads.

    Forward pass: H = relu(S X W0), Z = S H W1, P = softmax(Z). The loss is
    mean CE over the train rows + (wd/2)(|W0|^2 + |W1|^2). Returns
    (loss, dW0, dW1). This is the exact function the training loop steps on,
    so finite-difference checks exercise the real path.
    """
    n_t = len(train_ids)
    SX = S @ X
    H_pre = SX @ W0
    H = np.maximum(H_pre, 0.0)
    SH = S @ H
    Z = SH @ W1

    Zs = Z - Z.max(axis=1, keepdims=True)
    logprob = Zs - np.log(np.exp(Zs).sum(axis=1, keepdims=True))
    ce = -logprob[train_ids, labels[train_ids]].mean()
    loss = ce + 0.5 * weight_decay * (np.sum(W0 * W0) + np.sum(W1 * W1))

    P = np.exp(logprob)
    G = np.zeros_like(P)
    G[train_ids] = P[train_ids]
    G[train_ids, labels[train_ids]] -= 1.0
    G /= n_t

    dW1 = SH.T @ G + weight_decay * W1
    dH = (S.T @ (G @ W1.T))
    dH_pre = dH * (H_pre > 0)
    dW0 = SX.T @ dH_pre + weight_decay * W0
    return loss, dW0, dW1


class GcnClassifier(BaseEstimator, ClassifierMixin):
    """2-layer graph convolutional classifier trained with manual gradients.

    Full-batch gradient descent on cross-entropy over the training rows;
    deterministic for a fixed ``seed``. The renormalized operator
    D^{-1/2}(A+I)D^{-1/2} is built once per graph and cached per query graph
    object.

    Parameters
    ----------
    hidden : int, default 16
    lr : float, default 0.05
    epochs : int, default 200
    weight_decay : float, default 5e-4
    seed : int, default 0
    """

    def __init__(self, hidden: int = 16, lr: float = 0.05, epochs: int = 200,
                 weight_decay: float = 5e-4, seed: int = 0):
        self.hidden = hidden
        self.lr = lr
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.seed = seed

    # one-slot operator cache; attacks hammer the same graph object
    def _operator_for(self, graph: SparseGraph) -> sp.csr_matrix:
        cached = getattr(self, "_op_cache", None)
        if cached is not None and cached[0] is graph:
            return cached[1]
        S = gcn_operator(graph)
        self._op_cache = (graph, S)
        return S

    def fit(self, X, y, graph: SparseGraph, train_ids=None):
        X = check_feature_matrix(X, name="features")
        y = np.asarray(y, dtype=np.int64).ravel()
        if graph.num_nodes != len(X):
            raise ValueError(f"graph has {graph.num_nodes} nodes but features "
                             f"have {len(X)} rows")
        if train_ids is None:
            train_ids = np.arange(len(X))
        train_ids = check_node_ids(train_ids, len(X), "train_ids")
        if len(train_ids) == 0:
            raise TrainingError("train_ids is empty")

        rng = make_rng(self.seed)
        n_classes = int(y.max()) + 1
        W0 = _glorot(rng, X.shape[1], self.hidden)
        W1 = _glorot(rng, self.hidden, n_classes)
        S = self._operator_for(graph)

        losses = []
        for epoch in range(self.epochs):
            loss, dW0, dW1 = gcn_loss_and_grads(S, X, y, train_ids, W0, W1,
                                                self.weight_decay)
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            losses.append(float(loss))
            W0 -= self.lr * dW0
            W1 -= self.lr * dW1

        self.W0_ = W0
        self.W1_ = W1
        self.classes_ = np.arange(n_classes)
        self.graph_ = graph
        self.loss_curve_ = np.asarray(losses)
        self.train_ids_ = train_ids
        preds = self.predict(X, graph)
        self.train_accuracy_ = float((preds[train_ids] == y[train_ids]).mean())
        return self

    def _check_fitted(self):
        if not hasattr(self, "W0_"):
            raise NotFittedError("this GcnClassifier instance is not fitted yet")

    def decision_function(self, X, graph: Optional[SparseGraph] = None) -> np.ndarray:
        self._check_fitted()
        X = check_feature_matrix(X, name="features")
        if X.shape[1] != self.W0_.shape[0]:
            raise QueryError(f"feature dimension {X.shape[1]} does not match "
                             f"training dimension {self.W0_.shape[0]}")
        graph = self.graph_ if graph is None else graph
        if graph.num_nodes != len(X):
            raise QueryError(f"graph has {graph.num_nodes} nodes but features "
                             f"have {len(X)} rows")
        S = self._operator_for(graph)
        H = np.maximum((S @ X) @ self.W0_, 0.0)
        return (S @ H) @ self.W1_

    def predict_proba(self, X, graph: Optional[SparseGraph] = None) -> np.ndarray:
        return softmax(self.decision_function(X, graph))

    def predict(self, X, graph: Optional[SparseGraph] = None) -> np.ndarray:
        return self.predict_proba(X, graph).argmax(axis=1)

    def accuracy(self, X, y, ids, graph: Optional[SparseGraph] = None) -> float:
        y = np.asarray(y, dtype=np.int64).ravel()
        ids = np.asarray(ids, dtype=np.int64)
        preds = self.predict(X, graph)
        return float((preds[ids] == y[ids]).mean())

    def as_black_box(self) -> "BlackBoxHandle":
        """Posterior-only view of this model; no weight access crosses it."""
        self._check_fitted()
        return BlackBoxHandle(self.predict_proba)

    def save(self, path) -> None:
        self._check_fitted()
        np.savez(path, format=np.array("gcn-checkpoint-v1"),
                 W0=self.W0_, W1=self.W1_,
                 num_nodes=np.array(self.graph_.num_nodes),
                 edges=self.graph_.edges,
                 hyper=np.array([self.hidden, self.lr, self.epochs,
                                 self.weight_decay, self.seed]))

    @classmethod
    def load(cls, path) -> "GcnClassifier":
        with np.load(path, allow_pickle=False) as blob:
            if str(blob["format"]) != "gcn-checkpoint-v1":
                raise ValueError(f"unrecognized checkpoint format {blob['format']}")
            hidden, lr, epochs, wd, seed = blob["hyper"]
            model = cls(hidden=int(hidden), lr=float(lr), epochs=int(epochs),
                        weight_decay=float(wd), seed=int(seed))
            model.W0_ = blob["W0"]
            model.W1_ = blob["W1"]
            model.graph_ = SparseGraph(int(blob["num_nodes"]), blob["edges"])
            model.classes_ = np.arange(model.W1_.shape[1])
        return model


class BlackBoxHandle:
    """Posterior-only query interface over a trained model.

    The wrapped model is hidden; the only public surface is
    ``query(features, graph)`` and the monotone ``query_count``. The counter
    is lock-protected so concurrent readers can share one handle.
    """

    def __init__(self, posterior_fn):
        self._posterior_fn = posterior_fn
        self._count = 0
        self._lock = threading.Lock()

    def query(self, features, graph: Optional[SparseGraph] = None) -> np.ndarray:
        posteriors = self._posterior_fn(features, graph)
        with self._lock:
            self._count += 1
        return posteriors

    @property
    def query_count(self) -> int:
        with self._lock:
            return self._count


class MlpClassifier(BaseEstimator, ClassifierMixin):
    """3-layer MLP (two hidden ReLU layers) for posterior-vs-random labeling.

    Thin wrapper around scikit-learn's MLP with the widths fixed at
    ``hidden`` and determinism pinned to ``seed``.
    """

    def __init__(self, hidden: int = 32, lr: float = 1e-3, epochs: int = 200,
                 seed: int = 0):
        self.hidden = hidden
        self.lr = lr
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        X = check_feature_matrix(X, name="attack-model inputs")
        y = np.asarray(y, dtype=np.int64).ravel()
        if len(np.unique(y)) < 2:
            raise TrainingError("attack-model training needs samples of both classes")
        self._mlp = _SkMlp(hidden_layer_sizes=(self.hidden, self.hidden),
                           activation="relu", solver="adam",
                           learning_rate_init=self.lr, max_iter=self.epochs,
                           random_state=self.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            self._mlp.fit(X, y)
        self.classes_ = self._mlp.classes_
        self.coefs_ = self._mlp.coefs_
        return self

    def _check_fitted(self):
        if not hasattr(self, "_mlp"):
            raise NotFittedError("this MlpClassifier instance is not fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return self._mlp.predict_proba(np.asarray(X, dtype=float))

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        return self._mlp.predict(np.asarray(X, dtype=float))


def train_gcn(ds, split, hyper: Optional[dict] = None) -> GcnClassifier:
    """Train the target (or shadow) model on a dataset split and log accuracy."""
    model = GcnClassifier(**(hyper or {}))
    model.fit(ds.features, ds.labels, ds.graph, split.train_ids)
    if len(split.test_ids):
        model.test_accuracy_ = model.accuracy(ds.features, ds.labels, split.test_ids)
        logger.info("%s: train acc %.4f, test acc %.4f", ds.name,
                    model.train_accuracy_, model.test_accuracy_)
    else:
        logger.info("%s: train acc %.4f", ds.name, model.train_accuracy_)
    return model


def train_mlp(posteriors, labels, hyper: Optional[dict] = None) -> MlpClassifier:
    """Train the binary attack classifier on labeled posteriors."""
    model = MlpClassifier(**(hyper or {}))
    return model.fit(posteriors, labels)
