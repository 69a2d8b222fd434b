"""Trained model types, training entry points, prediction and JSON persistence."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..errors import DimensionMismatch, MalformedModel, VersionMismatch
from .dataset import Dataset, MaxFeatures, TrainConfig, canonical_order
from .tree import CandidateHook, TreeNodes, bootstrap_tree, grow_tree

MODEL_FORMAT = "kitscan-model"
MODEL_VERSION = 1


class Variant(str, Enum):
    TREE = "Tree"
    FOREST = "Forest"
    LINEAR_SVM = "LinearSvm"
    GAUSSIAN_NB = "GaussianNb"


class _Model:
    variant: Variant
    n_features: int
    threshold = 0.5  # predict = score >= threshold

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict_many(self, X) -> np.ndarray:
        return self.scores(X) >= self.threshold

    def predict_score(self, vector) -> float:
        return float(self.scores(vector)[0])

    def predict(self, vector) -> bool:
        return bool(self.predict_many(vector)[0])


@dataclass(frozen=True, eq=False)
class TreeModel(_Model):
    n_features: int
    nodes: TreeNodes
    variant = Variant.TREE

    def scores(self, X) -> np.ndarray:
        return self.nodes.positive_fraction(self._check(X))

    def params(self) -> dict:
        return {"nodes": self.nodes.to_json()}


@dataclass(frozen=True, eq=False)
class ForestModel(_Model):
    n_features: int
    trees: tuple[TreeNodes, ...]
    variant = Variant.FOREST

    def votes(self, X) -> np.ndarray:
        X = self._check(X)
        return np.stack([t.positive_fraction(X) >= 0.5 for t in self.trees]).astype(np.int64)

    def scores(self, X) -> np.ndarray:
        return self.votes(X).sum(axis=0) / len(self.trees)

    def params(self) -> dict:
        return {"trees": [t.to_json() for t in self.trees]}


@dataclass(frozen=True, eq=False)
class LinearSvmModel(_Model):
    n_features: int
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    variant = Variant.LINEAR_SVM
    threshold = 0.0

    def scores(self, X) -> np.ndarray:
        Z = (self._check(X) - self.mean) / self.scale
        return Z @ self.weights + self.bias

    def params(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "mean": [float(v) for v in self.mean],
            "scale": [float(v) for v in self.scale],
        }


@dataclass(frozen=True, eq=False)
class GaussianNbModel(_Model):
    n_features: int
    means: np.ndarray  # (2, d): row 0 negative, row 1 positive
    variances: np.ndarray
    priors: np.ndarray  # (2,)
    variant = Variant.GAUSSIAN_NB

    def log_joint(self, X) -> np.ndarray:
        X = self._check(X)
        out = []
        for c in (0, 1):
            var = self.variances[c]
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * var)) - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
            out.append(ll + math.log(self.priors[c]))
        return np.stack(out, axis=1)

    def scores(self, X) -> np.ndarray:
        lj = self.log_joint(X)
        diff = np.clip(lj[:, 0] - lj[:, 1], -700.0, 700.0)
        return 1.0 / (1.0 + np.exp(diff))

    def params(self) -> dict:
        return {
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "priors": [float(p) for p in self.priors],
        }


Model = Union[TreeModel, ForestModel, LinearSvmModel, GaussianNbModel]


# ------------------------------------------------------------------ training


def train_decision_tree(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> TreeModel:
    ds.require_both_classes()
    return TreeModel(ds.n_features, grow_tree(ds.X, ds.y, cfg))


def train_random_forest(
    ds: Dataset, cfg: TrainConfig = TrainConfig(), on_candidates: Optional[CandidateHook] = None
) -> ForestModel:
    """Bagged CART trees; tree i uses a generator seeded with ``cfg.seed + i``."""
    ds.require_both_classes()
    trees = tuple(bootstrap_tree(ds, cfg, i, on_candidates) for i in range(cfg.n_trees))
    return ForestModel(ds.n_features, trees)


def standardize_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return mean, scale


def train_linear_svm(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> LinearSvmModel:
    """L2-regularized hinge loss, stochastic subgradient (Pegasos) with lambda = 1/(C n).

    The bias is learned as the weight of a constant input column. Rows are
    put in canonical order first so only the seed drives the visiting order.
    """
    ds.require_both_classes()
    order = canonical_order(ds.X, ds.y)
    X, y = ds.X[order], np.where(ds.y[order], 1.0, -1.0)
    n, d = X.shape
    mean, scale = standardize_stats(X)
    Z = np.hstack([(X - mean) / scale, np.ones((n, 1))])
    lam = 1.0 / (cfg.C * n)
    radius = 1.0 / math.sqrt(lam)
    w = np.zeros(d + 1)
    rng = np.random.default_rng(cfg.seed)
    t = 0
    for _ in range(cfg.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (Z[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * y[i]) * Z[i]
            norm = math.sqrt(float(w @ w))
            if norm > radius:
                w *= radius / norm
    # zero-variance columns are all-zero after centering, so their weights stay 0
    return LinearSvmModel(d, w[:d].copy(), float(w[d]), mean, scale)


def train_gaussian_nb(ds: Dataset, cfg: TrainConfig = TrainConfig()) -> GaussianNbModel:
    ds.require_both_classes()
    order = canonical_order(ds.X, ds.y)
    X, y = ds.X[order], ds.y[order]
    eps = max(cfg.var_smoothing * float(X.var(axis=0).max()), 1e-12)
    means, variances, priors = [], [], []
    for c in (False, True):
        Xc = X[y == c]
        means.append(Xc.mean(axis=0))
        variances.append(Xc.var(axis=0) + eps)
        priors.append(len(Xc) / len(X))
    return GaussianNbModel(ds.n_features, np.stack(means), np.stack(variances), np.asarray(priors))


# ------------------------------------------------------------------ persistence


def model_to_json(model: Model) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": model.variant.value,
        "n_features": model.n_features,
        "params": model.params(),
    }


def _vec(values, d: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (d,):
        raise ValueError(f"expected vector of length {d}")
    return arr


def model_from_json(data) -> Model:
    if not isinstance(data, dict) or data.get("format") != MODEL_FORMAT:
        raise MalformedModel("not a kitscan model document")
    version = data.get("version")
    if not isinstance(version, int):
        raise MalformedModel("missing or non-integer version")
    if version > MODEL_VERSION:
        raise VersionMismatch(f"model version {version} is newer than supported {MODEL_VERSION}")
    try:
        variant = Variant(data["variant"])
        d = int(data["n_features"])
        p = data["params"]
        if d < 1:
            raise ValueError("n_features must be positive")
        if variant is Variant.TREE:
            return TreeModel(d, TreeNodes.from_json(p["nodes"]))
        if variant is Variant.FOREST:
            trees = tuple(TreeNodes.from_json(t) for t in p["trees"])
            if not trees:
                raise ValueError("forest without trees")
            return ForestModel(d, trees)
        if variant is Variant.LINEAR_SVM:
            return LinearSvmModel(
                d, _vec(p["weights"], d), float(p["bias"]), _vec(p["mean"], d), _vec(p["scale"], d)
            )
        means = np.asarray(p["means"], dtype=np.float64)
        variances = np.asarray(p["variances"], dtype=np.float64)
        priors = np.asarray(p["priors"], dtype=np.float64)
        if means.shape != (2, d) or variances.shape != (2, d) or priors.shape != (2,):
            raise ValueError("bad parameter shapes")
        if (variances <= 0).any() or (priors <= 0).any():
            raise ValueError("non-positive variance or prior")
        return GaussianNbModel(d, means, variances, priors)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MalformedModel(f"invalid model parameters: {exc}") from exc


def save_model(model: Model, destination: os.PathLike | str) -> Path:
    path = Path(destination)
    path.write_text(json.dumps(model_to_json(model), sort_keys=True) + "\n", "utf-8")
    return path


def load_model(source: os.PathLike | str) -> Model:
    text = Path(source).read_text("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"{source}: {exc}") from exc
    return model_from_json(data)


def forest_config(n_trees: int, seed: int = 42) -> TrainConfig:
    """The two forest variants: 10 trees over a third of the features, 100 over the square root."""
    policy = MaxFeatures.THIRD if n_trees == 10 else MaxFeatures.SQRT
    return TrainConfig(seed=seed, n_trees=n_trees, max_features=policy)
