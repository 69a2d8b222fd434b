from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..errors import DegenerateDataset


class MaxFeatures(str, Enum):
    ALL = "all"
    THIRD = "third"
    SQRT = "sqrt"


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 42
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    n_trees: int = 100
    max_features: MaxFeatures = MaxFeatures.SQRT
    C: float = 1.0
    epochs: int = 100
    var_smoothing: float = 1e-9

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.C <= 0:
            raise ValueError("C must be positive")


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()
    kit_ids: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        y = np.asarray(self.y).astype(bool)
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} targets")
        kit_ids = tuple(self.kit_ids) or tuple(str(i) for i in range(X.shape[0]))
        if len(kit_ids) != X.shape[0]:
            raise ValueError("kit_ids length does not match row count")
        if len(set(kit_ids)) != len(kit_ids):
            raise ValueError("duplicate kit_id in dataset")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError("feature_names length does not match column count")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "kit_ids", kit_ids)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_positive(self) -> int:
        return int(self.y.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.y[rows], self.feature_names, tuple(self.kit_ids[i] for i in rows))

    def with_targets(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.X, y, self.feature_names, self.kit_ids)

    def require_both_classes(self) -> None:
        if self.n_positive == 0 or self.n_negative == 0:
            raise DegenerateDataset(
                f"need both classes, got {self.n_positive} positive / {self.n_negative} negative"
            )


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation that sorts samples by (features..., target); used to make training order-free."""
    keys = [y.astype(np.float64)] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)
