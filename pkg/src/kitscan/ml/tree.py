"""CART decision trees (Gini) and bagged random forests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dataset import Dataset, MaxFeatures, TrainConfig

# called with the sorted candidate feature indices drawn at each split
CandidateHook = Callable[[np.ndarray], None]


@dataclass(frozen=True, eq=False)
class TreeNodes:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2): negatives, positives

    @property
    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] < 0:
                best = max(best, d)
            else:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            r, n, f = rows[active], node[active], feat[active]
            go_left = X[r, f] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])

    def positive_fraction(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaf_index(X)]
        return c[:, 1] / (c[:, 0] + c[:, 1])

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TreeNodes":
        nodes = cls(
            np.asarray(data["feature"], dtype=np.int64),
            np.asarray(data["threshold"], dtype=np.float64),
            np.asarray(data["left"], dtype=np.int64),
            np.asarray(data["right"], dtype=np.int64),
            np.asarray(data["counts"], dtype=np.int64).reshape(-1, 2),
        )
        n = len(nodes.feature)
        if n == 0 or not (len(nodes.threshold) == len(nodes.left) == len(nodes.right) == len(nodes.counts) == n):
            raise ValueError("inconsistent node arrays")
        inner = nodes.feature >= 0
        kids = np.concatenate([nodes.left[inner], nodes.right[inner]])
        if kids.size and (kids.min() <= 0 or kids.max() >= n):
            raise ValueError("child index out of range")
        if (nodes.counts[~inner].sum(axis=1) <= 0).any():
            raise ValueError("empty leaf")
        return nodes


def candidate_count(d: int, policy: MaxFeatures) -> int:
    if policy is MaxFeatures.THIRD:
        return max(1, math.ceil(d / 3))
    if policy is MaxFeatures.SQRT:
        return max(1, math.isqrt(d))
    return d


def best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray) -> Optional[tuple[int, float]]:
    """Lowest-Gini split over ``features`` (ascending); ties go to lowest feature then threshold.

    Scores are computed as the ratio of two exact integers so equal Gini
    values compare equal in floating point.
    """
    n = X.shape[0]
    if n < 2 or features.size == 0:
        return None
    cols = X[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    vals = np.take_along_axis(cols, order, axis=0)
    pos = np.cumsum(y[order].astype(np.int64), axis=0)[:-1]  # positives left of each cut
    n_left = np.arange(1, n, dtype=np.int64)[:, None]
    n_right = n - n_left
    total_pos = int(y.sum())
    neg = n_left - pos
    pos_r = total_pos - pos
    neg_r = n_right - pos_r
    num = (pos * pos + neg * neg) * n_right + (pos_r * pos_r + neg_r * neg_r) * n_left
    score = num / (n_left * n_right)
    valid = vals[1:] > vals[:-1]
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = np.argmax(score.T)  # row-major over (feature, cut)
    fi, cut = divmod(int(flat), n - 1)
    threshold = (vals[cut, fi] + vals[cut + 1, fi]) / 2.0
    return int(features[fi]), float(threshold)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    n_candidates: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    on_candidates: Optional[CandidateHook] = None,
) -> TreeNodes:
    """Grow one CART tree. With ``n_candidates`` < d each split draws a random feature subset from ``rng``."""
    d = X.shape[1]
    all_features = np.arange(d)
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(rows: np.ndarray) -> int:
        p = int(y[rows].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((len(rows) - p, p))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        neg, pos = counts[node]
        if neg == 0 or pos == 0 or len(rows) < cfg.min_samples_split:
            continue
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            continue
        if n_candidates is not None and n_candidates < d:
            cand = np.sort(rng.choice(d, n_candidates, replace=False))
        else:
            cand = all_features
        if on_candidates is not None:
            on_candidates(cand)
        split = best_split(X[rows], y[rows], cand)
        if split is None:
            continue
        f, t = split
        go_left = X[rows, f] <= t
        lo, hi = rows[go_left], rows[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(lo)
        right[node] = new_node(hi)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], hi, depth + 1))
        stack.append((left[node], lo, depth + 1))

    return TreeNodes(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts, dtype=np.int64).reshape(-1, 2),
    )


def bootstrap_tree(
    ds: Dataset, cfg: TrainConfig, tree_index: int, on_candidates: Optional[CandidateHook] = None
) -> TreeNodes:
    rng = np.random.default_rng(cfg.seed + tree_index)
    n = len(ds)
    rows = rng.integers(0, n, n)
    k = candidate_count(ds.n_features, cfg.max_features)
    return grow_tree(ds.X[rows], ds.y[rows], cfg, k, rng, on_candidates)
