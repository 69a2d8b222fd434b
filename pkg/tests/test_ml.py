import json

import numpy as np
import pytest

from kitscan.errors import DegenerateDataset, DimensionMismatch, MalformedModel, VersionMismatch
from kitscan.ml import (
    Dataset,
    ForestModel,
    MaxFeatures,
    TrainConfig,
    candidate_count,
    forest_config,
    load_model,
    save_model,
    train_decision_tree,
    train_gaussian_nb,
    train_linear_svm,
    train_random_forest,
)
from kitscan.ml.tree import TreeNodes, bootstrap_tree, grow_tree


def test_single_split():
    m = train_decision_tree(Dataset([[0.0], [1.0]], [0, 1]))
    assert m.nodes.feature[0] == 0 and m.nodes.threshold[0] == 0.5
    assert list(m.predict_many([[0.0], [1.0]])) == [False, True]


def test_identical_rows_tie_goes_positive():
    m = train_decision_tree(Dataset([[1.0, 2.0]] * 4, [0, 1, 0, 1]))
    assert len(m.nodes.feature) == 1 and m.predict([1.0, 2.0])
    m = train_decision_tree(Dataset([[1.0]] * 3, [0, 0, 1]))
    assert not m.predict([1.0])


def test_xor_depth_two():
    X = [[0, 0], [0, 1], [1, 0], [1, 1]]
    y = [0, 1, 1, 0]
    m = train_decision_tree(Dataset(X, y))
    assert m.nodes.depth == 2
    assert list(m.predict_many(X)) == [bool(v) for v in y]


def test_tie_break_lowest_feature():
    # features 0 and 1 are identical copies: the split must use feature 0
    X = [[0, 0], [1, 1], [2, 2], [3, 3]]
    m = train_decision_tree(Dataset(X, [0, 0, 1, 1]))
    assert m.nodes.feature[0] == 0 and m.nodes.threshold[0] == 1.5


def test_max_depth_and_min_split():
    rng = np.random.default_rng(3)
    X = rng.random((60, 4))
    y = X[:, 0] + rng.random(60) * 0.5 > 0.7
    assert train_decision_tree(Dataset(X, y), TrainConfig(max_depth=1)).nodes.depth <= 1
    deep = train_decision_tree(Dataset(X, y))
    assert (deep.predict_many(X) == y).all()  # distinct rows, unlimited depth
    shallow = train_decision_tree(Dataset(X, y), TrainConfig(min_samples_split=60))
    assert len(shallow.nodes.feature) == 3


def test_degenerate_dataset():
    for train in (train_decision_tree, train_random_forest, train_linear_svm, train_gaussian_nb):
        with pytest.raises(DegenerateDataset):
            train(Dataset([[0.0], [1.0]], [1, 1]))


def test_candidate_counts():
    assert candidate_count(43, MaxFeatures.THIRD) == 15
    assert candidate_count(43, MaxFeatures.SQRT) == 6
    assert candidate_count(43, MaxFeatures.ALL) == 43
    assert forest_config(10).max_features is MaxFeatures.THIRD
    assert forest_config(100).max_features is MaxFeatures.SQRT


def test_forest_vote_arithmetic():
    leaf_pos = TreeNodes(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([[0, 1]]))
    leaf_neg = TreeNodes(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([[1, 0]]))
    f = ForestModel(2, (leaf_pos,) * 7 + (leaf_neg,) * 3)
    assert f.predict_score([0, 0]) == 0.7 and f.predict([0, 0])
    f = ForestModel(2, (leaf_pos,) * 5 + (leaf_neg,) * 5)
    assert f.predict([0, 0])  # vote tie goes positive


def _blobs(n=80, d=5, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2 == 0
    X = rng.normal(size=(n, d)) + np.where(y[:, None], 3.0, -3.0)
    return Dataset(X, y)


def test_forest_determinism_and_single_tree_equivalence():
    ds = _blobs()
    cfg = TrainConfig(seed=5, n_trees=1, max_features=MaxFeatures.ALL)
    f = train_random_forest(ds, cfg)
    rng = np.random.default_rng(5)
    rows = rng.integers(0, len(ds), len(ds))
    plain = grow_tree(ds.X[rows], ds.y[rows], cfg)
    assert f.trees[0].to_json() == plain.to_json()
    a = train_random_forest(ds, forest_config(10, 9))
    b = train_random_forest(ds, forest_config(10, 9))
    assert [t.to_json() for t in a.trees] == [t.to_json() for t in b.trees]


def test_bootstrap_tree_seeding():
    ds = _blobs()
    cfg = forest_config(10, 1)
    assert bootstrap_tree(ds, cfg, 3).to_json() == bootstrap_tree(ds, cfg.__class__(seed=2, n_trees=10,
                                                                                     max_features=cfg.max_features), 2).to_json()


def test_svm_separable_and_constant_column():
    ds = _blobs()
    X = np.hstack([ds.X, np.full((len(ds), 1), 7.0)])
    m = train_linear_svm(Dataset(X, ds.y))
    assert (m.predict_many(X) == ds.y).all()
    assert m.weights[-1] == 0.0
    again = train_linear_svm(Dataset(X, ds.y))
    assert np.array_equal(m.weights, again.weights) and m.bias == again.bias


def test_svm_and_nb_order_invariant():
    ds = _blobs(seed=4)
    perm = np.random.default_rng(1).permutation(len(ds))
    shuffled = Dataset(ds.X[perm], ds.y[perm])
    a, b = train_linear_svm(ds), train_linear_svm(shuffled)
    assert np.array_equal(a.weights, b.weights)
    a, b = train_gaussian_nb(ds), train_gaussian_nb(shuffled)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.variances, b.variances)


def test_nb_midpoint_boundary():
    X = np.array([[-2.0], [-1.0], [0.0], [4.0], [5.0], [6.0]])
    m = train_gaussian_nb(Dataset(X, [0, 0, 0, 1, 1, 1]))
    assert m.predict_score([2.0]) == pytest.approx(0.5)
    assert m.predict([2.0]) and not m.predict([1.9]) and m.predict([2.1])


def test_nb_priors_and_constant_feature():
    X = np.array([[-1.0]] * 9 + [[1.0]] * 9 + [[-1.0]] + [[1.0]])
    y = [0] * 9 + [0] * 9 + [1, 1]
    m = train_gaussian_nb(Dataset(X, y))
    assert not m.predict([0.0])  # symmetric likelihoods, prior 0.9 negative
    const = train_gaussian_nb(Dataset([[1.0]] * 4, [0, 0, 0, 1]))
    assert np.isfinite(const.predict_score([1.0])) and not const.predict([1.0])


def test_dimension_mismatch():
    m = train_decision_tree(_blobs())
    with pytest.raises(DimensionMismatch):
        m.predict([1.0, 2.0])


def test_persistence_errors(tmp_path):
    m = train_gaussian_nb(_blobs())
    path = save_model(m, tmp_path / "m.json")
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(MalformedModel):
        load_model(path)
    doc = json.loads(text)
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(VersionMismatch):
        load_model(path)
    doc["version"] = 1
    doc["params"]["priors"] = [0.5]
    path.write_text(json.dumps(doc))
    with pytest.raises(MalformedModel):
        load_model(path)
