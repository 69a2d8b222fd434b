from fractions import Fraction

import numpy as np
import pytest

from kitscan.authors import SignedKit
from kitscan.errors import DegenerateDataset, EmptyTestSet
from kitscan.evaluation import (
    ConfusionCounts,
    Target,
    compute_metrics,
    parse_technique,
    profile_report,
    run_scenario1,
    run_scenario2,
    run_scenario3,
    split_balanced,
)
from kitscan.evasion import EvasionTechnique as E
from kitscan.features import FeatureVector, LabeledSample, Labels
from kitscan.ml import Dataset
from kitscan.obfuscation import ObfuscationTechnique as O


def test_metric_examples():
    m = compute_metrics(ConfusionCounts(tp=10))
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
    m = compute_metrics(ConfusionCounts(tp=3, fp=1, fn=2))
    assert m.precision == 0.75 and m.recall == 0.6 and m.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35, abs=1e-12)
    m = compute_metrics(ConfusionCounts(fn=5))
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)


def test_split_example_counts():
    ds = Dataset(np.zeros((100, 1)), [1] * 40 + [0] * 60)
    train, test = split_balanced(ds, 0.8, 42)
    assert (train.n_positive, train.n_negative, len(test)) == (32, 32, 36)
    assert not set(train.kit_ids) & set(test.kit_ids)
    again, _ = split_balanced(ds, 0.8, 42)
    assert again.kit_ids == train.kit_ids


def test_split_balanced_no_undersampling():
    ds = Dataset(np.zeros((50, 1)), [1] * 25 + [0] * 25)
    train, test = split_balanced(ds, 0.8, 1)
    assert (train.n_positive, train.n_negative, len(test)) == (20, 20, 10)


def test_split_degenerate():
    with pytest.raises(DegenerateDataset):
        split_balanced(Dataset(np.zeros((5, 1)), [1, 0, 0, 0, 0]), 0.2, 1)
    with pytest.raises(DegenerateDataset):
        split_balanced(Dataset(np.zeros((3, 1)), [0, 0, 0]), 0.8, 1)


def _synthetic_samples(n=120, seed=0):
    """Feature 0 tracks evasion, feature 1 tracks obfuscation; techniques cycle."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        ev = frozenset({list(E)[i % 3]}) if i % 2 == 0 else frozenset()
        ob = frozenset({list(O)[i % 5]}) if i % 3 == 0 else frozenset()
        v = rng.integers(0, 2, 43)
        v[0] = int(bool(ev))
        v[1] = int(bool(ob))
        out.append(LabeledSample(f"k{i:03d}", FeatureVector(tuple(int(x) for x in v)), Labels(ev, ob)))
    return out


def test_scenarios_one_and_two():
    samples = _synthetic_samples()
    r1 = run_scenario1(samples, Target.EVASIVE, 7)
    r2 = run_scenario2(samples, Target.EVASIVE, 7)
    assert list(r1.results) == ["LinearSVM", "DecisionTree", "RF10", "RF100", "NaiveBayes"]
    assert r1.results["DecisionTree"].f1 == 1.0
    for r in (r1, r2):
        assert r.splits["train_positive"] == r.splits["train_negative"]
        assert not set(r.train_ids) & set(r.test_ids)
        assert r.to_json()["seed"] == 7 and r.to_json()["schema_version"] == 1
    assert r1.splits["train_positive"] > r2.splits["train_positive"]
    assert "RF100" in r1.to_table()


def test_scenario_three():
    samples = _synthetic_samples()
    r = run_scenario3(samples, E.ROBOTS_TXT, 3, classifiers=["DecisionTree", "NaiveBayes"])
    robots = {s.kit_id for s in samples if E.ROBOTS_TXT in s.labels.evasion_techniques}
    assert set(r.test_ids) == robots and not robots & set(r.train_ids)
    assert r.results["DecisionTree"].rate == 1.0 and r.target is Target.EVASIVE
    assert r.to_json()["excluded"] == "robots_txt"
    empty = [s for s in samples if O.OBFUSCATOR not in s.labels.obfuscation_techniques]
    with pytest.raises(EmptyTestSet):
        run_scenario3(empty, O.OBFUSCATOR, 3)


def test_scenario_three_retain_mode():
    samples = _synthetic_samples()
    r = run_scenario3(samples, O.EVAL, 3, classifiers=["DecisionTree"], retain_cooccurring=True)
    assert r.splits["retain_cooccurring"] is True and r.results["DecisionTree"].tested > 0


def test_parse_technique():
    assert parse_technique("eval") is O.EVAL
    assert parse_technique("robots.txt") is E.ROBOTS_TXT
    assert parse_technique("URL_DECODE") is O.URLDECODE
    with pytest.raises(ValueError):
        parse_technique("magic")


def test_profile_report_ties_and_empty():
    kits = [SignedKit("1", ("bravo",), True, False), SignedKit("2", ("alpha",), False, False),
            SignedKit("3", ("charlie",), False, False), SignedKit("4", ("charlie",), False, False)]
    assert [p.name for p in profile_report(kits, 2)] == ["charlie", "alpha"]
    assert profile_report([], 5) == []


def _fraction_metrics(tp, fp, fn):
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    return p, r, f


def test_metric_bounds_fuzz():
    rng = np.random.default_rng(11)
    for _ in range(200):
        tp, fp, fn, tn = (int(v) for v in rng.integers(0, 6, 4))
        m = compute_metrics(ConfusionCounts(tp, fp, fn, tn))
        p, r, f = _fraction_metrics(tp, fp, fn)
        assert abs(m.precision - float(p)) <= 1e-12 and abs(m.recall - float(r)) <= 1e-12
        assert abs(m.f1 - float(f)) <= 1e-12 and 0 <= m.f1 <= 1
        if m.precision and m.recall:
            assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12
