"""Metrics, balanced splits, and the three evaluation scenarios."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .authors import AuthorProfile, SignedKit, build_author_profiles
from .errors import DegenerateDataset, EmptyTestSet
from .evasion import EvasionTechnique
from .features import FEATURE_NAMES, LabeledSample, Labels
from .ml import (
    Dataset,
    Model,
    TrainConfig,
    forest_config,
    train_decision_tree,
    train_gaussian_nb,
    train_linear_svm,
    train_random_forest,
)
from .obfuscation import ObfuscationTechnique

REPORT_SCHEMA_VERSION = 1

Technique = Union[EvasionTechnique, ObfuscationTechnique]


class Target(str, Enum):
    EVASIVE = "evasive"
    OBFUSCATED = "obfuscated"


class Scenario(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, truth: Sequence[bool], predicted: Sequence[bool]) -> "ConfusionCounts":
        t = np.asarray(truth, dtype=bool)
        p = np.asarray(predicted, dtype=bool)
        return cls(int((t & p).sum()), int((~t & p).sum()), int((t & ~p).sum()), int((~t & ~p).sum()))

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "counts": self.counts.to_json()}


def compute_metrics(counts: ConfusionCounts) -> MetricsReport:
    """Precision, recall and F1; a zero denominator gives 0 for that metric."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return MetricsReport(p, r, f1, counts)


# ------------------------------------------------------------------ datasets


def target_of(technique: Technique) -> Target:
    return Target.EVASIVE if isinstance(technique, EvasionTechnique) else Target.OBFUSCATED


def parse_technique(name: str) -> Technique:
    key = name.strip().lower().replace("-", "_").replace(".", "")
    aliases = {"robots": "robots_txt", "robotstxt": "robots_txt", "url_decode": "urldecode", "php_evasion": "php"}
    key = aliases.get(key, key)
    for enum in (EvasionTechnique, ObfuscationTechnique):
        for t in enum:
            if t.value == key:
                return t
    raise ValueError(f"unknown technique {name!r}")


def label_value(labels: Labels, target: Target, ignore: Optional[Technique] = None) -> bool:
    techniques = labels.evasion_techniques if target is Target.EVASIVE else labels.obfuscation_techniques
    return any(t != ignore for t in techniques)


def build_dataset(
    samples: Sequence[LabeledSample], target: Target, ignore: Optional[Technique] = None
) -> Dataset:
    ordered = sorted(samples, key=lambda s: s.kit_id)
    X = np.array([s.features.values for s in ordered], dtype=np.float64).reshape(len(ordered), len(FEATURE_NAMES))
    y = np.array([label_value(s.labels, target, ignore) for s in ordered], dtype=bool)
    return Dataset(X, y, FEATURE_NAMES, tuple(s.kit_id for s in ordered))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


def split_balanced(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified seeded draw of the training pool, then undersample its majority class.

    Every sample not in the (balanced) training set is in the test set.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must be in (0, 1]")
    ds.require_both_classes()
    rng = np.random.default_rng(seed)
    pools = []
    for cls in (False, True):
        idx = np.flatnonzero(ds.y == cls)
        take = _round_half_up(train_fraction * len(idx))
        pools.append(np.sort(rng.permutation(idx)[:take]))
    k = min(len(p) for p in pools)
    if k == 0:
        raise DegenerateDataset("training pool lacks one class at this fraction")
    train = np.sort(np.concatenate([p if len(p) == k else np.sort(rng.choice(p, k, replace=False)) for p in pools]))
    test = np.setdiff1d(np.arange(len(ds)), train)
    return ds.subset(train), ds.subset(test)


# ------------------------------------------------------------------ classifiers

Trainer = Callable[[Dataset, int], Model]

CLASSIFIERS: dict[str, Trainer] = {
    "LinearSVM": lambda ds, seed: train_linear_svm(ds, TrainConfig(seed=seed)),
    "DecisionTree": lambda ds, seed: train_decision_tree(ds, TrainConfig(seed=seed)),
    "RF10": lambda ds, seed: train_random_forest(ds, forest_config(10, seed)),
    "RF100": lambda ds, seed: train_random_forest(ds, forest_config(100, seed)),
    "NaiveBayes": lambda ds, seed: train_gaussian_nb(ds, TrainConfig(seed=seed)),
}
CLASSIFIER_ORDER = tuple(CLASSIFIERS)


def _check_classifiers(classifiers: Iterable[str]) -> tuple[str, ...]:
    chosen = set(classifiers)
    unknown = chosen - set(CLASSIFIERS)
    if unknown:
        raise ValueError(f"unknown classifiers: {sorted(unknown)}")
    return tuple(c for c in CLASSIFIER_ORDER if c in chosen)


# ------------------------------------------------------------------ scenarios


@dataclass(frozen=True)
class DetectionRate:
    detected: int
    tested: int

    @property
    def rate(self) -> float:
        return self.detected / self.tested if self.tested else 0.0

    def to_json(self) -> dict:
        return {"detection_rate": self.rate, "detected": self.detected, "tested": self.tested}


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    target: Target
    seed: int
    splits: dict
    results: dict[str, Union[MetricsReport, DetectionRate]]
    excluded: Optional[Technique] = None
    train_ids: tuple[str, ...] = field(default=(), repr=False)
    test_ids: tuple[str, ...] = field(default=(), repr=False)

    def to_json(self) -> dict:
        doc = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "scenario": self.scenario.value,
            "target": self.target.value,
            "seed": self.seed,
            "splits": self.splits,
            "classifiers": {name: r.to_json() for name, r in self.results.items()},
        }
        if self.excluded is not None:
            doc["excluded"] = self.excluded.value
        return doc

    def to_table(self) -> str:
        head = f"Scenario {self.scenario.value[1]}  target={self.target.value}  seed={self.seed}"
        if self.excluded is not None:
            head += f"  excluded={self.excluded.value}"
            rows = [("Classifier", "Detection rate", "Detected", "Tested")]
            rows += [(n, f"{r.rate:.3f}", str(r.detected), str(r.tested)) for n, r in self.results.items()]
        else:
            rows = [("Classifier", "Precision", "Recall", "F1")]
            rows += [(n, f"{r.precision:.3f}", f"{r.recall:.3f}", f"{r.f1:.3f}") for n, r in self.results.items()]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = [head]
        for i, row in enumerate(rows):
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def _law(ok: bool, message: str) -> None:
    # explicit raise so the check survives python -O
    if not ok:
        raise AssertionError(message)


def _split_counts(train: Dataset, test: Dataset) -> dict:
    return {
        "train_positive": train.n_positive,
        "train_negative": train.n_negative,
        "test_positive": test.n_positive,
        "test_negative": test.n_negative,
    }


def _run_split_scenario(
    scenario: Scenario,
    fraction: float,
    samples: Sequence[LabeledSample],
    target: Target,
    seed: int,
    classifiers: Iterable[str],
) -> ScenarioResult:
    ds = build_dataset(samples, target)
    train, test = split_balanced(ds, fraction, seed)
    # harness laws: balanced training set, disjoint partitions
    _law(train.n_positive == train.n_negative, "training set is not balanced")
    _law(not set(train.kit_ids) & set(test.kit_ids), "train/test kit_ids overlap")
    if len(test) == 0:
        raise EmptyTestSet("no samples left for testing")
    results = {}
    for name in _check_classifiers(classifiers):
        model = CLASSIFIERS[name](train, seed)
        counts = ConfusionCounts.from_predictions(test.y, model.predict_many(test.X))
        results[name] = compute_metrics(counts)
    return ScenarioResult(
        scenario, target, seed, _split_counts(train, test), results,
        train_ids=train.kit_ids, test_ids=test.kit_ids,
    )


def run_scenario1(
    samples: Sequence[LabeledSample], target: Target, seed: int = 42, classifiers: Iterable[str] = CLASSIFIER_ORDER
) -> ScenarioResult:
    """Balanced 80% training split, natural-distribution test on the rest."""
    return _run_split_scenario(Scenario.S1, 0.8, samples, target, seed, classifiers)


def run_scenario2(
    samples: Sequence[LabeledSample], target: Target, seed: int = 42, classifiers: Iterable[str] = CLASSIFIER_ORDER
) -> ScenarioResult:
    """Balanced 20% training split, natural-distribution test on the rest."""
    return _run_split_scenario(Scenario.S2, 0.2, samples, target, seed, classifiers)


def run_scenario3(
    samples: Sequence[LabeledSample],
    excluded: Technique,
    seed: int = 42,
    classifiers: Iterable[str] = CLASSIFIER_ORDER,
    retain_cooccurring: bool = False,
) -> ScenarioResult:
    """Leave one technique out: train without it, report the fraction of its kits detected.

    By default every kit bearing the excluded technique is a test kit. With
    ``retain_cooccurring`` only kits whose sole technique (within the target
    family) is the excluded one are tested; kits combining it with others
    stay in training, labeled as if the excluded technique were absent.
    """
    target = target_of(excluded)
    ordered = sorted(samples, key=lambda s: s.kit_id)

    def is_test(s: LabeledSample) -> bool:
        if not s.labels.has(excluded):
            return False
        return not retain_cooccurring or not label_value(s.labels, target, ignore=excluded)

    test_samples = [s for s in ordered if is_test(s)]
    if not test_samples:
        raise EmptyTestSet(f"no kit uses technique {excluded.value}")
    pool = [s for s in ordered if not is_test(s)]
    pool_ds = build_dataset(pool, target, ignore=excluded)
    train, _ = split_balanced(pool_ds, 1.0, seed)
    test = build_dataset(test_samples, target)

    train_ids = set(train.kit_ids)
    _law(not train_ids & set(test.kit_ids), "train/test kit_ids overlap")
    if not retain_cooccurring:
        leaked = [s.kit_id for s in ordered if s.kit_id in train_ids and s.labels.has(excluded)]
        _law(not leaked, f"excluded-technique kits in training: {leaked[:5]}")

    results = {}
    for name in _check_classifiers(classifiers):
        model = CLASSIFIERS[name](train, seed)
        results[name] = DetectionRate(int(model.predict_many(test.X).sum()), len(test))
    splits = {
        "train_positive": train.n_positive,
        "train_negative": train.n_negative,
        "test_kits": len(test),
        "retain_cooccurring": retain_cooccurring,
    }
    return ScenarioResult(
        Scenario.S3, target, seed, splits, results, excluded,
        train_ids=train.kit_ids, test_ids=test.kit_ids,
    )


def write_report(result: ScenarioResult, json_path: Path | str, table_path: Optional[Path | str] = None) -> None:
    Path(json_path).write_text(json.dumps(result.to_json(), indent=2) + "\n", "utf-8")
    if table_path is not None:
        Path(table_path).write_text(result.to_table(), "utf-8")


# ------------------------------------------------------------------ authors


def profile_report(
    kits: Iterable[SignedKit],
    top_n: Optional[int] = None,
    allowlist: Iterable[str] = (),
    denylist: Iterable[str] = (),
) -> list[AuthorProfile]:
    profiles = build_author_profiles(kits, allowlist, denylist)
    return profiles if top_n is None else profiles[: max(top_n, 0)]


def profile_table(profiles: Sequence[AuthorProfile]) -> str:
    rows = [("Signature", "Kits", "Evasive", "Obfuscated")]
    rows += [(p.name, str(p.kit_count), str(p.evasive_count), str(p.obfuscated_count)) for p in profiles]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = []
    for i, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
