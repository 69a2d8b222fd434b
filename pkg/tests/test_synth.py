import hashlib
from pathlib import Path

import pytest

from kitscan.errors import KitIdMismatch
from kitscan.features import FEATURE_NAMES
from kitscan.scan import KitScan, scan_corpus
from kitscan.synth.corpus import (
    KITS_DIR,
    MANIFEST_NAME,
    TECHNIQUES,
    CorpusSpec,
    ManifestRecord,
    generate_corpus,
    read_manifest,
    verify_against_manifest,
)


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode() + b"\0" + p.read_bytes())
    return h.hexdigest()


def scan_dir(root: Path) -> list[KitScan]:
    out = list(scan_corpus(root / KITS_DIR))
    assert all(isinstance(s, KitScan) for s in out)
    return out


def test_all_probabilities_zero(tmp_path):
    spec = CorpusSpec.uniform(0.0, kit_count=10, near_miss=0.0)
    records = generate_corpus(spec, 1, tmp_path)
    assert len(records) == 10 and all(not r.techniques for r in records)
    assert all(not s.labels.evasive and not s.labels.obfuscated for s in scan_dir(tmp_path))


def test_eval_always_planted(tmp_path):
    plant = dict.fromkeys(TECHNIQUES, 0.0)
    plant["eval"] = 1.0
    records = generate_corpus(CorpusSpec(kit_count=8, plant=plant), 3, tmp_path)
    assert all("eval" in r.techniques for r in records)
    assert all(s.techniques == {"eval"} for s in scan_dir(tmp_path))


def test_deterministic_trees(tmp_path):
    spec = CorpusSpec.uniform(0.4, kit_count=15)
    generate_corpus(spec, 7, tmp_path / "a")
    generate_corpus(spec, 7, tmp_path / "b")
    generate_corpus(spec, 8, tmp_path / "c")
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b") != tree_digest(tmp_path / "c")


def test_manifest_roundtrip_and_expected_counts(tmp_path):
    records = generate_corpus(CorpusSpec.uniform(0.3, kit_count=20), 5, tmp_path)
    assert read_manifest(tmp_path / MANIFEST_NAME) == records
    by_id = {s.kit_id: s for s in scan_dir(tmp_path)}
    for r in records:
        f = by_id[r.kit_id].features
        for key, value in r.expected.items():
            assert f[key] == value, (r.kit_id, key)


def test_near_miss_only_corpus_has_no_false_positives(tmp_path):
    spec = CorpusSpec.uniform(0.0, kit_count=30, near_miss=1.0)
    records = generate_corpus(spec, 2, tmp_path)
    report = verify_against_manifest({s.kit_id: s.techniques for s in scan_dir(tmp_path)}, records)
    assert report.perfect and report.near_miss_only_kits == 30 and report.near_miss_false_positives == 0


def _rec(kit_id, techniques=(), near=()):
    return ManifestRecord(kit_id, tuple(techniques), tuple(near), None, (), {})


def test_verify_accounting():
    manifest = [_rec("a", ["eval"]), _rec("b", near=["hex"])]
    report = verify_against_manifest({"a": {"eval"}, "b": {"hex"}}, manifest)
    assert report.agreement["hex"] == 0.5 and report.agreement["eval"] == 1.0
    assert [(d.kit_id, d.technique) for d in report.disagreements] == [("b", "hex")]
    assert report.near_miss_false_positives == 1


def test_verify_mismatch_and_empty():
    with pytest.raises(KitIdMismatch):
        verify_against_manifest({"a": set()}, [_rec("b")])
    report = verify_against_manifest({}, [])
    assert report.kit_count == 0 and report.perfect


def test_spec_validation():
    with pytest.raises(ValueError):
        CorpusSpec(kit_count=0)
    with pytest.raises(ValueError):
        CorpusSpec.uniform(1.5)
    spec = CorpusSpec.uniform(0.2, kit_count=3)
    assert CorpusSpec.from_json(spec.to_json()) == spec
    assert len(FEATURE_NAMES) == 43
