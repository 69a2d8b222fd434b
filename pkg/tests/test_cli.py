import io
import json
import zipfile
from pathlib import Path

import pytest

from kitscan.cli import main
from kitscan.synth.corpus import KITS_DIR, MANIFEST_NAME


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-corpus", str(root / "c"), "--kits", "40", "--seed", "7"]) == 0
    return root / "c"


def test_gen_corpus_deterministic(tmp_path, corpus, capsys):
    assert main(["gen-corpus", str(tmp_path / "again"), "--kits", "40", "--seed", "7"]) == 0
    assert (tmp_path / "again" / MANIFEST_NAME).read_bytes() == (corpus / MANIFEST_NAME).read_bytes()


def test_scan_clean_kit(tmp_path, capsys):
    kit = tmp_path / "clean"
    kit.mkdir()
    (kit / "index.php").write_text("<?php echo 'hi';")
    assert main(["scan", str(kit)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["is_evasive"] is False and doc["is_obfuscated"] is False and doc["schema_version"] == 1


def test_scan_partial_failure(tmp_path, capsys):
    root = tmp_path / "kits"
    root.mkdir()
    for name in ("a", "b"):
        with zipfile.ZipFile(root / f"{name}.zip", "w") as z:
            z.writestr("index.php", "<?php echo 1;")
    (root / "c.zip").write_bytes(b"PK\x03\x04 not really a zip")
    assert main(["scan", str(root), "--corpus"]) == 2
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert len(lines) == 3 and sum("error" in x for x in lines) == 1


def test_scan_jobs_do_not_change_bytes(tmp_path, corpus):
    kits = str(corpus / KITS_DIR)
    assert main(["scan", kits, "--corpus", "-o", str(tmp_path / "j1.jsonl")]) == 0
    assert main(["scan", kits, "--corpus", "--jobs", "3", "-o", str(tmp_path / "j3.jsonl")]) == 0
    assert (tmp_path / "j1.jsonl").read_bytes() == (tmp_path / "j3.jsonl").read_bytes()


def test_features_and_evaluate(tmp_path, corpus, capsys):
    m = tmp_path / "m.csv"
    assert main(["features", str(corpus / KITS_DIR), "-o", str(m)]) == 0
    assert main(["evaluate", str(m), "--scenario", "s1", "-o", str(tmp_path / "s1.json")]) == 0
    doc = json.loads((tmp_path / "s1.json").read_text())
    assert doc["seed"] == 42 and doc["schema_version"] == 1
    assert list(doc["classifiers"]) == ["LinearSVM", "DecisionTree", "RF10", "RF100", "NaiveBayes"]
    assert (tmp_path / "s1.txt").exists()
    assert main(["evaluate", str(m), "--scenario", "s3", "-o", str(tmp_path / "s3.json")]) == 1
    assert "MissingExclusion" in capsys.readouterr().err
    assert main(["evaluate", str(m), "--scenario", "s3", "--exclude", "eval", "-o", str(tmp_path / "s3.json")]) == 0
    assert len(json.loads((tmp_path / "s3.json").read_text())["classifiers"]) == 5


def test_evaluate_malformed_matrix(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("kit_id,x\n")
    assert main(["evaluate", str(bad), "--scenario", "s1", "-o", str(tmp_path / "r.json")]) == 1


def test_authors(tmp_path, corpus, capsys):
    assert main(["authors", str(corpus / KITS_DIR), "--top", "3", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    counts = [p["kit_count"] for p in doc["profiles"]]
    assert len(counts) <= 3 and counts == sorted(counts, reverse=True)
    empty = tmp_path / "unsigned"
    (empty / "k1").mkdir(parents=True)
    (empty / "k1" / "index.php").write_text("<?php echo 1;")
    assert main(["authors", str(empty)]) == 0


def test_verify_subcommand(corpus, capsys):
    assert main(["verify", str(corpus)]) == 0
    assert json.loads(capsys.readouterr().out)["near_miss_false_positives"] == 0


def test_missing_path_is_fatal(tmp_path):
    assert main(["scan", str(tmp_path / "nope")]) == 1
