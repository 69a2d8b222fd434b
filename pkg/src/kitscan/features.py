"""The 43-feature kit representation, labels, and the feature-matrix CSV."""

from __future__ import annotations

import csv
import io
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .config import ScanConfig
from .errors import MalformedMatrix
from .evasion import EvasionReport, EvasionTechnique, hostname_array, ip_array
from .ingest import NESTED_SEPARATOR, FileKind, KitArchive
from .obfuscation import ObfuscationReport, ObfuscationTechnique
from .php_lexer import SUPERGLOBALS, PhpAnalysisBundle

FEATURE_SCHEMA_VERSION = 1

COUNT_FEATURES = (
    "nFiles", "nDir", "nPhp", "nJs", "nTxt", "nExe", "nDll", "nApk",
    "nHtml", "nCss", "nPdf", "nMul", "Otherfiles",
)
FEATURE_NAMES: tuple[str, ...] = COUNT_FEATURES + (
    "htaccess", "robots_txt", "admin", "config",
    "wordpress", "laravel", "code_ign", "zend", "httrack",
    "api_call", "array_hostnames", "array_ipaddresses", "form_validation", "deceiving_url",
    "deceiving_zipname", "read_file", "redirection", "random_file", "random_dir",
) + SUPERGLOBALS + ("mail", "bot_telegram", "write")

assert len(FEATURE_NAMES) == 43

_KIND_COLUMNS = {
    FileKind.PHP: "nPhp", FileKind.JS: "nJs", FileKind.TXT: "nTxt", FileKind.EXE: "nExe",
    FileKind.DLL: "nDll", FileKind.APK: "nApk", FileKind.HTML: "nHtml", FileKind.CSS: "nCss",
    FileKind.PDF: "nPdf", FileKind.MULTIMEDIA: "nMul", FileKind.OTHER: "Otherfiles",
}

TECHNIQUE_COLUMNS = tuple(f"ev_{t.value}" for t in EvasionTechnique) + tuple(
    f"ob_{t.value}" for t in ObfuscationTechnique
)
MATRIX_COLUMNS = ("kit_id",) + FEATURE_NAMES + ("evasive", "obfuscated") + TECHNIQUE_COLUMNS


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {len(self.values)}")

    def __getitem__(self, name: str) -> int:
        return self.values[FEATURE_NAMES.index(name)]

    def as_dict(self) -> dict[str, int]:
        return dict(zip(FEATURE_NAMES, self.values))


@dataclass(frozen=True)
class Labels:
    evasion_techniques: frozenset[EvasionTechnique] = frozenset()
    obfuscation_techniques: frozenset[ObfuscationTechnique] = frozenset()

    @property
    def evasive(self) -> bool:
        return bool(self.evasion_techniques)

    @property
    def obfuscated(self) -> bool:
        return bool(self.obfuscation_techniques)

    def has(self, technique: EvasionTechnique | ObfuscationTechnique) -> bool:
        return technique in self.evasion_techniques or technique in self.obfuscation_techniques

    def technique_flags(self) -> tuple[int, ...]:
        return tuple(int(t in self.evasion_techniques) for t in EvasionTechnique) + tuple(
            int(t in self.obfuscation_techniques) for t in ObfuscationTechnique
        )


@dataclass(frozen=True)
class LabeledSample:
    kit_id: str
    features: FeatureVector
    labels: Labels
    signatures: tuple[str, ...] = field(default=())


def label_kit(evasion: EvasionReport, obfuscation: ObfuscationReport) -> Labels:
    return Labels(evasion.techniques, obfuscation.techniques)


# ------------------------------------------------------------------ extraction


def _components(path: str) -> list[str]:
    return [c for c in re.split(r"[/" + NESTED_SEPARATOR + "]", path) if c]


def _dir_components(path: str) -> list[str]:
    return _components(path)[:-1]


def _window_has(bundle: PhpAnalysisBundle, statement: int, names: Iterable[str]) -> bool:
    wanted = set(names)
    return any(c.callee in wanted for c in bundle.calls_in_statement(statement))


def _mode(call) -> str:
    return (call.args[1] or "").lower() if len(call.args) > 1 and call.args[1] is not None else ""


def extract_features(
    kit: KitArchive, bundle: PhpAnalysisBundle, config: Optional[ScanConfig] = None
) -> FeatureVector:
    config = config or ScanConfig()
    f: dict[str, int] = dict.fromkeys(FEATURE_NAMES, 0)

    f["nFiles"] = len(kit.entries)
    f["nDir"] = kit.directory_count
    for kind, n in kit.kind_counts().items():
        f[_KIND_COLUMNS[kind]] = n

    paths = [e.relative_path for e in kit.entries]
    basenames = [e.basename.lower() for e in kit.entries]
    components = [[c.lower() for c in _components(p)] for p in paths]
    dir_components = {c.lower() for p in paths for c in _dir_components(p)}

    f["htaccess"] = int(".htaccess" in basenames)
    f["robots_txt"] = int("robots.txt" in basenames)
    f["admin"] = int(any("admin" in cs for cs in components))
    f["config"] = int(any("config" in c for cs in components for c in cs))

    php_texts = [e.text for e in kit.of_kind(FileKind.PHP)]
    web_texts = php_texts + [e.text for e in kit.of_kind(FileKind.HTML, FileKind.JS)]
    f["wordpress"] = int(
        "wp-config.php" in basenames
        or "wp-content" in dir_components
        or any(re.search(r"content=[\"']WordPress", t) for t in web_texts)
    )
    f["laravel"] = int("artisan" in basenames or any("Laravel" in t for t in php_texts))
    f["code_ign"] = int(
        any("CodeIgniter" in t for t in php_texts)
        or any("/system/core/" in "/" + p.lower() for p in paths)
    )
    f["zend"] = int(any("Zend Framework" in t for t in web_texts) or "zend" in dir_components)
    f["httrack"] = int(any("Mirrored from" in t and "HTTrack" in t for t in web_texts))

    f["api_call"] = int(
        bool(bundle.calls("curl_init", "curl_exec", "fsockopen"))
        or any("http" in s.lower() for c in bundle.calls("file_get_contents") for s in c.arg_literals)
    )
    f["array_ipaddresses"] = int(any(ip_array(a, 1) for a in bundle.string_arrays))
    f["array_hostnames"] = int(any(hostname_array(a, 1, config.watchlist) for a in bundle.string_arrays))
    f["form_validation"] = int(
        any(bundle.statement_superglobals.get(c.statement) for c in bundle.calls("filter_var", "preg_match"))
    )

    top_dirs = {cs[0] for cs in components if len(cs) > 1}
    f["deceiving_url"] = int(any(b in d for b in config.brands for d in top_dirs))
    f["deceiving_zipname"] = int(any(b in kit.origin_name.lower() for b in config.brands))

    f["read_file"] = int(
        bool(bundle.calls("file_get_contents", "fread", "readfile"))
        or any(_mode(c).startswith("r") for c in bundle.calls("fopen"))
    )
    f["write"] = int(
        bool(bundle.calls("fwrite", "fputs", "file_put_contents"))
        or any(_mode(c).startswith(("w", "a")) for c in bundle.calls("fopen"))
    )
    f["redirection"] = int(
        any(s.lstrip().lower().startswith("location:") for c in bundle.calls("header") for s in c.arg_literals)
    )
    randomizers = ("rand", "mt_rand", "uniqid", "md5")
    f["random_file"] = int(
        any(_window_has(bundle, c.statement, randomizers) for c in bundle.calls("fopen", "file_put_contents"))
    )
    f["random_dir"] = int(any(_window_has(bundle, c.statement, randomizers) for c in bundle.calls("mkdir")))

    for g in SUPERGLOBALS:
        f[g] = int(g in bundle.superglobals_used)
    f["mail"] = int(bool(bundle.calls("mail")))
    text_kinds = (FileKind.PHP, FileKind.JS, FileKind.HTML, FileKind.TXT)
    f["bot_telegram"] = int(any("api.telegram.org/bot" in e.text.lower() for e in kit.of_kind(*text_kinds)))

    return FeatureVector(tuple(f[n] for n in FEATURE_NAMES))


# ------------------------------------------------------------------ CSV


def matrix_rows(samples: Iterable[LabeledSample]) -> list[list[str]]:
    rows = []
    for s in sorted(samples, key=lambda s: s.kit_id):
        rows.append(
            [s.kit_id]
            + [str(int(v)) for v in s.features.values]
            + [str(int(s.labels.evasive)), str(int(s.labels.obfuscated))]
            + [str(v) for v in s.labels.technique_flags()]
        )
    return rows


def export_matrix(samples: Sequence[LabeledSample], destination: os.PathLike | str) -> Path:
    """Write samples as CSV (header + one row per kit, sorted by kit_id)."""
    if not samples:
        raise ValueError("no samples to export")
    ids = [s.kit_id for s in samples]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate kit_id in samples")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MATRIX_COLUMNS)
    w.writerows(matrix_rows(samples))
    path = Path(destination)
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path


def read_matrix(source: os.PathLike | str) -> list[LabeledSample]:
    """Parse a feature-matrix CSV back into samples (signatures are not stored)."""
    text = Path(source).read_text("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedMatrix(f"{source}: empty file") from None
    if tuple(header) != MATRIX_COLUMNS:
        raise MalformedMatrix(f"{source}: unexpected header")
    n_feat = len(FEATURE_NAMES)
    samples = []
    seen = set()
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != len(MATRIX_COLUMNS):
            raise MalformedMatrix(f"{source}:{lineno}: expected {len(MATRIX_COLUMNS)} columns, got {len(row)}")
        try:
            nums = [int(x) for x in row[1:]]
        except ValueError as exc:
            raise MalformedMatrix(f"{source}:{lineno}: {exc}") from exc
        if any(v < 0 for v in nums):
            raise MalformedMatrix(f"{source}:{lineno}: negative value")
        kit_id = row[0]
        if kit_id in seen:
            raise MalformedMatrix(f"{source}:{lineno}: duplicate kit_id {kit_id!r}")
        seen.add(kit_id)
        feats = nums[:n_feat]
        evasive, obfuscated = nums[n_feat], nums[n_feat + 1]
        tech = nums[n_feat + 2:]
        ev = frozenset(t for t, v in zip(EvasionTechnique, tech[:3]) if v)
        ob = frozenset(t for t, v in zip(ObfuscationTechnique, tech[3:]) if v)
        labels = Labels(ev, ob)
        if labels.evasive != bool(evasive) or labels.obfuscated != bool(obfuscated):
            raise MalformedMatrix(f"{source}:{lineno}: label columns disagree with technique columns")
        samples.append(LabeledSample(kit_id, FeatureVector(tuple(feats)), labels))
    return samples
