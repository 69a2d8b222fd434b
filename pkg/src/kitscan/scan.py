"""Per-kit pipeline: ingest, lex, detect, extract features and signatures."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

from .authors import AuthorSignature, SignedKit, extract_signatures
from .config import ScanConfig
from .errors import KitscanError
from .evasion import EvasionReport, detect_evasion
from .features import FeatureVector, LabeledSample, Labels, extract_features, label_kit
from .ingest import IngestLimits, KitArchive, KitRef, enumerate_corpus, load_kit
from .obfuscation import ObfuscationReport, detect_obfuscation
from .php_lexer import analyze_php

SCAN_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class KitScan:
    kit_id: str
    origin_name: str
    evasion: EvasionReport
    obfuscation: ObfuscationReport
    signatures: tuple[AuthorSignature, ...]
    features: FeatureVector
    labels: Labels
    token_errors: int
    warnings: tuple[str, ...] = ()

    @property
    def techniques(self) -> frozenset[str]:
        return frozenset(t.value for t in self.labels.evasion_techniques | self.labels.obfuscation_techniques)

    def sample(self) -> LabeledSample:
        return LabeledSample(self.kit_id, self.features, self.labels, tuple(s.name for s in self.signatures))

    def signed(self) -> SignedKit:
        return SignedKit(self.kit_id, tuple(s.name for s in self.signatures),
                         self.labels.evasive, self.labels.obfuscated)

    def to_json(self) -> dict:
        return {
            "schema_version": SCAN_SCHEMA_VERSION,
            "kit_id": self.kit_id,
            "origin_name": self.origin_name,
            "is_evasive": self.labels.evasive,
            "is_obfuscated": self.labels.obfuscated,
            "evasion": self.evasion.to_json(),
            "obfuscation": self.obfuscation.to_json(),
            "signatures": [s.to_json() for s in self.signatures],
            "features": self.features.as_dict(),
            "token_errors": self.token_errors,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class ScanFailure:
    kit_id: str
    path: str
    error: str

    def to_json(self) -> dict:
        return {"schema_version": SCAN_SCHEMA_VERSION, "kit_id": self.kit_id, "path": self.path, "error": self.error}


ScanOutcome = Union[KitScan, ScanFailure]


def scan_archive(kit: KitArchive, config: Optional[ScanConfig] = None) -> KitScan:
    config = config or ScanConfig()
    bundle = analyze_php(kit)
    evasion = detect_evasion(kit, bundle, config)
    obfuscation = detect_obfuscation(kit, bundle, config)
    return KitScan(
        kit.kit_id,
        kit.origin_name,
        evasion,
        obfuscation,
        tuple(extract_signatures(kit, config.author_keywords, bundle)),
        extract_features(kit, bundle, config),
        label_kit(evasion, obfuscation),
        sum(bundle.token_errors.values()),
        kit.warnings,
    )


def scan_path(path: os.PathLike | str, config: Optional[ScanConfig] = None,
              limits: IngestLimits = IngestLimits()) -> KitScan:
    return scan_archive(load_kit(path, limits), config)


def _scan_ref(args: tuple[KitRef, ScanConfig, IngestLimits]) -> ScanOutcome:
    ref, config, limits = args
    try:
        return scan_path(ref.path, config, limits)
    except (KitscanError, OSError) as exc:
        return ScanFailure(ref.kit_id, str(ref.path), f"{type(exc).__name__}: {exc}")


def scan_corpus(
    root: os.PathLike | str,
    config: Optional[ScanConfig] = None,
    jobs: int = 1,
    limits: IngestLimits = IngestLimits(),
    on_warning=None,
) -> Iterator[ScanOutcome]:
    """Scan every kit under ``root`` in kit_id order; failures are yielded, not raised."""
    config = config or ScanConfig()
    refs = enumerate_corpus(Path(root), on_warning)
    work = [(ref, config, limits) for ref in refs]
    if jobs <= 1 or len(work) <= 1:
        yield from map(_scan_ref, work)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps input order, so output is independent of scheduling
        yield from pool.map(_scan_ref, work, chunksize=max(1, len(work) // (jobs * 4)))
