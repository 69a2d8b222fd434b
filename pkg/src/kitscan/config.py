"""Scan configuration: keyword lists, thresholds and the fingerprint registry.

Every list file is plain text, one entry per line; blank lines and lines
starting with ``#`` are ignored. Lookup order for each file is: explicit
path, then ``$KITSCAN_CONFIG_DIR/<name>``, then the bundled default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .fingerprints import ObfuscatorFingerprint, load_registry

CONFIG_DIR_ENV = "KITSCAN_CONFIG_DIR"

WATCHLIST_FILE = "watchlist.txt"
BRANDS_FILE = "brands.txt"
KEYWORDS_FILE = "author_keywords.txt"
FINGERPRINTS_FILE = "fingerprints.json"
ALLOWLIST_FILE = "authors_allow.txt"
DENYLIST_FILE = "authors_deny.txt"


def read_list(path: Path | str) -> tuple[str, ...]:
    lines = Path(path).read_text("utf-8").splitlines()
    return tuple(s.strip() for s in lines if s.strip() and not s.lstrip().startswith("#"))


def _default_list(name: str) -> tuple[str, ...]:
    text = resources.files("kitscan").joinpath("data", name).read_text("utf-8")
    return tuple(s.strip() for s in text.splitlines() if s.strip() and not s.startswith("#"))


def _resolve(explicit, config_dir: Optional[Path], name: str) -> Optional[Path]:
    if explicit is not None:
        return Path(explicit)
    if config_dir is not None and (config_dir / name).is_file():
        return config_dir / name
    return None


def _lower(items) -> tuple[str, ...]:
    return tuple(s.lower() for s in items)


@dataclass(frozen=True)
class ScanConfig:
    watchlist: tuple[str, ...] = field(default_factory=lambda: _lower(_default_list(WATCHLIST_FILE)))
    brands: tuple[str, ...] = field(default_factory=lambda: _lower(_default_list(BRANDS_FILE)))
    author_keywords: tuple[str, ...] = field(default_factory=lambda: _lower(_default_list(KEYWORDS_FILE)))
    fingerprints: tuple[ObfuscatorFingerprint, ...] = field(default_factory=load_registry)
    author_allowlist: frozenset[str] = frozenset()
    author_denylist: frozenset[str] = frozenset()
    blacklist_threshold: int = 3
    percent_escape_threshold: int = 5
    hex_escape_threshold: int = 8
    base64_min_length: int = 128


def load_config(
    config_dir: Optional[Path | str] = None,
    *,
    watchlist: Optional[Path | str] = None,
    brands: Optional[Path | str] = None,
    fingerprints: Optional[Path | str] = None,
    keywords: Optional[Path | str] = None,
    allowlist: Optional[Path | str] = None,
    denylist: Optional[Path | str] = None,
) -> ScanConfig:
    if config_dir is None and os.environ.get(CONFIG_DIR_ENV):
        config_dir = os.environ[CONFIG_DIR_ENV]
    cdir = Path(config_dir) if config_dir is not None else None

    kw = {}
    for key, explicit, name in (
        ("watchlist", watchlist, WATCHLIST_FILE),
        ("brands", brands, BRANDS_FILE),
        ("author_keywords", keywords, KEYWORDS_FILE),
    ):
        path = _resolve(explicit, cdir, name)
        if path is not None:
            kw[key] = _lower(read_list(path))
    path = _resolve(fingerprints, cdir, FINGERPRINTS_FILE)
    if path is not None:
        kw["fingerprints"] = load_registry(path)
    for key, explicit, name in (
        ("author_allowlist", allowlist, ALLOWLIST_FILE),
        ("author_denylist", denylist, DENYLIST_FILE),
    ):
        path = _resolve(explicit, cdir, name)
        if path is not None:
            kw[key] = frozenset(_lower(read_list(path)))
    return ScanConfig(**kw)
