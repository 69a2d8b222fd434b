"""Author signature extraction ("coded by ...") and per-author profiles."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .ingest import FileKind, KitArchive
from .php_lexer import PhpAnalysisBundle, analyze_php

NAME_LIMIT = 40
_STRIP = string.punctuation + string.whitespace

# dropped unless allowlisted: bare "by" picks up a lot of prose
STOPWORDS = frozenset("""
a an the me us you him her them my our your his their this that it its
admin team default user users copyright phpstorm netbeans eclipse
""".split())


@dataclass(frozen=True)
class AuthorSignature:
    name: str
    matched_keyword: str
    file: str
    line: int

    def to_json(self) -> dict:
        return {"name": self.name, "keyword": self.matched_keyword, "file": self.file, "line": self.line}


@dataclass(frozen=True)
class AuthorProfile:
    name: str
    kit_count: int
    evasive_count: int
    obfuscated_count: int

    @property
    def evasive_rate(self) -> float:
        return self.evasive_count / self.kit_count if self.kit_count else 0.0

    @property
    def obfuscated_rate(self) -> float:
        return self.obfuscated_count / self.kit_count if self.kit_count else 0.0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kit_count": self.kit_count,
            "evasive_count": self.evasive_count,
            "obfuscated_count": self.obfuscated_count,
            "evasive_rate": self.evasive_rate,
            "obfuscated_rate": self.obfuscated_rate,
        }


@dataclass(frozen=True)
class SignedKit:
    """Per-kit input to profiling: the names found and the kit's labels."""

    kit_id: str
    names: tuple[str, ...]
    evasive: bool
    obfuscated: bool


def normalize_name(raw: str) -> str:
    name = raw.strip().lower()[:NAME_LIMIT].strip(_STRIP)
    return name if any(c.isalnum() for c in name) else ""


def _keyword_regex(keywords: Sequence[str]) -> Optional[re.Pattern]:
    if not keywords:
        return None
    alts = sorted({k.strip().lower() for k in keywords if k.strip()}, key=len, reverse=True)
    phrase = "|".join(r"[ \t]+".join(map(re.escape, k.split())) for k in alts)
    return re.compile(
        r"(?<![\w])(" + phrase + r")(?![\w])[ \t]*[:@~=>|\-]*[ \t]*([\w.\-]+)",
        re.IGNORECASE,
    )


def _scan(text: str, regex: re.Pattern, allow_bare: bool):
    for m in regex.finditer(text):
        keyword = " ".join(m.group(1).lower().split())
        if keyword == "by" and not allow_bare:
            continue
        name = normalize_name(m.group(2))
        if name:
            yield name, keyword, text.count("\n", 0, m.start())


def extract_signatures(
    kit: KitArchive,
    keywords: Sequence[str] = ("coded by", "created by", "developed by", "made by", "hacked by", "spam by", "by"),
    bundle: Optional[PhpAnalysisBundle] = None,
) -> list[AuthorSignature]:
    """Scan PHP comments/strings and Txt/Html files for self-attribution phrases.

    The bare keyword "by" is honoured only inside PHP comments. Names are
    deduplicated per kit, keeping the first occurrence in path order.
    """
    if not keywords:
        raise ValueError("keyword list must not be empty")
    regex = _keyword_regex(keywords)
    if bundle is None:
        bundle = analyze_php(kit)

    # (file, line, text, is_comment) in path order, then line order
    chunks: list[tuple[str, int, str, bool]] = []
    for c in bundle.comments:
        chunks.append((c.file, c.line, c.text, True))
    for s in bundle.string_literals:
        chunks.append((s.file, s.line, s.decoded, False))
    for entry in kit.of_kind(FileKind.TXT, FileKind.HTML):
        chunks.append((entry.relative_path, 1, entry.text, False))
    chunks.sort(key=lambda c: (c[0], c[1]))

    seen: set[str] = set()
    out = []
    for file, line, text, is_comment in chunks:
        for name, keyword, offset in _scan(text, regex, is_comment):
            if name not in seen:
                seen.add(name)
                out.append(AuthorSignature(name, keyword, file, line + offset))
    return out


def plausible_name(name: str) -> bool:
    return len(name) >= 2 and not name.isdigit() and name not in STOPWORDS


def build_author_profiles(
    kits: Iterable[SignedKit],
    allowlist: Iterable[str] = (),
    denylist: Iterable[str] = (),
) -> list[AuthorProfile]:
    """Aggregate signatures into profiles, sorted by kit_count desc then name.

    A kit with several signatures counts once toward each of them.
    Denylisted names are removed; allowlisted names bypass the plausibility
    filter.
    """
    allow = {normalize_name(n) for n in allowlist}
    deny = {normalize_name(n) for n in denylist}
    counts: dict[str, list[int]] = {}
    for kit in kits:
        for name in set(kit.names):
            if name in deny or (name not in allow and not plausible_name(name)):
                continue
            c = counts.setdefault(name, [0, 0, 0])
            c[0] += 1
            c[1] += kit.evasive
            c[2] += kit.obfuscated
    profiles = [AuthorProfile(n, *c) for n, c in counts.items()]
    profiles.sort(key=lambda p: (-p.kit_count, p.name))
    return profiles
