"""Detection of server-side evasion: .htaccess rules, robots.txt, PHP blacklists/redirects."""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .config import ScanConfig
from .evidence import Evidence, make_evidence
from .ingest import KitArchive
from .php_lexer import PhpAnalysisBundle, StringArray


class EvasionTechnique(str, Enum):
    HTACCESS = "htaccess"
    ROBOTS_TXT = "robots_txt"
    PHP = "php"


@dataclass(frozen=True)
class EvasionReport:
    flags: dict[EvasionTechnique, bool]
    evidence: tuple[Evidence, ...]

    @property
    def is_evasive(self) -> bool:
        return any(self.flags.values())

    @property
    def techniques(self) -> frozenset[EvasionTechnique]:
        return frozenset(t for t, v in self.flags.items() if v)

    def to_json(self) -> dict:
        return {
            "flags": {t.value: self.flags[t] for t in EvasionTechnique},
            "is_evasive": self.is_evasive,
            "evidence": [e.to_json() for e in self.evidence],
        }


# ---------------------------------------------------------------- .htaccess

_RE_WS = re.compile(r"\s+")
_RE_REDIRECT = re.compile(r"redirect(?:match|permanent|temp)?\s", re.IGNORECASE)
_RE_ERRORDOC = re.compile(r"errordocument\s+(?:403|404)\s+[\"']?https?://", re.IGNORECASE)


def _rewrite_rule(line: str) -> Optional[str]:
    parts = line.split()
    if len(parts) < 3 or parts[0].lower() != "rewriterule":
        return None
    target = parts[2]
    flags: list[str] = []
    if len(parts) > 3 and parts[3].startswith("["):
        flags = [f.strip().split("=", 1)[0].lower() for f in parts[3].strip("[]").split(",")]
    if "r" in flags or "redirect" in flags:
        return "redirect.rewrite_r"
    if target.lower().startswith("http"):
        return "redirect.rewrite_http"
    if "f" in flags or "forbidden" in flags:
        return "forbid.rewrite_f"
    return None


def htaccess_rule(line: str, file_has_deny: bool = False) -> Optional[str]:
    """Rule id triggered by one .htaccess line, or None."""
    s = line.strip()
    if not s or s.startswith("#"):
        return None
    low = _RE_WS.sub(" ", s.lower())
    if low.startswith("deny from"):
        return "forbid.deny_from"
    if low.startswith("require not"):
        return "forbid.require_not"
    if low.replace(", ", ",").startswith("order allow,deny"):
        return "forbid.order_allow_deny"
    if low.startswith("setenvif") and file_has_deny:
        return "forbid.setenvif_deny"
    if low.startswith("rewriterule"):
        return _rewrite_rule(s)
    if _RE_REDIRECT.match(s):
        return "redirect.redirect"
    if _RE_ERRORDOC.match(s):
        return "redirect.errordocument"
    return None


def detect_htaccess(kit: KitArchive) -> tuple[bool, list[Evidence]]:
    evidence = []
    for entry in kit.entries:
        if entry.basename.lower() != ".htaccess":
            continue
        lines = entry.text.split("\n")
        has_deny = any("deny" in ln.lower() and not ln.lstrip().startswith("#")
                       and not ln.lstrip().lower().startswith("setenvif") for ln in lines)
        for no, ln in enumerate(lines, 1):
            rule = htaccess_rule(ln, has_deny)
            if rule:
                evidence.append(make_evidence(entry.relative_path, entry.text, no, rule))
    return bool(evidence), evidence


# ---------------------------------------------------------------- robots.txt

_RE_DISALLOW = re.compile(r"^\s*disallow\s*:(.*)$", re.IGNORECASE)


def detect_robots(kit: KitArchive) -> tuple[bool, list[Evidence]]:
    evidence = []
    for entry in kit.entries:
        if entry.basename.lower() != "robots.txt":
            continue
        for no, ln in enumerate(entry.text.split("\n"), 1):
            m = _RE_DISALLOW.match(ln)
            if m and m.group(1).split("#", 1)[0].strip():
                evidence.append(make_evidence(entry.relative_path, entry.text, no, "robots.disallow"))
    return bool(evidence), evidence


# ---------------------------------------------------------------- PHP

_RE_HOSTNAME = re.compile(
    r"^(?=.{1,253}$)(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+[a-z]{2,63}\.?$", re.IGNORECASE
)
_RE_LOCATION_EXTERNAL = re.compile(r"^\s*location\s*:.*https?://", re.IGNORECASE | re.DOTALL)


def is_ip_or_cidr(value: str) -> bool:
    value = value.strip()
    if not value or any(c not in "0123456789./" for c in value):
        return False
    try:
        if "/" in value:
            ipaddress.IPv4Network(value, strict=False)
        else:
            ipaddress.IPv4Address(value)
    except ValueError:
        return False
    return True


def is_hostname(value: str) -> bool:
    return bool(_RE_HOSTNAME.match(value.strip()))


def ip_array(arr: StringArray, threshold: int) -> bool:
    return sum(is_ip_or_cidr(v) for v in arr.elements) >= threshold


def hostname_array(arr: StringArray, threshold: int, watchlist: Sequence[str]) -> bool:
    if sum(is_hostname(v) for v in arr.elements) >= threshold:
        return True
    return any(kw in v.lower() for v in arr.elements for kw in watchlist)


def is_external_location(literal: str) -> bool:
    return bool(_RE_LOCATION_EXTERNAL.match(literal))


def _bundle_evidence(bundle: PhpAnalysisBundle, file: str, line: int, rule: str) -> Evidence:
    return make_evidence(file, bundle.sources.get(file, ""), line, rule)


def detect_php_evasion(
    bundle: PhpAnalysisBundle, config: Optional[ScanConfig] = None
) -> tuple[bool, list[Evidence]]:
    config = config or ScanConfig()
    t = config.blacklist_threshold
    evidence = []
    for arr in bundle.string_arrays:
        if ip_array(arr, t):
            evidence.append(_bundle_evidence(bundle, arr.file, arr.line, "php.ip_blacklist"))
        elif hostname_array(arr, t, config.watchlist):
            evidence.append(_bundle_evidence(bundle, arr.file, arr.line, "php.host_blacklist"))
    for call in bundle.call_sites:
        if call.callee == "header" and any(is_external_location(s) for s in call.arg_literals):
            evidence.append(_bundle_evidence(bundle, call.file, call.line, "php.external_redirect"))
        elif call.callee == "http_redirect":
            evidence.append(_bundle_evidence(bundle, call.file, call.line, "php.http_redirect"))
    evidence.sort(key=lambda e: (e.file, e.line, e.rule_id))
    return bool(evidence), evidence


def detect_evasion(
    kit: KitArchive, bundle: PhpAnalysisBundle, config: Optional[ScanConfig] = None
) -> EvasionReport:
    results = {
        EvasionTechnique.HTACCESS: detect_htaccess(kit),
        EvasionTechnique.ROBOTS_TXT: detect_robots(kit),
        EvasionTechnique.PHP: detect_php_evasion(bundle, config),
    }
    evidence: list[Evidence] = []
    for _, ev in results.values():
        evidence.extend(ev)
    return EvasionReport({t: flag for t, (flag, _) in results.items()}, tuple(evidence))

