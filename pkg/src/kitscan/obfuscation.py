"""Detection of source obfuscation: eval, urldecode, hex escapes, base64, obfuscator tools."""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .config import ScanConfig
from .evidence import Evidence, line_of_offset, make_evidence
from .fingerprints import ObfuscatorFingerprint
from .ingest import FileKind, KitArchive
from .php_lexer import PhpAnalysisBundle


class ObfuscationTechnique(str, Enum):
    URLDECODE = "urldecode"
    EVAL = "eval"
    HEX = "hex"
    BASE64 = "base64"
    OBFUSCATOR = "obfuscator"


@dataclass(frozen=True)
class ObfuscationReport:
    flags: dict[ObfuscationTechnique, bool]
    evidence: tuple[Evidence, ...]

    @property
    def is_obfuscated(self) -> bool:
        return any(self.flags.values())

    @property
    def techniques(self) -> frozenset[ObfuscationTechnique]:
        return frozenset(t for t, v in self.flags.items() if v)

    def to_json(self) -> dict:
        return {
            "flags": {t.value: self.flags[t] for t in ObfuscationTechnique},
            "is_obfuscated": self.is_obfuscated,
            "evidence": [e.to_json() for e in self.evidence],
        }


def _ev(bundle: PhpAnalysisBundle, file: str, line: int, rule: str) -> Evidence:
    return make_evidence(file, bundle.sources.get(file, ""), line, rule)


_BRACKET_PAIRS = {"(": ")", "[": "]", "{": "}", "<": ">"}


def regex_modifiers(pattern: str) -> Optional[str]:
    """Trailing modifier letters of a PCRE pattern literal like ``/x/ie``."""
    p = pattern.strip()
    if len(p) < 2:
        return None
    delim = p[0]
    if delim.isalnum() or delim == "\\" or delim.isspace():
        return None
    closer = _BRACKET_PAIRS.get(delim, delim)
    end = p.rfind(closer)
    if end <= 0:
        return None
    mods = p[end + 1:]
    return mods if mods.isalpha() or mods == "" else None


def detect_eval(bundle: PhpAnalysisBundle) -> tuple[bool, list[Evidence]]:
    evidence = []
    for call in bundle.call_sites:
        rule = None
        if call.callee == "eval":
            rule = "obf.eval_call"
        elif call.callee == "preg_replace" and call.args and call.args[0] is not None:
            mods = regex_modifiers(call.args[0])
            if mods and "e" in mods:
                rule = "obf.preg_replace_e"
        elif call.callee in ("assert", "create_function") and call.args and call.args[0] is not None:
            rule = f"obf.{call.callee}_string"
        if rule:
            evidence.append(_ev(bundle, call.file, call.line, rule))
    return bool(evidence), evidence


_RE_PERCENT = re.compile(r"%[0-9A-Fa-f]{2}")


def detect_urldecode(
    bundle: PhpAnalysisBundle, config: Optional[ScanConfig] = None
) -> tuple[bool, list[Evidence]]:
    threshold = (config or ScanConfig()).percent_escape_threshold
    eval_statements = {c.statement for c in bundle.call_sites if c.callee == "eval"}
    evidence = []
    for call in bundle.calls("urldecode", "rawurldecode"):
        if any(len(_RE_PERCENT.findall(s)) >= threshold for s in call.arg_literals):
            evidence.append(_ev(bundle, call.file, call.line, "obf.urldecode_literal"))
        elif call.statement in eval_statements:
            evidence.append(_ev(bundle, call.file, call.line, "obf.urldecode_eval"))
    return bool(evidence), evidence


_RE_ESCAPE_SCAN = re.compile(r"(\\x[0-9A-Fa-f]{1,2})|\\.|[^\\]+|\\", re.DOTALL)


def max_hex_run(raw_body: str) -> tuple[int, bool]:
    """Longest run of consecutive ``\\xHH`` escapes and whether the body is only such escapes."""
    best = run = 0
    only_hex = bool(raw_body)
    for m in _RE_ESCAPE_SCAN.finditer(raw_body):
        if m.group(1):
            run += 1
            best = max(best, run)
        else:
            run = 0
            only_hex = False
    return best, only_hex


def _double_quoted_body(raw: str, quote: str) -> Optional[str]:
    if quote == '"':
        return raw[1:-1]
    if quote == "<<<":
        first_nl = raw.find("\n")
        return raw[first_nl + 1:] if first_nl >= 0 else ""
    return None


def detect_hex(
    bundle: PhpAnalysisBundle, config: Optional[ScanConfig] = None
) -> tuple[bool, list[Evidence]]:
    threshold = (config or ScanConfig()).hex_escape_threshold
    evidence = []
    for lit in bundle.string_literals:
        body = _double_quoted_body(lit.raw, lit.quote)
        if body is not None and max_hex_run(body)[0] >= threshold:
            evidence.append(_ev(bundle, lit.file, lit.line, "obf.hex_string"))
    for lit in bundle.dynamic_names:
        body = _double_quoted_body(lit.raw, lit.quote)
        if body is not None and max_hex_run(body)[1]:
            evidence.append(_ev(bundle, lit.file, lit.line, "obf.hex_varname"))
    evidence.sort(key=lambda e: (e.file, e.line, e.rule_id))
    return bool(evidence), evidence


_RE_B64 = re.compile(r"[A-Za-z0-9+/]+={0,2}")


def is_base64_blob(value: str, min_length: int = 128) -> bool:
    if len(value) < min_length or not _RE_B64.fullmatch(value):
        return False
    stripped = value.rstrip("=")
    if len(stripped) % 4 == 1:
        return False
    try:
        base64.b64decode(stripped + "=" * (-len(stripped) % 4), validate=True)
    except (binascii.Error, ValueError):
        return False
    return True


def detect_base64(
    bundle: PhpAnalysisBundle, config: Optional[ScanConfig] = None
) -> tuple[bool, list[Evidence]]:
    min_length = (config or ScanConfig()).base64_min_length
    evidence = [_ev(bundle, c.file, c.line, "obf.base64_decode_call") for c in bundle.calls("base64_decode")]
    for lit in bundle.string_literals:
        if is_base64_blob(lit.decoded, min_length):
            evidence.append(_ev(bundle, lit.file, lit.line, "obf.base64_literal"))
    evidence.sort(key=lambda e: (e.file, e.line, e.rule_id))
    return bool(evidence), evidence


def detect_obfuscator(
    kit: KitArchive, registry: Optional[tuple[ObfuscatorFingerprint, ...]] = None
) -> tuple[bool, list[Evidence]]:
    """One evidence item per matching tool: its first match in path order."""
    registry = registry if registry is not None else ScanConfig().fingerprints
    files = [e for e in kit.entries if e.kind in (FileKind.PHP, FileKind.JS, FileKind.HTML)]
    evidence = []
    for fp in sorted(registry, key=lambda f: f.tool_name):
        for entry in files:
            m = fp.regex.search(entry.text)
            if m:
                line = line_of_offset(entry.text, m.start())
                evidence.append(make_evidence(entry.relative_path, entry.text, line, f"obf.tool:{fp.tool_name}"))
                break
    return bool(evidence), evidence


def detect_obfuscation(
    kit: KitArchive, bundle: PhpAnalysisBundle, config: Optional[ScanConfig] = None
) -> ObfuscationReport:
    config = config or ScanConfig()
    results = {
        ObfuscationTechnique.URLDECODE: detect_urldecode(bundle, config),
        ObfuscationTechnique.EVAL: detect_eval(bundle),
        ObfuscationTechnique.HEX: detect_hex(bundle, config),
        ObfuscationTechnique.BASE64: detect_base64(bundle, config),
        ObfuscationTechnique.OBFUSCATOR: detect_obfuscator(kit, config.fingerprints),
    }
    evidence: list[Evidence] = []
    for _, ev in results.values():
        evidence.extend(ev)
    return ObfuscationReport({t: flag for t, (flag, _) in results.items()}, tuple(evidence))

