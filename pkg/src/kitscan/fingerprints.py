"""Registry of obfuscator-tool fingerprints (regular expressions over file text)."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import RegistryLoadError


@dataclass(frozen=True)
class ObfuscatorFingerprint:
    tool_name: str
    pattern: str
    description: str = ""
    regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "regex", re.compile(self.pattern))


def parse_registry(data, source: str = "<registry>") -> tuple[ObfuscatorFingerprint, ...]:
    if not isinstance(data, list):
        raise RegistryLoadError(f"{source}: expected a JSON array of fingerprint objects")
    seen: set[str] = set()
    out = []
    for i, item in enumerate(data):
        label = f"{source}: entry {i}"
        if not isinstance(item, dict):
            raise RegistryLoadError(f"{label}: not an object")
        name = item.get("tool_name")
        pattern = item.get("pattern")
        if not isinstance(name, str) or not name:
            raise RegistryLoadError(f"{label}: missing tool_name")
        label = f"{source}: entry {i} ({name})"
        if not isinstance(pattern, str) or not pattern:
            raise RegistryLoadError(f"{label}: missing pattern")
        if name in seen:
            raise RegistryLoadError(f"{label}: duplicate tool_name")
        try:
            fp = ObfuscatorFingerprint(name, pattern, str(item.get("description", "")))
        except re.error as exc:
            raise RegistryLoadError(f"{label}: pattern does not compile: {exc}") from exc
        seen.add(name)
        out.append(fp)
    return tuple(sorted(out, key=lambda f: f.tool_name))


def load_registry(path: Optional[Path | str] = None) -> tuple[ObfuscatorFingerprint, ...]:
    """Load a fingerprint registry file; the bundled seed registry when ``path`` is None."""
    if path is None:
        text = resources.files("kitscan").joinpath("data/fingerprints.json").read_text("utf-8")
        source = "fingerprints.json"
    else:
        text = Path(path).read_text("utf-8")
        source = str(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RegistryLoadError(f"{source}: invalid JSON: {exc}") from exc
    return parse_registry(data, source)
