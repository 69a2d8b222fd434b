from __future__ import annotations

from dataclasses import dataclass

EXCERPT_LIMIT = 200


@dataclass(frozen=True)
class Evidence:
    file: str
    line: int
    rule_id: str
    excerpt: str

    def to_json(self) -> dict:
        return {"file": self.file, "line": self.line, "rule_id": self.rule_id, "excerpt": self.excerpt}


def line_excerpt(text: str, line: int) -> str:
    """The stripped text of 1-based ``line`` (verbatim, at most 200 chars)."""
    lines = text.split("\n")
    if not 1 <= line <= len(lines):
        return ""
    return lines[line - 1].strip()[:EXCERPT_LIMIT]


def make_evidence(file: str, text: str, line: int, rule_id: str) -> Evidence:
    return Evidence(file, line, rule_id, line_excerpt(text, line))


def line_of_offset(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1
