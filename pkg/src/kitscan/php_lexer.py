"""Error-tolerant PHP tokenizer and per-kit lexical fact extraction.

The tokenizer never raises. Every character of the input ends up in exactly
one token, either in ``text`` (the lexeme) or in ``trailing`` (whitespace that
followed it), so ``untokenize(tokenize_php(s)) == s`` for any string.
Malformed input produces an ``Unknown`` token running to the end of the line
and lexing resumes on the next line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .ingest import FileKind, KitArchive


class TokenKind(str, Enum):
    OPEN_TAG = "OpenTag"
    CLOSE_TAG = "CloseTag"
    INLINE_HTML = "InlineHtml"
    IDENTIFIER = "Identifier"
    VARIABLE = "Variable"
    STRING = "StringLiteral"
    NUMBER = "Number"
    COMMENT = "Comment"
    PUNCT = "Punct"
    UNKNOWN = "Unknown"


@dataclass(slots=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    # decoded value for string literals, identifier name for the implicit
    # echo of "<?=", otherwise equal to text
    value: str = ""
    quote: str = ""  # "'", '"', "`", "<<<" (heredoc) or "<<<'" (nowdoc)
    trailing: str = ""
    error: bool = False

    def __post_init__(self) -> None:
        if not self.value:
            self.value = self.text


SUPERGLOBALS = ("$_SERVER", "$_GET", "$_POST", "$_FILES", "$_REQUEST", "$_SESSION", "$_ENV", "$_COOKIE")

_IDENT = r"[A-Za-z_\x80-\U0010ffff][A-Za-z0-9_\x80-\U0010ffff]*"
_RE_IDENT = re.compile(_IDENT)
_RE_WS = re.compile(r"[ \t\r\n\f\v]+")
_RE_NUMBER = re.compile(
    r"0[xX][0-9a-fA-F_]+|0[bB][01_]+|(?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?", re.ASCII
)
_DIGITS = frozenset("0123456789")
_RE_OPEN = re.compile(r"<\?php(?=[ \t\r\n]|$)|<\?=|<\?(?=[ \t\r\n])", re.IGNORECASE)
_RE_HEREDOC = re.compile(r"<<<[ \t]*(?:(" + _IDENT + r")|\"(" + _IDENT + r")\"|'(" + _IDENT + r")')\r?\n")
_PUNCTS = sorted(
    """?-> <=> ** ... <<= >>= ??= === !== -> :: => == != <> <= >= && || ++ -- += -= *= /= .= %= &= |= ^= << >> ??
( ) [ ] { } ; , . = + - * / % < > ! ? : & | ^ ~ @ \\""".split(),
    key=len,
    reverse=True,
)
_RE_PUNCT = re.compile("|".join(re.escape(p) for p in _PUNCTS))

_RE_QUOTED = {
    q: re.compile(q + r"((?:[^" + q + r"\\]|\\.)*)" + q, re.DOTALL) for q in ("'", '"', "`")
}
_SIMPLE_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "v": "\v", "e": "\x1b", "f": "\f",
                   "\\": "\\", "$": "$", '"': '"'}
_RE_DQ_ESCAPE = re.compile(
    r"\\(?:([ntrvef\\$\"])|x([0-9A-Fa-f]{1,2})|u\{([0-9A-Fa-f]+)\}|u([0-9A-Fa-f]{4})|([0-7]{1,3}))"
)


def _dq_escape(m: re.Match) -> str:
    simple, hx, ubrace, u4, octal = m.groups()
    if simple is not None:
        return _SIMPLE_ESCAPES[simple]
    if hx is not None:
        return chr(int(hx, 16))
    if octal is not None:
        return chr(int(octal, 8) & 0xFF)
    cp = int(ubrace or u4, 16)
    return chr(cp) if cp <= 0x10FFFF else m.group(0)


def decode_double_quoted(body: str) -> str:
    r"""Resolve escapes of a double-quoted/heredoc body (\n \t \\ \" \xHH \u{..} \uHHHH octal)."""
    return _RE_DQ_ESCAPE.sub(_dq_escape, body)


def decode_single_quoted(body: str) -> str:
    return re.sub(r"\\([\\'])", r"\1", body)


class _Lexer:
    def __init__(self, src: str):
        self.src = src
        self.n = len(src)
        self.pos = 0
        self.line = 1
        self.tokens: list[Token] = []

    def emit(self, kind: TokenKind, end: int, **kw) -> Token:
        text = self.src[self.pos:end]
        tok = Token(kind, text, self.line, **kw)
        self.tokens.append(tok)
        self.line += text.count("\n")
        self.pos = end
        return tok

    def run(self) -> list[Token]:
        while self.pos < self.n:
            self.html()
            if self.pos < self.n:
                self.code()
        return self.tokens

    def html(self) -> None:
        m = _RE_OPEN.search(self.src, self.pos)
        start = m.start() if m else self.n
        if start > self.pos:
            self.emit(TokenKind.INLINE_HTML, start)
        if m:
            self.emit(TokenKind.OPEN_TAG, m.end())
            if m.group(0) == "<?=":
                self.tokens.append(Token(TokenKind.IDENTIFIER, "", self.line, value="echo"))

    def code(self) -> None:
        src, n = self.src, self.n
        while self.pos < n:
            c = src[self.pos]
            m = _RE_WS.match(src, self.pos)
            if m:
                ws = m.group(0)
                self.tokens[-1].trailing += ws
                self.line += ws.count("\n")
                self.pos = m.end()
                continue
            if src.startswith("?>", self.pos):
                self.emit(TokenKind.CLOSE_TAG, self.pos + 2)
                return
            if c == "#" or src.startswith("//", self.pos):
                self.line_comment()
            elif src.startswith("/*", self.pos):
                end = src.find("*/", self.pos + 2)
                if end < 0:
                    self.emit(TokenKind.COMMENT, n, error=True)
                else:
                    self.emit(TokenKind.COMMENT, end + 2)
            elif c == "$":
                m = _RE_IDENT.match(src, self.pos + 1)
                self.emit(TokenKind.VARIABLE, m.end() if m else self.pos + 1)
            elif c == "'":
                self.quoted("'")
            elif c == '"':
                self.quoted('"')
            elif c == "`":
                self.quoted("`")
            elif c == "<" and src.startswith("<<<", self.pos) and self.heredoc():
                pass
            elif c in _DIGITS or (c == "." and self.pos + 1 < n and src[self.pos + 1] in _DIGITS):
                m = _RE_NUMBER.match(src, self.pos)
                self.emit(TokenKind.NUMBER, m.end())
            elif (m := _RE_IDENT.match(src, self.pos)) is not None:
                self.emit(TokenKind.IDENTIFIER, m.end())
            elif (m := _RE_PUNCT.match(src, self.pos)) is not None:
                self.emit(TokenKind.PUNCT, m.end())
            else:
                self.unknown()

    def line_comment(self) -> None:
        src = self.src
        end = self.pos
        while end < self.n and src[end] not in "\r\n":
            if src.startswith("?>", end):
                break
            end += 1
        self.emit(TokenKind.COMMENT, end)

    def unknown(self) -> None:
        end = self.src.find("\n", self.pos)
        self.emit(TokenKind.UNKNOWN, self.n if end < 0 else end, error=True)

    def quoted(self, q: str) -> None:
        m = _RE_QUOTED[q].match(self.src, self.pos)
        if m is None:
            self.unknown()
            return
        body = m.group(1)
        if q == "'":
            value = decode_single_quoted(body)
        elif q == '"':
            value = decode_double_quoted(body)
        else:
            value = body
        tok = self.emit(TokenKind.STRING, m.end(), quote=q)
        tok.value = value

    def heredoc(self) -> bool:
        m = _RE_HEREDOC.match(self.src, self.pos)
        if not m:
            return False
        label = m.group(1) or m.group(2) or m.group(3)
        nowdoc = m.group(3) is not None
        body_start = m.end()
        closer = re.compile(r"^[ \t]*" + re.escape(label) + r"\b", re.MULTILINE)
        c = closer.search(self.src, body_start)
        quote = "<<<'" if nowdoc else "<<<"
        if c is None:
            body = self.src[body_start:]
            tok = self.emit(TokenKind.STRING, self.n, quote=quote, error=True)
        else:
            body = self.src[body_start:c.start()]
            if body.endswith("\n"):
                body = body[:-2] if body.endswith("\r\n") else body[:-1]
            tok = self.emit(TokenKind.STRING, c.end(), quote=quote)
        tok.value = body if nowdoc else decode_double_quoted(body)
        return True


def tokenize_php(source: str) -> list[Token]:
    """Split PHP source into tokens; total for every input string."""
    return _Lexer(source).run()


def untokenize(tokens: Iterable[Token]) -> str:
    return "".join(t.text + t.trailing for t in tokens)


# --------------------------------------------------------------------------
# lexical facts


@dataclass(frozen=True)
class CallSite:
    callee: str
    arg_literals: tuple[str, ...]
    # per positional argument: decoded literal when the argument is a single
    # string literal, else None
    args: tuple[Optional[str], ...]
    line: int
    file: str
    statement: int


@dataclass(frozen=True)
class StringLiteral:
    raw: str
    decoded: str
    line: int
    file: str
    quote: str


@dataclass(frozen=True)
class StringArray:
    elements: tuple[str, ...]
    line: int
    file: str


@dataclass(frozen=True)
class Comment:
    text: str
    line: int
    file: str


@dataclass
class PhpAnalysisBundle:
    call_sites: list[CallSite] = field(default_factory=list)
    superglobals_used: set[str] = field(default_factory=set)
    string_literals: list[StringLiteral] = field(default_factory=list)
    string_arrays: list[StringArray] = field(default_factory=list)
    comments: list[Comment] = field(default_factory=list)
    # string literals used as ${"..."} dynamic variable names
    dynamic_names: list[StringLiteral] = field(default_factory=list)
    statement_superglobals: dict[int, frozenset[str]] = field(default_factory=dict)
    token_errors: dict[str, int] = field(default_factory=dict)
    sources: dict[str, str] = field(default_factory=dict, repr=False)

    def calls(self, *names: str) -> list[CallSite]:
        wanted = set(names)
        return [c for c in self.call_sites if c.callee in wanted]

    def calls_in_statement(self, statement: int) -> list[CallSite]:
        return [c for c in self.call_sites if c.statement == statement]


_NON_CALL_KEYWORDS = frozenset("""
if elseif else while for foreach switch match return and or xor not echo print
array list isset unset empty function fn new clone catch use declare exit die
include include_once require require_once global static case instanceof yield
""".split())
_NO_CALL_BEFORE = frozenset({"->", "?->", "::"})
_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = frozenset(_OPENERS.values())
_TRIVIA = frozenset({TokenKind.COMMENT, TokenKind.INLINE_HTML})


def _split_arguments(code: list[Token], open_idx: int) -> tuple[list[list[Token]], int]:
    """Split the bracketed region starting at code[open_idx] into top-level items."""
    close = _OPENERS[code[open_idx].text]
    depth = 0
    items: list[list[Token]] = [[]]
    i = open_idx
    while i < len(code):
        t = code[i]
        if t.kind is TokenKind.PUNCT and t.text in _OPENERS:
            depth += 1
            if depth > 1:
                items[-1].append(t)
        elif t.kind is TokenKind.PUNCT and t.text in _CLOSERS:
            depth -= 1
            if depth == 0:
                return items, i
            items[-1].append(t)
        elif t.kind in (TokenKind.OPEN_TAG, TokenKind.CLOSE_TAG):
            return items, i
        elif depth == 1 and t.kind is TokenKind.PUNCT and t.text == ",":
            items.append([])
        else:
            items[-1].append(t)
        i += 1
    return items, len(code)


def _is_array_bracket(prev: Optional[Token]) -> bool:
    if prev is None:
        return True
    if prev.kind in (TokenKind.VARIABLE, TokenKind.STRING, TokenKind.NUMBER):
        return False
    if prev.kind is TokenKind.IDENTIFIER:
        return prev.value.lower() in ("return", "yield", "echo", "print", "in", "as")
    if prev.kind is TokenKind.PUNCT and prev.text in (")", "]", "}"):
        return False
    return True


def _string_array(items: list[list[Token]]) -> Optional[tuple[str, ...]]:
    if items and not items[-1]:
        items = items[:-1]  # trailing comma
    if not items:
        return None
    out = []
    for item in items:
        if len(item) == 1 and item[0].kind is TokenKind.STRING:
            out.append(item[0].value)
        elif (len(item) == 3 and item[0].kind is TokenKind.STRING
              and item[1].text == "=>" and item[2].kind is TokenKind.STRING):
            out.append(item[2].value)
        else:
            return None
    return tuple(out)


def analyze_source(source: str, file: str, bundle: PhpAnalysisBundle, statement_base: int = 0) -> int:
    """Add the facts of one PHP file to ``bundle``; returns the next statement id."""
    tokens = tokenize_php(source)
    bundle.sources[file] = source
    bundle.token_errors[file] = sum(t.error for t in tokens)

    code: list[Token] = []
    for t in tokens:
        if t.kind is TokenKind.COMMENT:
            bundle.comments.append(Comment(t.text, t.line, file))
        elif t.kind is not TokenKind.INLINE_HTML:
            code.append(t)

    # statement ids: ";" and tag boundaries delimit statements
    stmt_of: list[int] = []
    stmt = statement_base
    for t in code:
        if t.kind in (TokenKind.OPEN_TAG, TokenKind.CLOSE_TAG):
            stmt += 1
            stmt_of.append(stmt)
            stmt += 1
            continue
        stmt_of.append(stmt)
        if t.kind is TokenKind.PUNCT and t.text == ";":
            stmt += 1
    stmt += 1

    stmt_globals: dict[int, set[str]] = {}
    for i, t in enumerate(code):
        prev = code[i - 1] if i > 0 else None
        if t.kind is TokenKind.VARIABLE:
            if t.text in SUPERGLOBALS:
                bundle.superglobals_used.add(t.text)
                stmt_globals.setdefault(stmt_of[i], set()).add(t.text)
            if (t.text == "$" and i + 3 < len(code) and code[i + 1].text == "{"
                    and code[i + 2].kind is TokenKind.STRING and code[i + 3].text == "}"):
                s = code[i + 2]
                bundle.dynamic_names.append(StringLiteral(s.text, s.value, s.line, file, s.quote))
        elif t.kind is TokenKind.STRING:
            bundle.string_literals.append(StringLiteral(t.text, t.value, t.line, file, t.quote))
        elif t.kind is TokenKind.IDENTIFIER:
            nxt = code[i + 1] if i + 1 < len(code) else None
            if nxt is None or nxt.kind is not TokenKind.PUNCT or nxt.text != "(":
                continue
            name = t.value.lower()
            if name == "array":
                items, _ = _split_arguments(code, i + 1)
                elements = _string_array(items)
                if elements:
                    bundle.string_arrays.append(StringArray(elements, t.line, file))
                continue
            if name in _NON_CALL_KEYWORDS:
                continue
            if prev is not None and prev.kind is TokenKind.PUNCT and prev.text in _NO_CALL_BEFORE:
                continue
            if prev is not None and prev.kind is TokenKind.IDENTIFIER and prev.value.lower() in ("function", "new"):
                continue
            items, _ = _split_arguments(code, i + 1)
            if items == [[]]:
                items = []
            literals = []
            args = []
            for item in items:
                literals.extend(_top_level_literals(item))
                args.append(item[0].value if len(item) == 1 and item[0].kind is TokenKind.STRING else None)
            bundle.call_sites.append(
                CallSite(name, tuple(literals), tuple(args), t.line, file, stmt_of[i])
            )
        elif t.kind is TokenKind.PUNCT and t.text == "[" and _is_array_bracket(prev):
            items, _ = _split_arguments(code, i)
            elements = _string_array(items)
            if elements:
                bundle.string_arrays.append(StringArray(elements, t.line, file))

    for k, v in stmt_globals.items():
        bundle.statement_superglobals[k] = frozenset(v)
    return stmt


def _top_level_literals(item: list[Token]) -> list[str]:
    out = []
    depth = 0
    for x in item:
        if x.kind is TokenKind.PUNCT:
            if x.text in _OPENERS:
                depth += 1
            elif x.text in _CLOSERS:
                depth -= 1
        elif x.kind is TokenKind.STRING and depth == 0:
            out.append(x.value)
    return out


def analyze_php(kit: KitArchive) -> PhpAnalysisBundle:
    """Collect call sites, superglobals, literals and string arrays over every PHP entry."""
    bundle = PhpAnalysisBundle()
    stmt = 0
    for entry in kit.of_kind(FileKind.PHP):
        stmt = analyze_source(entry.text, entry.relative_path, bundle, stmt)
    return bundle
