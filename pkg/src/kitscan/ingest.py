"""Loading phishing-kit archives and directories into memory.

Nothing is ever extracted to disk: archives are read member by member,
member paths are normalized and anything that would escape the kit root is
dropped with a warning.
"""

from __future__ import annotations

import io
import json
import logging
import os
import posixpath
import sys
import tarfile
import zipfile
import zlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, TextIO

from .errors import CorruptArchive, EncryptedArchive, LimitExceeded, UnsupportedFormat

log = logging.getLogger(__name__)

NESTED_SEPARATOR = "!"


class FileKind(str, Enum):
    PHP = "Php"
    JS = "Js"
    TXT = "Txt"
    EXE = "Exe"
    DLL = "Dll"
    APK = "Apk"
    HTML = "Html"
    CSS = "Css"
    PDF = "Pdf"
    MULTIMEDIA = "Multimedia"
    OTHER = "Other"


EXTENSION_KINDS: dict[str, FileKind] = {
    **dict.fromkeys((".php", ".php3", ".php4", ".php5", ".phtml"), FileKind.PHP),
    ".js": FileKind.JS,
    ".txt": FileKind.TXT,
    ".exe": FileKind.EXE,
    ".dll": FileKind.DLL,
    ".apk": FileKind.APK,
    ".html": FileKind.HTML,
    ".htm": FileKind.HTML,
    ".css": FileKind.CSS,
    ".pdf": FileKind.PDF,
    **dict.fromkeys(
        (".png", ".jpg", ".jpeg", ".gif", ".bmp", ".svg", ".ico", ".webp",
         ".mp4", ".avi", ".mov", ".mp3", ".wav"),
        FileKind.MULTIMEDIA,
    ),
}

TEXT_KINDS = frozenset({FileKind.PHP, FileKind.JS, FileKind.TXT, FileKind.HTML, FileKind.CSS})

ARCHIVE_SUFFIXES = (".tar.gz", ".tgz", ".tar", ".zip")


def classify_file(relative_path: str, first_bytes: bytes = b"") -> FileKind:
    """Map a path to its file kind by case-insensitive extension.

    ``first_bytes`` is accepted for interface stability; content sniffing is
    not used, so the mapping stays a pure function of the name.
    """
    name = relative_path.rsplit("/", 1)[-1].rsplit(NESTED_SEPARATOR, 1)[-1]
    _, ext = posixpath.splitext(name.lower())
    return EXTENSION_KINDS.get(ext, FileKind.OTHER)


@dataclass(frozen=True)
class IngestLimits:
    max_total_bytes: int = 512 * 1024 * 1024
    max_entry_bytes: int = 32 * 1024 * 1024
    max_entries: int = 50_000
    max_nested_archive_depth: int = 1

    def __post_init__(self) -> None:
        for name in ("max_total_bytes", "max_entry_bytes", "max_entries"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_nested_archive_depth < 0:
            raise ValueError("max_nested_archive_depth must be non-negative")


@dataclass(frozen=True)
class FileEntry:
    relative_path: str
    kind: FileKind
    size_bytes: int
    content: bytes = field(repr=False)

    @cached_property
    def text(self) -> str:
        return self.content.decode("utf-8", errors="replace")

    @property
    def basename(self) -> str:
        return self.relative_path.rsplit("/", 1)[-1].rsplit(NESTED_SEPARATOR, 1)[-1]


@dataclass(frozen=True)
class KitArchive:
    kit_id: str
    origin_name: str
    entries: tuple[FileEntry, ...]
    directory_count: int
    warnings: tuple[str, ...] = ()

    def of_kind(self, *kinds: FileKind) -> Iterator[FileEntry]:
        return (e for e in self.entries if e.kind in kinds)

    def kind_counts(self) -> dict[FileKind, int]:
        counts = dict.fromkeys(FileKind, 0)
        for e in self.entries:
            counts[e.kind] += 1
        return counts

    def get(self, relative_path: str) -> Optional[FileEntry]:
        for e in self.entries:
            if e.relative_path == relative_path:
                return e
        return None


@dataclass(frozen=True)
class KitRef:
    kit_id: str
    path: Path


def count_directories(paths: Iterable[str]) -> int:
    dirs = set()
    for p in paths:
        parts = p.split("/")
        for i in range(1, len(parts)):
            dirs.add("/".join(parts[:i]))
    return len(dirs)


def sanitize_member_path(name: str) -> Optional[str]:
    """Normalize an archive member name; None when it escapes the root."""
    name = name.replace("\\", "/")
    if name.startswith("/") or (len(name) > 1 and name[1] == ":"):
        return None
    norm = posixpath.normpath(name)
    if norm in (".", "") or norm == ".." or norm.startswith("../"):
        return None
    return norm


def kit_id_for(path: Path) -> str:
    name = path.name
    lower = name.lower()
    for suffix in ARCHIVE_SUFFIXES:
        if lower.endswith(suffix) and len(name) > len(suffix):
            return name[: -len(suffix)]
    return name


def is_archive_name(name: str) -> bool:
    return name.lower().endswith(ARCHIVE_SUFFIXES)


class _Collector:
    """Accumulates entries for one kit while enforcing the limits."""

    def __init__(self, kit_id: str, limits: IngestLimits):
        self.kit_id = kit_id
        self.limits = limits
        self.entries: dict[str, FileEntry] = {}
        self.total = 0
        self.warnings: list[str] = []

    def warn(self, message: str) -> None:
        log.debug("%s: %s", self.kit_id, message)
        self.warnings.append(message)

    def too_big(self, path: str, size: int) -> bool:
        if size > self.limits.max_entry_bytes:
            self.warn(f"entry {path!r} skipped: {size} bytes exceeds max_entry_bytes")
            return True
        return False

    def add(self, path: str, data: bytes, depth: int) -> None:
        if path in self.entries:
            self.warn(f"duplicate entry {path!r} ignored")
            return
        if len(self.entries) >= self.limits.max_entries:
            raise LimitExceeded(f"{self.kit_id}: more than {self.limits.max_entries} entries")
        self.total += len(data)
        if self.total > self.limits.max_total_bytes:
            raise LimitExceeded(f"{self.kit_id}: more than {self.limits.max_total_bytes} bytes")
        self.entries[path] = FileEntry(path, classify_file(path, data[:16]), len(data), data)
        if depth < self.limits.max_nested_archive_depth and is_archive_name(path):
            self._expand_nested(path, data, depth + 1)

    def _expand_nested(self, container: str, data: bytes, depth: int) -> None:
        prefix = container + NESTED_SEPARATOR
        try:
            if zipfile.is_zipfile(io.BytesIO(data)):
                with zipfile.ZipFile(io.BytesIO(data)) as zf:
                    self.read_zip(zf, prefix, depth)
            else:
                with tarfile.open(fileobj=io.BytesIO(data), mode="r:*") as tf:
                    self.read_tar(tf, prefix, depth)
        except (CorruptArchive, EncryptedArchive, tarfile.TarError, zipfile.BadZipFile,
                zlib.error, EOFError, OSError) as exc:
            self.warn(f"nested archive {container!r} not expanded: {exc}")

    def read_zip(self, zf: zipfile.ZipFile, prefix: str, depth: int) -> None:
        try:
            infos = zf.infolist()
        except zipfile.BadZipFile as exc:
            raise CorruptArchive(str(exc)) from exc
        for info in infos:
            if info.is_dir():
                continue
            if info.flag_bits & 0x1:
                raise EncryptedArchive(f"{self.kit_id}: member {info.filename!r} is encrypted")
            rel = sanitize_member_path(info.filename)
            if rel is None:
                self.warn(f"entry {info.filename!r} dropped: path escapes kit root")
                continue
            if self.too_big(prefix + rel, info.file_size):
                continue
            try:
                with zf.open(info) as fh:
                    data = fh.read(self.limits.max_entry_bytes + 1)
            except (zipfile.BadZipFile, zlib.error, EOFError, NotImplementedError) as exc:
                raise CorruptArchive(f"{self.kit_id}: {info.filename!r}: {exc}") from exc
            except RuntimeError as exc:
                raise EncryptedArchive(f"{self.kit_id}: {exc}") from exc
            if self.too_big(prefix + rel, len(data)):
                continue
            self.add(prefix + rel, data, depth)

    def read_tar(self, tf: tarfile.TarFile, prefix: str, depth: int) -> None:
        try:
            members = tf.getmembers()
        except (tarfile.TarError, EOFError, zlib.error, OSError) as exc:
            raise CorruptArchive(f"{self.kit_id}: {exc}") from exc
        for m in members:
            if m.isdir():
                continue
            if not m.isfile():
                self.warn(f"entry {m.name!r} skipped: not a regular file")
                continue
            rel = sanitize_member_path(m.name)
            if rel is None:
                self.warn(f"entry {m.name!r} dropped: path escapes kit root")
                continue
            if self.too_big(prefix + rel, m.size):
                continue
            try:
                fh = tf.extractfile(m)
                data = fh.read() if fh is not None else b""
            except (tarfile.TarError, EOFError, zlib.error, OSError) as exc:
                raise CorruptArchive(f"{self.kit_id}: {m.name!r}: {exc}") from exc
            self.add(prefix + rel, data, depth)

    def read_directory(self, root: Path) -> None:
        for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
            dirnames.sort()
            for fname in sorted(filenames):
                full = Path(dirpath) / fname
                rel = full.relative_to(root).as_posix()
                if full.is_symlink() or not full.is_file():
                    self.warn(f"entry {rel!r} skipped: not a regular file")
                    continue
                size = full.stat().st_size
                if self.too_big(rel, size):
                    continue
                self.add(rel, full.read_bytes(), 0)

    def build(self, origin_name: str) -> KitArchive:
        entries = tuple(sorted(self.entries.values(), key=lambda e: e.relative_path))
        return KitArchive(
            kit_id=self.kit_id,
            origin_name=origin_name,
            entries=entries,
            directory_count=count_directories(e.relative_path for e in entries),
            warnings=tuple(self.warnings),
        )


def _container_type(path: Path) -> str:
    lower = path.name.lower()
    if lower.endswith(".zip"):
        return "zip"
    if lower.endswith((".tar", ".tar.gz", ".tgz")):
        return "tar"
    if zipfile.is_zipfile(path):
        return "zip"
    try:
        if tarfile.is_tarfile(path):
            return "tar"
    except OSError:
        pass
    raise UnsupportedFormat(f"{path}: not a zip/tar archive or directory")


def load_kit(path: os.PathLike | str, limits: IngestLimits = IngestLimits()) -> KitArchive:
    """Read a kit archive (zip, tar, tar.gz) or directory into a KitArchive."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    kit_id = kit_id_for(path)
    col = _Collector(kit_id, limits)
    if path.is_dir():
        col.read_directory(path)
        return col.build(path.name)

    kind = _container_type(path)
    if kind == "zip":
        try:
            with zipfile.ZipFile(path) as zf:
                col.read_zip(zf, "", 0)
        except zipfile.BadZipFile as exc:
            raise CorruptArchive(f"{path}: {exc}") from exc
    else:
        try:
            with tarfile.open(path, mode="r:*") as tf:
                col.read_tar(tf, "", 0)
        except (tarfile.TarError, EOFError, zlib.error) as exc:
            raise CorruptArchive(f"{path}: {exc}") from exc
    return col.build(path.name)


def enumerate_corpus(
    root: os.PathLike | str,
    on_warning: Optional[Callable[[str, str], None]] = None,
) -> list[KitRef]:
    """List the kits in a corpus directory, sorted by kit_id.

    Kits are archives (by extension) or sub-directories. Other files are
    skipped and reported through ``on_warning(kit_id, message)``.
    """
    root = Path(root)
    refs = []
    for child in sorted(root.iterdir(), key=lambda p: p.name):
        if child.is_dir() or (child.is_file() and is_archive_name(child.name)):
            refs.append(KitRef(kit_id_for(child), child))
        elif on_warning is not None:
            on_warning(child.name, f"skipped non-archive file {child.name!r}")
        else:
            log.warning("skipped non-archive file %s", child)
    refs.sort(key=lambda r: (r.kit_id, r.path.name))
    return refs


def write_warnings(kit_id: str, warnings: Iterable[str], stream: Optional[TextIO] = None) -> None:
    """Emit diagnostics as JSON lines: {"kit_id": ..., "warning": ...}."""
    stream = stream if stream is not None else sys.stderr
    for w in warnings:
        stream.write(json.dumps({"kit_id": kit_id, "warning": w}) + "\n")
