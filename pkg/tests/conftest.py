from __future__ import annotations

import pytest

from kitscan.ingest import FileEntry, KitArchive, classify_file, count_directories
from kitscan.php_lexer import analyze_php

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "setup" and report.skipped)
    if report.when == "call" or failed:
        prev = _CRITERIA.get(number)
        status = "FAIL" if failed or (prev and prev[1] == "FAIL") else "PASS"
        _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")


def kit_from_files(files: dict[str, bytes | str], kit_id: str = "kit", origin_name: str | None = None) -> KitArchive:
    entries = []
    for path, data in sorted(files.items()):
        raw = data.encode("utf-8") if isinstance(data, str) else data
        entries.append(FileEntry(path, classify_file(path), len(raw), raw))
    return KitArchive(kit_id, origin_name or kit_id, tuple(entries), count_directories(files))


@pytest.fixture
def make_kit():
    return kit_from_files


@pytest.fixture
def php_bundle():
    def build(source: str, path: str = "index.php"):
        kit = kit_from_files({path: source})
        return kit, analyze_php(kit)

    return build
