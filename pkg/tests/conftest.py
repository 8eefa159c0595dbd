from __future__ import annotations

import pytest

from uqtmlab import library

ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def record(criterion: int, title: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE.append((criterion, title, bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}" + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def myers():
    return library.myers_machine(2, 5)


@pytest.fixture(scope="session")
def bundled():
    return library.bundled()
