"""Collects acceptance verdicts and prints one line per criterion after the run."""

import pytest

_VERDICTS: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def acceptance():
    def record(criterion: str, ok: bool, detail: str) -> bool:
        _VERDICTS.setdefault(criterion, []).append((bool(ok), detail))
        print(f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_VERDICTS):
        parts = _VERDICTS[crit]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"{crit} {'PASS' if ok else 'FAIL'}  " + "; ".join(d for _, d in parts))
