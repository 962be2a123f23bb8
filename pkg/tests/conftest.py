import contextlib

import pytest

_VERDICTS: list[tuple[int, str, str]] = []


@pytest.fixture
def criterion():
    """``with criterion(3, "freezing"): ...`` records a PASS/FAIL line for the summary."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        try:
            yield
        except BaseException:
            _VERDICTS.append((number, title, "FAIL"))
            raise
        _VERDICTS.append((number, title, "PASS"))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, verdict in sorted(_VERDICTS):
        terminalreporter.write_line(f"criterion {number:>2} {title}: {verdict}")
