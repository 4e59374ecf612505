import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line and fail the test when ``ok`` is false."""

    def record(label: str, ok: bool, detail: str = "", soft: bool = False):
        tag = "PASS" if ok else ("SOFT-DEVIATION" if soft else "FAIL")
        line = f"{tag:<15} {label}" + (f"  [{detail}]" if detail else "")
        _CRITERIA.append(line)
        print(line)
        if not soft:
            assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
