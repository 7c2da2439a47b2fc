import pytest

# filled in by tests/test_acceptance.py, one entry per criterion
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(num: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[num] = (passed, detail)
        print(f"criterion {num}: {'PASS' if passed else 'FAIL'}  {detail}")

    return _record
