import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Callable ``log(n, title, passed, detail)`` recording one line per criterion."""

    def log(n: int, title: str, passed: bool, detail: str) -> bool:
        line = f"#{n:<2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
