import pytest

from hurricane_sds.toycases import make_toy_case


@pytest.fixture(scope="session")
def micro2():
    return make_toy_case("micro2")


@pytest.fixture(scope="session")
def ring6():
    return make_toy_case("ring6")


@pytest.fixture(scope="session")
def coastal12():
    return make_toy_case("coastal12")


ACCEPTANCE_LINES = {}


def record_acceptance(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
