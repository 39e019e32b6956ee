import pytest
from hypothesis import HealthCheck, settings

from dynhomog import fixtures

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance tests append (criterion, passed, detail) here; printed at session end
ACCEPTANCE_LINES: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    prev = ACCEPTANCE_LINES.get(criterion)
    if prev is not None:
        passed = passed and prev[0]
        detail = f"{prev[1]}; {detail}"
    ACCEPTANCE_LINES[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split()[1].rstrip("abcde")), k)):
        ok, detail = ACCEPTANCE_LINES[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture(scope="session")
def bilayer():
    return fixtures.test_bilayer()


@pytest.fixture(scope="session")
def bilayer_dcell(bilayer):
    return bilayer.discretized()


@pytest.fixture(scope="session")
def bilayer_basis(bilayer):
    return bilayer.basis()
