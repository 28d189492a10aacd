import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_addoption(parser):
    parser.addoption(
        "--acceptance-scale", default="full",
        help="full or quick scaling for the acceptance suite")


# acceptance criterion results collected for the terminal summary
ACCEPTANCE_RESULTS = []


def record_acceptance(number, description, passed, detail=""):
    ACCEPTANCE_RESULTS.append((number, description, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, description, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number}: {description}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
