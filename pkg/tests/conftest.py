import os

from hypothesis import settings

os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

settings.register_profile("felab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("felab")

# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
