import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aftboost.dataset import bundled_dataset_path, load_dataset  # noqa: E402

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def bundled_records():
    return load_dataset(bundled_dataset_path())


def record_acceptance(name, passed, detail):
    ACCEPTANCE_RESULTS.append((name, passed, detail))
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
