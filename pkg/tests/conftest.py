import sys
import time
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# filled by test_acceptance; echoed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def default_sweep():
    """Noise sweep on the bundled scenario with the default grid (11 p values, 10 repetitions)."""
    from ctxhar.harness import ExperimentConfig, run_noise_sweep

    cfg = ExperimentConfig()
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = run_noise_sweep(cfg)
    return cfg, table, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
