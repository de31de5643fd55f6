import numpy as np
import pytest

from adaptive_ppm import config_from_mean_photons


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cfg4():
    return config_from_mean_photons(4, 1.0)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request, capsys):
    """Record one acceptance line, echo it, and assert the criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def _report(n: int, ok: bool, detail: str):
        line = f"ACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
