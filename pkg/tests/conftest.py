import numpy as np
import pytest

from uboundary.binning import BinGrid

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance(capsys):
    """Recorder for one acceptance line; also echoed live past capture."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] #{number:<2d} {detail}"
        _ACCEPTANCE[number] = line
        with capsys.disabled():
            print("\n" + line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])


def random_grid(rng, K, L, sizes=None, max_n=30):
    """Random K x L grid; ``sizes`` fixes every bin total, else 1..max_n."""
    n = np.full((K, L), sizes) if sizes is not None else rng.integers(1, max_n + 1, (K, L))
    rate = rng.uniform(0, 1, (K, L))
    return BinGrid(rng.binomial(n, rate), n)


@pytest.fixture
def running_grid():
    # 2 x 2 grid used throughout the worked examples
    return BinGrid([[2, 9], [5, 7]], [[10, 10], [10, 10]])
