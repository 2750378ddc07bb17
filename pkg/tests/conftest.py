import numpy as np
import pytest

from jndprefilter.corpus import synthetic_corpus

_RESULTS = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def corpus():
    """20 synthetic 128x128 4:2:0 images shared by the corpus-level tests."""
    return synthetic_corpus(20, 128, 128, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def acceptance(request):
    """Record one acceptance criterion outcome; printed again in the summary."""
    results = request.config.stash.setdefault(_RESULTS, [])

    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}" + (f" [{detail}]" if detail else "")
        results.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
