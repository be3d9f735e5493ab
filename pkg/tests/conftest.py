import numpy as np
import pytest

from grlstop.corpus import RankedTopic


def random_topic(rng, n_max=300, n_min=1, p=None, topic_id="t"):
    n = int(rng.integers(n_min, n_max + 1))
    prev = p if p is not None else rng.uniform(0.02, 0.5)
    labels = rng.random(n) < prev
    if not labels.any():
        labels[rng.integers(n)] = True
    return RankedTopic.from_labels(topic_id, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES: list = []


@pytest.fixture
def report():
    def _report(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
