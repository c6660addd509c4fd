import numpy as np
import pytest

from knowtrace import synthgen
from knowtrace.encoding import StudentSequence, pad_sequences


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_data():
    return synthgen.generate(synthgen.SynthConfig(seed=0))


def random_batch(rng, Q, T, n_rows=3, short=True):
    seqs = [StudentSequence(rng.integers(1, Q + 1, T), rng.integers(0, 2, T)) for _ in range(n_rows)]
    if short:
        L = max(1, T // 2)
        seqs.append(StudentSequence(rng.integers(1, Q + 1, L), rng.integers(0, 2, L)))
    return pad_sequences(seqs, T, Q)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
