import itertools
import math

import numpy as np
import pytest

from pinlab import BiasedRW, FiniteSupport, GeometricPrefactor, PowerLaw


def first_return_by_enumeration(p, length):
    """P(first return to 0 at time n) for n <= length, by listing every path."""
    steps = np.array(list(itertools.product((1, -1), repeat=length)), dtype=np.int8)
    ups = (steps == 1).sum(axis=1)
    pos = np.cumsum(steps, axis=1)
    zero = pos == 0
    hit = zero.any(axis=1)
    first = np.where(hit, zero.argmax(axis=1) + 1, 0)
    # exact integer path counts per (first-return time, number of up-steps)
    counts = np.zeros((length + 1, length + 1), dtype=np.int64)
    np.add.at(counts, (first[hit], ups[hit]), 1)
    out = np.zeros(length + 1)
    for n in range(1, length + 1):
        out[n] = math.fsum(int(c) * p**k * (1 - p) ** (length - k)
                           for k, c in enumerate(counts[n]) if c)
    return out


@pytest.fixture(scope="session")
def enum_first_return():
    return {p: first_return_by_enumeration(p, 20) for p in (0.5, 0.7)}


def sample_laws():
    """A spread of laws covering every family and both recurrence types."""
    return [
        BiasedRW(0.5),
        BiasedRW(0.7),
        BiasedRW(0.7).conditioned(),
        BiasedRW(0.3).partially_loosen(0.05),
        GeometricPrefactor.normalized(0.2, 3.0),
        GeometricPrefactor.normalized(0.2, 1.5),
        GeometricPrefactor.normalized(0.3, 3.0, 0.25),
        PowerLaw.normalized(2.5),
        FiniteSupport({1: 0.3, 2: 0.5, 5: 0.2}),
        FiniteSupport({2: 0.5, 3: 0.3}),
    ]


def law_id(law):
    return repr(law.to_dict())


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
