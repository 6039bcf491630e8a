import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qcert.linalg import random_state, random_unitary

settings.register_profile("qcert", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qcert")

S2 = 1 / math.sqrt(2)
HADAMARD = np.array([[S2, S2], [S2, -S2]], dtype=complex)
FIG1 = np.diag(np.exp(1j * np.pi * np.array([0, 1 / 3, 2 / 3])))
FIG2 = np.diag([1, np.exp(1j * np.pi / 3)])
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = np.array([S2, S2], dtype=complex)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
deltas = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def haar(d, seed):
    return random_unitary(d, np.random.default_rng(seed))


def rstate(d, seed):
    return random_state(d, np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
