from __future__ import annotations

import numpy as np
import pytest

from qstopwatch.dynamics import Bipartition, eigendecompose, ground_state, quench
from qstopwatch.operators import ChainParams, build_hamiltonian, pauli

# one-line verdicts collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(rng, dim):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def quenched_chain(n=5, h=0.9, g=0.4):
    """Spectrum, ground state and kicked state of a small chaotic chain."""
    p = ChainParams(n, 1.0, h, g)
    ham = build_hamiltonian(p)
    spec = eigendecompose(ham)
    gs, _ = ground_state(spec)
    return p, ham, spec, gs, quench(gs, pauli("x", 0), n), Bipartition(n, (0,))
