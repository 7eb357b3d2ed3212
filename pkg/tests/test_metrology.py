from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qstopwatch.dynamics import Bipartition, eigendecompose, evolve, partial_trace, reduced_generator
from qstopwatch.metrology import (
    TimeSeries,
    TruncationPolicy,
    TruncationWarning,
    central_difference,
    cumulative_action,
    intensive_ma2,
    purity,
    purity_rate,
    qfi_bures_oracle,
    qfi_spectral,
    qsl_action,
    qubit_variance,
    renyi2,
    root_fidelity,
    sandwich_bounds,
    spectral_bounds,
    variance_rho,
)
from qstopwatch.operators import ChainParams, build_hamiltonian, pauli_matrix

from .conftest import quenched_chain, random_state

X, Z = pauli_matrix("x"), pauli_matrix("z")


def random_density(rng, d, rank=None):
    rank = rank or d
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian_traceless(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g + g.conj().T
    return m - np.trace(m) / d * np.eye(d)


def test_qfi_spectral_matches_bures_oracle_along_trajectory():
    _, ham, spec, _, psi0, part = quenched_chain(6, 1.0)
    part2 = Bipartition(6, (0, 1))
    dt = 1e-3
    checked = 0
    for pt in (part, part2):
        for t in np.linspace(0.05, 6.0, 40):
            psi_t = evolve(spec, psi0, t)
            rho = partial_trace(psi_t, pt)
            if np.linalg.eigvalsh(rho)[0] <= 1e-4:
                continue
            q = qfi_spectral(rho, reduced_generator(ham, psi_t, pt))
            lo = partial_trace(evolve(spec, psi0, t - dt / 2), pt)
            hi = partial_trace(evolve(spec, psi0, t + dt / 2), pt)
            bures = qfi_bures_oracle(lo, hi, dt)
            assert abs(bures - q) <= 0.01 * q, (t, q, bures)
            checked += 1
    assert checked > 40


@pytest.mark.parametrize("h", [0.1, 0.5, 1.0, 2.3])
def test_single_spin_precession_gives_four_h_squared(h):
    # one spin in a constant transverse field, starting in |0>
    spec = eigendecompose(build_hamiltonian(ChainParams(1, 0.0, h, 0.0)))
    part = Bipartition(1, (0,))
    ham = spec.reconstruct()
    for t in (0.0, 0.3, 1.1):
        psi = evolve(spec, np.array([1.0, 0.0], dtype=complex), t)
        q = qfi_spectral(partial_trace(psi, part), reduced_generator(ham, psi, part))
        assert abs(q - 4 * h * h) < 1e-10


def test_decoupled_spin_keeps_four_h_squared_inside_a_chain():
    # no coupling: site 0 precesses alone while the rest is irrelevant
    h = 0.7
    ham = build_hamiltonian(ChainParams(3, 0.0, h, 0.0))
    spec = eigendecompose(ham)
    psi0 = np.zeros(8, dtype=complex)
    psi0[0] = 1
    part = Bipartition(3, (0,))
    psi = evolve(spec, psi0, 0.9)
    assert abs(qfi_spectral(partial_trace(psi, part), reduced_generator(ham, psi, part)) - 4 * h * h) < 1e-10


def test_variance_matches_qubit_closed_form_on_random_states():
    rng = np.random.default_rng(2024)
    # uniform in the Bloch ball
    v = rng.standard_normal((1000, 3))
    v *= (rng.random(1000) ** (1 / 3) / np.linalg.norm(v, axis=1))[:, None]
    y = pauli_matrix("y")
    for r in v:
        rho = 0.5 * (np.eye(2) + r[0] * X + r[1] * y + r[2] * Z)
        assert abs(variance_rho(rho) - qubit_variance(purity(rho))) < 1e-12


def test_variance_edges():
    assert variance_rho(np.diag([1.0, 0.0])) == 0.0
    assert variance_rho(np.eye(4) / 4) == 0.0
    assert qubit_variance(0.5) == 0.0 and qubit_variance(1.0) == 0.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 3, 4, 8]))
def test_variance_non_negative(seed, d):
    rho = random_density(np.random.default_rng(seed), d)
    assert variance_rho(rho) >= -1e-15


def test_purity_and_renyi():
    rng = np.random.default_rng(3)
    rho = random_density(rng, 4)
    assert math.isclose(purity(rho), np.trace(rho @ rho).real, rel_tol=1e-13)
    assert math.isclose(math.exp(-renyi2(rho)), purity(rho), rel_tol=1e-13)
    assert math.isclose(purity(np.eye(4) / 4), 0.25)


def test_purity_rate_matches_finite_difference():
    _, ham, spec, _, psi0, part = quenched_chain(5, 1.2)
    t, dt = 0.9, 1e-4
    psi = evolve(spec, psi0, t)
    exact = purity_rate(partial_trace(psi, part), reduced_generator(ham, psi, part))
    fd = (purity(partial_trace(evolve(spec, psi0, t + dt), part))
          - purity(partial_trace(evolve(spec, psi0, t - dt), part))) / (2 * dt)
    assert abs(exact - fd) < 1e-7


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.sampled_from([2, 4, 8]))
def test_spectral_bracket_holds(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, d)
    m = random_hermitian_traceless(rng, d)
    q = qfi_spectral(rho, m)
    lo, hi = spectral_bounds(rho, m)
    assert lo * (1 - 1e-10) <= q <= hi * (1 + 1e-10)
    half_lo, _ = sandwich_bounds(rho, m)
    assert half_lo <= q * (1 + 1e-10)


def test_half_width_upper_value_is_exceeded_by_the_maximally_mixed_qubit():
    # rho = I/2: every p_j + p_k = 1, so I_F = 2|M|^2 while |M|^2/(2 p_min) = |M|^2
    m = 0.1 * X
    q = qfi_spectral(np.eye(2) / 2, m)
    lo, hi = sandwich_bounds(np.eye(2) / 2, m)
    norm2 = np.sum(np.abs(m) ** 2)
    assert math.isclose(q, 2 * norm2) and math.isclose(hi, norm2) and math.isclose(lo, norm2)
    assert q > hi


def test_sandwich_upper_for_singular_state():
    rho = np.diag([1.0, 0.0])
    assert sandwich_bounds(rho, 0.1 * X)[1] == math.inf
    assert sandwich_bounds(rho, np.zeros((2, 2)))[1] == 0.0


def test_qfi_truncation():
    rho = np.diag([1.0, 0.0])
    # |0><1| coherence: p_0 + p_1 = 1 survives, p_1 + p_1 = 0 is dropped
    assert math.isclose(qfi_spectral(rho, 0.5 * X), 1.0)
    with pytest.warns(TruncationWarning):
        assert qfi_spectral(rho, X, TruncationPolicy(eigen_floor=3.0)) == 0.0
    with pytest.raises(ValueError):
        TruncationPolicy(0.0)


def test_qfi_unitary_invariance():
    rng = np.random.default_rng(5)
    rho, m = random_density(rng, 4), random_hermitian_traceless(rng, 4)
    u, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    assert math.isclose(qfi_spectral(u @ rho @ u.conj().T, u @ m @ u.conj().T), qfi_spectral(rho, m),
                        rel_tol=1e-10)


def test_root_fidelity():
    rng = np.random.default_rng(6)
    rho = random_density(rng, 4)
    assert math.isclose(root_fidelity(rho, rho), 1.0, rel_tol=1e-12)
    a, b = random_state(rng, 2), random_state(rng, 2)
    assert math.isclose(root_fidelity(np.outer(a, a.conj()), np.outer(b, b.conj())),
                        abs(np.vdot(a, b)), rel_tol=1e-6)


def test_action_and_interpolation():
    t = np.linspace(0, 2, 21)
    qfi = TimeSeries(t, np.full(t.size, 9.0))
    assert math.isclose(qsl_action(qfi, 2.0), 6.0)
    assert math.isclose(qsl_action(qfi, 0.55), 1.65)
    ramp = TimeSeries(t, t**2)  # sqrt is linear, so trapezoid is exact
    assert np.allclose(cumulative_action(ramp), t**2 / 2, atol=1e-14)
    assert math.isclose(qsl_action(ramp, 1.234), 1.234**2 / 2, rel_tol=1e-12)
    with pytest.raises(ValueError):
        qsl_action(qfi, 2.5)
    with pytest.raises(ValueError):
        cumulative_action(TimeSeries(t, -np.ones(t.size)))


def test_time_series_validation_and_central_difference():
    with pytest.raises(ValueError):
        TimeSeries([0, 1, 1], [0, 0, 0])
    with pytest.raises(ValueError):
        TimeSeries([0, 1], [0, 1, 2])
    t = np.linspace(0, 1, 11)
    d = central_difference(TimeSeries(t, t**2)).values
    assert np.allclose(d[1:-1], 2 * t[1:-1])
    with pytest.raises(ValueError):
        central_difference(TimeSeries([0.0], [1.0]))


def test_intensive_ma2():
    assert math.isclose(intensive_ma2(0.5 * X, 4), 0.125)


def test_no_warnings_on_regular_states():
    rng = np.random.default_rng(7)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        qfi_spectral(random_density(rng, 2), random_hermitian_traceless(rng, 2))
