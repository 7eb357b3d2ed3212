"""Ancilla-controlled interferometric clock.

An ancilla in ``|+>`` steers the chain forward (``|0>``) or backward (``|1>``)
in time. After the protocol the joint state is
``(|L(t)>|0> + |R(t)>|1>) / sqrt(2)`` with

    R(t) = e^{iHt} O2 e^{-iHt} O1 psi,      L(t) = O1 e^{iHt} O2 e^{-iHt} psi,

so the ancilla coherence ``<L|R>`` is the four-point OTOC of ``(O1, O2)``.
The joint ``tau^z (x) H`` system is never built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SpectralDecomposition, eigendecompose, heisenberg_apply
from .metrology import TimeSeries, cumulative_action, qfi_spectral
from .operators import ChainParams, LocalOperator, apply_local, build_hamiltonian, pauli_string
from .scrambling import otoc_rate, otoc_series

REAL_TOL = 1e-9


@dataclass(frozen=True)
class ClockProtocol:
    chain: ChainParams
    o1: LocalOperator
    o2: LocalOperator
    initial: np.ndarray

    def __post_init__(self):
        for name in ("o1", "o2"):
            if not getattr(self, name).is_unitary():
                raise ValueError(f"{name} must be unitary")
        if set(self.o1.support) & set(self.o2.support):
            raise ValueError("o1 and o2 must act on disjoint sites")
        if self.initial.shape != (self.chain.dim,):
            raise ValueError("initial state does not match the chain")


@dataclass(frozen=True)
class BranchPair:
    left: np.ndarray
    right: np.ndarray

    @property
    def coherence(self) -> complex:
        return complex(np.vdot(self.left, self.right))


def branches(spec: SpectralDecomposition, proto: ClockProtocol, t: float) -> BranchPair:
    n = proto.chain.n_sites
    psi = proto.initial
    right = heisenberg_apply(spec, proto.o2, t, apply_local(proto.o1, psi, n))
    left = apply_local(proto.o1, heisenberg_apply(spec, proto.o2, t, psi), n)
    return BranchPair(left, right)


def ancilla_state(pair: BranchPair | complex) -> np.ndarray:
    """Reduced ancilla state ``[[1, conj(c)], [c, 1]] / 2`` for ``c = <L|R>``.

    Tracing the chain out of ``|L>|0> + |R>|1>`` puts ``<R|L>`` in the
    ``(0, 1)`` entry.
    """
    c = pair.coherence if isinstance(pair, BranchPair) else complex(pair)
    return 0.5 * np.array([[1.0, np.conj(c)], [c, 1.0]], dtype=complex)


def coherence_series(spec: SpectralDecomposition, proto: ClockProtocol, times) -> TimeSeries:
    return TimeSeries(np.asarray(times, dtype=float),
                      np.array([branches(spec, proto, t).coherence for t in times]))


def _real(series: TimeSeries, what: str) -> np.ndarray:
    v = np.asarray(series.values)
    if np.iscomplexobj(v):
        worst = float(np.max(np.abs(v.imag), initial=0.0))
        if worst > REAL_TOL:
            raise ValueError(f"{what} has imaginary part {worst:.3g}; identities need a real coherence")
        v = v.real
    return v.astype(float)


@dataclass
class QFIIdentityReport:
    times: np.ndarray
    qfi: np.ndarray
    predicted: np.ndarray
    rel_dev: np.ndarray
    skipped: np.ndarray

    @property
    def max_rel_dev(self) -> float:
        ok = ~self.skipped
        return float(np.max(self.rel_dev[ok])) if ok.any() else math.nan


def clock_qfi_identity(coherence: TimeSeries, rate: TimeSeries | None = None,
                       pure_tol: float = 1e-9) -> QFIIdentityReport:
    """Compare the ancilla QFI with ``Odot^2 / (1 - O^2)``.

    The QFI side runs :func:`qfi_spectral` on the ancilla state with the
    central-difference generator of the sampled ancilla states. The predicted
    side uses ``rate`` when given (an exact derivative), otherwise the same
    central differences. Points with ``|O| = 1`` are 0/0 and are skipped.
    """
    c = _real(coherence, "coherence")
    t = coherence.times
    states = np.array([ancilla_state(x) for x in c])
    gen = np.gradient(states, t, axis=0)
    odot = _real(rate, "rate") if rate is not None else np.gradient(c, t)
    qfi = np.array([qfi_spectral(r, g) for r, g in zip(states, gen)])
    skipped = np.abs(c) >= 1.0 - pure_tol
    predicted = np.where(skipped, np.nan, odot**2 / np.where(skipped, 1.0, 1.0 - c**2))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(qfi - predicted) / np.maximum(np.abs(predicted), 1e-300)
    rel[skipped] = np.nan
    return QFIIdentityReport(t, qfi, predicted, rel, skipped)


def ancilla_qfi_series(coherence: TimeSeries, rate: TimeSeries, pure_tol: float = 1e-13) -> TimeSeries:
    """Ancilla QFI from the exact generator ``[[0, Odot], [Odot*, 0]] / 2``.

    Where the ancilla is pure (``|O| = 1``, typically ``t = 0``) the QFI is
    discontinuous; the continuous limit ``-Oddot / O`` is used there, with the
    second derivative taken from ``rate`` by finite differences.
    """
    c = _real(coherence, "coherence")
    odot = _real(rate, "rate")
    t = coherence.times
    qfi = np.array([qfi_spectral(ancilla_state(x), 0.5 * np.array([[0, d], [d, 0]], dtype=complex))
                    for x, d in zip(c, odot)])
    pure = np.abs(c) >= 1.0 - pure_tol
    if pure.any():
        oddot = np.gradient(odot, t)
        qfi[pure] = np.maximum(-oddot[pure] / c[pure], 0.0)
    return TimeSeries(t, qfi)


@dataclass
class CosineIdentityReport:
    times: np.ndarray
    coherence: np.ndarray
    predicted: np.ndarray
    window: np.ndarray
    lambda_estimate: np.ndarray
    lambda_bound: np.ndarray

    @property
    def max_deviation(self) -> float:
        w = self.window
        return float(np.max(np.abs(self.coherence[w] - self.predicted[w])))


def clock_cosine_identity(qfi: TimeSeries, coherence: TimeSeries) -> CosineIdentityReport:
    """``O_t`` against ``cos(int_0^t sqrt(I_F))`` over the first-quadrant window.

    Also reports the early-time rate ``-ln(O_t)/t`` next to
    ``(int_0^t sqrt(I_F))^2 / (2t)``; the two agree up to ``O(t^2)``.
    """
    if not np.array_equal(qfi.times, coherence.times):
        raise ValueError("qfi and coherence must share one time grid")
    c = _real(coherence, "coherence")
    t = coherence.times
    action = cumulative_action(qfi)
    predicted = np.cos(action)
    window = action <= math.pi / 2
    # stop at the first exit so later re-entries are not mixed in
    if not window.all():
        window[np.argmin(window):] = False
    lam = np.full_like(t, np.nan)
    bound = np.full_like(t, np.nan)
    pos = (t > 0) & (c > 0)
    lam[pos] = -np.log(c[pos]) / t[pos]
    bound[t > 0] = action[t > 0] ** 2 / (2.0 * t[t > 0])
    return CosineIdentityReport(t, c, predicted, window, lam, bound)


def coherence_rate_series(spec: SpectralDecomposition, proto: ClockProtocol, times) -> TimeSeries:
    return TimeSeries(np.asarray(times, dtype=float),
                      np.array([otoc_rate(spec, proto.initial, proto.o1, proto.o2, t) for t in times]))



def default_protocol(n_sites: int = 6, transverse: float = 1.0, coupling: float = 1.0,
                     longitudinal: float = 0.4) -> ClockProtocol:
    """``O1 = sigma^z_0``, ``O2 = sigma^x_1`` on ``|0...0>``.

    The initial state is an ``O1`` eigenstate, which makes the coherence real;
    for a generic state (the ground state included) it is complex.
    """
    chain = ChainParams(n_sites, coupling, transverse, longitudinal)
    psi = np.zeros(chain.dim, dtype=complex)
    psi[0] = 1.0
    return ClockProtocol(chain, pauli_string("z0"), pauli_string("x1"), psi)


@dataclass
class ClockReport:
    otoc_max_dev: float
    qfi_identity_max_rel_dev: float
    cosine_steps: tuple[float, ...]
    cosine_deviations: tuple[float, ...]

    @property
    def refinement_ratios(self) -> tuple[float, ...]:
        d = self.cosine_deviations
        return tuple(d[k] / d[k + 1] for k in range(len(d) - 1))

    def to_dict(self) -> dict:
        return {"otoc_max_dev": self.otoc_max_dev,
                "qfi_identity_max_rel_dev": self.qfi_identity_max_rel_dev,
                "cosine_steps": list(self.cosine_steps),
                "cosine_deviations": list(self.cosine_deviations),
                "refinement_ratios": list(self.refinement_ratios)}


def clock_report(proto: ClockProtocol, t_max: float = 2.0, dt: float = 1e-3,
                 cosine_steps: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)) -> ClockReport:
    """Run the three clock equalities for ``proto``.

    The coherence/OTOC and QFI identities use the ``dt`` grid; the cosine
    identity is repeated on each of ``cosine_steps`` to expose its
    convergence order.
    """
    spec = eigendecompose(build_hamiltonian(proto.chain))
    times = np.linspace(0.0, t_max, int(round(t_max / dt)) + 1)
    coh = coherence_series(spec, proto, times)
    otoc = otoc_series(spec, proto.initial, proto.o1, proto.o2, times)
    otoc_dev = float(np.max(np.abs(coh.values - otoc)))
    qfi_dev = clock_qfi_identity(coh).max_rel_dev
    devs = []
    for step in cosine_steps:
        ts = np.linspace(0.0, t_max, int(round(t_max / step)) + 1)
        c = coherence_series(spec, proto, ts)
        q = ancilla_qfi_series(c, coherence_rate_series(spec, proto, ts))
        devs.append(clock_cosine_identity(q, c).max_deviation)
    return ClockReport(otoc_dev, qfi_dev, tuple(cosine_steps), tuple(devs))
