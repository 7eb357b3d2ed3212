"""Subsystem quantum Fisher information and the quantities bounding it."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class TruncationWarning(UserWarning):
    """Every eigenvalue pair of the reduced state fell under the floor."""


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        if t.ndim != 1 or v.shape[:1] != t.shape:
            raise ValueError("times and values must have the same length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def restrict(self, t_max: float) -> "TimeSeries":
        keep = self.times <= t_max + 1e-12
        return TimeSeries(self.times[keep], self.values[keep])


@dataclass(frozen=True)
class TruncationPolicy:
    eigen_floor: float = 1e-12

    def __post_init__(self):
        if not self.eigen_floor > 0:
            raise ValueError("eigen_floor must be positive")


DEFAULT_POLICY = TruncationPolicy()


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def renyi2(rho: np.ndarray) -> float:
    return float(-np.log(purity(rho)))


def qfi_spectral(rho_a: np.ndarray, m_a: np.ndarray, pol: TruncationPolicy = DEFAULT_POLICY) -> float:
    """Quantum Fisher information of ``rho_a`` moving with velocity ``m_a``.

    ``2 sum_jk |<j|m_a|k>|^2 / (p_j + p_k)`` in the eigenbasis of ``rho_a``,
    dropping pairs with ``p_j + p_k <= pol.eigen_floor``.
    """
    p, v = np.linalg.eigh(rho_a)
    m = v.conj().T @ m_a @ v
    denom = p[:, None] + p[None, :]
    keep = denom > pol.eigen_floor
    if not keep.any():
        warnings.warn("all eigenvalue pairs truncated; QFI set to 0", TruncationWarning, stacklevel=2)
        return 0.0
    return float(2.0 * np.sum(np.abs(m[keep]) ** 2 / denom[keep]))


def _sqrt_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def root_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann root fidelity ``tr sqrt(sqrt(rho) sigma sqrt(rho))``."""
    s = _sqrt_psd(rho)
    inner = s @ sigma @ s
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))))


def qfi_bures_oracle(rho_t: np.ndarray, rho_tdt: np.ndarray, dt: float = 1e-3) -> float:
    """Finite-difference QFI from the Bures distance, ``8 (1 - F) / dt**2``.

    ``F`` is the root fidelity, so a pure qubit rotating at angular speed
    ``2h`` gives ``4 h**2``.
    """
    f = root_fidelity(rho_t, rho_tdt)
    if f > 1.0 + 1e-10:
        raise FloatingPointError(f"fidelity {f!r} exceeds one")
    return 8.0 * (1.0 - min(f, 1.0)) / dt**2


def variance_rho(rho: np.ndarray) -> float:
    """Variance of ``rho`` measured on itself: ``tr rho^3 - (tr rho^2)^2``."""
    rho = np.asarray(rho)
    r2 = rho @ rho
    p2 = float(np.real(np.trace(r2)))
    p3 = float(np.real(np.vdot(rho.conj().T, r2)))
    var = p3 - p2 * p2
    # rounding can push pure or maximally mixed states a hair below zero
    return 0.0 if -1e-14 < var < 0.0 else var


def qubit_variance(p: float | np.ndarray) -> float | np.ndarray:
    """Closed form of :func:`variance_rho` for a qubit with purity ``p``."""
    return 0.5 * (3.0 * p - 1.0) - p * p


def purity_rate(rho_a: np.ndarray, m_a: np.ndarray) -> float:
    """Exact ``d/dt tr rho_A^2 = 2 tr(rho_A M_A)``."""
    return float(2.0 * np.real(np.vdot(np.asarray(rho_a).conj().T, m_a)))


def sandwich_bounds(rho_a: np.ndarray, m_a: np.ndarray, pol: TruncationPolicy = DEFAULT_POLICY
                    ) -> tuple[float, float]:
    """``(|M|^2 / (2 p_max), |M|^2 / (2 p_min))`` in the Frobenius norm.

    The upper value is ``inf`` when ``rho_a`` is singular. Note that the QFI
    can exceed this upper value (see :func:`spectral_bounds`).
    """
    p = np.linalg.eigvalsh(rho_a)
    norm2 = float(np.sum(np.abs(m_a) ** 2))
    lower = norm2 / (2.0 * p[-1])
    upper = norm2 / (2.0 * p[0]) if p[0] > pol.eigen_floor else (0.0 if norm2 == 0.0 else np.inf)
    return lower, upper


def spectral_bounds(rho_a: np.ndarray, m_a: np.ndarray, pol: TruncationPolicy = DEFAULT_POLICY
                    ) -> tuple[float, float]:
    """``(|M|^2 / p_max, |M|^2 / p_min)``, the bracket implied by ``2 p_min <= p_j + p_k <= 2 p_max``."""
    lower, upper = sandwich_bounds(rho_a, m_a, pol)
    return 2.0 * lower, 2.0 * upper


def central_difference(series: TimeSeries) -> TimeSeries:
    """Derivative on a possibly non-uniform grid, one-sided at the ends."""
    if len(series) < 2:
        raise ValueError("need at least two samples to differentiate")
    return TimeSeries(series.times, np.gradient(series.values, series.times))


def _sqrt_values(qfi: TimeSeries) -> np.ndarray:
    v = np.asarray(qfi.values, dtype=float)
    if np.any(v < -1e-12):
        raise ValueError("QFI values must be non-negative")
    return np.sqrt(np.clip(v, 0.0, None))


def qsl_action(qfi: TimeSeries, t_end: float) -> float:
    """Trapezoidal ``int_0^t_end sqrt(I_F(s)) ds`` starting at the first sample.

    ``t_end`` may fall between samples; the integrand is then linearly
    interpolated.
    """
    t = qfi.times
    if not t[0] - 1e-12 <= t_end <= t[-1] + 1e-12:
        raise ValueError(f"t_end={t_end} outside the sampled range [{t[0]}, {t[-1]}]")
    return float(cumulative_action(qfi, [t_end])[0])


def cumulative_action(qfi: TimeSeries, at: np.ndarray | None = None) -> np.ndarray:
    """Running QSL action on the grid, or interpolated at the times ``at``."""
    t = qfi.times
    s = _sqrt_values(qfi)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(t))])
    if at is None:
        return cum
    at = np.clip(np.asarray(at, dtype=float), t[0], t[-1])
    k = np.clip(np.searchsorted(t, at, side="right") - 1, 0, len(t) - 1)
    out = cum[k].copy()
    partial = at > t[k]
    kk = k[partial]
    dt = at[partial] - t[kk]
    s_end = s[kk] + (s[kk + 1] - s[kk]) * dt / (t[kk + 1] - t[kk])
    out[partial] += 0.5 * (s[kk] + s_end) * dt
    return out


def intensive_ma2(m_a: np.ndarray, n_sites: int) -> float:
    """Generator norm per site, ``|M_A|_2^2 / N`` for a chain."""
    return float(np.sum(np.abs(m_a) ** 2) / n_sites)
