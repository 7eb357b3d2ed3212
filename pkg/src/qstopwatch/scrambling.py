"""OTOCs, the purity form of the averaged OTOC, Lyapunov fits and chaos bounds."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Bipartition, SpectralDecomposition, _coefficients, heisenberg_apply, partial_trace
from .metrology import TimeSeries, central_difference, cumulative_action, purity, qsl_action
from .operators import LocalOperator, apply_local

HAAR_BATCH = 100


@dataclass(frozen=True)
class LyapunovFit:
    lambda_q: float
    window: tuple[float, float]
    r_squared: float
    valid: bool
    n_points: int = 0

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.window[0] + self.window[1])


@dataclass(frozen=True)
class FitPolicy:
    """Amplitude band selecting the decay window of ``ln O_t``."""

    fit_lo: float = 0.35
    fit_hi: float = 0.9
    min_points: int = 5
    min_r_squared: float = 0.97


@dataclass(frozen=True)
class HaarEstimate:
    mean: float
    std_error: float
    samples: int


@dataclass
class GQCRBReport:
    """Per-point slack of ``Var(rho_A) >= Odot^2 / (4 I_F)``."""

    times: np.ndarray
    slack: np.ndarray
    skipped: np.ndarray
    violations: list[tuple[float, float]] = field(default_factory=list)
    tolerance: float = 1e-9

    @property
    def ok(self) -> bool:
        return not self.violations


def otoc_4pt(spec: SpectralDecomposition, psi: np.ndarray, a: LocalOperator, b: LocalOperator,
             t: float) -> complex:
    """``<psi| B(t)^dag A^dag B(t) A |psi>``."""
    if set(a.support) & set(b.support):
        warnings.warn("OTOC operators overlap; computing anyway", stacklevel=2)
    n = spec.n_sites
    a_psi = apply_local(a, psi, n)
    right = apply_local(a.dagger, heisenberg_apply(spec, b, t, a_psi), n)
    left = heisenberg_apply(spec, b, t, psi)
    return complex(np.vdot(left, right))


def otoc_series(spec: SpectralDecomposition, psi: np.ndarray, a: LocalOperator, b: LocalOperator,
                times) -> np.ndarray:
    """:func:`otoc_4pt` at every time, with all times propagated together.

    Uses ``<B(t) A^dag ... > = <A B(t) psi | B(t) A psi>`` and batches the
    propagations as matrix products, which is far cheaper than repeated
    matrix-vector products for large chains.
    """
    if set(a.support) & set(b.support):
        warnings.warn("OTOC operators overlap; computing anyway", stacklevel=2)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n = spec.n_sites

    def b_of_t(vec):
        rows = apply_local(b, spec.propagate_rows(spec.to_eigenbasis(vec), times), n)
        return spec.propagate_rows(spec.rows_to_eigenbasis(rows), -times)

    left = apply_local(a, b_of_t(np.asarray(psi, dtype=complex)), n)
    right = b_of_t(apply_local(a, psi, n))
    return np.einsum("ti,ti->t", left.conj(), right)


def otoc_rate(spec: SpectralDecomposition, psi: np.ndarray, a: LocalOperator, b: LocalOperator,
              t: float) -> complex:
    """Exact time derivative of :func:`otoc_4pt`, using ``dB(t)/dt = i[H, B(t)]``."""
    n = spec.n_sites

    def b_dot(v):
        return 1j * (spec.apply_hamiltonian(heisenberg_apply(spec, b, t, v))
                     - heisenberg_apply(spec, b, t, spec.apply_hamiltonian(v)))

    a_psi = apply_local(a, psi, n)
    left = heisenberg_apply(spec, b, t, psi)
    right = apply_local(a.dagger, heisenberg_apply(spec, b, t, a_psi), n)
    return complex(np.vdot(b_dot(psi), right) + np.vdot(left, apply_local(a.dagger, b_dot(a_psi), n)))


def averaged_otoc(psi_t: np.ndarray, part: Bipartition) -> float:
    """Haar-averaged OTOC, equal to the purity of the reduced state on ``A``."""
    return purity(partial_trace(psi_t, part))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR factorization of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(batch,)))


def haar_samples(dim: int, n_samples: int, seed: int) -> np.ndarray:
    """``n_samples`` Haar unitaries; batch ``k`` has its own child seed, so any
    split of the batches across workers reproduces the serial draw."""
    out = np.empty((n_samples, dim, dim), dtype=complex)
    for start in range(0, n_samples, HAAR_BATCH):
        rng = _batch_rng(seed, start // HAAR_BATCH)
        for i in range(start, min(start + HAAR_BATCH, n_samples)):
            out[i] = haar_unitary(dim, rng)
    return out


def _embed_b(u: np.ndarray, psi: np.ndarray, part: Bipartition) -> np.ndarray:
    """Apply ``I_A (x) u`` to ``psi`` for a unitary ``u`` on ``B``."""
    op = LocalOperator(part.sites_b, u)
    return apply_local(op, psi, part.n_sites)


def haar_otoc_estimate(spec: SpectralDecomposition, psi: np.ndarray, part: Bipartition, times,
                       a: LocalOperator | None = None, n_samples: int = 2000,
                       seed: int = 0) -> list[HaarEstimate]:
    """Monte-Carlo average of the OTOC over Haar-random unitaries ``B`` on the complement.

    With ``a=None`` the ``A`` slot holds the initial state projector
    ``|psi><psi|`` and the trace form is used, normalized by ``d_B``:
    ``d_B tr(B(t)^dag rho0 B(t) rho0) = d_B |<psi(t)|B|psi(t)>|^2``. Its mean is
    the purity of ``rho_A(t)``. With a local unitary ``a`` the sample is the
    state expectation ``<psi|B(t)^dag a^dag B(t) a|psi>`` (real part), which
    is operator dependent and only loosely tracks the purity.

    The same unitaries are reused at every time, so the returned estimates
    form a smooth series.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    us = haar_samples(part.dim_b, n_samples, seed)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = []
    for t in times:
        psi_t = spec.propagate(psi, t)
        if a is None:
            c = _coefficients(psi_t, part)
            sigma = c.T @ c.conj()  # <psi_t|I x U|psi_t> = tr(U sigma)
            expect = np.einsum("kij,ji->k", us, sigma)
            vals = part.dim_b * np.abs(expect) ** 2
        else:
            n = part.n_sites
            a_psi = apply_local(a, psi, n)
            a_psi_t = spec.propagate(a_psi, t)
            vals = np.empty(n_samples)
            for k, u in enumerate(us):
                left = spec.propagate(_embed_b(u, psi_t, part), -t)
                right = spec.propagate(_embed_b(u, a_psi_t, part), -t)
                vals[k] = np.vdot(left, apply_local(a.dagger, right, n)).real
        se = float(np.std(vals, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
        out.append(HaarEstimate(float(np.mean(vals)), se, n_samples))
    return out


def fit_lyapunov(otoc: TimeSeries, policy: FitPolicy = FitPolicy()) -> LyapunovFit:
    """Fit ``O_t = C exp(-lambda t)`` on the first stretch where ``fit_lo <= O_t <= fit_hi``."""
    t = otoc.times
    v = np.real(np.asarray(otoc.values))
    inside = (v >= policy.fit_lo) & (v <= policy.fit_hi)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return LyapunovFit(math.nan, (math.nan, math.nan), 0.0, False, 0)
    start = idx[0]
    stop = start
    while stop + 1 < len(v) and inside[stop + 1]:
        stop += 1
    sel = slice(start, stop + 1)
    ts, ys = t[sel], np.log(v[sel])
    n = ts.size
    window = (float(ts[0]), float(ts[-1]))
    if n < 2:
        return LyapunovFit(math.nan, window, 0.0, False, int(n))
    slope, intercept = np.polyfit(ts, ys, 1)
    resid = ys - (slope * ts + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    r2 = min(max(r2, 0.0), 1.0)
    lam = -float(slope)
    valid = bool(n >= policy.min_points and r2 >= policy.min_r_squared and lam >= 0.0)
    return LyapunovFit(lam, window, r2, valid, int(n))


def cosine_envelope(qfi: TimeSeries, t: float) -> tuple[float, bool]:
    """``cos(2 S)/4 + 3/4`` with ``S`` the QSL action up to ``t``.

    The flag is false once ``2 S`` leaves the first quadrant.
    """
    arg = 2.0 * qsl_action(qfi, t)
    return 0.25 * math.cos(arg) + 0.75, arg <= math.pi / 2


def cosine_envelope_series(qfi: TimeSeries) -> tuple[np.ndarray, np.ndarray]:
    arg = 2.0 * cumulative_action(qfi)
    return 0.25 * np.cos(arg) + 0.75, arg <= math.pi / 2


def lyapunov_lower_bound(qfi: TimeSeries, t: float) -> float:
    """``(int_0^t sqrt(I_F))^2 / (2 t)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    return qsl_action(qfi, t) ** 2 / (2.0 * t)


def lyapunov_bound_series(qfi: TimeSeries) -> np.ndarray:
    """The bound at every grid time; the ``t -> 0`` limit (zero) at ``t = 0``."""
    s = cumulative_action(qfi)
    t = qfi.times
    out = np.zeros_like(s)
    pos = t > 0
    out[pos] = s[pos] ** 2 / (2.0 * t[pos])
    return out


def check_gqcrb(variance: TimeSeries, otoc: TimeSeries, qfi: TimeSeries,
                rate: TimeSeries | None = None, tol: float = 1e-9) -> GQCRBReport:
    """Check ``Var(rho_A) >= Odot^2 / (4 I_F)`` at every sample.

    ``Odot`` is the central difference of ``otoc`` unless an exact ``rate``
    series is passed. Samples with ``I_F = 0`` and ``Odot = 0`` are 0/0 and
    are skipped.
    """
    t = variance.times
    if not (np.array_equal(t, otoc.times) and np.array_equal(t, qfi.times)):
        raise ValueError("variance, otoc and qfi must share one time grid")
    odot = (rate if rate is not None else central_difference(otoc)).values
    odot = np.real(np.asarray(odot, dtype=complex))
    var = np.asarray(variance.values, dtype=float)
    q = np.asarray(qfi.values, dtype=float)
    zero_q = q <= 1e-14
    skipped = zero_q & (np.abs(odot) <= 1e-12)
    slack = np.empty_like(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        slack[~zero_q] = var[~zero_q] - odot[~zero_q] ** 2 / (4.0 * q[~zero_q])
    slack[zero_q & ~skipped] = -np.inf
    slack[skipped] = var[skipped]
    bad = np.flatnonzero(slack < -tol)
    violations = [(float(t[k]), float(slack[k])) for k in bad]
    return GQCRBReport(t, slack, skipped, violations, tol)
