"""Per-field-value pipeline and the parallel sweep over the transverse field."""

from __future__ import annotations

import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.integrate import trapezoid
from threadpoolctl import threadpool_limits

from .. import __version__
from ..dynamics import Bipartition, eigendecompose, evolve_many, ground_state, partial_trace, quench, reduced_generator
from ..metrology import (
    TimeSeries,
    TruncationPolicy,
    central_difference,
    cumulative_action,
    intensive_ma2,
    purity,
    purity_rate,
    qfi_spectral,
    sandwich_bounds,
    variance_rho,
)
from ..operators import build_hamiltonian
from ..scrambling import (
    FitPolicy,
    check_gqcrb,
    cosine_envelope_series,
    fit_lyapunov,
    haar_otoc_estimate,
    lyapunov_bound_series,
    lyapunov_lower_bound,
    otoc_series,
)
from .config import SweepConfig, point_seed

log = logging.getLogger(__name__)

CHECK_TOL = 1e-9

# Statements checked at every point. The first five are the published
# inequalities; the last two are the versions that follow from the same
# premises without the factor/direction slips.
CHECKS = (
    "gqcrb",
    "cosine_envelope",
    "sandwich_lower",
    "sandwich_upper",
    "lyapunov_bound",
    "sandwich_spectral",
    "purity_floor",
)


@dataclass
class PointResult:
    h: float
    times: np.ndarray
    degenerate: bool
    gap: float
    series: dict[str, np.ndarray]
    fit: dict[str, Any]
    checks: dict[str, dict[str, Any]]
    haar: dict[str, Any] | None = None
    error: str | None = None

    @property
    def violations(self) -> list[dict[str, Any]]:
        out = []
        for name, check in self.checks.items():
            for t, slack in check["violations"]:
                out.append({"check": name, "h": self.h, "t": t, "slack": slack})
        return out

    def series_or_nan(self, key: str) -> np.ndarray:
        v = self.series.get(key)
        return np.full(self.times.shape, np.nan) if v is None else v

    def to_json(self) -> dict[str, Any]:
        return {
            "h": self.h,
            "degenerate": self.degenerate,
            "gap": self.gap,
            "error": self.error,
            "times": self.times,
            "series": self.series,
            "fit": self.fit,
            "checks": self.checks,
            "haar": self.haar,
        }


def _check(times: np.ndarray, slack: np.ndarray, mask: np.ndarray, tol: float) -> dict[str, Any]:
    """Collect the masked points whose slack falls below ``-tol``."""
    bad = np.flatnonzero(mask & (slack < -tol))
    finite = slack[mask & np.isfinite(slack)]
    return {
        "checked": int(mask.sum()),
        "min_slack": float(finite.min()) if finite.size else None,
        "violations": [[float(times[k]), float(slack[k])] for k in bad],
    }


def run_point(config: SweepConfig, h: float) -> PointResult:
    """Ground state, quench, exact evolution and every bound at one field value."""
    with threadpool_limits(limits=1):
        return _run_point(config, float(h))


def _run_point(config: SweepConfig, h: float) -> PointResult:
    n = config.n_sites
    times = np.asarray(config.t_grid, dtype=float)
    ham = build_hamiltonian(config.chain(h))
    spec = eigendecompose(ham)
    gs, degenerate = ground_state(spec)
    gap = float(spec.eigenvalues[1] - spec.eigenvalues[0]) if spec.dim > 1 else math.inf
    psi0 = quench(gs, config.operator("quench_op"), n)
    part = Bipartition(n, tuple(config.subsystem))
    pol = TruncationPolicy(config.eigen_floor)

    keys = ("qfi", "purity", "variance", "purity_rate", "sandwich_lower", "sandwich_upper",
            "p_min", "p_max", "ma2")
    s = {k: np.empty(times.size) for k in keys}
    states = evolve_many(spec, psi0, times)
    h_states = states @ ham  # H is real symmetric, so this is (H psi_t) row-wise
    for i, psi_t in enumerate(states):
        rho = partial_trace(psi_t, part)
        m = reduced_generator(None, psi_t, part, h_psi=h_states[i])
        p = np.linalg.eigvalsh(rho)
        s["qfi"][i] = qfi_spectral(rho, m, pol)
        s["purity"][i] = purity(rho)
        s["variance"][i] = variance_rho(rho)
        s["purity_rate"][i] = purity_rate(rho, m)
        s["sandwich_lower"][i], s["sandwich_upper"][i] = sandwich_bounds(rho, m, pol)
        s["p_min"][i], s["p_max"][i] = p[0], p[-1]
        s["ma2"][i] = intensive_ma2(m, n)

    qfi = TimeSeries(times, s["qfi"])
    pur = TimeSeries(times, s["purity"])
    s["renyi2"] = -np.log(s["purity"])
    s["purity_rate_fd"] = central_difference(pur).values
    s["action"] = cumulative_action(qfi)
    s["lyapunov_bound"] = lyapunov_bound_series(qfi)
    s["envelope"], envelope_ok = cosine_envelope_series(qfi)
    s["envelope_valid"] = envelope_ok.astype(float)

    otoc_psi = gs if config.otoc_state == "ground" else psi0
    otoc = otoc_series(spec, otoc_psi, config.operator("otoc_a"), config.operator("otoc_b"), times)
    s["otoc_re"], s["otoc_im"] = otoc.real.copy(), otoc.imag.copy()
    fit = fit_lyapunov(TimeSeries(times, otoc.real),
                       FitPolicy(config.fit_lo, config.fit_hi, config.fit_min_points, config.fit_min_r2))
    fit_valid = fit.valid and not degenerate

    checks: dict[str, dict[str, Any]] = {}
    everywhere = np.ones(times.size, dtype=bool)
    # exact rate 2 tr(rho_A M_A); central differences on the sweep grid carry
    # O(dt^2) errors comparable to the slack and are kept only as a diagnostic
    var = TimeSeries(times, s["variance"])
    g = check_gqcrb(var, pur, qfi, rate=TimeSeries(times, s["purity_rate"]), tol=CHECK_TOL)
    checks["gqcrb"] = _check(times, g.slack, ~g.skipped, CHECK_TOL)
    g_fd = check_gqcrb(var, pur, qfi, tol=CHECK_TOL)
    fd_slack = g_fd.slack[~g_fd.skipped & np.isfinite(g_fd.slack)]
    checks["gqcrb"]["finite_difference_min_slack"] = float(fd_slack.min()) if fd_slack.size else None

    qubit = part.dim_a == 2
    checks["cosine_envelope"] = _check(times, s["envelope"] - s["purity"], envelope_ok & qubit, CHECK_TOL)

    resolved = s["p_min"] > config.sandwich_pmin
    checks["sandwich_lower"] = _check(times, s["qfi"] - s["sandwich_lower"], resolved, CHECK_TOL)
    checks["sandwich_upper"] = _check(times, s["sandwich_upper"] - s["qfi"], resolved, CHECK_TOL)
    checks["sandwich_spectral"] = _check(times, 2.0 * s["sandwich_upper"] - s["qfi"], resolved, CHECK_TOL)

    if fit_valid:
        bound_mid = lyapunov_lower_bound(qfi, fit.midpoint)
        slack = np.array([fit.lambda_q - bound_mid])
        checks["lyapunov_bound"] = _check(np.array([fit.midpoint]), slack, np.array([True]), CHECK_TOL)
        checks["lyapunov_bound"]["bound_at_midpoint"] = bound_mid
    else:
        checks["lyapunov_bound"] = {"checked": 0, "min_slack": None, "violations": [],
                                    "skipped": "degenerate ground state" if degenerate else "no valid fit"}

    # single-qubit speed limit integrated from the actual starting purity
    theta0 = math.acos(min(max(4.0 * s["purity"][0] - 3.0, -1.0), 1.0))
    floor = 0.75 + 0.25 * np.cos(np.minimum(theta0 + 2.0 * s["action"], math.pi))
    s["purity_floor"] = floor
    checks["purity_floor"] = _check(times, s["purity"] - floor, everywhere & qubit, CHECK_TOL)

    haar = None
    if config.haar_samples > 0:
        est = haar_otoc_estimate(spec, psi0, part, times, n_samples=config.haar_samples,
                                 seed=point_seed(config.seed, h))
        haar = {"mean": np.array([e.mean for e in est]), "std_error": np.array([e.std_error for e in est]),
                "samples": config.haar_samples,
                "correlation": float(np.corrcoef([e.mean for e in est], s["purity"])[0, 1])
                if times.size > 2 else None}

    fit_json = {"lambda_q": fit.lambda_q, "t_lo": fit.window[0], "t_hi": fit.window[1],
                "r_squared": fit.r_squared, "n_points": fit.n_points, "valid": fit_valid}
    return PointResult(h, times, degenerate, gap, s, fit_json, checks, haar)


def _safe_point(config: SweepConfig, h: float) -> PointResult:
    try:
        return run_point(config, h)
    except Exception as exc:  # recorded per cell; the sweep carries on
        log.error("point h=%r failed: %s", h, exc)
        times = np.asarray(config.t_grid, dtype=float)
        return PointResult(float(h), times, False, math.nan, {}, {"valid": False, "lambda_q": math.nan},
                           {}, None, error="".join(traceback.format_exception_only(type(exc), exc)).strip())


@dataclass
class SweepResult:
    config: SweepConfig
    h_grid: np.ndarray
    t_grid: np.ndarray
    points: list[PointResult]
    qfi_heatmap: np.ndarray = field(init=False)
    bound_heatmap: np.ndarray = field(init=False)
    purity_heatmap: np.ndarray = field(init=False)
    ma2_heatmap: np.ndarray = field(init=False)
    lambda_curve: np.ndarray = field(init=False)

    def __post_init__(self):
        def stack(key):
            return np.column_stack([p.series_or_nan(key) for p in self.points])

        self.qfi_heatmap = stack("qfi")
        self.bound_heatmap = stack("lyapunov_bound")
        self.purity_heatmap = stack("purity")
        self.ma2_heatmap = stack("ma2")
        self.lambda_curve = np.array([p.fit["lambda_q"] if p.fit.get("valid") else math.nan
                                      for p in self.points])

    @property
    def degenerate(self) -> np.ndarray:
        return np.array([p.degenerate for p in self.points])

    @property
    def failed(self) -> dict[float, str]:
        return {p.h: p.error for p in self.points if p.error}

    @property
    def violations(self) -> list[dict[str, Any]]:
        return [v for p in self.points for v in p.violations]

    def time_average(self, heatmap: np.ndarray, t_max: float | None = None) -> np.ndarray:
        """Trapezoidal mean over ``t <= t_max`` for every column."""
        t_max = self.config.average_t_max if t_max is None else t_max
        keep = self.t_grid <= t_max + 1e-12
        t = self.t_grid[keep]
        if t.size < 2:
            return heatmap[keep].mean(axis=0)
        return trapezoid(heatmap[keep], t, axis=0) / (t[-1] - t[0])

    def provenance(self) -> dict[str, Any]:
        return {"config_hash": self.config.hash(), "code_version": __version__, "seed": self.config.seed}

    def violation_summary(self) -> dict[str, Any]:
        counts = {name: 0 for name in CHECKS}
        checked = {name: 0 for name in CHECKS}
        for p in self.points:
            for name, c in p.checks.items():
                counts[name] += len(c["violations"])
                checked[name] += c["checked"]
        return {"counts": counts, "checked": checked}


def run_sweep(config: SweepConfig) -> SweepResult:
    """Evaluate every field value, fanning out over ``config.workers`` processes.

    Results are keyed by field value, so completion order never matters.
    """
    hs = [float(h) for h in config.h_grid]
    if config.workers > 1 and len(hs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            done = dict(zip(hs, pool.map(_safe_point, [config] * len(hs), hs)))
    else:
        done = {h: _safe_point(config, h) for h in hs}
    points = [done[h] for h in hs]
    return SweepResult(config, np.asarray(hs), np.asarray(config.t_grid, dtype=float), points)
