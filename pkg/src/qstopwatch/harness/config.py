"""Sweep configuration: defaults, file loading, overrides and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..operators import ChainParams, LocalOperator, pauli_string

# keys that change how a run is scheduled or where it lands, never its numbers
RUNTIME_KEYS = ("workers", "output_dir")


def grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive uniform grid, rounded so that e.g. ``0.05 * k`` prints cleanly."""
    n = int(round((stop - start) / step))
    if n < 0 or not np.isclose(start + n * step, stop, rtol=0, atol=1e-9 * max(1.0, abs(step))):
        raise ValueError(f"({start}, {stop}) is not an integer number of steps of {step}")
    return [round(start + k * step, 12) + 0.0 for k in range(n + 1)]


@dataclass
class SweepConfig:
    n_sites: int = 11
    coupling: float = 1.0
    longitudinal: float = 0.4
    h_grid: list[float] = field(default_factory=lambda: grid(-2.0, 2.0, 0.05))
    t_grid: list[float] = field(default_factory=lambda: grid(0.0, 10.0, 0.05))
    subsystem: list[int] = field(default_factory=lambda: [0])
    quench_op: str = "x0"
    otoc_a: str = "x0"
    otoc_b: str = "z1"
    otoc_state: str = "ground"
    fit_lo: float = 0.35
    fit_hi: float = 0.9
    fit_min_points: int = 5
    fit_min_r2: float = 0.97
    average_t_max: float = 5.0
    eigen_floor: float = 1e-12
    sandwich_pmin: float = 1e-6
    haar_samples: int = 0
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        self.h_grid = [float(h) for h in _expand_grid(self.h_grid)]
        self.t_grid = [float(t) for t in _expand_grid(self.t_grid)]
        self.subsystem = sorted(int(s) for s in self.subsystem)
        self.validate()

    def validate(self):
        for name in ("h_grid", "t_grid"):
            g = np.asarray(getattr(self, name))
            if g.size == 0:
                raise ValueError(f"{name} is empty")
            if np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if not self.subsystem or len(set(self.subsystem)) != len(self.subsystem):
            raise ValueError("subsystem must be a non-empty list of distinct sites")
        if len(self.subsystem) >= self.n_sites or any(not 0 <= s < self.n_sites for s in self.subsystem):
            raise ValueError("subsystem must be a proper subset of the chain sites")
        if self.otoc_state not in ("ground", "quenched"):
            raise ValueError("otoc_state must be 'ground' or 'quenched'")
        if not 0 < self.fit_lo < self.fit_hi <= 1:
            raise ValueError("need 0 < fit_lo < fit_hi <= 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        for spec in (self.quench_op, self.otoc_a, self.otoc_b):
            op = pauli_string(spec)
            if max(op.support) >= self.n_sites:
                raise ValueError(f"operator {spec!r} acts outside the chain")

    def chain(self, h: float) -> ChainParams:
        return ChainParams(self.n_sites, self.coupling, float(h), self.longitudinal)

    def operator(self, name: str) -> LocalOperator:
        return pauli_string(getattr(self, name))

    def canonical(self) -> dict[str, Any]:
        """Config echo without runtime-only keys; this is what gets hashed."""
        d = dataclasses.asdict(self)
        for k in RUNTIME_KEYS:
            d.pop(k)
        return d

    def hash(self) -> str:
        return config_hash(self.canonical())

    def replace(self, **changes) -> "SweepConfig":
        return dataclasses.replace(self, **changes)


def config_hash(canonical: dict[str, Any]) -> str:
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _expand_grid(g) -> list[float]:
    """Accept an explicit list or a ``{start, stop, step}`` mapping."""
    if isinstance(g, dict):
        try:
            return grid(float(g["start"]), float(g["stop"]), float(g["step"]))
        except KeyError as exc:
            raise ValueError(f"grid mapping needs start/stop/step, missing {exc}") from None
    if np.isscalar(g):
        return [float(g)]
    return list(g)


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> SweepConfig:
    """Read a YAML or JSON config (keys as in :class:`SweepConfig`) and apply overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text) if str(path).endswith(".json") else (yaml.safe_load(text) or {})
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a mapping")
    data.update(overrides or {})
    known = {f.name for f in dataclasses.fields(SweepConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return SweepConfig(**data)


def parse_override(item: str) -> tuple[str, Any]:
    """``key=value`` with the value parsed as YAML (numbers, lists, mappings)."""
    if "=" not in item:
        raise ValueError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def point_seed(seed: int, h: float) -> int:
    """Per-point seed derived from the global seed and the field value."""
    digest = hashlib.sha256(f"{int(seed)}:{float(h)!r}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
