"""Pauli algebra, local-operator embedding and the chaotic Ising Hamiltonian.

Qubit ordering is fixed globally: site 0 is the leftmost (most significant)
tensor factor, so the computational basis state ``|q0 q1 ... q_{N-1}>`` has
index ``sum_i q_i 2**(N-1-i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_SITES = 14

_PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class ChainParams:
    """Open Ising chain ``H = -J sum zz - h sum x - g sum z``."""

    n_sites: int
    coupling: float = 1.0
    transverse: float = 0.0
    longitudinal: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ValueError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        for name in ("coupling", "transverse", "longitudinal"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.boundary != "open":
            raise ValueError("only open boundary conditions are supported")

    @property
    def dim(self) -> int:
        return 2**self.n_sites


@dataclass(frozen=True)
class LocalOperator:
    """A ``2**k x 2**k`` matrix acting on ``k`` sites, listed in increasing order."""

    support: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        object.__setattr__(self, "support", support)
        matrix = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", matrix)
        if len(set(support)) != len(support) or list(support) != sorted(support):
            raise ValueError(f"support must be strictly increasing, got {support}")
        if any(s < 0 for s in support):
            raise ValueError("support sites must be non-negative")
        d = 2 ** len(support)
        if matrix.shape != (d, d):
            raise ValueError(f"matrix shape {matrix.shape} does not match support of size {len(support)}")

    @property
    def dagger(self) -> "LocalOperator":
        return LocalOperator(self.support, self.matrix.conj().T)

    def is_unitary(self, atol: float = 1e-10) -> bool:
        m = self.matrix
        return np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=atol)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return np.allclose(self.matrix, self.matrix.conj().T, atol=atol)


def pauli_matrix(axis: str) -> np.ndarray:
    """Return the 2x2 Pauli matrix for ``axis`` in {'x', 'y', 'z'} (or 'i')."""
    try:
        return _PAULI[axis.lower()].copy()
    except (KeyError, AttributeError):
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def pauli(axis: str, site: int) -> LocalOperator:
    return LocalOperator((site,), pauli_matrix(axis))


def pauli_string(spec: str | Sequence[tuple[str, int]]) -> LocalOperator:
    """Build a Pauli product such as ``"x0 z2"`` or ``[("x", 0), ("z", 2)]``."""
    if isinstance(spec, str):
        terms = []
        for token in spec.replace("*", " ").split():
            axis, site = token[0], token[1:]
            if not site.isdigit():
                raise ValueError(f"cannot parse Pauli token {token!r}")
            terms.append((axis, int(site)))
    else:
        terms = [(a, int(s)) for a, s in spec]
    if not terms:
        raise ValueError("empty Pauli string")
    terms.sort(key=lambda t: t[1])
    sites = [s for _, s in terms]
    if len(set(sites)) != len(sites):
        raise ValueError("repeated site in Pauli string")
    mat = np.array([[1.0 + 0j]])
    for axis, _ in terms:
        mat = np.kron(mat, pauli_matrix(axis))
    return LocalOperator(tuple(sites), mat)


def _check_support(support: Sequence[int], n_sites: int):
    if n_sites > MAX_SITES:
        raise ValueError(f"n_sites={n_sites} exceeds the dense limit of {MAX_SITES}")
    bad = [s for s in support if s >= n_sites]
    if bad:
        raise ValueError(f"support sites {bad} out of range for {n_sites} sites")


def embed(op: LocalOperator, n_sites: int) -> np.ndarray:
    """Dense ``2**N`` matrix of ``op`` with identity on every other site."""
    _check_support(op.support, n_sites)
    rest = [s for s in range(n_sites) if s not in op.support]
    full = np.kron(op.matrix, np.eye(2 ** len(rest), dtype=complex))
    # axes of `full` are ordered (support..., rest...) for rows and columns
    order = list(op.support) + rest
    perm = np.argsort(order)
    t = full.reshape((2,) * (2 * n_sites))
    t = t.transpose(list(perm) + [n_sites + p for p in perm])
    return t.reshape(2**n_sites, 2**n_sites)


def apply_local(op: LocalOperator, psi: np.ndarray, n_sites: int) -> np.ndarray:
    """Apply ``embed(op)`` to a state vector without forming the dense matrix.

    A 2-D ``psi`` is treated as a stack of states, one per row.
    """
    _check_support(op.support, n_sites)
    psi = np.asarray(psi, dtype=complex)
    lead = psi.shape[:-1]
    if psi.ndim > 2 or psi.shape[-1] != 2**n_sites:
        raise ValueError(f"state shape {psi.shape} does not match {n_sites} sites")
    k = len(op.support)
    off = len(lead)
    t = psi.reshape(lead + (2,) * n_sites)
    sites = [s + off for s in op.support]
    gate = op.matrix.reshape((2,) * (2 * k))
    out = np.tensordot(gate, t, axes=(list(range(k, 2 * k)), sites))
    # tensordot puts the gate's output axes first
    out = np.moveaxis(out, list(range(k + off)), sites + list(range(off)) if off else sites)
    return out.reshape(psi.shape)


def build_hamiltonian(p: ChainParams, max_sites: int = MAX_SITES) -> np.ndarray:
    """Dense real-symmetric Hamiltonian of the open Ising chain with both fields."""
    n = p.n_sites
    if n > max_sites:
        raise ValueError(f"n_sites={n} exceeds the configured maximum of {max_sites}")
    dim = 2**n
    idx = np.arange(dim)
    shifts = n - 1 - np.arange(n)
    spins = 1 - 2 * ((idx[:, None] >> shifts) & 1)  # +1 for |0>, -1 for |1>
    diag = -p.longitudinal * spins.sum(axis=1).astype(float)
    if n > 1:
        diag -= p.coupling * (spins[:, :-1] * spins[:, 1:]).sum(axis=1)
    h = np.zeros((dim, dim))
    h[idx, idx] = diag
    if p.transverse != 0.0:
        for shift in shifts:
            h[idx, idx ^ (1 << shift)] -= p.transverse
    return 0.5 * (h + h.T)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"commutator needs equal square matrices, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def is_hermitian(m: np.ndarray, rtol: float = 1e-12) -> bool:
    m = np.asarray(m)
    scale = np.max(np.abs(m)) if m.size else 0.0
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= rtol * max(scale, 1e-300))
