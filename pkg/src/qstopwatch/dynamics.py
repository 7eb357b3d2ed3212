"""Exact dynamics: spectra, ground states, quenches, propagation, partial traces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .operators import LocalOperator, apply_local, embed, is_hermitian

NORM_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and the unitary whose columns are eigenvectors.

    The eigenvectors stay real for a real symmetric operator.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @cached_property
    def adjoint(self) -> np.ndarray:
        """Contiguous ``V^dagger``, built once instead of on every propagation."""
        vh = np.ascontiguousarray(self.eigenvectors.conj().T)
        vh.setflags(write=False)
        return vh

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_sites(self) -> int:
        return int(round(np.log2(self.dim)))

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def to_eigenbasis(self, psi: np.ndarray) -> np.ndarray:
        return self.adjoint @ psi

    def from_eigenbasis(self, c: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ c

    def propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        """``exp(-iHt) psi``; negative ``t`` runs backwards."""
        phases = np.exp(-1j * self.eigenvalues * t)
        return self.eigenvectors @ (phases * (self.adjoint @ psi))

    def propagate_rows(self, c: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """``exp(-iHt)`` applied to eigenbasis coefficients, one row per time.

        ``c`` is either one coefficient vector or one row per time. The
        result is in the computational basis with shape ``(len(times), dim)``.
        """
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.eigenvalues))
        return (phases * c) @ self.eigenvectors.T

    def rows_to_eigenbasis(self, rows: np.ndarray) -> np.ndarray:
        return rows @ self.eigenvectors.conj()

    def apply_hamiltonian(self, psi: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ (self.eigenvalues * (self.adjoint @ psi))


@dataclass(frozen=True)
class Bipartition:
    """Split of ``n_sites`` qubits into the subsystem ``A`` and its complement ``B``."""

    n_sites: int
    sites_a: tuple[int, ...]

    def __post_init__(self):
        sites = tuple(sorted(int(s) for s in self.sites_a))
        object.__setattr__(self, "sites_a", sites)
        if len(set(sites)) != len(sites):
            raise ValueError("repeated site in subsystem")
        if any(s < 0 or s >= self.n_sites for s in sites):
            raise ValueError(f"subsystem sites {sites} out of range for {self.n_sites} sites")

    @classmethod
    def first(cls, n_sites: int, size: int = 1) -> "Bipartition":
        return cls(n_sites, tuple(range(size)))

    @property
    def sites_b(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.n_sites) if s not in self.sites_a)

    @property
    def dim_a(self) -> int:
        return 2 ** len(self.sites_a)

    @property
    def dim_b(self) -> int:
        return 2 ** (self.n_sites - len(self.sites_a))


def check_state(psi: np.ndarray, tol: float = NORM_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError("state must be a vector")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm={norm!r})")
    return psi


def check_density(rho: np.ndarray, tol: float = NORM_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("density matrix trace is not one")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def eigendecompose(op: np.ndarray) -> SpectralDecomposition:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("operator must be a square matrix")
    if not is_hermitian(op):
        raise ValueError("operator is not Hermitian")
    try:
        w, v = np.linalg.eigh(op)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    return SpectralDecomposition(np.ascontiguousarray(w), np.ascontiguousarray(v))


def ground_state(spec: SpectralDecomposition) -> tuple[np.ndarray, bool]:
    """Lowest eigenvector and whether the ground level looks degenerate.

    On degeneracy the lowest-index eigenvector is returned; the flag lets
    callers discard the point instead of silently picking a superposition.
    """
    e = spec.eigenvalues
    degenerate = bool(len(e) > 1 and e[1] - e[0] < 1e-8 * max(1.0, abs(e[0])))
    psi = np.array(spec.eigenvectors[:, 0])
    # fix the global phase so the largest component is real positive
    k = int(np.argmax(np.abs(psi)))
    psi *= np.abs(psi[k]) / psi[k]
    return psi, degenerate


def quench(psi: np.ndarray, op: LocalOperator, n_sites: int | None = None) -> np.ndarray:
    """Apply a local unitary kick to ``psi``."""
    if not op.is_unitary():
        raise ValueError("quench operator must be unitary")
    n = n_sites if n_sites is not None else int(round(np.log2(len(psi))))
    out = apply_local(op, psi, n)
    return out / np.linalg.norm(out)


def evolve(spec: SpectralDecomposition, psi0: np.ndarray, t: float) -> np.ndarray:
    return spec.propagate(np.asarray(psi0, dtype=complex), t)


def evolve_many(spec: SpectralDecomposition, psi0: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """States at every time as rows of a ``(len(times), dim)`` array."""
    return spec.propagate_rows(spec.to_eigenbasis(np.asarray(psi0, dtype=complex)), times)


def heisenberg(spec: SpectralDecomposition, b: LocalOperator | np.ndarray, t: float) -> np.ndarray:
    """``exp(iHt) B exp(-iHt)`` as a dense matrix."""
    full = embed(b, spec.n_sites) if isinstance(b, LocalOperator) else np.asarray(b)
    v = spec.eigenvectors
    ph = np.exp(1j * spec.eigenvalues * t)
    b_eig = spec.adjoint @ full @ v
    return v @ (ph[:, None] * b_eig * ph.conj()[None, :]) @ spec.adjoint


def heisenberg_apply(spec: SpectralDecomposition, b: LocalOperator, t: float, psi: np.ndarray) -> np.ndarray:
    """``B(t) psi`` using only state propagation."""
    n = spec.n_sites
    return spec.propagate(apply_local(b, spec.propagate(psi, t), n), -t)


def _coefficients(psi: np.ndarray, part: Bipartition) -> np.ndarray:
    """Reshape ``psi`` into a ``d_A x d_B`` coefficient matrix."""
    n = part.n_sites
    psi = np.asarray(psi)
    if psi.shape != (2**n,):
        raise ValueError(f"state of length {psi.shape} does not match {n} sites")
    t = psi.reshape((2,) * n)
    order = list(part.sites_a) + list(part.sites_b)
    if order != list(range(n)):
        t = t.transpose(order)
    return t.reshape(part.dim_a, part.dim_b)


def partial_trace(psi: np.ndarray, part: Bipartition) -> np.ndarray:
    """Reduced density matrix on ``A`` of the pure state ``psi``."""
    c = _coefficients(psi, part)
    rho = c @ c.conj().T
    return 0.5 * (rho + rho.conj().T)


def reduced_generator(h_full: np.ndarray | SpectralDecomposition | None, psi_t: np.ndarray,
                      part: Bipartition, h_psi: np.ndarray | None = None) -> np.ndarray:
    """Time derivative of the reduced state, ``tr_B(-i[H, |psi><psi|])``.

    Computed from state vectors only; ``h_full`` may be the dense Hamiltonian
    or its spectral decomposition. A precomputed ``H psi_t`` can be passed as
    ``h_psi`` instead (batched sweeps do this).
    """
    if h_psi is not None:
        pass
    elif h_full is None:
        raise ValueError("need h_full or h_psi")
    elif isinstance(h_full, SpectralDecomposition):
        h_psi = h_full.apply_hamiltonian(psi_t)
    else:
        h_psi = np.asarray(h_full) @ psi_t
    c = _coefficients(psi_t, part)
    f = _coefficients(-1j * h_psi, part)
    m = f @ c.conj().T
    return m + m.conj().T
