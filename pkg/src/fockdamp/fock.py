"""Fock-basis states and operators for one bosonic mode with a hard cutoff.

Basis ordering is ascending photon number |0>, |1>, ..., |nmax> everywhere.
Truncated coherent states are deliberately NOT renormalized: the cutoff is
chosen so the discarded Poisson tail is negligible, and keeping the vacuum
weight exactly e^{-|alpha|^2} anchors the analytic long-time predictions.
All values are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

from .channels import JumpChannel
from .errors import CutoffTooSmall, DimensionMismatch

_HERM_TOL = 1e-12
_NORM_TOL = 1e-12


@dataclass(frozen=True)
class FockCutoff:
    """Highest retained Fock level; the basis has nmax + 1 states."""

    nmax: int

    def __post_init__(self):
        if not isinstance(self.nmax, (int, np.integer)) or self.nmax < 1:
            raise ValueError(f"nmax must be an integer >= 1, got {self.nmax!r}")

    @property
    def dim(self) -> int:
        return int(self.nmax) + 1


def _frozen_array(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian matrix over the truncated basis with trace ~ 1 - trace_deficit.

    ``trace_deficit`` records probability mass lost to truncation at
    construction time (kept as metadata, never renormalized away).
    ``trace_tol`` exists so evolved states, whose trace has drifted at the
    integrator's monitored level, can still be wrapped; primary construction
    paths use the strict default.
    """

    entries: np.ndarray
    trace_deficit: float = 0.0
    trace_tol: float = field(default=1e-12, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {m.shape}")
        asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if asym >= _HERM_TOL:
            raise ValueError(f"matrix is not Hermitian: max asymmetry {asym:.3e}")
        expected = 1.0 - self.trace_deficit
        err = abs(np.trace(m).real - expected)
        if not err <= self.trace_tol:
            raise ValueError(
                f"trace {np.trace(m).real!r} differs from {expected!r} by {err:.3e} "
                f"(allowed {self.trace_tol:.1e})"
            )
        object.__setattr__(self, "entries", _frozen_array(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def populations(self) -> np.ndarray:
        return np.diag(self.entries).real.copy()

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue; positivity check on demand, not per step."""
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass(frozen=True)
class PureState:
    """Unit-norm state vector over the truncated basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=np.complex128)
        if v.ndim != 1 or v.size < 1:
            raise DimensionMismatch(f"state vector must be 1-D, got shape {v.shape}")
        dev = abs(np.linalg.norm(v) - 1.0)
        if dev >= _NORM_TOL:
            raise ValueError(f"state norm deviates from 1 by {dev:.3e}")
        object.__setattr__(self, "amplitudes", _frozen_array(v))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def annihilation_matrix(cutoff: FockCutoff) -> np.ndarray:
    """Lowering operator: entries sqrt(n) on the superdiagonal."""
    return np.diag(np.sqrt(np.arange(1, cutoff.dim)), 1).astype(np.complex128)


def creation_matrix(cutoff: FockCutoff) -> np.ndarray:
    return annihilation_matrix(cutoff).conj().T


def number_matrix(cutoff: FockCutoff) -> np.ndarray:
    return np.diag(np.arange(cutoff.dim).astype(np.complex128))


def anharmonicity_matrix(cutoff: FockCutoff) -> np.ndarray:
    """a^dag a^dag a a = diag(n(n-1)); the Kerr Hamiltonian up to its strength."""
    n = np.arange(cutoff.dim)
    return np.diag((n * (n - 1)).astype(np.complex128))


def jump_matrix(channel: JumpChannel, cutoff: FockCutoff) -> np.ndarray:
    """(A^dag)^j A^k as an explicit operator product on the truncated basis."""
    k = channel.annihilation_power
    if k > cutoff.nmax:
        raise DimensionMismatch(
            f"a^{k} annihilates the whole truncated space at nmax={cutoff.nmax}"
        )
    a = annihilation_matrix(cutoff)
    ad = a.conj().T
    out = np.eye(cutoff.dim, dtype=np.complex128)
    for _ in range(channel.creation_power):
        out = out @ ad
    for _ in range(k):
        out = out @ a
    return out


def poisson_tail(mean_photons: float, nmax: int) -> float:
    """P(N > nmax) for Poisson mean ``mean_photons`` (regularized gamma, no 1-cdf cancellation)."""
    if mean_photons == 0.0:
        return 0.0
    return float(gammainc(nmax + 1, mean_photons))


def min_cutoff_for_coherent(alpha: complex, tail_tol: float = 1e-12, margin: int = 2) -> FockCutoff:
    """Smallest cutoff keeping the coherent-state tail below tail_tol, plus a safety margin."""
    mean = abs(alpha) ** 2
    n = max(1, math.ceil(mean))
    while poisson_tail(mean, n) >= tail_tol:
        n += 1
        if n > 100_000:
            raise ValueError("cutoff search did not converge")
    return FockCutoff(n + margin)


def coherent_amplitudes(alpha: complex, cutoff: FockCutoff) -> np.ndarray:
    """Truncated expansion coefficients e^{-|a|^2/2} alpha^n / sqrt(n!) (no checks)."""
    c = np.empty(cutoff.dim, dtype=np.complex128)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, cutoff.dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    return c


def coherent_state(alpha: complex, cutoff: FockCutoff, tail_tol: float = 1e-12) -> PureState:
    tail = poisson_tail(abs(alpha) ** 2, cutoff.nmax)
    if tail >= tail_tol:
        raise CutoffTooSmall(tail, tail_tol, cutoff.nmax)
    return PureState(coherent_amplitudes(alpha, cutoff))


def coherent_density(alpha: complex, cutoff: FockCutoff, tail_tol: float = 1e-12) -> DensityMatrix:
    """Truncated |alpha><alpha|, not renormalized; the tail deficit is recorded."""
    tail = poisson_tail(abs(alpha) ** 2, cutoff.nmax)
    if tail >= tail_tol:
        raise CutoffTooSmall(tail, tail_tol, cutoff.nmax)
    c = coherent_amplitudes(alpha, cutoff)
    rho = np.outer(c, c.conj())
    deficit = 1.0 - float(np.trace(rho).real)
    return DensityMatrix(rho, trace_deficit=deficit)


def fock_state(n: int, cutoff: FockCutoff) -> PureState:
    if not 0 <= n <= cutoff.nmax:
        raise DimensionMismatch(f"level {n} outside basis 0..{cutoff.nmax}")
    v = np.zeros(cutoff.dim, dtype=np.complex128)
    v[n] = 1.0
    return PureState(v)


def fock_density(n: int, cutoff: FockCutoff) -> DensityMatrix:
    v = fock_state(n, cutoff).amplitudes
    return DensityMatrix(np.outer(v, v.conj()))
