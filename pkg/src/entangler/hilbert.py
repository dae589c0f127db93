"""Truncated Fock-space and qutrit operator algebra.

Composite basis ordering is qutrit-major, then mode a, then mode b::

    index(level, n, m) = (level * (n_max_a + 1) + n) * (n_max_b + 1) + m

with level 0, 1, 2 for |g>, |e>, |f>.  A composite vector therefore reshapes
to ``(3, n_max_a + 1, n_max_b + 1)`` in C order, which the sector-resolved
propagators rely on.  Operators and states are plain dense numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

LEVELS = ("g", "e", "f")
QUTRIT_DIM = 3
TAIL_TOLERANCE = 1e-8


def level_index(level: str | int) -> int:
    if isinstance(level, (int, np.integer)):
        if not 0 <= level < QUTRIT_DIM:
            raise ValueError(f"qutrit level {level} out of range")
        return int(level)
    try:
        return LEVELS.index(level)
    except ValueError:
        raise ValueError(f"unknown qutrit level {level!r}") from None


@dataclass(frozen=True)
class ModeTruncation:
    """Photon cutoffs for the two resonators (dimension is cutoff + 1)."""

    n_max_a: int
    n_max_b: int

    def __post_init__(self):
        if self.n_max_a < 1 or self.n_max_b < 1:
            raise ValueError("degenerate mode: photon cutoff must be >= 1")

    @property
    def dim_a(self) -> int:
        return self.n_max_a + 1

    @property
    def dim_b(self) -> int:
        return self.n_max_b + 1

    @property
    def resonator_dim(self) -> int:
        return self.dim_a * self.dim_b

    @property
    def dim(self) -> int:
        return QUTRIT_DIM * self.resonator_dim

    @property
    def shape(self) -> tuple[int, int, int]:
        return (QUTRIT_DIM, self.dim_a, self.dim_b)

    def index(self, level: str | int, n: int, m: int) -> int:
        k = level_index(level)
        if not (0 <= n <= self.n_max_a and 0 <= m <= self.n_max_b):
            raise IndexError(f"Fock labels ({n}, {m}) outside truncation")
        return (k * self.dim_a + n) * self.dim_b + m

    def unravel(self, index: int) -> tuple[int, int, int]:
        if not 0 <= index < self.dim:
            raise IndexError(index)
        k, rest = divmod(index, self.resonator_dim)
        n, m = divmod(rest, self.dim_b)
        return k, n, m

    def resonator_index(self, n: int, m: int) -> int:
        return n * self.dim_b + m

    def raised(self, extra: int) -> "ModeTruncation":
        return ModeTruncation(self.n_max_a + extra, self.n_max_b + extra)

    @classmethod
    def for_labels(cls, photon_labels, headroom: int = 8, amplitudes=(), tol: float = TAIL_TOLERANCE) -> "ModeTruncation":
        """Largest label plus ``headroom``, raised until every coherent tail is below ``tol``."""
        cutoff = max(photon_labels) + headroom
        for amp in amplitudes:
            cutoff = max(cutoff, minimal_cutoff(amp, tol))
        return cls(cutoff, cutoff)


def ladder_operator(cutoff: int) -> np.ndarray:
    """Annihilation operator on Fock states |0>..|cutoff>."""
    if cutoff < 1:
        raise ValueError("degenerate mode: cutoff must be >= 1")
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def number_operator(cutoff: int) -> np.ndarray:
    if cutoff < 1:
        raise ValueError("degenerate mode: cutoff must be >= 1")
    return np.diag(np.arange(cutoff + 1, dtype=float)).astype(complex)


def fock_state(n: int, cutoff: int) -> np.ndarray:
    psi = np.zeros(cutoff + 1, dtype=complex)
    psi[n] = 1.0
    return psi


def coherent_tail(amplitude: complex, cutoff: int) -> float:
    """Poisson weight of photon numbers above ``cutoff``."""
    return float(poisson.sf(cutoff, abs(amplitude) ** 2))


def minimal_cutoff(amplitude: complex, tol: float = TAIL_TOLERANCE) -> int:
    cutoff = 1
    while coherent_tail(amplitude, cutoff) >= tol:
        cutoff += 1
    return cutoff


def check_tail(amplitude: complex, cutoff: int, tol: float = TAIL_TOLERANCE) -> None:
    tail = coherent_tail(amplitude, cutoff)
    if tail >= tol:
        raise ValueError(
            f"cutoff too small for amplitude {amplitude}: tail {tail:.3g} >= {tol:g}"
        )


def coherent_state(amplitude: complex, cutoff: int, tol: float = TAIL_TOLERANCE) -> np.ndarray:
    """Truncated coherent state, renormalized after truncation."""
    if cutoff < 1:
        raise ValueError("degenerate mode: cutoff must be >= 1")
    check_tail(amplitude, cutoff, tol)
    n = np.arange(cutoff + 1)
    if amplitude == 0:
        return fock_state(0, cutoff)
    r, theta = abs(amplitude), np.angle(amplitude)
    log_mag = n * np.log(r) - 0.5 * gammaln(n + 1) - 0.5 * r**2
    psi = np.exp(log_mag) * np.exp(1j * theta * n)
    return psi / np.linalg.norm(psi)


def displacement_operator(amplitude: complex, cutoff: int, tol: float = TAIL_TOLERANCE) -> np.ndarray:
    """exp(alpha a^dag - alpha^* a) exponentiated inside the truncated space."""
    check_tail(amplitude, cutoff, tol)
    a = ladder_operator(cutoff)
    return expm(amplitude * a.conj().T - np.conj(amplitude) * a)


def qutrit_op(bra_level: str | int | None = None, ket_level: str | int | None = None) -> np.ndarray:
    """|ket_level><bra_level| on the qutrit; identity when both are omitted."""
    if bra_level is None and ket_level is None:
        return np.eye(QUTRIT_DIM, dtype=complex)
    op = np.zeros((QUTRIT_DIM, QUTRIT_DIM), dtype=complex)
    op[level_index(ket_level), level_index(bra_level)] = 1.0
    return op


def projector(level: str | int) -> np.ndarray:
    return qutrit_op(level, level)


def embed(qutrit_op_: np.ndarray, a_op: np.ndarray, b_op: np.ndarray) -> np.ndarray:
    """Kronecker product qutrit (x) mode a (x) mode b in the fixed basis order."""
    if qutrit_op_.shape != (QUTRIT_DIM, QUTRIT_DIM):
        raise ValueError(f"qutrit operator must be 3x3, got {qutrit_op_.shape}")
    for op in (a_op, b_op):
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"mode operator must be square, got {op.shape}")
    return np.kron(np.kron(qutrit_op_, a_op), b_op)


class CompositeOperators:
    """Commonly used operators already embedded in the composite space."""

    def __init__(self, truncation: ModeTruncation):
        self.truncation = truncation
        self.id_a = np.eye(truncation.dim_a, dtype=complex)
        self.id_b = np.eye(truncation.dim_b, dtype=complex)
        self.a_mode = ladder_operator(truncation.n_max_a)
        self.b_mode = ladder_operator(truncation.n_max_b)
        eye3 = qutrit_op()
        self.a = embed(eye3, self.a_mode, self.id_b)
        self.b = embed(eye3, self.id_a, self.b_mode)
        self.n_a = self.a.conj().T @ self.a
        self.n_b = self.b.conj().T @ self.b

    def qutrit(self, op: np.ndarray) -> np.ndarray:
        return embed(op, self.id_a, self.id_b)

    def transition(self, to_level, from_level) -> np.ndarray:
        """|to><from| (x) 1."""
        return self.qutrit(qutrit_op(from_level, to_level))


def product_state(qutrit: np.ndarray, psi_a: np.ndarray, psi_b: np.ndarray) -> np.ndarray:
    return np.kron(np.kron(qutrit, psi_a), psi_b)


def basis_state(level: str | int, n: int, m: int, truncation: ModeTruncation) -> np.ndarray:
    psi = np.zeros(truncation.dim, dtype=complex)
    psi[truncation.index(level, n, m)] = 1.0
    return psi


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def partial_trace_qutrit(rho: np.ndarray) -> np.ndarray:
    """Trace out the qutrit, leaving the two-resonator density matrix."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    if rho.ndim != 2 or rho.shape[1] != d or d % QUTRIT_DIM:
        raise ValueError(f"not a composite density matrix: shape {rho.shape}")
    r = d // QUTRIT_DIM
    return np.einsum("kikj->ij", rho.reshape(QUTRIT_DIM, r, QUTRIT_DIM, r))


def hermiticity_error(op: np.ndarray) -> float:
    return float(np.max(np.abs(op - op.conj().T)))
