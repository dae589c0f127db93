"""Fixed-step RK4 propagators for the Schrodinger and Lindblad equations.

Two representations are supported:

* dense vectors / matrices on the full composite space, for arbitrary
  time-dependent Hamiltonians and collapse operators;
* sector-resolved arrays for Hamiltonians that conserve both photon numbers
  (every rotating-frame drive without crosstalk).  A state is then an array
  of shape ``(3, dim_a, dim_b)``, and a density matrix is stored as
  displacement classes: for a photon shift ``(dn, dm)`` the array
  ``R[k, l, n, m] = rho[(k, n, m), (l, n - dn, m - dm)]``.  Qutrit channels
  and photon loss never mix classes, so only the classes a measurement needs
  have to be propagated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import NumericalGuardError
from .hamiltonian import QutritType, RotatingFrameDrive
from .hilbert import QUTRIT_DIM, CompositeOperators, ModeTruncation, qutrit_op


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control and invariant monitoring.

    With ``dt=None`` the step is chosen as ``T / ceil(T / dt_max)`` where
    ``dt_max = min(2 pi / (20 f_max), T / 1000)`` and ``f_max`` is the
    largest phase frequency in the Hamiltonian.  An explicit ``dt`` is used
    as given, with a final partial step.
    """

    dt: float | None = None
    method: str = "auto"
    monitor_every: int = 100
    norm_tol: float = 1e-9
    trace_tol: float = 1e-7
    hermiticity_tol: float = 1e-9
    positivity_tol: float = 1e-6
    steps_per_period: int = 20
    min_steps: int = 1000

    def __post_init__(self):
        if self.method not in ("auto", "rk4", "exact"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.monitor_every < 1:
            raise ValueError("monitor_every must be >= 1")

    def max_step(self, duration: float, f_max: float) -> float:
        bound = duration / self.min_steps
        if f_max > 0:
            bound = min(bound, 2 * math.pi / (self.steps_per_period * f_max))
        return bound

    def steps(self, duration: float, f_max: float = 0.0) -> list[float]:
        """Step sizes covering ``duration``."""
        if duration <= 0:
            return []
        if self.dt is None:
            n = math.ceil(duration / self.max_step(duration, f_max) - 1e-12)
            return [duration / n] * n
        n_full = int(duration // self.dt)
        steps = [self.dt] * n_full
        rest = duration - n_full * self.dt
        if rest > 1e-12 * duration:
            steps.append(rest)
        return steps


@dataclass(frozen=True)
class DecoherenceRates:
    """Common qutrit rate gamma and resonator decay rates (default 0.1 gamma)."""

    gamma: float = 0.0
    kappa_a: float | None = None
    kappa_b: float | None = None

    def __post_init__(self):
        if self.kappa_a is None:
            object.__setattr__(self, "kappa_a", 0.1 * self.gamma)
        if self.kappa_b is None:
            object.__setattr__(self, "kappa_b", 0.1 * self.gamma)
        if min(self.gamma, self.kappa_a, self.kappa_b) < 0:
            raise ValueError("decoherence rates must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return self.gamma == 0 and self.kappa_a == 0 and self.kappa_b == 0


def qutrit_channels(qutrit_type: QutritType, rates: DecoherenceRates) -> list[tuple[float, np.ndarray]]:
    """(rate, 3x3 jump operator) pairs for the qutrit.

    Lambda: f->e, f->g decay and e, f dephasing.  Delta adds e->g decay.
    Xi swaps the f->g decay for e->g.
    """
    qt = QutritType.parse(qutrit_type)
    g = rates.gamma
    ops = [qutrit_op("f", "e"), qutrit_op("f", "g")]
    if qt is QutritType.DELTA:
        ops.append(qutrit_op("e", "g"))
    elif qt is QutritType.XI:
        ops = [qutrit_op("f", "e"), qutrit_op("e", "g")]
    ops += [qutrit_op("e", "e"), qutrit_op("f", "f")]
    return [(g, op) for op in ops if g > 0]


def collapse_operators(
    qutrit_type: QutritType, rates: DecoherenceRates, truncation: ModeTruncation
) -> list[tuple[float, np.ndarray]]:
    """Dense (rate, operator) channels on the composite space."""
    ops = CompositeOperators(truncation)
    channels = [(rate, ops.qutrit(op)) for rate, op in qutrit_channels(qutrit_type, rates)]
    if rates.kappa_a > 0:
        channels.append((rates.kappa_a, ops.a))
    if rates.kappa_b > 0:
        channels.append((rates.kappa_b, ops.b))
    return channels


def dissipator(o: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """L[o] rho = o rho o^dag - (o^dag o rho + rho o^dag o) / 2."""
    if o.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {o.shape} vs {rho.shape}")
    od = o.conj().T
    odo = od @ o
    return o @ rho @ od - 0.5 * (odo @ rho + rho @ odo)


def rk4_step(rhs: Callable, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _as_source(H) -> Callable[[float], np.ndarray]:
    if callable(H):
        return H
    H = np.asarray(H)
    return lambda t: H


def integrate(
    rhs: Callable,
    y0: np.ndarray,
    t0: float,
    duration: float,
    cfg: IntegratorConfig,
    f_max: float = 0.0,
    monitor: Callable[[float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Fixed-step RK4, calling ``monitor(t, y)`` every ``cfg.monitor_every`` steps and at the end."""
    y = np.array(y0, dtype=complex, copy=True)
    t = t0
    steps = cfg.steps(duration, f_max)
    for i, dt in enumerate(steps, start=1):
        y = rk4_step(rhs, t, y, dt)
        t = t0 + sum(steps[:i]) if i == len(steps) else t + dt
        if monitor is not None and (i % cfg.monitor_every == 0 or i == len(steps)):
            monitor(t, y)
    return y


def _norm_guard(reference: float, cfg: IntegratorConfig, recorder=None):
    def check(t, psi):
        norm = float(np.linalg.norm(psi))
        if recorder is not None:
            recorder.record_state(t, psi, norm)
        if abs(norm - reference) > cfg.norm_tol:
            raise NumericalGuardError(
                f"step size too large: norm drift {abs(norm - reference):.3g} at t={t:.6g}"
            )

    return check


def propagate_state(
    H,
    psi0: np.ndarray,
    T: float,
    cfg: IntegratorConfig | None = None,
    t0: float = 0.0,
    f_max: float = 0.0,
    recorder=None,
) -> np.ndarray:
    """Integrate i d(psi)/dt = H(t) psi over [t0, t0 + T] on the dense space."""
    cfg = cfg or IntegratorConfig()
    source = _as_source(H)
    norm0 = float(np.linalg.norm(psi0))
    if abs(norm0 - 1.0) > 1e-9:
        raise ValueError(f"initial state not normalized (norm {norm0})")

    def rhs(t, psi):
        return -1j * (source(t) @ psi)

    return integrate(rhs, psi0, t0, T, cfg, f_max, _norm_guard(norm0, cfg, recorder))


def _density_guard(trace0: float, cfg: IntegratorConfig, recorder=None):
    def check(t, rho):
        trace = float(np.real(np.trace(rho)))
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if recorder is not None:
            recorder.record_density(t, rho, trace)
        if abs(trace - trace0) > cfg.trace_tol:
            raise NumericalGuardError(f"step size too large: trace drift {abs(trace - trace0):.3g} at t={t:.6g}")
        if herm > cfg.hermiticity_tol:
            raise NumericalGuardError(f"step size too large: hermiticity drift {herm:.3g} at t={t:.6g}")
        low = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
        if low < -cfg.positivity_tol:
            raise NumericalGuardError(f"step size too large: eigenvalue {low:.3g} at t={t:.6g}")

    return check


def lindblad_rhs(source: Callable, collapse_ops: Iterable[tuple[float, np.ndarray]]):
    prepared = []
    for rate, o in collapse_ops:
        if rate:
            od = o.conj().T
            prepared.append((rate, o, od, od @ o))

    def rhs(t, rho):
        h = source(t)
        out = -1j * (h @ rho - rho @ h)
        for rate, o, od, odo in prepared:
            out += rate * (o @ rho @ od - 0.5 * (odo @ rho + rho @ odo))
        return out

    return rhs


def propagate_density(
    H,
    collapse_ops: Iterable[tuple[float, np.ndarray]],
    rho0: np.ndarray,
    T: float,
    cfg: IntegratorConfig | None = None,
    t0: float = 0.0,
    f_max: float = 0.0,
    recorder=None,
) -> np.ndarray:
    """Integrate the Lindblad master equation on the dense space."""
    cfg = cfg or IntegratorConfig()
    rho0 = np.asarray(rho0, dtype=complex)
    trace0 = float(np.real(np.trace(rho0)))
    if abs(trace0 - 1.0) > 1e-9 or np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10:
        raise ValueError("initial density matrix must be Hermitian with unit trace")
    rhs = lindblad_rhs(_as_source(H), list(collapse_ops))
    return integrate(rhs, rho0, t0, T, cfg, f_max, _density_guard(trace0, cfg, recorder))


# --- sector-resolved propagation -------------------------------------------------


def _block_hamiltonian(drive: RotatingFrameDrive, t: float) -> np.ndarray:
    """Per-sector 3x3 Hamiltonians, shape (3, 3, dim_a, dim_b)."""
    coeff = drive.coefficients(t)
    da, db = drive.truncation.dim_a, drive.truncation.dim_b
    h = np.zeros((QUTRIT_DIM, QUTRIT_DIM, da, db), dtype=complex)
    for j, (upper, lower) in enumerate(drive.transitions):
        h[upper, lower] += coeff[j]
        h[lower, upper] += coeff[j].conj()
    return h


def propagate_sectors(
    drive: RotatingFrameDrive,
    psi0: np.ndarray,
    T: float,
    cfg: IntegratorConfig | None = None,
    t0: float = 0.0,
    recorder=None,
) -> np.ndarray:
    """RK4 for a photon-number conserving drive; psi has shape (3, dim_a, dim_b)."""
    if not drive.sector_diagonal:
        raise ValueError("sector propagation requires a photon-number conserving Hamiltonian")
    cfg = cfg or IntegratorConfig()
    psi0 = np.asarray(psi0, dtype=complex).reshape(drive.truncation.shape)
    norm0 = float(np.linalg.norm(psi0))

    def rhs(t, psi):
        return -1j * np.einsum("kqnm,qnm->knm", _block_hamiltonian(drive, t), psi)

    return integrate(rhs, psi0, t0, T, cfg, drive.max_frequency(), _norm_guard(norm0, cfg, recorder))


def propagate_exact(drive: RotatingFrameDrive, psi0: np.ndarray, T: float, t0: float = 0.0) -> np.ndarray:
    """Closed-system propagation by diagonalizing the drive-frame Hamiltonian.

    Input and output live in the interaction picture of the effective
    Hamiltonian, like the RK4 propagators.
    """
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    w, v = np.linalg.eigh(drive.static_hamiltonian())
    psi_s = drive.frame_phase(t0).conj() * psi0
    psi_s = v @ (np.exp(-1j * w * T) * (v.conj().T @ psi_s))
    return drive.frame_phase(t0 + T) * psi_s


class SectorDensity:
    """Displacement classes of a density matrix for photon-conserving dynamics."""

    def __init__(self, truncation: ModeTruncation, shifts: Iterable[tuple[int, int]], data: np.ndarray):
        self.truncation = truncation
        self.shifts = [tuple(s) for s in shifts]
        self.data = data

    @staticmethod
    def valid_mask(truncation: ModeTruncation, shift: tuple[int, int]) -> np.ndarray:
        dn, dm = shift
        n = np.arange(truncation.dim_a)[:, None]
        m = np.arange(truncation.dim_b)[None, :]
        return (n - dn >= 0) & (n - dn < truncation.dim_a) & (m - dm >= 0) & (m - dm < truncation.dim_b)

    @classmethod
    def from_pure(cls, psi: np.ndarray, truncation: ModeTruncation, shifts) -> "SectorDensity":
        psi = np.asarray(psi, dtype=complex).reshape(truncation.shape)
        shifts = [tuple(s) for s in shifts]
        data = np.zeros((len(shifts), QUTRIT_DIM, QUTRIT_DIM, truncation.dim_a, truncation.dim_b), dtype=complex)
        for c, (dn, dm) in enumerate(shifts):
            mask = cls.valid_mask(truncation, (dn, dm))
            n, m = np.nonzero(mask)
            data[c][:, :, n, m] = psi[:, n, m][:, None, :] * psi[:, n - dn, m - dm].conj()[None, :, :]
        return cls(truncation, shifts, data)

    @classmethod
    def from_dense(cls, rho: np.ndarray, truncation: ModeTruncation, shifts) -> "SectorDensity":
        r = np.asarray(rho).reshape(truncation.shape + truncation.shape)
        shifts = [tuple(s) for s in shifts]
        data = np.zeros((len(shifts), QUTRIT_DIM, QUTRIT_DIM, truncation.dim_a, truncation.dim_b), dtype=complex)
        for c, (dn, dm) in enumerate(shifts):
            n, m = np.nonzero(cls.valid_mask(truncation, (dn, dm)))
            data[c][:, :, n, m] = _gather(r, n, m, dn, dm)
        return cls(truncation, shifts, data)

    def element(self, k: int, n: int, m: int, l: int, n2: int, m2: int) -> complex:
        """<k n m| rho |l n2 m2> for a stored displacement class."""
        shift = (n - n2, m - m2)
        if shift in self.shifts:
            return complex(self.data[self.shifts.index(shift)][k, l, n, m])
        conj = (-shift[0], -shift[1])
        if conj in self.shifts:
            return complex(np.conj(self.data[self.shifts.index(conj)][l, k, n2, m2]))
        raise KeyError(f"displacement class {shift} not propagated")

    def diagonal_class(self) -> np.ndarray:
        return self.data[self.shifts.index((0, 0))]

    def trace(self) -> float:
        d = self.diagonal_class()
        return float(np.real(np.einsum("kknm->", d)))

    def to_dense(self) -> np.ndarray:
        """Dense matrix holding the stored classes (and their conjugates); others are zero."""
        tr = self.truncation
        r = np.zeros(tr.shape + tr.shape, dtype=complex)
        for c, (dn, dm) in enumerate(self.shifts):
            n, m = np.nonzero(self.valid_mask(tr, (dn, dm)))
            block = self.data[c][:, :, n, m]
            r[_pair_index(n, m, dn, dm)] = block
            if (dn, dm) != (0, 0) and (-dn, -dm) not in self.shifts:
                k, n1, m1, l, n2, m2 = _pair_index(n, m, dn, dm)
                r[l, n2, m2, k, n1, m1] = block.conj()
        return r.reshape(tr.dim, tr.dim)


def _pair_index(n: np.ndarray, m: np.ndarray, dn: int, dm: int):
    # advanced indices selecting rho[(k, n_i, m_i), (l, n_i - dn, m_i - dm)] as an array [k, l, i]
    k = np.arange(QUTRIT_DIM)[:, None, None]
    l = np.arange(QUTRIT_DIM)[None, :, None]
    return k, n[None, None, :], m[None, None, :], l, (n - dn)[None, None, :], (m - dm)[None, None, :]


def _gather(r: np.ndarray, n: np.ndarray, m: np.ndarray, dn: int, dm: int) -> np.ndarray:
    return r[_pair_index(n, m, dn, dm)]


class SectorLindblad:
    """Right-hand side of the master equation on displacement classes."""

    def __init__(self, drive: RotatingFrameDrive, qutrit_channels_, kappa_a: float, kappa_b: float, shifts):
        if not drive.sector_diagonal:
            raise ValueError("sector propagation requires a photon-number conserving Hamiltonian")
        self.drive = drive
        tr = drive.truncation
        self.shifts = [tuple(s) for s in shifts]
        da, db = tr.dim_a, tr.dim_b
        super_op = np.zeros((QUTRIT_DIM**2, QUTRIT_DIM**2), dtype=complex)
        eye = np.eye(QUTRIT_DIM)
        for rate, o in qutrit_channels_:
            k = 0.5 * rate * (o.conj().T @ o)
            super_op += rate * np.kron(o, o.conj()) - np.kron(k, eye) - np.kron(eye, k.T)
        self.super_op = super_op
        self.has_qutrit = bool(np.any(super_op))
        n = np.arange(da)[:, None] * np.ones((1, db))
        m = np.ones((da, 1)) * np.arange(db)[None, :]
        self.masks = np.stack([SectorDensity.valid_mask(tr, s) for s in self.shifts])
        # index map to read a (dim_a, dim_b) array at (n - dn, m - dm), zero outside
        flat = np.arange(da * db).reshape(da, db)
        self.shift_index = []
        for dn, dm in self.shifts:
            idx = np.full((da, db), da * db)
            mask = SectorDensity.valid_mask(tr, (dn, dm))
            nn, mm = np.nonzero(mask)
            idx[nn, mm] = flat[nn - dn, mm - dm]
            self.shift_index.append(idx)
        self.shift_index = np.stack(self.shift_index)
        self.kappa_a, self.kappa_b = kappa_a, kappa_b
        loss = np.zeros((len(self.shifts), da, db))
        gain_a = np.zeros((len(self.shifts), da, db))
        gain_b = np.zeros((len(self.shifts), da, db))
        for c, (dn, dm) in enumerate(self.shifts):
            loss[c] = -0.5 * (kappa_a * (2 * n - dn) + kappa_b * (2 * m - dm))
            na2 = np.clip(n - dn + 1, 0, None)
            mb2 = np.clip(m - dm + 1, 0, None)
            gain_a[c] = kappa_a * np.sqrt((n + 1) * na2)
            gain_b[c] = kappa_b * np.sqrt((m + 1) * mb2)
        self.loss = loss * self.masks
        self.gain_a = gain_a[:, :-1, :]
        self.gain_b = gain_b[:, :, :-1]

    def hamiltonians(self, t: float):
        h = _block_hamiltonian(self.drive, t)
        da, db = h.shape[2:]
        flat = np.concatenate([h.reshape(QUTRIT_DIM, QUTRIT_DIM, da * db), np.zeros((QUTRIT_DIM, QUTRIT_DIM, 1))], axis=2)
        shifted = flat[:, :, self.shift_index]  # (3, 3, C, da, db)
        return h, np.moveaxis(shifted, 2, 0)

    def __call__(self, t: float, r: np.ndarray) -> np.ndarray:
        h, hs = self.hamiltonians(t)
        out = -1j * (np.einsum("kqnm,cqlnm->cklnm", h, r) - np.einsum("ckqnm,cqlnm->cklnm", r, hs))
        if self.has_qutrit:
            c, _, _, da, db = r.shape
            out += np.einsum("ab,cbnm->canm", self.super_op, r.reshape(c, QUTRIT_DIM**2, da, db)).reshape(r.shape)
        if self.kappa_a or self.kappa_b:
            out += self.loss[:, None, None] * r
            if self.kappa_a:
                out[..., :-1, :] += self.gain_a[:, None, None] * r[..., 1:, :]
            if self.kappa_b:
                out[..., :, :-1] += self.gain_b[:, None, None] * r[..., :, 1:]
        return out


def _sector_guard(shifts, trace0: float, cfg: IntegratorConfig, recorder=None):
    diag = shifts.index((0, 0))

    def check(t, r):
        d = r[diag]
        trace = float(np.real(np.einsum("kknm->", d)))
        herm = float(np.max(np.abs(d - d.transpose(1, 0, 2, 3).conj())))
        if recorder is not None:
            recorder.record_sectors(t, d, trace)
        if abs(trace - trace0) > cfg.trace_tol:
            raise NumericalGuardError(f"step size too large: trace drift {abs(trace - trace0):.3g} at t={t:.6g}")
        if herm > cfg.hermiticity_tol:
            raise NumericalGuardError(f"step size too large: hermiticity drift {herm:.3g} at t={t:.6g}")
        blocks = np.moveaxis(d, (0, 1), (-2, -1))
        low = float(np.min(np.linalg.eigvalsh(0.5 * (blocks + blocks.conj().swapaxes(-1, -2)))))
        if low < -cfg.positivity_tol:
            raise NumericalGuardError(f"step size too large: eigenvalue {low:.3g} at t={t:.6g}")

    return check


def propagate_sector_density(
    drive: RotatingFrameDrive,
    channels: list[tuple[float, np.ndarray]],
    kappa_a: float,
    kappa_b: float,
    rho0: SectorDensity,
    T: float,
    cfg: IntegratorConfig | None = None,
    t0: float = 0.0,
    recorder=None,
) -> SectorDensity:
    """Lindblad propagation of the stored displacement classes.

    ``channels`` are 3x3 qutrit jump operators with rates; photon loss enters
    through ``kappa_a`` and ``kappa_b``.  Positivity is monitored on the
    3x3 diagonal blocks of the zero-shift class.
    """
    cfg = cfg or IntegratorConfig()
    if (0, 0) not in rho0.shifts:
        raise ValueError("the zero-shift class is required for trace monitoring")
    rhs = SectorLindblad(drive, channels, kappa_a, kappa_b, rho0.shifts)
    trace0 = rho0.trace()
    data = integrate(rhs, rho0.data, t0, T, cfg, drive.max_frequency(), _sector_guard(rho0.shifts, trace0, cfg, recorder))
    return SectorDensity(rho0.truncation, rho0.shifts, data)


class TrajectoryRecorder:
    """CSV dump of (t, selected populations, trace, norm) at monitor points."""

    def __init__(self, stream, truncation: ModeTruncation, populations: dict[str, tuple[int, int, int]]):
        self.truncation = truncation
        self.populations = populations
        self.writer = csv.writer(stream)
        self.writer.writerow(["t", *populations, "trace", "norm"])

    def _row(self, t, values, trace, norm):
        self.writer.writerow([f"{t:.10g}", *(f"{v:.12g}" for v in values), f"{trace:.12g}", f"{norm:.12g}"])

    def record_state(self, t, psi, norm):
        flat = np.asarray(psi).ravel()
        values = [abs(flat[self.truncation.index(*lab)]) ** 2 for lab in self.populations.values()]
        self._row(t, values, norm**2, norm)

    def record_density(self, t, rho, trace):
        values = [float(np.real(rho[i, i])) for i in (self.truncation.index(*lab) for lab in self.populations.values())]
        self._row(t, values, trace, math.sqrt(max(trace, 0.0)))

    def record_sectors(self, t, diag_class, trace):
        values = [float(np.real(diag_class[k, k, n, m])) for k, n, m in self.populations.values()]
        self._row(t, values, trace, math.sqrt(max(trace, 0.0)))
