"""Hamiltonian builders, dispersive shifts and drive-frequency planning.

All frequencies are in units of the coupling scale g and times in 1/g.
Level energies of the dispersive effective Hamiltonian are linear in the
photon numbers for each qutrit level, so they are exposed as vectorized
functions of ``(n, m)`` and as dense diagonal operators.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np

from .hilbert import (
    LEVELS,
    QUTRIT_DIM,
    CompositeOperators,
    ModeTruncation,
    level_index,
    qutrit_op,
)

RESONANCE_FLOOR = 1e-6
DISPERSIVE_RATIO = 0.2


class QutritType(str, enum.Enum):
    LAMBDA = "Lambda"
    DELTA = "Delta"
    XI = "Xi"

    @classmethod
    def parse(cls, value) -> "QutritType":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == key or member.name.lower() == key:
                return member
        raise ValueError(f"unknown qutrit type {value!r}")


class Schedule(str, enum.Enum):
    SIMULTANEOUS = "Simultaneous"
    SEQUENTIAL = "Sequential"

    @classmethod
    def parse(cls, value) -> "Schedule":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown schedule {value!r}")


class ResonanceError(ValueError):
    """A perturbative denominator vanishes."""


@dataclass(frozen=True)
class TargetSpec:
    """Goal state cos(phi)|n1 m1> + sin(phi)|n2 m2> and the coherent amplitudes."""

    n_1: int
    m_1: int
    n_2: int
    m_2: int
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if min(self.n_1, self.m_1, self.n_2, self.m_2) < 0:
            raise ValueError("Fock labels must be nonnegative")
        if (self.n_1, self.m_1) == (self.n_2, self.m_2):
            raise ValueError("target Fock pairs must differ")

    @classmethod
    def noon(cls, N: int, amplitude: float = 1.0) -> "TargetSpec":
        """(|0 N> + |N 0>)/sqrt(2) for equal amplitudes."""
        return cls(0, N, N, 0, amplitude, amplitude)

    @classmethod
    def bell(cls) -> "TargetSpec":
        """(|00> + |11>)/sqrt(2) at alpha = beta = 1."""
        return cls(0, 0, 1, 1, 1.0, 1.0)

    @property
    def first(self) -> tuple[int, int]:
        return (self.n_1, self.m_1)

    @property
    def second(self) -> tuple[int, int]:
        return (self.n_2, self.m_2)

    @property
    def photon_labels(self) -> tuple[int, ...]:
        return (self.n_1, self.m_1, self.n_2, self.m_2)

    def default_truncation(self, headroom: int = 8) -> ModeTruncation:
        return ModeTruncation.for_labels(self.photon_labels, headroom, (self.alpha, self.beta))

    def check_truncation(self, truncation: ModeTruncation) -> None:
        if max(self.n_1, self.n_2) > truncation.n_max_a or max(self.m_1, self.m_2) > truncation.n_max_b:
            raise ValueError("target Fock labels lie above the truncation")


@dataclass(frozen=True)
class SystemParams:
    omega_a: float
    omega_b: float
    omega_e: float
    omega_f: float
    g_a: float = 1.0
    g_b: float = 1.0
    g_ab: float = 0.0
    qutrit_type: QutritType = QutritType.LAMBDA
    truncation: ModeTruncation | None = None

    def __post_init__(self):
        object.__setattr__(self, "qutrit_type", QutritType.parse(self.qutrit_type))
        for name in ("omega_a", "omega_b", "omega_e", "omega_f"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def figure3(cls, **overrides) -> "SystemParams":
        """omega_e=20, omega_f=100, omega_a=70, omega_b=89, g_a=g_b=1."""
        base = cls(omega_a=70.0, omega_b=89.0, omega_e=20.0, omega_f=100.0)
        return replace(base, **overrides)

    @classmethod
    def xi_table(cls, **overrides) -> "SystemParams":
        """Figure-3 resonators with a ladder qutrit at omega_e=80, omega_f=180."""
        base = cls(omega_a=70.0, omega_b=89.0, omega_e=80.0, omega_f=180.0, qutrit_type=QutritType.XI)
        return replace(base, **overrides)

    def with_truncation(self, truncation: ModeTruncation) -> "SystemParams":
        return replace(self, truncation=truncation)

    def bare_levels(self) -> np.ndarray:
        return np.array([0.0, self.omega_e, self.omega_f])

    def mode_frequency(self, mode: str) -> float:
        return {"a": self.omega_a, "b": self.omega_b}[mode]

    def mode_coupling(self, mode: str) -> float:
        return {"a": self.g_a, "b": self.g_b}[mode]

    def couplings(self) -> list[tuple[str, str, str]]:
        """Dipole-allowed (lower, upper, mode) triples for this qutrit topology."""
        if self.qutrit_type is QutritType.LAMBDA:
            return [("e", "f", "a"), ("g", "f", "b")]
        if self.qutrit_type is QutritType.XI:
            return [("g", "e", "a"), ("e", "f", "b")]
        return [(lo, hi, mode) for mode in "ab" for lo, hi in (("g", "e"), ("g", "f"), ("e", "f"))]

    def check_dispersive(self) -> None:
        """Warn when a rotating-wave denominator is not large against its coupling."""
        levels = self.bare_levels()
        for lo, hi, mode in self.couplings():
            gap = levels[level_index(hi)] - levels[level_index(lo)] - self.mode_frequency(mode)
            coupling = abs(self.mode_coupling(mode))
            if coupling and (gap == 0 or coupling / abs(gap) >= DISPERSIVE_RATIO):
                warnings.warn(
                    f"weak dispersive regime on {lo}<->{hi} via mode {mode}: "
                    f"g/detuning = {coupling / abs(gap) if gap else np.inf:.3g}",
                    RuntimeWarning,
                    stacklevel=2,
                )


@dataclass(frozen=True)
class DriveSpec:
    """Two-tone rectangular drive.  ``None`` frequencies are planned from the target."""

    Omega: float
    omega_1: float | None = None
    omega_2: float | None = None
    epsilon: float = 0.0
    epsilon_prime: float = 0.0
    schedule: Schedule = Schedule.SIMULTANEOUS

    def __post_init__(self):
        if self.Omega <= 0:
            raise ValueError("Omega must be positive")
        object.__setattr__(self, "schedule", Schedule.parse(self.schedule))

    @property
    def pulse_duration(self) -> float:
        return np.pi / (2.0 * self.Omega)

    @property
    def total_duration(self) -> float:
        if self.schedule is Schedule.SEQUENTIAL:
            return 2.0 * self.pulse_duration
        return self.pulse_duration

    @property
    def amplitudes(self) -> tuple[float, float]:
        return (self.Omega * (1.0 - self.epsilon), self.Omega * (1.0 + self.epsilon))


def theta_step(k: str, j: str, levels: np.ndarray) -> int:
    """+1 when level k lies above level j, -1 otherwise."""
    return 1 if levels[level_index(k)] > levels[level_index(j)] else -1


def _checked_ratio(num: float, den: float, what: str) -> float:
    if abs(den) <= RESONANCE_FLOOR:
        raise ResonanceError(f"resonant, dispersive theory invalid ({what} denominator {den:g})")
    return num / den


@dataclass(frozen=True)
class DispersiveShifts:
    """Second-order energy shifts.

    For Lambda and Xi qutrits the four named shifts carry the meaning of the
    respective effective Hamiltonians.  For Delta qutrits ``table`` maps
    ``(mode, k, j)`` over ordered level pairs to g_l^2 / (Theta(kj)(w_k - w_j - w_l)),
    and the named shifts hold the Lambda-limit entries (fe for a, fg for b).
    """

    params: SystemParams
    chi_a: float
    chi_a_prime: float
    chi_b: float
    chi_b_prime: float
    table: dict = field(default_factory=dict)

    @property
    def qutrit_type(self) -> QutritType:
        return self.params.qutrit_type

    @property
    def ratio(self) -> float:
        return self.chi_a / self.chi_b

    def chi(self, mode: str, k: str, j: str) -> float:
        return self.table[(mode, k, j)]

    def level_energies(self, n, m) -> np.ndarray:
        """Diagonal of the effective Hamiltonian for |g n m>, |e n m>, |f n m>.

        Returns an array of shape ``(3,) + broadcast(n, m).shape``.
        """
        n = np.asarray(n, dtype=float)
        m = np.asarray(m, dtype=float)
        p = self.params
        free = n * p.omega_a + m * p.omega_b
        sa = self.chi_a + self.chi_a_prime
        sb = self.chi_b + self.chi_b_prime
        qt = self.qutrit_type
        if qt is QutritType.LAMBDA:
            e_g = free - self.chi_b_prime - sb * m
            e_e = free + p.omega_e - self.chi_a_prime - sa * n
            e_f = free + p.omega_f + self.chi_a + self.chi_b + sa * n + sb * m
        elif qt is QutritType.XI:
            e_g = free - self.chi_a_prime - sa * n
            e_e = free + p.omega_e + self.chi_a - self.chi_b_prime + sa * n - sb * m
            e_f = free + p.omega_f + self.chi_b + sb * m
        else:
            levels = p.bare_levels()
            photons = {"a": n, "b": m}
            out = []
            for k in LEVELS:
                energy = free + levels[level_index(k)]
                for j in LEVELS:
                    if j == k:
                        continue
                    for mode in "ab":
                        forward = theta_step(k, j, levels) * self.table[(mode, k, j)]
                        backward = theta_step(j, k, levels) * self.table[(mode, j, k)]
                        energy = energy + forward + photons[mode] * (forward - backward)
                out.append(energy)
            e_g, e_e, e_f = out
        return np.stack(np.broadcast_arrays(e_g, e_e, e_f))

    def energy_grid(self, truncation: ModeTruncation) -> np.ndarray:
        """Level energies on the full truncated grid, shape ``(3, dim_a, dim_b)``."""
        n, m = np.meshgrid(np.arange(truncation.dim_a), np.arange(truncation.dim_b), indexing="ij")
        return self.level_energies(n, m)


def dispersive_shifts(params: SystemParams) -> DispersiveShifts:
    qt = params.qutrit_type
    ga2, gb2 = params.g_a**2, params.g_b**2
    wa, wb, we, wf = params.omega_a, params.omega_b, params.omega_e, params.omega_f
    if qt is QutritType.LAMBDA:
        return DispersiveShifts(
            params,
            chi_a=_checked_ratio(ga2, wf - we - wa, "chi_a"),
            chi_a_prime=_checked_ratio(ga2, wf - we + wa, "chi_a'"),
            chi_b=_checked_ratio(gb2, wf - wb, "chi_b"),
            chi_b_prime=_checked_ratio(gb2, wf + wb, "chi_b'"),
        )
    if qt is QutritType.XI:
        return DispersiveShifts(
            params,
            chi_a=_checked_ratio(ga2, we - wa, "chi_a"),
            chi_a_prime=_checked_ratio(ga2, we + wa, "chi_a'"),
            chi_b=_checked_ratio(gb2, wf - we - wb, "chi_b"),
            chi_b_prime=_checked_ratio(gb2, wf - we + wb, "chi_b'"),
        )
    levels = params.bare_levels()
    table = {}
    for mode in "ab":
        g2 = params.mode_coupling(mode) ** 2
        wl = params.mode_frequency(mode)
        for k, j in permutations(LEVELS, 2):
            gap = levels[level_index(k)] - levels[level_index(j)] - wl
            table[(mode, k, j)] = _checked_ratio(g2, theta_step(k, j, levels) * gap, f"chi^{mode}_{k}{j}")
    return DispersiveShifts(
        params,
        chi_a=table[("a", "f", "e")],
        chi_a_prime=table[("a", "e", "f")],
        chi_b=table[("b", "f", "g")],
        chi_b_prime=table[("b", "g", "f")],
        table=table,
    )


def second_order_energies(params: SystemParams, n, m) -> np.ndarray:
    """Brute-force second-order energies summed over every virtual path.

    Independent of :func:`dispersive_shifts`; used as a cross-check.
    """
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    levels = params.bare_levels()
    photons = {"a": n, "b": m}
    energies = []
    for k in LEVELS:
        wk = levels[level_index(k)]
        total = wk + n * params.omega_a + m * params.omega_b
        for lo, hi, mode in params.couplings():
            if k not in (lo, hi):
                continue
            j = hi if k == lo else lo
            wj = levels[level_index(j)]
            wl = params.mode_frequency(mode)
            g2 = params.mode_coupling(mode) ** 2
            nl = photons[mode]
            # emit a photon: |k, n> -> |j, n+1>; absorb: |k, n> -> |j, n-1>
            total = total + g2 * (nl + 1) / (wk - wj - wl) + g2 * nl / (wk - wj + wl)
        energies.append(total)
    return np.stack(np.broadcast_arrays(*energies))


def effective_hamiltonian(params: SystemParams, shifts: DispersiveShifts | None = None) -> np.ndarray:
    """Diagonal dispersive Hamiltonian on the composite space."""
    if params.truncation is None:
        raise ValueError("SystemParams.truncation is required to build operators")
    shifts = shifts or dispersive_shifts(params)
    return np.diag(shifts.energy_grid(params.truncation).ravel()).astype(complex)


def crosstalk_operator(truncation: ModeTruncation) -> np.ndarray:
    ops = CompositeOperators(truncation)
    return (ops.a + ops.a.conj().T) @ (ops.b + ops.b.conj().T)


def lab_hamiltonian(params: SystemParams) -> np.ndarray:
    """H0 + V with counter-rotating terms, plus g_ab (a+a^dag)(b+b^dag)."""
    if params.truncation is None:
        raise ValueError("SystemParams.truncation is required to build operators")
    ops = CompositeOperators(params.truncation)
    levels = params.bare_levels()
    h = (
        params.omega_a * ops.n_a
        + params.omega_b * ops.n_b
        + ops.qutrit(np.diag(levels).astype(complex))
    )
    quadrature = {"a": ops.a + ops.a.conj().T, "b": ops.b + ops.b.conj().T}
    for lo, hi, mode in params.couplings():
        sigma_x = ops.qutrit(qutrit_op(lo, hi) + qutrit_op(hi, lo))
        h = h + params.mode_coupling(mode) * sigma_x @ quadrature[mode]
    if params.g_ab:
        h = h + params.g_ab * quadrature["a"] @ quadrature["b"]
    return h


def drive_tones(qutrit_type: QutritType) -> tuple[tuple[int, int], tuple[int, int]]:
    """(upper, lower) level indices addressed by tone 1 and tone 2."""
    qt = QutritType.parse(qutrit_type)
    if qt is QutritType.XI:
        return ((1, 0), (2, 1))
    return ((2, 1), (2, 0))


def _tone_gaps(shifts: DispersiveShifts, target: TargetSpec) -> tuple[float, float]:
    (u1, l1), (u2, l2) = drive_tones(shifts.qutrit_type)
    e1 = shifts.level_energies(*target.first)
    e2 = shifts.level_energies(*target.second)
    return float(e1[u1] - e1[l1]), float(e2[u2] - e2[l2])


def drive_frequencies(params: SystemParams, shifts: DispersiveShifts, target: TargetSpec) -> tuple[float, float]:
    """Tone frequencies that make |e n1 m1>-|f n1 m1> and |g n2 m2>-|f n2 m2> resonant."""
    n1, m1, n2, m2 = target.n_1, target.m_1, target.n_2, target.m_2
    wf, we = params.omega_f, params.omega_e
    if params.qutrit_type is QutritType.LAMBDA:
        sa = shifts.chi_a + shifts.chi_a_prime
        sb = shifts.chi_b + shifts.chi_b_prime
        omega_1 = wf - we + (2 * n1 + 1) * sa + m1 * sb + shifts.chi_b
        omega_2 = wf + (2 * m2 + 1) * sb + n2 * sa + shifts.chi_a
        return omega_1, omega_2
    if params.qutrit_type is QutritType.DELTA:
        c = shifts.chi
        omega_1 = (
            wf - we
            + (2 * n1 + 1) * (c("a", "e", "f") + c("a", "f", "e"))
            + n1 * (c("a", "g", "f") - c("a", "g", "e"))
            + (n1 + 1) * (c("a", "f", "g") - c("a", "e", "g"))
            + (2 * m1 + 1) * (c("b", "e", "f") + c("b", "f", "e"))
            + m1 * (c("b", "g", "f") - c("b", "g", "e"))
            + (m1 + 1) * (c("b", "f", "g") - c("b", "e", "g"))
        )
        omega_2 = (
            wf
            + (2 * n2 + 1) * (c("a", "g", "f") + c("a", "f", "g"))
            + n2 * (c("a", "e", "f") + c("a", "e", "g"))
            + (n2 + 1) * (c("a", "f", "e") + c("a", "g", "e"))
            + (2 * m2 + 1) * (c("b", "g", "f") + c("b", "f", "g"))
            + m2 * (c("b", "e", "f") + c("b", "e", "g"))
            + (m2 + 1) * (c("b", "f", "e") + c("b", "g", "e"))
        )
        return omega_1, omega_2
    raise ValueError("ladder (Xi) qutrits use xi_drive_frequencies")


def xi_drive_frequencies(params: SystemParams, shifts: DispersiveShifts, target: TargetSpec) -> tuple[float, float]:
    """Dressed |g n1 m1>-|e n1 m1> and |e n2 m2>-|f n2 m2> gaps of the ladder qutrit."""
    if params.qutrit_type is not QutritType.XI:
        raise ValueError("xi_drive_frequencies requires a ladder (Xi) qutrit")
    return _tone_gaps(shifts, target)


def planned_frequencies(params: SystemParams, shifts: DispersiveShifts, target: TargetSpec) -> tuple[float, float]:
    if params.qutrit_type is QutritType.XI:
        return xi_drive_frequencies(params, shifts, target)
    return drive_frequencies(params, shifts, target)


def detunings(n, m, shifts: DispersiveShifts, omega_1: float, omega_2: float):
    """Detunings of tone 1 and tone 2 from the (n, m) transitions.

    For Lambda qutrits this is the closed linear formula; other topologies use
    the dressed level differences of their effective Hamiltonian.
    """
    if shifts.qutrit_type is QutritType.LAMBDA:
        p = shifts.params
        n = np.asarray(n, dtype=float)
        m = np.asarray(m, dtype=float)
        sa = shifts.chi_a + shifts.chi_a_prime
        sb = shifts.chi_b + shifts.chi_b_prime
        delta = p.omega_f - p.omega_e + (2 * n + 1) * sa + m * sb + shifts.chi_b - omega_1
        delta_prime = p.omega_f + (2 * m + 1) * sb + n * sa + shifts.chi_a - omega_2
        return delta, delta_prime
    (u1, l1), (u2, l2) = drive_tones(shifts.qutrit_type)
    e = shifts.level_energies(n, m)
    return e[u1] - e[l1] - omega_1, e[u2] - e[l2] - omega_2


class RotatingFrameDrive:
    """Drive Hamiltonian in the interaction picture of the effective Hamiltonian.

    Each tone couples ``|upper n m> <-> |lower n m>`` with amplitude Omega_j and
    phase exp(i delta_j(n, m) t), where delta_j includes any relative
    frequency error.  Static pieces are precomputed once; evaluation only
    refreshes scalar phases.
    """

    def __init__(
        self,
        shifts: DispersiveShifts,
        drive: DriveSpec,
        target: TargetSpec,
        truncation: ModeTruncation,
        tones=(0, 1),
        secular: bool = False,
        include_crosstalk: bool = True,
    ):
        target.check_truncation(truncation)
        self.shifts = shifts
        self.drive = drive
        self.target = target
        self.truncation = truncation
        self.tones = tuple(tones)
        self.secular = secular
        params = shifts.params
        if drive.omega_1 is None or drive.omega_2 is None:
            planned = planned_frequencies(params, shifts, target)
            freqs = (
                planned[0] if drive.omega_1 is None else drive.omega_1,
                planned[1] if drive.omega_2 is None else drive.omega_2,
            )
        else:
            freqs = (drive.omega_1, drive.omega_2)
        self.nominal_frequencies = freqs
        self.frequencies = tuple(w * (1.0 + drive.epsilon_prime) for w in freqs)
        self.energies = shifts.energy_grid(truncation)
        self.transitions = drive_tones(params.qutrit_type)
        amplitudes = drive.amplitudes
        da, db = truncation.dim_a, truncation.dim_b
        self.detuning = np.zeros((2, da, db))
        self.amplitude = np.zeros((2, da, db))
        for j, (upper, lower) in enumerate(self.transitions):
            self.detuning[j] = self.energies[upper] - self.energies[lower] - self.frequencies[j]
            if j not in self.tones:
                continue
            if secular:
                n, m = target.first if j == 0 else target.second
                self.amplitude[j, n, m] = amplitudes[j]
            else:
                self.amplitude[j] = amplitudes[j]
        self.g_ab = params.g_ab if include_crosstalk else 0.0
        self._crosstalk = None
        if self.g_ab:
            x = crosstalk_operator(truncation)
            diag = self.energies.ravel()
            rows, cols = np.nonzero(x)
            self._crosstalk = (rows, cols, self.g_ab * x[rows, cols], diag[rows] - diag[cols])
        self._index = []
        for upper, lower in self.transitions:
            base = np.arange(da * db)
            self._index.append((upper * da * db + base, lower * da * db + base))

    @property
    def sector_diagonal(self) -> bool:
        """True when the Hamiltonian never changes the photon numbers."""
        return self._crosstalk is None

    def max_frequency(self) -> float:
        active = self.amplitude != 0
        f = float(np.max(np.abs(self.detuning[active]), initial=0.0))
        if self._crosstalk is not None:
            f = max(f, float(np.max(np.abs(self._crosstalk[3]))))
        return f

    def coefficients(self, t: float) -> np.ndarray:
        """Complex couplings Omega_j exp(i delta_j t) of |upper><lower|, shape (2, da, db)."""
        return self.amplitude * np.exp(1j * self.detuning * t)

    def dense(self, t: float) -> np.ndarray:
        d = self.truncation.dim
        h = np.zeros((d, d), dtype=complex)
        coeff = self.coefficients(t)
        for j, (rows, cols) in enumerate(self._index):
            c = coeff[j].ravel()
            h[rows, cols] += c
            h[cols, rows] += c.conj()
        if self._crosstalk is not None:
            rows, cols, vals, freqs = self._crosstalk
            h[rows, cols] += vals * np.exp(1j * freqs * t)
        return h

    __call__ = dense

    def frame_levels(self) -> np.ndarray:
        """Qutrit frame energies making the two tones time independent."""
        (u1, l1), (u2, l2) = self.transitions
        lam = np.full(QUTRIT_DIM, np.nan)
        lam[l1] = 0.0
        lam[u1] = self.frequencies[0]
        if np.isnan(lam[u2]):
            lam[u2] = lam[l2] + self.frequencies[1]
        else:
            lam[l2] = lam[u2] - self.frequencies[1]
        return lam

    def static_hamiltonian(self) -> np.ndarray:
        """Time-independent Hamiltonian in a frame rotating with the drive tones only.

        Related to the interaction-picture state by the diagonal phase
        exp(i (E - lambda) t), see :meth:`to_interaction_frame`.
        """
        lam = self.frame_levels()
        diag = (self.energies - lam[:, None, None]).ravel()
        h = np.diag(diag).astype(complex)
        for j, (rows, cols) in enumerate(self._index):
            c = self.amplitude[j].ravel()
            h[rows, cols] += c
            h[cols, rows] += c
        if self.g_ab:
            h = h + self.g_ab * crosstalk_operator(self.truncation)
        return h

    def frame_phase(self, t: float) -> np.ndarray:
        lam = self.frame_levels()
        return np.exp(1j * (self.energies - lam[:, None, None]).ravel() * t)


def rotating_drive_hamiltonian(
    t: float,
    drive: DriveSpec,
    shifts: DispersiveShifts,
    target: TargetSpec,
    truncation: ModeTruncation,
) -> np.ndarray:
    return RotatingFrameDrive(shifts, drive, target, truncation).dense(t)
