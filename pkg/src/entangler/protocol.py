"""Two-step protocol: prepare, drive, measure the qutrit, score the resonator state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DecoherenceRates,
    IntegratorConfig,
    SectorDensity,
    collapse_operators,
    propagate_density,
    propagate_exact,
    propagate_sector_density,
    propagate_sectors,
    propagate_state,
    qutrit_channels,
)
from .hamiltonian import (
    DispersiveShifts,
    DriveSpec,
    QutritType,
    RotatingFrameDrive,
    Schedule,
    SystemParams,
    TargetSpec,
    dispersive_shifts,
)
from .hilbert import QUTRIT_DIM, ModeTruncation, coherent_state, level_index

PROBABILITY_FLOOR = 1e-12


class MeasurementError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeasurementSpec:
    """Projection onto cos t1 |level> + sin t1 sin t2 |other_1> + sin t1 cos t2 |other_2>.

    ``level=None`` picks the protocol's level (f for Lambda/Delta, e for Xi).
    The two other levels are taken in descending order, so for ``f`` the
    admixture is ``sin t2 |e> + cos t2 |g>``.
    """

    level: str | None = None
    theta_1: float = 0.0
    theta_2: float = 0.0

    def __post_init__(self):
        if not 0 <= self.theta_1 < math.pi / 2:
            raise ValueError("theta_1 must lie in [0, pi/2)")
        if not 0 <= self.theta_2 <= math.pi:
            raise ValueError("theta_2 must lie in [0, pi]")
        if self.level is not None:
            level_index(self.level)

    def resolved_level(self, qutrit_type: QutritType) -> str:
        if self.level is not None:
            return self.level
        return "e" if QutritType.parse(qutrit_type) is QutritType.XI else "f"

    def vector(self, qutrit_type: QutritType = QutritType.LAMBDA) -> np.ndarray:
        """The measured qutrit state |level'>."""
        k = level_index(self.resolved_level(qutrit_type))
        o1, o2 = sorted((i for i in range(QUTRIT_DIM) if i != k), reverse=True)
        v = np.zeros(QUTRIT_DIM, dtype=complex)
        v[k] = math.cos(self.theta_1)
        v[o1] = math.sin(self.theta_1) * math.sin(self.theta_2)
        v[o2] = math.sin(self.theta_1) * math.cos(self.theta_2)
        return v


@dataclass
class ProtocolOutcome:
    """Result of one protocol run.

    ``post_state`` is a resonator state vector for closed-system runs.  For
    open-system runs on the photon-conserving engine it is a resonator
    density matrix holding only the propagated displacement classes (the
    diagonal and the target coherence); other coherences are not tracked and
    are zero.
    """

    post_state: np.ndarray
    success_probability: float
    fidelity: float
    diagnostics: dict = field(default_factory=dict)


def initial_state(params: SystemParams, target: TargetSpec, truncation: ModeTruncation | None = None) -> np.ndarray:
    """Balanced qutrit superposition times coherent states |alpha>|beta>."""
    tr = truncation or params.truncation or target.default_truncation()
    qt = QutritType.parse(params.qutrit_type)
    q = np.zeros(QUTRIT_DIM, dtype=complex)
    q[0] = 1.0
    q[2 if qt is QutritType.XI else 1] = 1.0
    q /= math.sqrt(2.0)
    psi_a = coherent_state(target.alpha, tr.n_max_a)
    psi_b = coherent_state(target.beta, tr.n_max_b)
    return np.kron(np.kron(q, psi_a), psi_b)


def target_angle(target: TargetSpec) -> float:
    """varphi with tan varphi = a^n2 b^m2 sqrt(n1! m1!) / (a^n1 b^m1 sqrt(n2! m2!))."""
    a, b = target.alpha, target.beta
    if a <= 0 or b <= 0:
        raise ValueError("coherent amplitudes must be positive")
    log_tan = (
        (target.n_2 - target.n_1) * math.log(a)
        + (target.m_2 - target.m_1) * math.log(b)
        + 0.5 * (math.lgamma(target.n_1 + 1) + math.lgamma(target.m_1 + 1))
        - 0.5 * (math.lgamma(target.n_2 + 1) + math.lgamma(target.m_2 + 1))
    )
    return math.atan(math.exp(log_tan))


def target_state(target: TargetSpec, truncation: ModeTruncation) -> tuple[np.ndarray, float]:
    """cos(varphi)|n1 m1> + sin(varphi)|n2 m2> on the resonators."""
    phi = target_angle(target)
    psi = np.zeros(truncation.resonator_dim, dtype=complex)
    psi[truncation.resonator_index(*target.first)] += math.cos(phi)
    psi[truncation.resonator_index(*target.second)] += math.sin(phi)
    return psi, phi


def projective_measurement(
    state: np.ndarray,
    measurement: MeasurementSpec,
    truncation: ModeTruncation,
    qutrit_type: QutritType = QutritType.LAMBDA,
) -> tuple[np.ndarray, float]:
    """Project the qutrit, trace it out, renormalize.

    Pure input gives a resonator vector, density input a resonator density matrix.
    """
    v = measurement.vector(qutrit_type)
    r = truncation.resonator_dim
    state = np.asarray(state)
    if state.ndim == 1:
        if state.size != truncation.dim:
            raise ValueError("state dimension does not match truncation")
        chi = v.conj() @ state.reshape(QUTRIT_DIM, r)
        prob = float(np.vdot(chi, chi).real)
        _check_probability(prob)
        return chi / math.sqrt(prob), prob
    if state.shape != (truncation.dim, truncation.dim):
        raise ValueError("density matrix dimension does not match truncation")
    rho = np.einsum("k,kilj,l->ij", v.conj(), state.reshape(QUTRIT_DIM, r, QUTRIT_DIM, r), v)
    prob = float(np.trace(rho).real)
    _check_probability(prob)
    return rho / prob, prob


def _check_probability(prob: float) -> None:
    if prob < PROBABILITY_FLOOR:
        raise MeasurementError(f"measurement never succeeds (probability {prob:.3g})")


def _fidelity_from_elements(r11: float, r22: float, r12: complex, phi: float) -> float:
    c, s = math.cos(phi), math.sin(phi)
    value = c * c * r11 + s * s * r22 + 2 * c * s * abs(r12)
    return float(min(max(value, 0.0), 1.0))


def fidelity(post_state: np.ndarray, target: TargetSpec, truncation: ModeTruncation) -> float:
    """<phi|rho|phi> maximized over the relative phase of the two target components."""
    _, phi = target_state(target, truncation)
    i1 = truncation.resonator_index(*target.first)
    i2 = truncation.resonator_index(*target.second)
    post_state = np.asarray(post_state)
    if post_state.ndim == 1:
        a1, a2 = post_state[i1], post_state[i2]
        return _fidelity_from_elements(abs(a1) ** 2, abs(a2) ** 2, a1 * np.conj(a2), phi)
    return _fidelity_from_elements(post_state[i1, i1].real, post_state[i2, i2].real, post_state[i1, i2], phi)


def _windows(drive: DriveSpec) -> list[tuple[float, float, tuple[int, ...]]]:
    T = drive.pulse_duration
    if drive.schedule is Schedule.SEQUENTIAL:
        return [(0.0, T, (0,)), (T, T, (1,))]
    return [(0.0, T, (0, 1))]


def choose_engine(params: SystemParams, rates: DecoherenceRates | None, integrator: IntegratorConfig) -> str:
    closed = rates is None or rates.is_zero
    crosstalk = params.g_ab != 0
    if integrator.method == "exact":
        if not closed:
            raise ValueError("exact propagation is only available without decoherence")
        return "exact"
    if integrator.method == "rk4" or not crosstalk:
        if crosstalk:
            return "dense-state" if closed else "dense-density"
        return "sector-state" if closed else "sector-density"
    # crosstalk without an explicit method: diagonalization is far cheaper than
    # resolving the fast crosstalk phases with RK4
    return "exact" if closed else "dense-density"


def run_protocol(
    params: SystemParams,
    target: TargetSpec,
    drive: DriveSpec,
    measurement: MeasurementSpec | None = None,
    rates: DecoherenceRates | None = None,
    integrator: IntegratorConfig | None = None,
    truncation: ModeTruncation | None = None,
    shifts: DispersiveShifts | None = None,
    secular: bool = False,
    recorder=None,
) -> ProtocolOutcome:
    """Prepare, drive for T = pi/(2 Omega) (twice for the sequential schedule), measure."""
    measurement = measurement or MeasurementSpec()
    integrator = integrator or IntegratorConfig()
    tr = truncation or params.truncation or target.default_truncation()
    target.check_truncation(tr)
    shifts = shifts or dispersive_shifts(params)
    engine = choose_engine(params, rates, integrator)
    psi0 = initial_state(params, target, tr)
    qt = params.qutrit_type
    v = measurement.vector(qt)
    windows = _windows(drive)
    drives = [RotatingFrameDrive(shifts, drive, target, tr, tones=tones, secular=secular) for _, _, tones in windows]
    diagnostics = {"engine": engine, "duration": sum(w[1] for w in windows)}

    if engine in ("sector-state", "dense-state", "exact"):
        psi = psi0
        for (t0, T, _), d in zip(windows, drives):
            if engine == "exact":
                psi = propagate_exact(d, psi, T, t0)
            elif engine == "sector-state":
                psi = propagate_sectors(d, psi, T, integrator, t0, recorder).ravel()
            else:
                psi = propagate_state(d, psi, T, integrator, t0, d.max_frequency(), recorder)
        diagnostics["populations"] = np.abs(psi.reshape(tr.shape)) ** 2
        post, prob = projective_measurement(psi, measurement, tr, qt)
        return ProtocolOutcome(post, prob, fidelity(post, target, tr), diagnostics)

    if engine == "dense-density":
        rho = np.outer(psi0, psi0.conj())
        channels = collapse_operators(qt, rates, tr)
        for (t0, T, _), d in zip(windows, drives):
            rho = propagate_density(d, channels, rho, T, integrator, t0, d.max_frequency(), recorder)
        diagnostics["populations"] = np.real(np.diag(rho)).reshape(tr.shape)
        post, prob = projective_measurement(rho, measurement, tr, qt)
        return ProtocolOutcome(post, prob, fidelity(post, target, tr), diagnostics)

    coherence = (target.n_1 - target.n_2, target.m_1 - target.m_2)
    sd = SectorDensity.from_pure(psi0, tr, [(0, 0), coherence])
    channels = qutrit_channels(qt, rates)
    for (t0, T, _), d in zip(windows, drives):
        sd = propagate_sector_density(d, channels, rates.kappa_a, rates.kappa_b, sd, T, integrator, t0, recorder)
    diag = sd.diagonal_class()
    diagnostics["populations"] = np.real(np.einsum("kknm->knm", diag))
    weighted = [np.einsum("k,klnm,l->nm", v.conj(), block, v) for block in sd.data]
    prob = float(np.sum(weighted[0]).real)
    _check_probability(prob)
    (n1, m1), (n2, m2) = target.first, target.second
    r11 = weighted[0][n1, m1].real / prob
    r22 = weighted[0][n2, m2].real / prob
    r12 = weighted[1][n1, m1] / prob
    post_matrix = _resonator_matrix(weighted, sd.shifts, tr) / prob
    _, phi = target_state(target, tr)
    return ProtocolOutcome(post_matrix, prob, _fidelity_from_elements(r11, r22, r12, phi), diagnostics)


def _resonator_matrix(weighted, shifts, tr: ModeTruncation) -> np.ndarray:
    rho = np.zeros((tr.resonator_dim, tr.resonator_dim), dtype=complex)
    for w, (dn, dm) in zip(weighted, shifts):
        mask = SectorDensity.valid_mask(tr, (dn, dm))
        n, m = np.nonzero(mask)
        rows = n * tr.dim_b + m
        cols = (n - dn) * tr.dim_b + (m - dm)
        rho[rows, cols] = w[n, m]
        if (dn, dm) != (0, 0):
            rho[cols, rows] = np.conj(w[n, m])
    return rho


__all__ = [
    "MeasurementError",
    "MeasurementSpec",
    "ProtocolOutcome",
    "choose_engine",
    "fidelity",
    "initial_state",
    "projective_measurement",
    "run_protocol",
    "target_angle",
    "target_state",
]
