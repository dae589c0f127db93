"""Closed-form predictions and planning tools.

Everything here is a pure function of the system parameters; nothing is
propagated in time except in the small two-level helpers used as oracles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .hamiltonian import (
    DispersiveShifts,
    ResonanceError,
    SystemParams,
    TargetSpec,
    detunings,
    dispersive_shifts,
    planned_frequencies,
)
from .hilbert import ModeTruncation


def two_level_population(delta, Omega: float, t: float):
    """Upper-level population of a detuned Rabi problem started in the lower level.

    P = sin^2(E t) sin^2(2 theta), E = sqrt(Omega^2 + (delta/2)^2),
    tan(2 theta) = 2 Omega / delta.
    """
    delta = np.asarray(delta, dtype=float)
    E = np.sqrt(Omega**2 + (delta / 2) ** 2)
    return np.sin(E * t) ** 2 * Omega**2 / E**2


def fock_weights(target: TargetSpec, truncation: ModeTruncation, variant: str = "poisson") -> np.ndarray:
    """Weights alpha^2n beta^2m / (n! m!)^p on the truncated grid.

    ``poisson`` (p = 1) are the initial Fock populations up to normalization;
    ``sqrt`` (p = 1/2) is the alternative printed weighting.
    """
    if variant not in ("poisson", "sqrt"):
        raise ValueError(f"unknown weight variant {variant!r}")
    power = 1.0 if variant == "poisson" else 0.5
    n = np.arange(truncation.dim_a)[:, None]
    m = np.arange(truncation.dim_b)[None, :]
    log_w = 2 * n * math.log(target.alpha) + 2 * m * math.log(target.beta)
    log_w = log_w - power * (gammaln(n + 1) + gammaln(m + 1))
    return np.exp(log_w)


def transition_populations(
    shifts: DispersiveShifts, target: TargetSpec, Omega: float, truncation: ModeTruncation, frequencies=None
) -> tuple[np.ndarray, np.ndarray]:
    """(P, P') grids: two-level transfer at T = pi/(2 Omega) for tone 1 and tone 2."""
    w1, w2 = frequencies or planned_frequencies(shifts.params, shifts, target)
    n = np.arange(truncation.dim_a)[:, None] * np.ones((1, truncation.dim_b))
    m = np.ones((truncation.dim_a, 1)) * np.arange(truncation.dim_b)[None, :]
    d1, d2 = detunings(n, m, shifts, w1, w2)
    T = math.pi / (2 * Omega)
    P1 = two_level_population(d1, Omega, T)
    P2 = two_level_population(d2, Omega, T)
    # targets are resonant by construction
    P1[target.first] = 1.0
    P2[target.second] = 1.0
    return P1, P2


def closed_form_fidelity(
    params: SystemParams,
    shifts: DispersiveShifts | None,
    target: TargetSpec,
    Omega: float,
    truncation: ModeTruncation | None = None,
    weights: str = "poisson",
) -> float:
    """(w_1 + w_2) / sum_nm w_nm (P_nm + P'_nm) with independent two-level blocks."""
    shifts = shifts or dispersive_shifts(params)
    tr = truncation or params.truncation or target.default_truncation()
    w = fock_weights(target, tr, weights)
    P1, P2 = transition_populations(shifts, target, Omega, tr)
    num = w[target.first] + w[target.second]
    return float(num / np.sum(w * (P1 + P2)))


@dataclass(frozen=True)
class CollisionEntry:
    level_pair: str
    n: int
    m: int
    detuning: float
    population: float
    shift: tuple[int, int]

    @property
    def weight_label(self) -> str:
        return f"|{'e' if self.level_pair == 'ef' else 'g'}{self.n}{self.m}>"


@dataclass(frozen=True)
class CollisionReport:
    """Spectator transitions within ``threshold * Omega`` of resonance, sorted by |detuning|.

    ``shift`` is the photon-number offset (n - n_target, m - m_target) of the
    spectator relative to the target block of the same tone; it may have
    either sign.
    """

    entries: tuple[CollisionEntry, ...]
    threshold: float
    Omega: float

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def labels(self) -> set[tuple[str, int, int]]:
        return {(e.level_pair, e.n, e.m) for e in self.entries}


def collision_scan(
    params: SystemParams,
    shifts: DispersiveShifts | None,
    target: TargetSpec,
    Omega: float,
    threshold: float = 5.0,
    truncation: ModeTruncation | None = None,
) -> CollisionReport:
    """Enumerate every (n, m) below the cutoff for both tones."""
    shifts = shifts or dispersive_shifts(params)
    tr = truncation or params.truncation or target.default_truncation()
    w1, w2 = planned_frequencies(params, shifts, target)
    n = np.arange(tr.dim_a)[:, None] * np.ones((1, tr.dim_b), dtype=int)
    m = np.ones((tr.dim_a, 1), dtype=int) * np.arange(tr.dim_b)[None, :]
    d = detunings(n, m, shifts, w1, w2)
    T = math.pi / (2 * Omega)
    entries = []
    for pair, grid, own in (("ef", d[0], target.first), ("gf", d[1], target.second)):
        for i, j in zip(*np.nonzero(np.abs(grid) < threshold * Omega)):
            if (i, j) == own:
                continue
            entries.append(
                CollisionEntry(
                    pair,
                    int(i),
                    int(j),
                    float(grid[i, j]),
                    float(two_level_population(grid[i, j], Omega, T)),
                    (int(i) - own[0], int(j) - own[1]),
                )
            )
    entries.sort(key=lambda e: (abs(e.detuning), e.level_pair, e.n, e.m))
    return CollisionReport(tuple(entries), threshold, Omega)


def shift_ratio(params: SystemParams) -> float:
    """chi_a / chi_b = (w_f - w_b) / (w_f - w_e - w_a) for isotropic couplings."""
    if not math.isclose(params.g_a, params.g_b):
        raise ValueError("shift_ratio assumes isotropic couplings g_a = g_b")
    den = params.omega_f - params.omega_e - params.omega_a
    num = params.omega_f - params.omega_b
    if den == 0 or num == 0:
        raise ResonanceError("resonant denominator in the shift ratio")
    return num / den


def omega_e_for_ratio(params: SystemParams, ratio: float) -> float:
    """Qutrit e-level frequency giving the requested chi_a / chi_b (isotropic couplings)."""
    return params.omega_f - params.omega_a - (params.omega_f - params.omega_b) / ratio


def ratio_sweep(
    params: SystemParams,
    target: TargetSpec,
    Omega: float,
    ratios,
    truncation: ModeTruncation | None = None,
    weights: str = "poisson",
) -> list[tuple[float, float]]:
    """(chi_a/chi_b, closed-form fidelity) with the ratio set through omega_e."""
    out = []
    for r in ratios:
        p = SystemParams(**{**params.__dict__, "omega_e": omega_e_for_ratio(params, r)})
        out.append((shift_ratio(p), closed_form_fidelity(p, None, target, Omega, truncation, weights)))
    return out


def frequency_error_amplitudes(eps_prime: float, Omega: float, omega: float) -> tuple[complex, complex]:
    """Lower and upper amplitudes after T = pi/(2 Omega) with drive detuned by omega * eps'.

    (cos v + i sin v cos t, -i sin v sin t) with tan t = 2 Omega / (omega eps'),
    v = pi / (2 sin t); the overall frame phase exp(+-i omega eps' T / 2) is left out.
    """
    theta = math.atan2(2 * Omega, omega * eps_prime)
    v = math.pi / (2 * math.sin(theta))
    return complex(math.cos(v), math.sin(v) * math.cos(theta)), complex(0.0, -math.sin(v) * math.sin(theta))


def frequency_error_fidelity(
    eps_prime: float,
    Omega: float,
    omega_1: float,
    omega_2: float,
    varphi: float = math.pi / 4,
    renormalize: bool = False,
) -> tuple[float, float]:
    """(exact, second_order) fidelity of the two resonant blocks under a frequency error.

    ``exact`` is |<phi|phi'>|^2 with phi' the projected target amplitudes
    cos(varphi) sin v1 sin t1, sin(varphi) sin v2 sin t2.  Without
    renormalization this is the quantity whose eps'^2 expansion gives
    ``second_order``; renormalizing removes the eps'^2 term entirely.
    """
    for w in (omega_1, omega_2):
        if abs(w * eps_prime) > 0.5 * Omega:
            warnings.warn("frequency error not small compared to Omega; second-order branch unreliable", stacklevel=2)
            break
    c, s = math.cos(varphi), math.sin(varphi)
    a1 = c * abs(frequency_error_amplitudes(eps_prime, Omega, omega_1)[1])
    a2 = s * abs(frequency_error_amplitudes(eps_prime, Omega, omega_2)[1])
    overlap = (c * a1 + s * a2) ** 2
    if renormalize:
        overlap /= a1 * a1 + a2 * a2
    second = 1 - (omega_1**2 * c * c + omega_2**2 * s * s) / (4 * Omega**2) * eps_prime**2
    return float(overlap), float(second)


def nonideal_measurement_fidelity(theta_1: float, P: float) -> float:
    """Leading-order estimate 1 - (1/P - 3/4) theta_1^2 for a balanced target."""
    return 1.0 - (1.0 / P - 0.75) * theta_1**2


def nonideal_measurement_expansion(theta_1: float, theta_2: float, P: float) -> float:
    """Leading order from projecting the ideal secular final state onto |f'>.

    For a balanced target the admixed |e>, |g> components bring in the
    untouched Fock weight 1 - 2P with amplitude sin t1 (sin t2 + cos t2), giving
    1 - (1 + sin 2 t2)(1/(2P) - 1) theta_1^2.
    """
    return 1.0 - (1.0 + math.sin(2 * theta_2)) * (0.5 / P - 1.0) * theta_1**2


def success_probability(target: TargetSpec) -> float:
    """Ideal P = N^2 (w_1 + w_2) / 2 with Poisson weights and N^2 = exp(-a^2 - b^2)."""
    a, b = target.alpha, target.beta
    norm = math.exp(-(a * a) - (b * b))

    def w(n, m):
        return math.exp(2 * n * math.log(a) + 2 * m * math.log(b) - math.lgamma(n + 1) - math.lgamma(m + 1))

    return 0.5 * norm * (w(*target.first) + w(*target.second))
