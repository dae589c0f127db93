import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entangler.analytics import (
    closed_form_fidelity,
    collision_scan,
    fock_weights,
    frequency_error_amplitudes,
    frequency_error_fidelity,
    nonideal_measurement_expansion,
    nonideal_measurement_fidelity,
    omega_e_for_ratio,
    ratio_sweep,
    shift_ratio,
    success_probability,
    transition_populations,
    two_level_population,
)
from entangler.dynamics import propagate_exact, propagate_sectors
from entangler.hamiltonian import (
    DriveSpec,
    ResonanceError,
    RotatingFrameDrive,
    SystemParams,
    TargetSpec,
    dispersive_shifts,
    drive_frequencies,
)
from entangler.hilbert import ModeTruncation
from entangler.protocol import run_protocol

FIG3 = SystemParams.figure3()


def _at_ratio(ratio):
    return replace(FIG3, omega_e=omega_e_for_ratio(FIG3, ratio))


def test_two_level_population_limits():
    Omega = 1e-3
    T = math.pi / (2 * Omega)
    assert two_level_population(0.0, Omega, T) == pytest.approx(1.0)
    assert two_level_population(1e3, Omega, T) < 1e-11


def test_closed_form_limits():
    t = TargetSpec.noon(1)
    tr = t.default_truncation()
    assert closed_form_fidelity(FIG3, None, t, 1e-7, tr) == pytest.approx(1.0, abs=1e-6)
    P1, P2 = transition_populations(dispersive_shifts(FIG3), t, 1e-3, tr)
    assert P1[t.first] == 1.0 and P2[t.second] == 1.0
    assert np.all((P1 >= 0) & (P1 <= 1)) and np.all((P2 >= 0) & (P2 <= 1))


def test_fock_weights_variants():
    t = TargetSpec.bell()
    tr = ModeTruncation(4, 4)
    w = fock_weights(t, tr)
    assert w[2, 3] == pytest.approx(1 / (2 * 6))
    assert fock_weights(t, tr, "sqrt")[2, 3] == pytest.approx(1 / math.sqrt(12))
    with pytest.raises(ValueError):
        fock_weights(t, tr, "other")


def test_success_probability_bell():
    assert success_probability(TargetSpec.bell()) == pytest.approx(math.exp(-2))


def test_closed_form_matches_dynamics_noon2():
    t = TargetSpec.noon(2)
    out = run_protocol(FIG3, t, DriveSpec(Omega=1e-3))
    assert abs(out.fidelity - closed_form_fidelity(FIG3, None, t, 1e-3)) < 0.01


def test_collisions_at_unit_ratio():
    p = _at_ratio(1.0)
    assert shift_ratio(p) == pytest.approx(1.0)
    report = collision_scan(p, None, TargetSpec(1, 0, 0, 1), 1e-3)
    assert ("ef", 0, 2) in report.labels()
    # the primed shifts lift the exact degeneracy, so |e04> sits a few Omega away
    report = collision_scan(p, None, TargetSpec(2, 0, 0, 2), 3e-3)
    assert {("ef", 1, 2), ("ef", 0, 4)} <= report.labels()
    assert all(abs(e.detuning) < 5 * 3e-3 for e in report)
    assert [abs(e.detuning) for e in report] == sorted(abs(e.detuning) for e in report)


def test_no_collision_for_bell_at_design_ratio():
    report = collision_scan(FIG3, None, TargetSpec.bell(), 1e-3)
    assert len(report) == 0


@pytest.mark.parametrize("ratio", [1.0, 1.1, 1.5, 2.0])
@pytest.mark.parametrize("N", [1, 2])
def test_collision_scan_complete(ratio, N):
    p = _at_ratio(ratio)
    t = TargetSpec.noon(N)
    tr = t.default_truncation()
    Omega = 3e-3
    shifts = dispersive_shifts(p)
    report = collision_scan(p, shifts, t, Omega, 5, tr)
    for tone, start in ((0, 1), (1, 0)):
        d = RotatingFrameDrive(shifts, DriveSpec(Omega=Omega), t, tr, tones=(tone,))
        psi = np.zeros(tr.shape, dtype=complex)
        psi[start] = 1.0 / math.sqrt(tr.dim_a * tr.dim_b)
        out = propagate_sectors(d, psi, d.drive.pulse_duration)
        transferred = np.abs(out[2]) ** 2 * tr.dim_a * tr.dim_b
        pair = "ef" if tone == 0 else "gf"
        own = t.first if tone == 0 else t.second
        for n, m in zip(*np.nonzero(transferred > 0.25)):
            if (n, m) != own:
                assert (pair, int(n), int(m)) in report.labels()


def test_shift_ratio():
    assert shift_ratio(FIG3) == pytest.approx(1.1)
    assert shift_ratio(FIG3) == pytest.approx(dispersive_shifts(FIG3).ratio, abs=1e-12)
    assert shift_ratio(replace(FIG3, omega_b=FIG3.omega_e + FIG3.omega_a)) == pytest.approx(1.0)
    with pytest.raises(ResonanceError):
        shift_ratio(replace(FIG3, omega_b=FIG3.omega_f))
    with pytest.raises(ValueError):
        shift_ratio(replace(FIG3, g_a=0.5))


@given(st.floats(0.8, 2.5))
@settings(max_examples=25, deadline=None)
def test_ratio_round_trip(ratio):
    assert shift_ratio(_at_ratio(ratio)) == pytest.approx(ratio, rel=1e-12)


def test_ratio_sweep_dips():
    # each dip ratio hurts at least one of N = 1..3; ratio 1.7 is clean for all
    rows = np.array([[f for _, f in ratio_sweep(FIG3, TargetSpec.noon(N), 2e-3, [1.0, 1.5, 1.7, 2.0])] for N in (1, 2, 3)])
    assert np.all(rows[:, 2] > 0.95)
    for col in (0, 1, 3):
        assert np.min(rows[:, col] - rows[:, 2]) < -0.1


def test_frequency_error_zero():
    assert frequency_error_fidelity(0.0, 5e-3, 80.0, 100.0) == (1.0, 1.0)


def test_frequency_error_second_order_residual():
    Omega = 5e-3
    w1, w2 = drive_frequencies(FIG3, dispersive_shifts(FIG3), TargetSpec.noon(1))
    eps = np.array([2e-6, 4e-6, 8e-6, 1.6e-5])
    res = [abs(np.subtract(*frequency_error_fidelity(e, Omega, w1, w2))) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(res), 1)[0]
    assert 3.7 < slope < 4.3


def test_frequency_error_renormalized_has_no_quadratic_term():
    Omega = 5e-3
    exact, second = frequency_error_fidelity(1e-5, Omega, 80.0, 100.0, renormalize=True)
    assert 1 - exact < 0.05 * (1 - second)


@pytest.mark.parametrize("varphi", [0.0, math.pi / 4])
def test_frequency_error_monotone_for_small_eps(varphi):
    Omega = 5e-3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = [frequency_error_fidelity(e, Omega, 80.3, 100.2, varphi)[0] for e in np.linspace(0, 3e-5, 12)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_frequency_error_amplitudes_match_propagation():
    tr = ModeTruncation(11, 11)
    t = TargetSpec.noon(1)
    shifts = dispersive_shifts(FIG3)
    Omega, eps = 5e-3, 2e-5
    d = RotatingFrameDrive(shifts, DriveSpec(Omega=Omega, epsilon_prime=eps), t, tr, tones=(0,))
    w1 = drive_frequencies(FIG3, shifts, t)[0]
    psi = np.zeros(tr.shape, dtype=complex)
    psi[(1,) + t.first] = 1.0
    out = propagate_sectors(d, psi, d.drive.pulse_duration)
    lower, upper = frequency_error_amplitudes(eps, Omega, w1)
    assert abs(abs(out[(1,) + t.first]) - abs(lower)) < 1e-6
    assert abs(abs(out[(2,) + t.first]) - abs(upper)) < 1e-6
    exact = propagate_exact(d, psi, d.drive.pulse_duration).reshape(tr.shape)
    assert abs(abs(exact[(2,) + t.first]) - abs(upper)) < 1e-6


def test_frequency_error_warns_outside_small_branch():
    with pytest.warns(UserWarning):
        frequency_error_fidelity(1e-4, 1e-3, 80.0, 100.0)


def test_nonideal_measurement_formulas():
    P = math.exp(-2)
    assert nonideal_measurement_fidelity(0.0, P) == 1.0
    assert nonideal_measurement_fidelity(0.05, P) == pytest.approx(1 - (math.exp(2) - 0.75) * 0.0025)
    assert nonideal_measurement_fidelity(0.05, P) == pytest.approx(0.9834, abs=1e-4)
    assert nonideal_measurement_expansion(0.0, 0.3, P) == 1.0
