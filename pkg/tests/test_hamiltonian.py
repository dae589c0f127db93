import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from entangler.hamiltonian import (
    DriveSpec,
    QutritType,
    ResonanceError,
    RotatingFrameDrive,
    SystemParams,
    TargetSpec,
    detunings,
    dispersive_shifts,
    drive_frequencies,
    effective_hamiltonian,
    lab_hamiltonian,
    rotating_drive_hamiltonian,
    second_order_energies,
    xi_drive_frequencies,
)
from entangler.hilbert import ModeTruncation, hermiticity_error

FIG3 = SystemParams.figure3()
SMALL = ModeTruncation(3, 3)


def test_lambda_shifts_figure3():
    s = dispersive_shifts(FIG3)
    assert s.chi_a == pytest.approx(0.1, abs=1e-12)
    assert s.chi_b == pytest.approx(1 / 11, abs=1e-12)
    assert s.chi_a_prime == pytest.approx(1 / 150, abs=1e-12)
    assert s.chi_b_prime == pytest.approx(1 / 189, abs=1e-12)
    assert s.ratio == pytest.approx(1.1, abs=1e-12)


def test_zero_coupling_kills_a_shifts():
    s = dispersive_shifts(replace(FIG3, g_a=0.0))
    assert s.chi_a == 0 and s.chi_a_prime == 0
    d = dispersive_shifts(replace(FIG3, g_a=0.0, qutrit_type=QutritType.DELTA))
    assert all(v == 0 for (mode, _, _), v in d.table.items() if mode == "a")


def test_resonant_denominator_rejected():
    with pytest.raises(ResonanceError, match="resonant, dispersive theory invalid"):
        dispersive_shifts(replace(FIG3, omega_e=30.0))


def test_delta_table_has_twelve_entries():
    d = dispersive_shifts(replace(FIG3, qutrit_type="delta"))
    assert len(d.table) == 12
    # fe entry of mode a equals the Lambda chi_a
    assert d.chi("a", "f", "e") == pytest.approx(0.1)
    assert d.chi("b", "f", "g") == pytest.approx(1 / 11)


def test_xi_shifts():
    s = dispersive_shifts(SystemParams.xi_table())
    assert s.chi_a == pytest.approx(1 / 10)
    assert s.chi_a_prime == pytest.approx(1 / 150)
    assert s.chi_b == pytest.approx(1 / 11)
    assert s.chi_b_prime == pytest.approx(1 / 189)


def test_effective_hamiltonian_elements():
    p = FIG3.with_truncation(SMALL)
    s = dispersive_shifts(p)
    H = effective_hamiltonian(p)
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
    assert H[SMALL.index("g", 0, 0), SMALL.index("g", 0, 0)].real == pytest.approx(-s.chi_b_prime)
    e10 = H[SMALL.index("e", 1, 0), SMALL.index("e", 1, 0)].real
    assert e10 == pytest.approx(20 + 70 - s.chi_a - 2 * s.chi_a_prime)
    assert e10 == pytest.approx(89.88667, abs=1e-5)


@pytest.mark.parametrize("qt", ["lambda", "delta", "xi"])
def test_effective_energies_match_brute_force_second_order(qt):
    p = SystemParams.xi_table() if qt == "xi" else replace(FIG3, qutrit_type=qt)
    s = dispersive_shifts(p)
    n, m = np.meshgrid(np.arange(6), np.arange(6), indexing="ij")
    assert np.max(np.abs(s.level_energies(n, m) - second_order_energies(p, n, m))) < 1e-10


@pytest.mark.parametrize("qt", ["lambda", "delta", "xi"])
def test_perturbation_oracle_residual_is_fourth_order(qt):
    base = SystemParams.xi_table() if qt == "xi" else replace(FIG3, qutrit_type=qt)
    scales = [0.025, 0.05, 0.1, 0.2]
    residuals = []
    for g in scales:
        p = replace(base, g_a=g, g_b=g, truncation=SMALL)
        w, v = np.linalg.eigh(lab_hamiltonian(p))
        E = dispersive_shifts(p).energy_grid(SMALL)
        worst = 0.0
        for k in range(3):
            for n in range(2):
                for m in range(2):
                    j = np.argmax(np.abs(v[SMALL.index(k, n, m), :]))
                    worst = max(worst, abs(w[j] - E[k, n, m]))
        residuals.append(worst)
    slope = np.polyfit(np.log(scales), np.log(residuals), 1)[0]
    assert 3.8 < slope < 4.2


def test_lab_hamiltonian_elements():
    p = replace(FIG3, g_a=0.0, g_b=0.0, truncation=SMALL)
    H = lab_hamiltonian(p)
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
    assert H[SMALL.index("f", 1, 1), SMALL.index("f", 1, 1)].real == pytest.approx(100 + 70 + 89)
    H = lab_hamiltonian(FIG3.with_truncation(SMALL))
    assert H[SMALL.index("f", 0, 0), SMALL.index("e", 1, 0)] == pytest.approx(1.0)
    H = lab_hamiltonian(replace(FIG3, g_ab=0.3, truncation=SMALL))
    assert H[SMALL.index("g", 1, 1), SMALL.index("g", 0, 0)] == pytest.approx(0.3)


@pytest.mark.parametrize("qt", ["lambda", "delta", "xi"])
def test_lab_hamiltonian_hermitian(qt):
    p = SystemParams.xi_table(truncation=SMALL) if qt == "xi" else replace(FIG3, qutrit_type=qt, g_ab=0.2, truncation=SMALL)
    assert hermiticity_error(lab_hamiltonian(p)) < 1e-12


def test_drive_frequency_noon1():
    s = dispersive_shifts(FIG3)
    w1, w2 = drive_frequencies(FIG3, s, TargetSpec.noon(1))
    expected = 80 + (s.chi_a + s.chi_a_prime) + (s.chi_b + s.chi_b_prime) + s.chi_b
    assert w1 == pytest.approx(expected, abs=1e-12)
    assert w1 == pytest.approx(80.29378, abs=1e-5)


@pytest.mark.parametrize("qt", ["lambda", "delta"])
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))
@settings(max_examples=25, deadline=None)
def test_planned_frequencies_zero_target_detuning(qt, n1, m1, n2, m2):
    if (n1, m1) == (n2, m2):
        return
    p = replace(FIG3, qutrit_type=qt)
    s = dispersive_shifts(p)
    t = TargetSpec(n1, m1, n2, m2)
    w1, w2 = drive_frequencies(p, s, t)
    assert abs(detunings(n1, m1, s, w1, w2)[0]) < 1e-12
    assert abs(detunings(n2, m2, s, w1, w2)[1]) < 1e-12
    # the closed formula agrees with dressed level differences
    e1 = s.level_energies(n1, m1)
    e2 = s.level_energies(n2, m2)
    assert w1 == pytest.approx(float(e1[2] - e1[1]), abs=1e-10)
    assert w2 == pytest.approx(float(e2[2] - e2[0]), abs=1e-10)


def test_delta_frequencies_recover_lambda_limit():
    target = TargetSpec.noon(2)
    lam = drive_frequencies(FIG3, dispersive_shifts(FIG3), target)
    # switch off the couplings absent from the Lambda picture by detuning them far away:
    # scale every Delta table entry except chi^a_fe, chi^a_ef, chi^b_fg, chi^b_gf towards zero
    p = replace(FIG3, qutrit_type="delta")
    s = dispersive_shifts(p)
    kept = {("a", "f", "e"), ("a", "e", "f"), ("b", "f", "g"), ("b", "g", "f")}
    prev = None
    for lam_scale in (1.0, 0.1, 0.01, 0.0):
        table = {k: (v if k in kept else lam_scale * v) for k, v in s.table.items()}
        d = replace(s, table=table)
        w = drive_frequencies(p, d, target)
        err = max(abs(w[0] - lam[0]), abs(w[1] - lam[1]))
        if prev is not None:
            assert err <= prev + 1e-15
        prev = err
    assert prev < 1e-12


def test_xi_frequencies():
    p = SystemParams.xi_table()
    s = dispersive_shifts(p)
    t = TargetSpec.noon(2)
    w1, w2 = xi_drive_frequencies(p, s, t)
    d1, d2 = detunings(np.array(t.n_1), np.array(t.m_1), s, w1, w2)
    assert abs(d1) < 1e-12
    assert abs(detunings(t.n_2, t.m_2, s, w1, w2)[1]) < 1e-12
    H = effective_hamiltonian(p.with_truncation(SMALL))
    diag = np.diag(H).real
    assert w1 == pytest.approx(diag[SMALL.index("e", 0, 2)] - diag[SMALL.index("g", 0, 2)], abs=1e-12)
    assert w2 == pytest.approx(diag[SMALL.index("f", 2, 0)] - diag[SMALL.index("e", 2, 0)], abs=1e-12)
    p0 = replace(p, g_a=0.0, g_b=0.0)
    w = xi_drive_frequencies(p0, dispersive_shifts(p0), t)
    assert w == pytest.approx((80.0, 100.0))


def test_detuning_example_and_linearity():
    s = dispersive_shifts(FIG3)
    t = TargetSpec.noon(1)
    w1, w2 = drive_frequencies(FIG3, s, t)
    d, _ = detunings(1, 0, s, w1, w2)
    expected = 2 * (s.chi_a + s.chi_a_prime) - (s.chi_b + s.chi_b_prime)
    assert float(d) == pytest.approx(expected, abs=1e-12)
    assert float(d) == pytest.approx(0.117134, abs=1e-6)
    n, m = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
    D, _ = detunings(n, m, s, w1, w2)
    assert np.allclose(np.diff(D, axis=0), 2 * (s.chi_a + s.chi_a_prime), atol=1e-12)


def test_rotating_drive_elements():
    tr = ModeTruncation(11, 11)
    s = dispersive_shifts(FIG3)
    t = TargetSpec.noon(2)
    H = rotating_drive_hamiltonian(0.0, DriveSpec(Omega=1e-3), s, t, tr)
    assert H[tr.index("f", 0, 2), tr.index("e", 0, 2)] == pytest.approx(1e-3)
    H = rotating_drive_hamiltonian(0.0, DriveSpec(Omega=1e-3, epsilon=0.1), s, t, tr)
    assert H[tr.index("f", 2, 0), tr.index("g", 2, 0)] == pytest.approx(1.1e-3)
    assert H[tr.index("f", 0, 2), tr.index("e", 0, 2)] == pytest.approx(0.9e-3)


@given(st.floats(0, 5000), st.floats(-0.3, 0.3), st.floats(-1e-4, 1e-4), st.sampled_from([0.0, 0.3]))
@settings(max_examples=25, deadline=None)
def test_rotating_drive_hermitian(t, eps, eps_p, g_ab):
    tr = ModeTruncation(11, 11)
    p = replace(FIG3, g_ab=g_ab)
    d = RotatingFrameDrive(dispersive_shifts(p), DriveSpec(Omega=2e-3, epsilon=eps, epsilon_prime=eps_p), TargetSpec.noon(1), tr)
    assert hermiticity_error(d.dense(t)) < 1e-12


def test_frequency_error_phase():
    tr = ModeTruncation(11, 11)
    s = dispersive_shifts(FIG3)
    t = TargetSpec.noon(1)
    eps = 3e-5
    d = RotatingFrameDrive(s, DriveSpec(Omega=5e-3, epsilon_prime=eps), t, tr)
    w1 = drive_frequencies(FIG3, s, t)[0]
    time = 123.4
    el = d.dense(time)[tr.index("f", 0, 1), tr.index("e", 0, 1)]
    assert el == pytest.approx(5e-3 * np.exp(-1j * w1 * eps * time), abs=1e-12)


def test_off_resonant_element_averages_out():
    tr = ModeTruncation(11, 11)
    s = dispersive_shifts(FIG3)
    t = TargetSpec.noon(1)
    d = RotatingFrameDrive(s, DriveSpec(Omega=1e-3), t, tr)
    delta = d.detuning[0, 1, 0]
    T = 2000.0
    times = np.linspace(0, T, 200001)
    vals = np.array([d.coefficients(x)[0, 1, 0] for x in times[::100]])
    avg = trapezoid(np.exp(1j * delta * times), times) / T * 1e-3
    assert abs(avg) < 1e-3 * 2 / (abs(delta) * T)
    assert np.allclose(np.abs(vals), 1e-3)


def test_static_frame_matches_time_dependent_hamiltonian():
    tr = ModeTruncation(4, 4)
    p = replace(FIG3, g_ab=0.2)
    d = RotatingFrameDrive(dispersive_shifts(p), DriveSpec(Omega=2e-2), TargetSpec.noon(1), tr)
    Hs = d.static_hamiltonian()
    for time in (0.0, 0.37, 5.1):
        phase = d.frame_phase(time)
        # H_I(t) = U H_s U^dag - (E - lambda) with U = diag(phase)
        lam = d.frame_levels()
        shift = (d.energies - lam[:, None, None]).ravel()
        H_I = phase[:, None] * Hs * phase.conj()[None, :] - np.diag(shift)
        assert np.max(np.abs(H_I - d.dense(time))) < 1e-10


def test_dispersive_guard_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        replace(FIG3, omega_e=28.0).check_dispersive()
    assert any("dispersive" in str(w.message) for w in rec)


def test_schedule_durations():
    d = DriveSpec(Omega=1e-3, schedule="sequential")
    assert d.total_duration == pytest.approx(2 * math.pi / (2e-3))
    with pytest.raises(ValueError):
        DriveSpec(Omega=0.0)
