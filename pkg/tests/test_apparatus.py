import numpy as np
import pytest

from hyperbell.apparatus import (
    AnalyzerSettings,
    DetectorBasis,
    MIDDLE_BIN_AMPLITUDE,
    OutcomeMode,
    WavePlate,
    binarize_outcomes,
    detector_basis,
    hwp_jones,
    middle_bin_coincidence_probability,
    outcome_table,
    pair_jones,
    polarizer_projector,
    qwp_jones,
    random_settings,
    settings_from_vector,
    single_party_marginal,
    waveplate_jones,
)
from hyperbell.quantum_core import (
    StateSpec,
    basis_ket,
    density,
    joint_probability,
    make_state,
    random_density_matrix,
)

HT1, HT2, VT1, VT2 = (basis_ket(i) for i in range(4))


def same_ray(a, b, tol=1e-10):
    return abs(abs(np.vdot(a, b)) - 1.0) < tol


def test_jones_matrices_unitary_and_values():
    for angle in np.linspace(-3, 3, 13):
        for j in (hwp_jones(angle), qwp_jones(angle)):
            assert np.allclose(j.conj().T @ j, np.eye(2), atol=1e-12)
    # HWP at 22.5 degrees rotates H onto the diagonal
    out = hwp_jones(np.pi / 8) @ np.array([1, 0])
    assert abs(out[0]) == pytest.approx(abs(out[1]))
    assert np.allclose(pair_jones(0.0, 0.0), np.eye(2), atol=1e-15)


def test_waveplate_validation():
    assert np.allclose(waveplate_jones(WavePlate("HWP", 0.3)), hwp_jones(0.3))
    with pytest.raises(ValueError):
        WavePlate("XWP", 0.0)
    with pytest.raises(ValueError):
        WavePlate("HWP", float("inf"))


def test_worked_projectors():
    d1 = detector_basis(AnalyzerSettings()).kets[0]
    assert same_ray(d1, HT1)
    d1 = detector_basis(AnalyzerSettings(hwp1=np.pi / 8)).kets[0]
    assert same_ray(d1, (HT1 + VT1) / np.sqrt(2))
    d1 = detector_basis(AnalyzerSettings(hwp2=np.pi / 8)).kets[0]
    assert same_ray(d1, (HT1 + VT2) / np.sqrt(2))


def test_all_zero_basis_is_computational():
    kets = detector_basis(AnalyzerSettings()).kets
    assert np.allclose(np.abs(kets), np.eye(4)[[0, 3, 1, 2]], atol=1e-12)


def test_orthonormal_for_random_settings(rng):
    for _ in range(1000):
        assert detector_basis(random_settings(rng)).is_orthonormal()


def test_settings_degrees_round_trip():
    s = AnalyzerSettings.from_degrees(22.5, 0, 45, input_polarizer=45.0)
    assert s.hwp1 == pytest.approx(np.pi / 8)
    assert s.hwp2 == pytest.approx(np.pi / 4)
    d = s.to_degrees()
    assert d["hwp1"] == pytest.approx(22.5)
    assert d["input_polarizer"] == pytest.approx(45.0)
    with pytest.raises(ValueError):
        AnalyzerSettings(hwp1=float("nan"))
    with pytest.raises(ValueError):
        AnalyzerSettings.from_degrees(*range(7))


def test_settings_from_vector_folds_angles():
    s = settings_from_vector([np.pi + 0.1, -0.2], ["hwp1", "qwp3"])
    assert s.hwp1 == pytest.approx(0.1)
    assert s.qwp3 == pytest.approx(np.pi - 0.2)


def test_port_a_kets_stay_in_port_a_subspace(rng):
    for _ in range(200):
        s = random_settings(rng)
        s = s.with_angles(hwp1=0.0, qwp1=0.0)
        kets = detector_basis(s).kets
        for d in kets[:2]:
            assert abs(np.vdot(HT1, d) * np.vdot(HT2, d)) < 1e-12
            assert abs(d[1]) < 1e-12 and abs(d[2]) < 1e-12
        for d in kets[2:]:
            assert abs(d[0]) < 1e-12 and abs(d[3]) < 1e-12


def test_outcome_table_examples():
    psi4 = density(make_state(StateSpec("psi4")))
    t = outcome_table(psi4, AnalyzerSettings(), AnalyzerSettings())
    assert np.allclose(t, np.eye(4) / 4, atol=1e-12)
    prod = density(basis_ket(0, 16))
    t = outcome_table(prod, AnalyzerSettings(), AnalyzerSettings())
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    assert np.allclose(t, expected)
    rng = np.random.default_rng(3)
    t = outcome_table(np.eye(16) / 16, random_settings(rng), random_settings(rng))
    assert np.allclose(t, 1 / 16, atol=1e-12)


def test_outcome_table_matches_joint_probability(rng):
    rho = random_density_matrix(16, rng)
    sa, sb = random_settings(rng), random_settings(rng)
    ka, kb = detector_basis(sa).kets, detector_basis(sb).kets
    t = outcome_table(rho, sa, sb)
    oracle = np.array([[joint_probability(rho, ka[i], kb[j]) for j in range(4)] for i in range(4)])
    assert np.allclose(t, oracle, atol=1e-12)
    assert t.sum() == pytest.approx(1.0, abs=1e-10)


def test_outcome_table_dim_mismatch():
    with pytest.raises(ValueError):
        outcome_table(np.eye(4) / 4, AnalyzerSettings(), AnalyzerSettings())


def test_no_signaling(rng):
    worst = 0.0
    for _ in range(50):
        rho = random_density_matrix(16, rng)
        sa = random_settings(rng)
        m1 = outcome_table(rho, sa, random_settings(rng)).sum(axis=1)
        m2 = outcome_table(rho, sa, random_settings(rng)).sum(axis=1)
        worst = max(worst, np.max(np.abs(m1 - m2)))
        assert np.allclose(m1, single_party_marginal(rho, sa, 0), atol=1e-10)
    assert worst < 1e-10


def test_middle_bin_survival_is_constant(rng):
    expected = MIDDLE_BIN_AMPLITUDE**4
    assert expected == pytest.approx(0.25)
    for _ in range(50):
        rho = random_density_matrix(16, rng)
        p = middle_bin_coincidence_probability(rho, random_settings(rng), random_settings(rng))
        assert p == pytest.approx(expected, abs=1e-12)


def test_input_polarizer_filters_but_keeps_basis():
    s = AnalyzerSettings(input_polarizer=np.pi / 4)
    b = detector_basis(s)
    assert b.is_orthonormal()
    eff = b.effective_kets()
    assert np.allclose(eff, (polarizer_projector(np.pi / 4) @ b.kets.T).T)
    # the filter projects half the weight of each detector ket away
    assert np.allclose(np.linalg.norm(eff, axis=1) ** 2, 0.5)
    assert DetectorBasis(np.eye(4)).effects().shape == (4, 4, 4)


def test_binarize_examples():
    u = np.full((4, 4), 1 / 16)
    assert np.allclose(binarize_outcomes(u, "detector1_vs_rest", "detector1_vs_rest"), [[1 / 16, 3 / 16], [3 / 16, 9 / 16]])
    assert np.allclose(binarize_outcomes(u, "portA_vs_portB", "portA_vs_portB"), 0.25)
    assert np.allclose(binarize_outcomes(u, OutcomeMode.PAIR_D1_D4, OutcomeMode.PAIR_D1_D4), 0.25)


def test_binarize_errors():
    t = np.zeros((4, 4))
    t[1, 2] = 1
    with pytest.raises(ValueError):
        binarize_outcomes(t, "pair_D1_D4", "pair_D1_D4")
    with pytest.raises(ValueError):
        binarize_outcomes(np.zeros((2, 2)), "portA_vs_portB", "portA_vs_portB")
    with pytest.raises(ValueError):
        binarize_outcomes(t, "bogus", "portA_vs_portB")


def test_binarize_preserves_mass(rng):
    rho = random_density_matrix(16, rng)
    t = outcome_table(rho, random_settings(rng), random_settings(rng))
    for mode in ("detector1_vs_rest", "portA_vs_portB"):
        assert binarize_outcomes(t, mode, mode).sum() == pytest.approx(1.0, abs=1e-12)
