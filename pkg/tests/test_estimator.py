import math

import numpy as np
import pytest

from oracles import smallest_n_satisfying
from sqst.estimator import (decompose_operator, estimate_diagonal,
                            estimate_element, estimate_mean, exact_fold,
                            exact_fold_diagonal, exact_fold_mean, extreme_operator,
                            plan_samples, plan_samples_general)
from sqst.measurement import MeasurementRecord, PovmMode, outcome_distribution, sample_record
from sqst.mub import build_mub, eta
from sqst.states import (make_pure_superposition, max_norm, philox_rng, random_density,
                         random_hermitian, schatten_norm)


@pytest.fixture(scope="module")
def fam2():
    return build_mub(2)


@pytest.fixture(scope="module")
def fam4():
    return build_mub(4)


# ---------------------------------------------------------------------------
# element estimation


def test_constant_record_estimates_one(fam2):
    # every outcome (m=2, k=0) carries eta = +1 for the (0, 1) element
    n = 50
    record = MeasurementRecord(d=2, mode=PovmMode.OFFDIAG, seed=0, n=n,
                               mub_fingerprint=fam2.fingerprint(),
                               ms=np.full(n, 2, dtype=np.uint16),
                               ks=np.zeros(n, dtype=np.uint16))
    est = estimate_element(record, fam2, 0, 1)
    assert est.value == pytest.approx(1.0, abs=1e-12)


def test_exact_fold_plus_state_enumeration(fam2):
    # independent oracle: enumerate the four outcomes of |+><+| by hand
    #   (m=2,k=0): eta +1, p 1/2;  (m=2,k=1): eta -1, p 0
    #   (m=3,k=0): eta -1j, p 1/4; (m=3,k=1): eta +1j, p 1/4
    expected = (+1) * 0.5 + (-1) * 0.0 + (-1j) * 0.25 + (+1j) * 0.25
    assert expected == 0.5
    rho = make_pure_superposition(0, 1, 1, 1, 2)
    dist = outcome_distribution(rho, fam2, PovmMode.OFFDIAG)
    assert exact_fold(dist, fam2, 0, 1) == pytest.approx(expected, abs=1e-12)


def test_exact_fold_basis_state_cancels(fam2):
    rho = make_pure_superposition(0, 1, 1, 0, 2)
    dist = outcome_distribution(rho, fam2, PovmMode.OFFDIAG)
    assert exact_fold(dist, fam2, 0, 1) == pytest.approx(0.0, abs=1e-12)


def test_exact_fold_matches_all_elements_d5():
    family = build_mub(5)
    rho = random_density(5, 5, seed=21)
    dist = outcome_distribution(rho, family, PovmMode.OFFDIAG)
    for i in range(5):
        for j in range(5):
            if i != j:
                assert exact_fold(dist, family, i, j) == pytest.approx(rho[i, j], abs=1e-10)


def test_exact_fold_maximally_mixed_is_zero(fam4):
    dist = outcome_distribution(np.eye(4, dtype=complex) / 4, fam4, PovmMode.OFFDIAG)
    for i in range(4):
        for j in range(4):
            if i != j:
                assert abs(exact_fold(dist, fam4, i, j)) <= 1e-12


def test_exact_fold_complex_superposition():
    family = build_mub(8)
    rho = make_pure_superposition(2, 5, 1, 1j, 8)
    dist = outcome_distribution(rho, family, PovmMode.OFFDIAG)
    assert exact_fold(dist, family, 2, 5) == pytest.approx(-0.5j, abs=1e-10)


def test_estimate_element_mode_and_index_errors(fam2):
    rho = np.eye(2, dtype=complex) / 2
    comp = sample_record(outcome_distribution(rho, fam2, PovmMode.COMPUTATIONAL), 10, 0)
    off = sample_record(outcome_distribution(rho, fam2, PovmMode.OFFDIAG), 10, 0)
    with pytest.raises(ValueError, match="mode"):
        estimate_element(comp, fam2, 0, 1)
    with pytest.raises(ValueError, match="diagonal"):
        estimate_element(off, fam2, 1, 1)


def test_estimate_element_rejects_wrong_family(fam2):
    fam3 = build_mub(3)
    rho = np.eye(3, dtype=complex) / 3
    record = sample_record(outcome_distribution(rho, fam3, PovmMode.OFFDIAG), 10, 0)
    with pytest.raises(ValueError, match="dimension"):
        estimate_element(record, fam2, 0, 1)


def test_estimate_is_pure_fold_reorder_invariant(fam4):
    rho = random_density(4, 4, seed=2)
    dist = outcome_distribution(rho, fam4, PovmMode.OFFDIAG)
    record = sample_record(dist, 100_000, seed=77)
    perm = philox_rng(3).permutation(record.n)
    shuffled = MeasurementRecord(d=4, mode=PovmMode.OFFDIAG, seed=record.seed,
                                 n=record.n, mub_fingerprint=record.mub_fingerprint,
                                 ms=record.ms[perm], ks=record.ks[perm])
    for (i, j) in [(0, 1), (2, 3), (1, 0)]:
        a = estimate_element(record, fam4, i, j).value
        b = estimate_element(shuffled, fam4, i, j).value
        assert abs(a - b) <= 1e-9


def test_estimate_modulus_bounded_by_one(fam4):
    rho = random_density(4, 1, seed=10)
    record = sample_record(outcome_distribution(rho, fam4, PovmMode.OFFDIAG), 500, 4)
    for i in range(4):
        for j in range(4):
            if i != j:
                assert abs(estimate_element(record, fam4, i, j).value) <= 1.0 + 1e-12


def test_unbiasedness_over_many_records(fam2):
    # 200 records of n=1e4: the mean estimate lands within 5 standard errors
    rho = make_pure_superposition(0, 1, 1, 1, 2)
    dist = outcome_distribution(rho, fam2, PovmMode.OFFDIAG)
    estimates = []
    for rep in range(200):
        record = sample_record(dist, 10_000, seed=1000 + rep)
        estimates.append(estimate_element(record, fam2, 0, 1).value)
    estimates = np.array(estimates)
    se = estimates.std() / math.sqrt(len(estimates))
    assert abs(estimates.mean() - 0.5) <= 5 * se


# ---------------------------------------------------------------------------
# diagonal estimation


def test_diagonal_point_mass(fam4):
    rho = np.zeros((4, 4), dtype=complex)
    rho[3, 3] = 1.0
    dist = outcome_distribution(rho, fam4, PovmMode.COMPUTATIONAL)
    record = sample_record(dist, 200, seed=2)
    assert estimate_diagonal(record, 3).value == 1.0
    assert estimate_diagonal(record, 0).value == 0.0


def test_diagonal_exact_folds(fam2):
    mixed = outcome_distribution(np.eye(2, dtype=complex) / 2, fam2, PovmMode.COMPUTATIONAL)
    assert exact_fold_diagonal(mixed, 0) == pytest.approx(0.5, abs=1e-14)
    plus = outcome_distribution(make_pure_superposition(0, 1, 1, 1, 2), fam2,
                                PovmMode.COMPUTATIONAL)
    for i in (0, 1):
        assert exact_fold_diagonal(plus, i) == pytest.approx(0.5, abs=1e-12)


def test_diagonal_mode_mismatch(fam2):
    record = sample_record(
        outcome_distribution(np.eye(2, dtype=complex) / 2, fam2, PovmMode.OFFDIAG), 10, 0)
    with pytest.raises(ValueError, match="computational"):
        estimate_diagonal(record, 0)


# ---------------------------------------------------------------------------
# planners


def test_plan_samples_pinned_value():
    assert plan_samples(0.01, 0.01, 1) == 119_830


def test_plan_samples_small_case():
    assert plan_samples(0.1, 0.01, 1) == 1_199


def test_plan_samples_is_exact_inversion():
    # oracle: integer scan of the displayed bound
    for eps, delta, m in [(0.1, 0.01, 1), (0.2, 0.5, 3), (0.05, 0.1, 16), (0.3, 0.02, 2)]:
        assert plan_samples(eps, delta, m) == smallest_n_satisfying(eps, delta, m)


def test_plan_samples_boundary_property():
    for eps, delta, m in [(0.01, 0.01, 1), (0.01, 0.01, 16), (0.07, 0.3, 5)]:
        n = plan_samples(eps, delta, m)
        assert 4 * m * math.exp(-n * eps**2 / 2) <= delta
        assert 4 * m * math.exp(-(n - 1) * eps**2 / 2) > delta


def test_plan_samples_multi_element():
    # union bound over 16 elements: smallest n with 4*16*exp(-n*eps^2/2) <= delta
    assert plan_samples(0.01, 0.01, 16) == smallest_n_satisfying(0.01, 0.01, 16) == 175_282


def test_plan_samples_validation():
    with pytest.raises(ValueError):
        plan_samples(0.0, 0.01)
    with pytest.raises(ValueError):
        plan_samples(0.01, 1.0)
    with pytest.raises(ValueError):
        plan_samples(0.01, 0.01, 0)


def test_plan_general_pinned_value():
    assert plan_samples_general(0.05, 0.01, 1 / 5, 4, 1) == 4_793


def test_plan_general_dimension_independent():
    ns = {plan_samples_general(0.05, 0.01, 1.0 / (d + 1), d, 1) for d in (2, 8, 32)}
    assert ns == {4_793}


def test_plan_general_k_scaling():
    # K = 1 at d = 4 costs (K*(d+1))^2 = 25 times the K = 1/5 count
    lo = plan_samples_general(0.05, 0.01, 1 / 5, 4, 1)
    hi = plan_samples_general(0.05, 0.01, 1.0, 4, 1)
    assert hi / lo == pytest.approx(25.0, rel=1e-3)


def test_plan_general_validation():
    with pytest.raises(ValueError):
        plan_samples_general(0.05, 0.01, 0.0, 4)
    with pytest.raises(ValueError):
        plan_samples_general(0.05, 0.01, 0.2, 0)


# ---------------------------------------------------------------------------
# operator decomposition


def test_decompose_pauli_z(fam2):
    z = np.diag([1.0, -1.0]).astype(complex)
    coeffs = decompose_operator(z, fam2)
    # tr[Z Pi] by hand: (+1, -1) in the computational basis, 0 in X and Y
    assert np.allclose(coeffs.coeffs[0], [1.0, -1.0], atol=1e-12)
    assert np.allclose(coeffs.coeffs[1:], 0.0, atol=1e-12)
    assert coeffs.trace == pytest.approx(0.0, abs=1e-12)
    assert np.abs(coeffs.reconstruct(fam2) - z).max() <= 1e-10


def test_decompose_identity(fam2):
    coeffs = decompose_operator(np.eye(2, dtype=complex), fam2)
    assert np.allclose(coeffs.coeffs, 1.0, atol=1e-12)
    assert coeffs.identity_coeff == pytest.approx(-2.0)
    assert np.abs(coeffs.reconstruct(fam2) - np.eye(2)).max() <= 1e-10
    assert coeffs.k_bound <= 1e-12  # identity has no traceless part


def test_decompose_matrix_unit_matches_eta():
    # the |j><i| operator has coefficients eta_ij / d on the unbiased bases
    d = 3
    family = build_mub(d)
    i, j = 0, 2
    unit = np.zeros((d, d), dtype=complex)
    unit[j, i] = 1.0
    coeffs = decompose_operator(unit, family)
    assert np.allclose(coeffs.coeffs[0], 0.0, atol=1e-12)
    for m in range(2, d + 2):
        for k in range(d):
            assert coeffs.coeffs[m - 1, k] == pytest.approx(
                eta(family, i, j, k, m) / d, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_decompose_reconstruct_round_trip(d):
    family = build_mub(d)
    rng = philox_rng(31, d)
    for _ in range(20):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        coeffs = decompose_operator(a, family)
        assert max_norm(coeffs.reconstruct(family) - a) <= 1e-10


def test_decompose_shape_mismatch(fam2):
    with pytest.raises(ValueError, match="shape"):
        decompose_operator(np.eye(3, dtype=complex), fam2)


# ---------------------------------------------------------------------------
# extreme operators


def test_extreme_zero_phases_is_scaled_identity_sum(fam4):
    # sum of all projectors is (d+1) I, so zero phases at K=1 give (d+1) I
    coeffs = extreme_operator(np.zeros((5, 4)), 1.0, fam4)
    assert np.abs(coeffs.reconstruct(fam4) - 5 * np.eye(4)).max() <= 1e-10
    assert coeffs.trace == pytest.approx(20.0)


def test_extreme_single_phase_block(fam2):
    # one phase theta on cell (m=2, k=0): A = K sum Pi + K (e^i theta - 1) Pi_0^(2)
    theta = 0.7
    phases = np.zeros((3, 2))
    phases[1, 0] = theta
    coeffs = extreme_operator(phases, 0.5, fam2)
    base = 0.5 * 3 * np.eye(2)
    bump = 0.5 * (np.exp(1j * theta) - 1) * fam2.projector(0, 2)
    assert np.abs(coeffs.reconstruct(fam2) - base - bump).max() <= 1e-12


def test_extreme_coefficients_have_modulus_k(fam4):
    rng = philox_rng(8)
    coeffs = extreme_operator(rng.uniform(0, 2 * np.pi, (5, 4)), 0.2, fam4)
    assert np.allclose(np.abs(coeffs.coeffs), 0.2, atol=1e-14)
    assert coeffs.k_bound == 0.2


@pytest.mark.parametrize("d", [2, 4, 8, 16, 32])
def test_extreme_operator_norm_bounded(d):
    # K = 1/(d+1): each basis block has operator norm at most 1/(d+1), so the
    # assembled operator norm stays O(1); assert the generous bound 2
    family = build_mub(d)
    rng = philox_rng(14, d)
    for _ in range(100 // max(1, d // 8)):
        phases = rng.uniform(0, 2 * np.pi, (d + 1, d))
        a = extreme_operator(phases, 1.0 / (d + 1), family).reconstruct(family)
        assert schatten_norm(a, np.inf) <= 2.0


def test_extreme_phase_shape_mismatch(fam2):
    with pytest.raises(ValueError, match="shape"):
        extreme_operator(np.zeros((2, 2)), 1.0, fam2)


# ---------------------------------------------------------------------------
# mean-value estimation


def test_mean_fold_pauli_z_on_basis_state(fam2):
    rho = make_pure_superposition(0, 1, 1, 0, 2)  # |0><0|, <Z> = +1
    dist = outcome_distribution(rho, fam2, PovmMode.FULL)
    coeffs = decompose_operator(np.diag([1.0, -1.0]).astype(complex), fam2)
    assert exact_fold_mean(dist, coeffs) == pytest.approx(1.0, abs=1e-10)


def test_mean_fold_identity_is_one(fam4):
    coeffs = decompose_operator(np.eye(4, dtype=complex), fam4)
    for seed in range(5):
        rho = random_density(4, 1 + seed % 4, seed)
        dist = outcome_distribution(rho, fam4, PovmMode.FULL)
        assert exact_fold_mean(dist, coeffs) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_mean_fold_matches_trace_oracle(d):
    family = build_mub(d)
    rng = philox_rng(40, d)
    for rep in range(12):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = random_density(d, 1 + rep % d, 500 + rep)
        dist = outcome_distribution(rho, family, PovmMode.FULL)
        coeffs = decompose_operator(g, family)
        assert exact_fold_mean(dist, coeffs) == pytest.approx(
            complex(np.trace(rho @ g)), abs=1e-10)


def test_estimate_mean_sampled(fam2):
    rho = make_pure_superposition(0, 1, 1, 0, 2)
    dist = outcome_distribution(rho, fam2, PovmMode.FULL)
    record = sample_record(dist, 200_000, seed=6)
    coeffs = decompose_operator(np.diag([1.0, -1.0]).astype(complex), fam2)
    value = estimate_mean(record, coeffs)
    assert value.real == pytest.approx(1.0, abs=0.05)


def test_estimate_mean_mode_mismatch(fam2):
    rho = np.eye(2, dtype=complex) / 2
    record = sample_record(outcome_distribution(rho, fam2, PovmMode.OFFDIAG), 10, 0)
    coeffs = decompose_operator(np.eye(2, dtype=complex), fam2)
    with pytest.raises(ValueError, match="full"):
        estimate_mean(record, coeffs)


def test_mean_fold_extreme_operator_matches_trace(fam4):
    rng = philox_rng(55)
    for rep in range(10):
        phases = rng.uniform(0, 2 * np.pi, (5, 4))
        coeffs = extreme_operator(phases, 0.2, fam4)
        a = coeffs.reconstruct(fam4)
        rho = random_density(4, 4, 700 + rep)
        dist = outcome_distribution(rho, fam4, PovmMode.FULL)
        assert exact_fold_mean(dist, coeffs) == pytest.approx(
            complex(np.trace(rho @ a)), abs=1e-10)
