import dataclasses
import itertools
import math

import numpy as np
import pytest

from lfa import (
    DEFAULT_SEARCHES,
    EXPECTED_SMOOTHING,
    ParameterSearch,
    distribution_symbol,
    eig3,
    frequency_grid,
    high_frequencies,
    is_high,
    mass_ratio_range,
    optimize_params,
    preconditioner_symbol,
    relaxation_symbol,
    scalar_mass_smoothing_factor,
    smoothing_factor,
    stokes_symbol,
    symbol_scalars,
    transformed_symbol,
    update_symbol,
    uzawa_branches,
    uzawa_lower_bound_high_m2,
    uzawa_lower_bound_low_m2,
    uzawa_omega_range,
    uzawa_optimal_params,
    uzawa_smoothing_factor,
)
from mac_discretization import FrequencyDomainError
from relaxation import RelaxParams, RelaxScheme, default_params

THIRD = 1.0 / 3.0
UZAWA_MU = math.sqrt(THIRD)


@pytest.fixture
def high_thetas(rng):
    theta1, theta2 = high_frequencies(64, "cell")
    index = rng.choice(theta1.size, size=50, replace=False)
    return theta1[index], theta2[index]


# Frequency sampling
def test_high_frequencies_exclude_low_box():
    """Test every sampled high frequency lies outside [-pi/2, pi/2)^2"""
    theta1, theta2 = high_frequencies(32, "node")
    assert is_high(theta1, theta2).all()


def test_node_sampling_hits_extremal_points():
    """Test node sampling contains (pi, pi) and (pi/2, pi/2)"""
    theta1, theta2 = frequency_grid(16, "node")
    points = set(zip(np.round(theta1, 12), np.round(theta2, 12)))
    assert (round(np.pi, 12), round(np.pi, 12)) in points
    assert (round(np.pi / 2, 12), round(np.pi / 2, 12)) in points


def test_unknown_sampling_mode():
    """Test unknown sampling modes raise ValueError"""
    with pytest.raises(ValueError):
        frequency_grid(16, "random")


def test_mass_ratio_range():
    """Test m_r spans exactly [8/9, 16/9] over the high frequencies"""
    low, high = mass_ratio_range(256, "node")
    assert low == pytest.approx(8.0 / 9.0, abs=1e-6)
    assert high == pytest.approx(16.0 / 9.0, abs=1e-6)


def test_symbol_scalars_at_pi():
    """Test m = 2, m_s = 9, m_r = 8/9 at (pi, pi)"""
    m, m_s, m_r = symbol_scalars(np.pi, np.pi)
    assert (float(m), float(m_s), float(m_r)) == pytest.approx((2.0, 9.0, 8.0 / 9.0))


# Symbols
def test_relaxation_symbol_rejects_origin():
    """Test the zero frequency raises FrequencyDomainError"""
    with pytest.raises(FrequencyDomainError):
        relaxation_symbol(RelaxScheme.QDR, RelaxParams(omega=0.75), 0.0, 0.0)


def test_stokes_symbol_is_hermitian(high_thetas):
    """Test the Stokes symbol equals its conjugate transpose"""
    entries = stokes_symbol(*high_thetas, h=0.25).entries
    assert np.allclose(entries, np.conj(np.swapaxes(entries, -1, -2)), atol=1e-14)


def test_transformed_symbol_is_lower_triangular(high_thetas):
    """Test L P is block lower triangular with Laplacian diagonal"""
    h = 1.0 / 32
    transformed = transformed_symbol(*high_thetas, h=h)
    laplacian = stokes_symbol(*high_thetas, h=h).entries[..., 0, 0]
    scale = np.abs(laplacian).max()
    for row, column in ((0, 1), (0, 2), (1, 0), (1, 2)):
        assert np.abs(transformed[..., row, column]).max() < 1e-12 * scale
    for k in range(3):
        assert np.allclose(transformed[..., k, k], laplacian, rtol=1e-12)


@pytest.mark.parametrize("scheme", [RelaxScheme.QDR, RelaxScheme.DWJ_BASELINE])
def test_distributive_update_is_distributed_preconditioner_inverse(scheme, high_thetas):
    """Test W = P M_D^{-1} for distributive schemes"""
    params = default_params(scheme)
    expected = distribution_symbol(*high_thetas) @ np.linalg.inv(preconditioner_symbol(scheme, params, *high_thetas))
    assert np.allclose(update_symbol(scheme, params, *high_thetas), expected, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("scheme", [RelaxScheme.QBSR_EXACT, RelaxScheme.DIAG_BSR_BASELINE,
                                    RelaxScheme.QSIGMA_UZAWA, RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE])
def test_update_is_preconditioner_inverse(scheme, high_thetas):
    """Test W = M^{-1} for Braess-Sarazin and Uzawa schemes"""
    params = default_params(scheme)
    expected = np.linalg.inv(preconditioner_symbol(scheme, params, *high_thetas))
    assert np.allclose(update_symbol(scheme, params, *high_thetas), expected, rtol=1e-10, atol=1e-12)


def test_inexact_schemes_have_no_closed_preconditioner():
    """Test preconditioner_symbol refuses inexact Braess-Sarazin"""
    with pytest.raises(ValueError):
        preconditioner_symbol(RelaxScheme.QIBSR, default_params(RelaxScheme.QIBSR), 1.0, 2.0)


def test_uzawa_preconditioner_determinant_vanishes_at_eigenvalues(high_thetas):
    """Test det(L - lambda M_U) = 0 at lambda = 1 - eigenvalue of S"""
    params = default_params(RelaxScheme.QSIGMA_UZAWA)
    stokes = stokes_symbol(*high_thetas).entries
    preconditioner = preconditioner_symbol(RelaxScheme.QSIGMA_UZAWA, params, *high_thetas)
    relaxation = relaxation_symbol(RelaxScheme.QSIGMA_UZAWA, params, *high_thetas)
    eigenvalues = np.linalg.eigvals(relaxation.entries)
    for k in range(3):
        lam = ((1.0 - eigenvalues[..., k]) / params.omega)[..., None, None]
        determinant = np.linalg.det(stokes - lam * preconditioner)
        scale = np.abs(np.linalg.det(preconditioner)) * (1.0 + np.abs(lam[..., 0, 0])) ** 3
        assert (np.abs(determinant) < 1e-6 * scale).all()


# eig3
def test_eig3_matches_lapack(rng):
    """Test eig3 on 1000 random complex matrices against numpy.linalg.eigvals"""
    matrices = rng.standard_normal((1000, 3, 3)) + 1j * rng.standard_normal((1000, 3, 3))
    roots = eig3(matrices)
    reference = np.linalg.eigvals(matrices)
    distance = np.full(1000, np.inf)
    for permutation in itertools.permutations(range(3)):
        distance = np.minimum(distance, np.abs(roots - reference[:, list(permutation)]).max(axis=-1))
    assert distance.max() < 1e-9


def test_eig3_multiple_roots():
    """Test eig3 resolves double and triple eigenvalues exactly"""
    assert np.allclose(eig3(np.diag([2.0, 2.0, 5.0])), [2.0, 2.0, 5.0], atol=1e-12)
    jordan = np.array([[3.0, 1.0, 0.0], [0.0, 3.0, 1.0], [0.0, 0.0, 3.0]])
    assert np.allclose(eig3(jordan), [3.0, 3.0, 3.0], atol=1e-12)


def test_eig3_keeps_close_distinct_roots():
    """Test nearby but distinct eigenvalues are not merged"""
    matrix = np.diag([1.0, 1.0004, 3.0])
    roots = eig3(matrix)
    assert np.allclose(roots, [1.0, 1.0004, 3.0], rtol=0, atol=1e-10)
    scale = np.linalg.norm(matrix) ** 3
    for root in roots:
        assert abs(np.linalg.det(matrix - root * np.eye(3))) < 1e-9 * scale


def test_eig3_multiple_roots_under_similarity(rng):
    """Test double and defective roots survive a random change of basis"""
    basis = np.eye(3) + 0.3 * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    inverse = np.linalg.inv(basis)
    double = basis @ np.diag([2.0, 2.0, 5.0]) @ inverse
    assert np.allclose(eig3(double), [2.0, 2.0, 5.0], atol=1e-9)
    defective = basis @ np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 4.0]]) @ inverse
    assert np.allclose(eig3(defective), [-1.0, -1.0, 4.0], atol=1e-9)


def test_qdr_symbol_has_triple_eigenvalue(rng):
    """Test the Q-DR sweep symbol has the single eigenvalue 1 - omega m_r at 1000 high frequencies"""
    theta1, theta2 = high_frequencies(256, "cell")
    index = rng.choice(theta1.size, size=1000, replace=False)
    params = default_params(RelaxScheme.QDR)
    symbol = relaxation_symbol(RelaxScheme.QDR, params, theta1[index], theta2[index])
    expected = 1.0 - params.omega * symbol.m_r
    assert np.abs(symbol.eigenvalues() - expected[:, None]).max() < 1e-10


def test_qbsr_preconditioned_operator_eigenvalues(rng):
    """Test M_B^{-1} L has eigenvalues {1, 1, m_r} for alpha = 1"""
    theta1, theta2 = high_frequencies(256, "cell")
    m_r = symbol_scalars(theta1, theta2)[2]
    # the three eigenvalues meet at m_r = 1
    candidates = np.flatnonzero(np.abs(m_r - 1.0) > 0.05)
    index = rng.choice(candidates, size=500, replace=False)
    thetas = theta1[index], theta2[index]
    params = RelaxParams(omega=0.75, alpha=1.0)
    preconditioned = np.linalg.solve(preconditioner_symbol(RelaxScheme.QBSR_EXACT, params, *thetas),
                                     stokes_symbol(*thetas).entries)
    expected = np.sort(np.stack([np.ones(index.size), np.ones(index.size), m_r[index]], axis=-1), axis=-1)
    assert np.abs(eig3(preconditioned) - expected).max() < 1e-10


@pytest.mark.parametrize("scheme", [RelaxScheme.QDR, RelaxScheme.QBSR_EXACT, RelaxScheme.DWJ_BASELINE,
                                    RelaxScheme.QSIGMA_UZAWA])
def test_spectral_radius_matches_lapack(scheme):
    """Test the symbol spectral radius agrees with numpy.linalg.eigvals over sampled high frequencies"""
    symbol = relaxation_symbol(scheme, default_params(scheme), *high_frequencies(64, "cell"))
    reference = np.abs(np.linalg.eigvals(symbol.entries)).max(axis=-1)
    assert np.abs(symbol.spectral_radius() - reference).max() < 1e-6


def test_eig3_rejects_wrong_shape():
    """Test eig3 only accepts 3x3 blocks"""
    with pytest.raises(ValueError):
        eig3(np.eye(2))


# Smoothing factors
@pytest.mark.parametrize("scheme", [RelaxScheme.QDR, RelaxScheme.QBSR_EXACT, RelaxScheme.QSIGMA_UZAWA])
def test_smoothing_factor_of_presets(scheme):
    """Test the preset smoothing factors at resolution 256"""
    mu = smoothing_factor(scheme, default_params(scheme), resolution=256).mu
    assert mu == pytest.approx(EXPECTED_SMOOTHING[scheme], abs=2e-3)


def test_qibsr_optimum():
    """Test Q-IBSR reaches 1/3 at omega = 1, alpha = 4/3, omega_J = 1 and stays close at its preset"""
    optimum = smoothing_factor(RelaxScheme.QIBSR, RelaxParams(omega=1.0, alpha=4.0 / 3.0), 64, "node").mu
    assert optimum == pytest.approx(THIRD, abs=1e-4)
    preset = smoothing_factor(RelaxScheme.QIBSR, default_params(RelaxScheme.QIBSR), 256).mu
    assert THIRD - 1e-3 < preset < 0.35


@pytest.mark.parametrize("scheme, expected", [
    (RelaxScheme.DWJ_BASELINE, 0.6),
    (RelaxScheme.DIAG_BSR_BASELINE, 0.6),
    (RelaxScheme.DIAG_IBSR_BASELINE, 0.6),
    (RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE, math.sqrt(0.6)),
])
def test_baseline_presets_reach_optimum(scheme, expected):
    """Test the diagonal baseline presets sit at their optimal factors"""
    mu = smoothing_factor(scheme, default_params(scheme), resolution=64, sampling="node").mu
    assert mu == pytest.approx(expected, abs=1e-4)


def test_detuned_qdr_smoothing_factor():
    """Test Q-DR with omega = 0.9 gives max(|1 - 0.9 * 8/9|, |1 - 0.9 * 16/9|) = 0.6"""
    mu = smoothing_factor(RelaxScheme.QDR, RelaxParams(omega=0.9), resolution=64, sampling="node").mu
    assert mu == pytest.approx(0.6, abs=1e-4)


def test_smoothing_factor_is_h_independent():
    """Test the symbol scaling in h cancels in the smoothing factor"""
    params = default_params(RelaxScheme.QIBSR)
    coarse = smoothing_factor(RelaxScheme.QIBSR, params, 32, h=1.0).mu
    fine = smoothing_factor(RelaxScheme.QIBSR, params, 32, h=1.0 / 128).mu
    assert coarse == pytest.approx(fine, abs=1e-4)


def test_scalar_mass_smoother():
    """Test the scalar mass smoother reaches 1/3 at omega = 3/4"""
    assert scalar_mass_smoothing_factor(0.75) == pytest.approx(THIRD)
    assert scalar_mass_smoothing_factor(0.5) > THIRD


# Uzawa closed forms
def test_uzawa_optimal_params():
    """Test (alpha, sigma) = (4/3, 1/2) at omega = 1"""
    params = uzawa_optimal_params(1.0)
    assert (params.alpha, params.sigma) == (pytest.approx(4.0 / 3.0), pytest.approx(0.5))


def test_uzawa_omega_range():
    """Test the admissible omega interval for mu = sqrt(1/3)"""
    low, high = uzawa_omega_range(UZAWA_MU)
    assert low == pytest.approx(1.0 / (3 * UZAWA_MU))
    assert high == pytest.approx(2.0 / (3 * (1 - UZAWA_MU)))


def test_uzawa_preset_balances_branches():
    """Test mu_R = mu_C = sqrt(1/3) and the optimality conditions at the preset"""
    params = default_params(RelaxScheme.QSIGMA_UZAWA)
    diagnostics = uzawa_branches(params, 1.0)
    assert diagnostics.mu_R == pytest.approx(UZAWA_MU, abs=1e-12)
    assert diagnostics.mu_C == pytest.approx(UZAWA_MU, abs=1e-12)
    assert (diagnostics.x, diagnostics.y) == (pytest.approx(9.0 / 8.0), pytest.approx(3.0 / 8.0))
    assert diagnostics.m2 == pytest.approx(32.0 / 27.0)
    assert uzawa_smoothing_factor(params) == pytest.approx(UZAWA_MU, abs=1e-12)


def test_uzawa_discriminant_vanishes_at_m2():
    """Test the two roots coincide at m_r = 32/27 for the preset"""
    diagnostics = uzawa_branches(default_params(RelaxScheme.QSIGMA_UZAWA), 32.0 / 27.0)
    first, second = diagnostics.d_roots
    assert abs(first - second) < 1e-6


@pytest.mark.parametrize("params", [RelaxParams(omega=1.0, alpha=4.0 / 3.0, sigma=0.5),
                                    RelaxParams(omega=1.2, alpha=1.1, sigma=0.3)])
@pytest.mark.parametrize("m_r", [8.0 / 9.0, 1.0, 1.4, 16.0 / 9.0])
def test_uzawa_roots_satisfy_vieta(params, m_r):
    """Test lambda1 + lambda2 = (1 + sigma) m_r / alpha and lambda1 lambda2 = sigma m_r / alpha"""
    first, second = uzawa_branches(params, m_r).d_roots
    assert abs(first + second - (1.0 + params.sigma) * m_r / params.alpha) < 1e-12
    assert abs(first * second - params.sigma * m_r / params.alpha) < 1e-12


@pytest.mark.parametrize("omega", [1.0, 1.2])
def test_uzawa_chi_monotone_on_real_branch(omega):
    """Test chi_plus grows and chi_minus shrinks with m_r on [m2, 16/9]"""
    params = uzawa_optimal_params(omega)
    m2 = uzawa_branches(params, 1.0).m2
    samples = [uzawa_branches(params, m_r) for m_r in np.linspace(m2, 16.0 / 9.0, 40)]
    chi_plus = np.array([sample.chi_plus.real for sample in samples])
    chi_minus = np.array([sample.chi_minus.real for sample in samples])
    assert (np.diff(chi_plus) >= -1e-12).all()
    assert (np.diff(chi_minus) <= 1e-12).all()
    assert all(sample.branch == "real" for sample in samples[1:])


def test_uzawa_branch_trade_off():
    """Test mu_R falls and mu_C rises with omega^2 sigma / alpha at (1 + sigma) omega / alpha = 9/8"""
    diagnostics = []
    for sigma in np.linspace(0.4, 0.6, 11):
        params = RelaxParams(omega=1.0, alpha=8.0 * (1.0 + sigma) / 9.0, sigma=float(sigma))
        diagnostics.append(uzawa_branches(params, 1.0))
    assert all(item.x == pytest.approx(9.0 / 8.0) for item in diagnostics)
    y = np.array([item.y for item in diagnostics])
    mu_r = np.array([item.mu_R for item in diagnostics])
    mu_c = np.array([item.mu_C for item in diagnostics])
    assert (np.diff(y) > 0).all()
    assert (np.diff(mu_r) < 0).all()
    assert (np.diff(mu_c) > 0).all()
    balanced = int(np.argmin(np.abs(mu_r - mu_c)))
    assert y[balanced] == pytest.approx(3.0 / 8.0)
    assert max(mu_r[balanced], mu_c[balanced]) == pytest.approx(UZAWA_MU, abs=1e-12)


@pytest.mark.parametrize("omega", np.linspace(0.62, 1.5, 8))
def test_uzawa_relations_keep_optimum(omega):
    """Test alpha, sigma from omega on the admissible interval give mu = sqrt(1/3)"""
    params = uzawa_optimal_params(float(omega))
    assert uzawa_smoothing_factor(params) == pytest.approx(UZAWA_MU, abs=1e-9)
    assert smoothing_factor(RelaxScheme.QSIGMA_UZAWA, params, 64, "node").mu == pytest.approx(UZAWA_MU, abs=5e-3)


def test_uzawa_lower_bounds():
    """Test the lower bounds outside the optimal m2 window exceed sqrt(1/3)"""
    assert uzawa_lower_bound_high_m2() == pytest.approx(math.sqrt(2.0) / 2.0)
    assert uzawa_lower_bound_low_m2(1.0) == pytest.approx(1.0 / 3.0)
    assert uzawa_lower_bound_low_m2(2.0) > UZAWA_MU


# Parameter search
def test_optimize_qdr():
    """Test the default Q-DR search finds omega = 3/4 and mu = 1/3"""
    result = optimize_params(RelaxScheme.QDR, DEFAULT_SEARCHES[RelaxScheme.QDR])
    assert result.params.omega == pytest.approx(0.75, abs=0.01)
    assert result.mu == pytest.approx(THIRD, abs=2e-3)


def test_optimize_dwj_baseline():
    """Test the DWJ search reaches 3/5"""
    search = dataclasses.replace(DEFAULT_SEARCHES[RelaxScheme.DWJ_BASELINE], refine=False)
    assert optimize_params(RelaxScheme.DWJ_BASELINE, search).mu == pytest.approx(0.6, abs=5e-3)


@pytest.mark.slow
def test_optimize_uzawa_baselines():
    """Test the diagonal IBSR and sigma-Uzawa searches reach 3/5 and sqrt(3/5)"""
    for scheme in (RelaxScheme.DIAG_IBSR_BASELINE, RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE):
        result = optimize_params(scheme, DEFAULT_SEARCHES[scheme])
        assert result.mu == pytest.approx(EXPECTED_SMOOTHING[scheme], abs=5e-3)


def test_empty_search_box():
    """Test a search without axes raises FrequencyDomainError"""
    with pytest.raises(FrequencyDomainError):
        optimize_params(RelaxScheme.QDR, ParameterSearch(axes={}))


def test_smoothing_factor_requires_resolution():
    """Test fewer than 32 samples per axis raise FrequencyDomainError"""
    with pytest.raises(FrequencyDomainError):
        smoothing_factor(RelaxScheme.QDR, RelaxParams(omega=0.75), resolution=16)
