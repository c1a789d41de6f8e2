import numpy as np
import pytest

from lfa import relaxation_symbol, spectral_radius_on_grid
from mac_discretization import GridSpec, StaggeredField, apply_constraint, apply_stokes, assemble_schur_matrix
from relaxation import (
    PRESETS,
    BlockSmoother,
    Family,
    GridOperators,
    RelaxParams,
    RelaxScheme,
    SmootherFactory,
    default_params,
    resolve_preset,
    sweep,
    sweep_baseline,
    sweep_qbsr_exact,
    sweep_qdr,
)


# Schemes, parameters and presets
@pytest.mark.parametrize("tag", ["QIBSR", "qibsr", " Qibsr ", RelaxScheme.QIBSR])
def test_scheme_parse_accepts_value_and_name(tag):
    """Test scheme tags parse case-insensitively"""
    assert RelaxScheme.parse(tag) is RelaxScheme.QIBSR


def test_scheme_parse_rejects_unknown_tag():
    """Test unknown scheme tags raise ValueError"""
    with pytest.raises(ValueError):
        RelaxScheme.parse("SIMPLE")


def test_scheme_properties():
    """Test family, mass and exact-Schur flags of the schemes"""
    assert RelaxScheme.QDR.family is Family.DISTRIBUTIVE
    assert RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE.family is Family.UZAWA
    assert RelaxScheme.QIBSR.family is Family.BRAESS_SARAZIN
    assert RelaxScheme.QBSR_EXACT.exact_schur and not RelaxScheme.QIBSR.exact_schur
    assert RelaxScheme.DWJ_BASELINE.is_baseline and RelaxScheme.QDR.mass_based


@pytest.mark.parametrize("field", ["omega", "alpha", "sigma", "omega_j"])
def test_params_must_be_positive(field):
    """Test non-positive relaxation parameters are rejected"""
    with pytest.raises(ValueError):
        RelaxParams(**{"omega": 1.0, field: 0.0})


def test_default_presets():
    """Test preset values of the four mass-based schemes"""
    assert default_params(RelaxScheme.QDR) == RelaxParams(omega=0.75)
    assert default_params(RelaxScheme.QBSR_EXACT) == RelaxParams(omega=0.75, alpha=1.0)
    qibsr = default_params(RelaxScheme.QIBSR)
    assert (qibsr.alpha, qibsr.omega_j) == (1.4, 1.0)
    assert qibsr.omega == pytest.approx(0.75 * qibsr.alpha)


def test_uzawa_preset_satisfies_parameter_relations():
    """Test sigma = 1/(3 omega - 1) and alpha = 8 omega^2 / (3 (3 omega - 1)) for the Uzawa preset"""
    params = default_params(RelaxScheme.QSIGMA_UZAWA)
    omega = params.omega
    assert params.sigma == pytest.approx(1.0 / (3 * omega - 1))
    assert params.alpha == pytest.approx(8 * omega ** 2 / (3 * (3 * omega - 1)))


def test_caption_preset_is_available():
    """Test the alternative Uzawa assignment is exposed as its own preset"""
    scheme, params = resolve_preset("table3-caption")
    assert scheme is RelaxScheme.QSIGMA_UZAWA
    assert (params.alpha, params.omega, params.sigma) == (1.0, pytest.approx(4.0 / 3.0), 0.5)


def test_unknown_preset():
    """Test unknown preset names raise ValueError"""
    with pytest.raises(ValueError):
        resolve_preset("fastest")


# Sweeps
@pytest.mark.parametrize("scheme", list(RelaxScheme))
def test_sweep_keeps_exact_solution(scheme, rng):
    """Test the exact solution is a fixed point of every sweep"""
    grid = GridSpec(8)
    x = StaggeredField.random(grid, rng).mean_free()
    b = apply_stokes(grid, x)
    updated = sweep(grid, scheme, default_params(scheme), b, x)
    assert (updated - x).norm() < 1e-12 * x.norm()


@pytest.mark.parametrize("scheme", list(RelaxScheme))
def test_sweep_acts_on_fourier_modes_as_symbol(scheme, rng):
    """Test one sweep on an error mode equals the error-propagation symbol"""
    grid = GridSpec(16)
    params = default_params(scheme)
    for k in ([3, 5], [8, 8], [1, 12]):
        theta = tuple(float(value) for value in 2 * np.pi * np.array(k) / grid.n)
        coefficients = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        error = StaggeredField.fourier_mode(grid, theta, coefficients)
        propagated = sweep(grid, scheme, params, StaggeredField.zeros(grid, complex), error)
        symbol = relaxation_symbol(scheme, params, *theta, h=grid.h).entries
        expected = StaggeredField.fourier_mode(grid, theta, symbol @ coefficients)
        tolerance = 1e-10 if scheme.exact_schur else 1e-12
        assert (propagated - expected).norm() < tolerance * error.norm()


@pytest.mark.parametrize("scheme", list(RelaxScheme))
def test_sweep_is_linear_in_the_error(scheme, rng):
    """Test for b = 0 a sweep maps a x + c y to a S x + c S y"""
    grid = GridSpec(8)
    params = default_params(scheme)
    b = StaggeredField.zeros(grid)
    x, y = StaggeredField.random(grid, rng), StaggeredField.random(grid, rng)
    combined = sweep(grid, scheme, params, b, x * 1.5 + y * -2.0)
    expected = sweep(grid, scheme, params, b, x) * 1.5 + sweep(grid, scheme, params, b, y) * -2.0
    tolerance = 1e-9 if scheme.exact_schur else 1e-12
    assert (combined - expected).norm() < tolerance * expected.norm()


def test_exact_braess_sarazin_sweep_satisfies_constraint(rng):
    """Test an undamped Q-BSR sweep leaves B u = b_p"""
    grid = GridSpec(8)
    b = StaggeredField.random(grid, rng).mean_free()
    x = StaggeredField.random(grid, rng)
    updated = sweep_qbsr_exact(grid, RelaxParams(omega=1.0, alpha=1.0), b, x)
    mismatch = apply_constraint(grid, updated.u, updated.v) - b.p
    assert np.linalg.norm(mismatch) < 1e-9 * np.linalg.norm(b.p)


def test_schur_solve_matches_assembled_matrix(rng):
    """Test the CG Schur solve inverts B Q B^T on mean-free pressures"""
    grid = GridSpec(16)
    rhs = rng.uniform(-0.5, 0.5, size=grid.shape)
    rhs -= rhs.mean()
    q = GridOperators(grid).schur_solve(rhs, mass_based=True)
    matrix = assemble_schur_matrix(grid, mass_based=True)
    assert np.linalg.norm(matrix @ q.ravel() - rhs.ravel()) < 1e-10 * np.linalg.norm(rhs)
    assert abs(q.mean()) < 1e-14


def test_schur_solve_of_zero_is_zero():
    """Test a zero right-hand side gives a zero pressure correction"""
    grid = GridSpec(8)
    assert not GridOperators(grid).schur_solve(np.zeros(grid.shape), mass_based=False).any()


def test_qdr_sweeps_contract_like_grid_symbol(rng):
    """Test repeated Q-DR sweeps contract at the symbol's spectral radius on a 16x16 grid"""
    grid = GridSpec(16)
    params = default_params(RelaxScheme.QDR)
    b = StaggeredField.zeros(grid)
    x = StaggeredField.random(grid, rng).mean_free()
    norms = []
    for _ in range(200):
        x = sweep_qdr(grid, params, b, x, project_mean=True)
        norms.append(x.norm())
    measured = (norms[-1] / norms[99]) ** (1.0 / 100)
    assert measured == pytest.approx(spectral_radius_on_grid(RelaxScheme.QDR, params, grid.n), abs=0.02)


def test_sweep_baseline_rejects_mass_scheme(rng):
    """Test sweep_baseline only runs diagonal baselines"""
    grid = GridSpec(8)
    x = StaggeredField.random(grid, rng)
    with pytest.raises(ValueError):
        sweep_baseline(grid, RelaxScheme.QDR, default_params(RelaxScheme.QDR), x, x)


# Smoother factory
def test_factory_builds_preset_smoother():
    """Test the factory resolves presets into block smoothers"""
    smoother = SmootherFactory.create_smoother({"preset": "quzawa"})
    assert isinstance(smoother, BlockSmoother)
    assert smoother.scheme is RelaxScheme.QSIGMA_UZAWA
    assert smoother.params == PRESETS["quzawa"][1]


def test_factory_uses_scheme_defaults():
    """Test a bare scheme gets its default parameters"""
    smoother = SmootherFactory.create_smoother({"scheme": "DWJ_baseline", "project_mean": False})
    assert smoother.params == default_params(RelaxScheme.DWJ_BASELINE)
    assert smoother.project_mean is False


def test_factory_requires_scheme_or_preset():
    """Test an empty smoother config raises ValueError"""
    with pytest.raises(ValueError):
        SmootherFactory.create_smoother({})


def test_smoother_reuses_grid_operators(rng):
    """Test one operator set is cached per grid size"""
    smoother = SmootherFactory.create_smoother({"preset": "qbsr"})
    grid = GridSpec(8)
    x = StaggeredField.random(grid, rng)
    smoother.smooth(grid, StaggeredField.zeros(grid), x, 2)
    assert smoother.operators(grid) is smoother.operators(GridSpec(8))
