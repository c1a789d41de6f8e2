"""
Acceptance gate behind ``mgstokes verify``.

Every criterion compares measured values against a bound with one of the
comparison operators gte, lte, gt, lt, eq and reports PASSED, FAILED or
SKIPPED. Table reproduction criteria run full multigrid measurements and are
skipped in quick mode.
"""

import dataclasses
import itertools
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from experiment_config import ExperimentConfig
from lfa import (
    DEFAULT_SEARCHES,
    EXPECTED_SMOOTHING,
    MR_RANGE,
    SymbolOperators,
    eig3,
    mass_ratio_range,
    optimize_params,
    smoothing_factor,
    stokes_symbol,
    uzawa_omega_range,
    uzawa_optimal_params,
)
from mac_discretization import (
    GridSpec,
    StaggeredField,
    StokesError,
    apply_constraint,
    apply_gradient,
    apply_laplacian,
    apply_mass,
    apply_stokes,
    assemble_schur_matrix,
    assemble_stokes_matrix,
)
from multigrid import CycleSpec, measure_rho, prolong, restrict
from relaxation import MASS_SCHUR_DIAGONAL, RelaxParams, RelaxScheme, default_params
from results import CriterionResult

logger = logging.getLogger(__name__)

PASSED = "PASSED"
FAILED = "FAILED"
SKIPPED = "SKIPPED"

UZAWA_MU = math.sqrt(1.0 / 3.0)


class AcceptanceSuite(object):
    """
    Runs the acceptance criteria.

    Args:
        config: validated experiment config; its scheme and parameters
            replace that scheme's preset wherever a criterion uses it
        logger: optional logger (default: module logger)
    """

    def __init__(self, config: ExperimentConfig, logger=None):
        self.config = config
        self.logger = logger or logging.getLogger(__name__)
        self.rng = np.random.default_rng(config.seed)
        self.criteria: List[Tuple[str, str, Callable[[], Tuple[str, List[str]]], bool]] = [
            ("01-lfa-closed-forms", "smoothing factors of Q-DR, Q-BSR and Q-sigma-Uzawa", self.lfa_closed_forms, False),
            ("02-uzawa-relations", "Uzawa parameter relations keep mu = sqrt(1/3)", self.uzawa_relations, False),
            ("03-mass-ratio-range", "m_r spans [8/9, 16/9] over the high frequencies", self.mass_ratio_range, False),
            ("04-table-qdr", "Q-DR convergence factors", self.table_qdr, True),
            ("05-table-qibsr", "Q-IBSR convergence factors", self.table_qibsr, True),
            ("06-table-quzawa", "Q-sigma-Uzawa convergence factors", self.table_quzawa, True),
            ("07-baseline-optima", "diagonal baseline optimal smoothing factors", self.baseline_optima, False),
            ("08-fourier-modes", "stencils act on Fourier modes as their symbols", self.fourier_modes, False),
            ("09-transfer-adjoint", "restriction is 1/4 of the prolongation transpose", self.transfer_adjoint, False),
            ("10-sparse-assembly", "matrix-free operator equals the assembled matrix", self.sparse_assembly, False),
            ("11-schur-diagonal", "diagonal of B Q B^T is 4/3", self.schur_diagonal, False),
            ("12-eig3-oracle", "closed-form 3x3 eigenvalues match LAPACK", self.eig3_oracle, False),
        ]

    @staticmethod
    def compare(actual_value, comparison, threshold_value) -> bool:
        """True when ``actual_value`` satisfies the comparison against ``threshold_value``."""
        comparison_map = {
            'gte': lambda a, t: a >= t,
            'lte': lambda a, t: a <= t,
            'gt': lambda a, t: a > t,
            'lt': lambda a, t: a < t,
            'eq': lambda a, t: a == t
        }
        return comparison_map.get(comparison, lambda a, t: False)(actual_value, threshold_value)

    def params_for(self, scheme: RelaxScheme) -> RelaxParams:
        if self.config.scheme is scheme:
            return self.config.params
        return default_params(scheme)

    def run(self) -> List[CriterionResult]:
        results = []
        for key, description, check, slow in self.criteria:
            if slow and self.config.quick:
                results.append(CriterionResult(key, description, SKIPPED, message="quick mode"))
                continue
            self.logger.info(f"[Verify] {key}: {description}")
            try:
                status, measured = check()
                result = CriterionResult(key, description, status, measured)
            except StokesError as e:
                self.logger.error(f"[Verify] {key} raised {type(e).__name__}: {e}")
                result = CriterionResult(key, description, FAILED, message=f"{type(e).__name__}: {e}")
            self.logger.info(f"[Verify] {key}: {result.status} {'; '.join(result.measured)}")
            results.append(result)
        failed = [result.key for result in results if not result.passed]
        if failed:
            self.logger.warning(f"[Verify] failed criteria: {', '.join(failed)}")
        return results

    def _within(self, checks, measured: List[str]) -> Tuple[str, List[str]]:
        """``checks``: (label, value, expected, tolerance) tuples."""
        status = PASSED
        for label, value, expected, tolerance in checks:
            ok = self.compare(abs(value - expected), 'lte', tolerance)
            measured.append(f"{label}={value:.4f} (expected {expected:.4f} +- {tolerance:g})")
            if not ok:
                status = FAILED
        return status, measured

    # LFA

    def lfa_closed_forms(self):
        checks = []
        for scheme in (RelaxScheme.QDR, RelaxScheme.QBSR_EXACT, RelaxScheme.QSIGMA_UZAWA):
            mu = smoothing_factor(scheme, self.params_for(scheme), resolution=self.config.resolution).mu
            checks.append((f"mu[{scheme.value}]", mu, EXPECTED_SMOOTHING[scheme], 2e-3))
        return self._within(checks, [])

    def uzawa_relations(self):
        low, high = uzawa_omega_range(UZAWA_MU)
        margin = 0.01 * (high - low)
        checks = []
        for omega in np.linspace(low + margin, high - margin, 10):
            params = uzawa_optimal_params(float(omega))
            mu = smoothing_factor(RelaxScheme.QSIGMA_UZAWA, params, resolution=self.config.resolution).mu
            checks.append((f"mu[omega={omega:.3f}]", mu, UZAWA_MU, 5e-3))
        return self._within(checks, [])

    def mass_ratio_range(self):
        low, high = mass_ratio_range(self.config.resolution - self.config.resolution % 4, sampling="node")
        return self._within([("min m_r", low, MR_RANGE[0], 1e-6), ("max m_r", high, MR_RANGE[1], 1e-6)], [])

    def baseline_optima(self):
        checks = []
        for scheme in (RelaxScheme.DWJ_BASELINE, RelaxScheme.DIAG_IBSR_BASELINE,
                       RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE):
            search = dataclasses.replace(DEFAULT_SEARCHES[scheme], resolution=self.config.search_resolution)
            result = optimize_params(scheme, search)
            checks.append((f"mu*[{scheme.value}]", result.mu, EXPECTED_SMOOTHING[scheme], 5e-3))
        return self._within(checks, [])

    # multigrid tables

    def _measure(self, scheme: RelaxScheme, kind: str, n: int, nu: int) -> float:
        spec = CycleSpec.split(nu, kind, scheme, self.params_for(scheme), restriction=self.config.restriction)
        return measure_rho(spec, GridSpec(n), k_max=self.config.k_max, seed=self.config.seed,
                           renormalize=self.config.renormalize, logger=self.logger).rho

    def _table(self, scheme: RelaxScheme, points) -> Tuple[str, List[str]]:
        """``points``: (kind, n, nu, expected, tolerance, comparison) tuples."""
        status, measured = PASSED, []
        for kind, n, nu, expected, tolerance, comparison in points:
            rho = self._measure(scheme, kind, n, nu)
            label = f"{kind} 1/{n} nu={nu}"
            if comparison == 'within':
                ok = self.compare(abs(rho - expected), 'lte', tolerance)
                measured.append(f"{label}: rho={rho:.3f} (expected {expected:.3f} +- {tolerance:g})")
            else:
                ok = self.compare(rho, comparison, expected)
                measured.append(f"{label}: rho={rho:.3f} ({comparison} {expected:.3f})")
            if not ok:
                status = FAILED
        return status, measured

    def table_qdr(self):
        return self._table(RelaxScheme.QDR, [
            ("TwoGrid", 32, 1, 0.328, 0.02, 'within'),
            ("TwoGrid", 32, 2, 0.109, 0.02, 'within'),
            ("TwoGrid", 32, 3, 0.038, 0.02, 'within'),
            ("V", 128, 1, 0.324, 0.03, 'within'),
            ("V", 128, 2, 0.108, 0.03, 'within'),
        ])

    def table_qibsr(self):
        return self._table(RelaxScheme.QIBSR, [
            ("TwoGrid", 64, 1, 0.326, 0.02, 'within'),
            ("TwoGrid", 64, 2, 0.109, 0.02, 'within'),
            ("W", 128, 1, 0.326, 0.02, 'within'),
            ("W", 128, 2, 0.109, 0.02, 'within'),
            ("V", 256, 2, 0.178, 0.04, 'within'),
        ])

    def table_quzawa(self):
        return self._table(RelaxScheme.QSIGMA_UZAWA, [
            ("TwoGrid", 32, 1, 0.562, 0.02, 'within'),
            ("TwoGrid", 32, 2, 0.322, 0.02, 'within'),
            ("W", 256, 1, 0.558, 0.02, 'within'),
            ("W", 256, 4, 0.107, 0.02, 'within'),
            ("V", 256, 1, 0.65, 0.0, 'gt'),
        ])

    # discretization oracles

    def fourier_modes(self, n: int = 16, modes: int = 10):
        grid = GridSpec(n)
        worst = {"laplacian": 0.0, "mass": 0.0, "gradient": 0.0, "constraint": 0.0, "stokes": 0.0}
        for _ in range(modes):
            k = self.rng.integers(0, n, size=2)
            if not k.any():
                k[0] = 1
            theta = tuple(float(value) for value in 2 * np.pi * k / n)
            coefficients = self.rng.standard_normal(3) + 1j * self.rng.standard_normal(3)
            field = StaggeredField.fourier_mode(grid, theta, coefficients)
            ops = SymbolOperators(*theta, h=grid.h)
            grad_x, grad_y = apply_gradient(grid, field.p)
            symbol_x, symbol_y = ops.gradient(coefficients[2])
            pairs = {
                "laplacian": (apply_laplacian(grid, field.u), ops.laplacian(field.u)),
                "mass": (apply_mass(grid, field.u), ops.mass(field.u)),
                "gradient": (grad_x, StaggeredField.fourier_mode(grid, theta, (symbol_x, symbol_y, 0)).u),
                "constraint": (apply_constraint(grid, field.u, field.v),
                               StaggeredField.fourier_mode(grid, theta, (0, 0, ops.constraint(*coefficients[:2]))).p),
            }
            for name, (actual, expected) in pairs.items():
                worst[name] = max(worst[name], _relative_error(actual, expected))
            image = stokes_symbol(*theta, h=grid.h).entries @ coefficients
            expected_field = StaggeredField.fourier_mode(grid, theta, image)
            actual_field = apply_stokes(grid, field)
            worst["stokes"] = max(worst["stokes"], (actual_field - expected_field).norm()
                                  / max(expected_field.norm(), field.norm()))
        return _bounded(worst, 1e-12)

    def transfer_adjoint(self, pairs: int = 100):
        worst_adjoint, worst_constant = 0.0, 0.0
        for n in (8, 16, 32):
            fine, coarse = GridSpec(n), GridSpec(n // 2)
            for _ in range(pairs):
                x = StaggeredField.random(fine, self.rng)
                y = StaggeredField.random(coarse, self.rng)
                lhs = restrict(x, self.config.restriction).dot(y)
                rhs = 0.25 * x.dot(prolong(y, self.config.restriction))
                worst_adjoint = max(worst_adjoint, abs(lhs - rhs) / (x.norm() * y.norm()))
            constant = StaggeredField.constant(fine, 1.5, -0.25, 2.0)
            restricted = restrict(constant, self.config.restriction)
            worst_constant = max(worst_constant,
                                 (restricted - StaggeredField.constant(coarse, 1.5, -0.25, 2.0)).norm())
        return _bounded({"adjoint": worst_adjoint, "constant": worst_constant}, 1e-13)

    def sparse_assembly(self, n: int = 8, fields: int = 20):
        grid = GridSpec(n)
        matrix = assemble_stokes_matrix(grid)
        worst = 0.0
        for _ in range(fields):
            x = StaggeredField.random(grid, self.rng)
            expected = matrix @ x.flatten()
            worst = max(worst, np.linalg.norm(apply_stokes(grid, x).flatten() - expected)
                        / np.linalg.norm(expected))
        return _bounded({"relative error": worst}, 1e-13)

    def schur_diagonal(self):
        worst = 0.0
        for n in (4, 8):
            diagonal = assemble_schur_matrix(GridSpec(n), mass_based=True).diagonal()
            worst = max(worst, float(np.abs(diagonal - MASS_SCHUR_DIAGONAL).max()))
        return _bounded({"max |diag - 4/3|": worst}, 1e-14)

    def eig3_oracle(self, count: int = 1000):
        matrices = self.rng.standard_normal((count, 3, 3)) + 1j * self.rng.standard_normal((count, 3, 3))
        roots = eig3(matrices)
        reference = np.linalg.eigvals(matrices)
        distance = np.full(count, np.inf)
        for permutation in itertools.permutations(range(3)):
            distance = np.minimum(distance, np.abs(roots - reference[:, list(permutation)]).max(axis=-1))
        return _bounded({"max root distance": float(distance.max())}, 1e-9)


def _relative_error(actual, expected) -> float:
    scale = max(float(np.abs(expected).max()), np.finfo(float).tiny)
    return float(np.abs(actual - expected).max()) / scale


def _bounded(errors, bound: float, measured: Optional[List[str]] = None):
    measured = measured if measured is not None else []
    status = PASSED
    for name, value in errors.items():
        measured.append(f"{name}={value:.2e} (bound {bound:g})")
        if not AcceptanceSuite.compare(value, 'lt', bound):
            status = FAILED
    return status, measured
