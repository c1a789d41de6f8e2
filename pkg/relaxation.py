"""
Block relaxation sweeps for the periodic MAC Stokes system.

Every sweep has the form x <- x + omega * dx where dx = W r is computed from
the defect r = b - L x by one of three families:

- distributive (Q-DR, DWJ): relax the right-transformed system L P and
  distribute the correction back through P = [[I, B^T], [0, -A_p]];
- Braess-Sarazin (Q-BSR exact, Q-IBSR, diagonal variants): velocity
  predictor plus a pressure Schur stage, solved exactly or by one weighted
  Jacobi step;
- sigma-Uzawa (Q-sigma-Uzawa, diagonal variant): lower block-triangular
  velocity-then-pressure update.

Mass-based schemes approximate the inverse momentum block C^{-1} by the
9-point mass stencil Q; baselines use C^{-1} = diag(A)^{-1} = (h^2/4) I.

The update algebra is written once against the ``StokesOperators``
protocol. ``GridOperators`` binds it to the matrix-free stencils; the
``lfa`` module binds it to Fourier symbols, so a sweep and its symbol can
never disagree on the sequence of stages.

Usage:
    smoother = SmootherFactory.create_smoother({'preset': 'quzawa'})
    x = smoother.smooth(grid, b, x, sweeps=2)
"""

import logging
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Any, Dict, Optional, Tuple

try:
    # Python 3.8+
    from typing import Protocol, runtime_checkable
except ImportError:
    # Python 3.7 compatibility
    from typing_extensions import Protocol, runtime_checkable

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from mac_discretization import (
    DivergenceError,
    GridSpec,
    StaggeredField,
    apply_constraint,
    apply_gradient,
    apply_laplacian,
    apply_mass,
    residual,
)

logger = logging.getLogger(__name__)

# Diagonal of B Q B^T on any periodic grid: two velocity components, each
# contributing (16 + 16 - 2*4)/36.
MASS_SCHUR_DIAGONAL = 4.0 / 3.0
# Diagonal of (h^2/4) B B^T = (h^2/4) A_p.
DIAGONAL_SCHUR_DIAGONAL = 1.0
ALPHA_D = 1.0
SCHUR_TOLERANCE = 1e-12


class Family(str, Enum):
    DISTRIBUTIVE = "distributive"
    BRAESS_SARAZIN = "braess_sarazin"
    UZAWA = "uzawa"


class RelaxScheme(str, Enum):
    QDR = "QDR"
    QBSR_EXACT = "QBSR_exact"
    QIBSR = "QIBSR"
    QSIGMA_UZAWA = "QSigmaUzawa"
    DWJ_BASELINE = "DWJ_baseline"
    DIAG_BSR_BASELINE = "DiagBSR_baseline"
    DIAG_IBSR_BASELINE = "DiagIBSR_baseline"
    DIAG_SIGMA_UZAWA_BASELINE = "DiagSigmaUzawa_baseline"

    @property
    def mass_based(self) -> bool:
        return not self.value.endswith("_baseline")

    @property
    def is_baseline(self) -> bool:
        return not self.mass_based

    @property
    def family(self) -> Family:
        if self in (RelaxScheme.QDR, RelaxScheme.DWJ_BASELINE):
            return Family.DISTRIBUTIVE
        if self in (RelaxScheme.QSIGMA_UZAWA, RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE):
            return Family.UZAWA
        return Family.BRAESS_SARAZIN

    @property
    def exact_schur(self) -> bool:
        return self in (RelaxScheme.QBSR_EXACT, RelaxScheme.DIAG_BSR_BASELINE)

    @classmethod
    def parse(cls, tag) -> "RelaxScheme":
        """Accept the enum, its value or its name, case-insensitively."""
        if isinstance(tag, cls):
            return tag
        text = str(tag).strip()
        for scheme in cls:
            if text.lower() in (scheme.value.lower(), scheme.name.lower()):
                return scheme
        raise ValueError(f"Unknown relaxation scheme: {tag}. "
                         f"Must be one of {', '.join(s.value for s in cls)}")


@dataclass(frozen=True)
class RelaxParams:
    """
    Parameters of one relaxation scheme.

    Fields a scheme does not use keep their defaults: ``sigma`` is read by
    the Uzawa family only, ``omega_j`` by the inexact Braess-Sarazin schemes
    only, and Q-DR always runs with alpha_D = 1.
    """

    omega: float
    alpha: float = 1.0
    sigma: float = 1.0
    omega_j: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"Relaxation parameter {name} must be strictly positive, got {value}")

    def replace(self, **changes) -> "RelaxParams":
        return replace(self, **changes)

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


PRESETS: Dict[str, Tuple[RelaxScheme, RelaxParams]] = {
    "qdr": (RelaxScheme.QDR, RelaxParams(omega=0.75)),
    "qbsr": (RelaxScheme.QBSR_EXACT, RelaxParams(omega=0.75, alpha=1.0)),
    "qibsr": (RelaxScheme.QIBSR, RelaxParams(omega=1.05, alpha=1.4, omega_j=1.0)),
    "quzawa": (RelaxScheme.QSIGMA_UZAWA, RelaxParams(omega=1.0, alpha=4.0 / 3.0, sigma=0.5)),
    # parameter assignment printed with the Uzawa convergence table
    "table3-caption": (RelaxScheme.QSIGMA_UZAWA, RelaxParams(omega=4.0 / 3.0, alpha=1.0, sigma=0.5)),
    "dwj": (RelaxScheme.DWJ_BASELINE, RelaxParams(omega=1.0, alpha=1.25)),
    "diag-bsr": (RelaxScheme.DIAG_BSR_BASELINE, RelaxParams(omega=1.0, alpha=1.25)),
    "diag-ibsr": (RelaxScheme.DIAG_IBSR_BASELINE, RelaxParams(omega=1.0, alpha=1.25, omega_j=0.8)),
    "diag-uzawa": (RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE, RelaxParams(omega=1.0, alpha=1.25, sigma=0.25)),
}

DEFAULT_PRESETS: Dict[RelaxScheme, str] = {
    RelaxScheme.QDR: "qdr",
    RelaxScheme.QBSR_EXACT: "qbsr",
    RelaxScheme.QIBSR: "qibsr",
    RelaxScheme.QSIGMA_UZAWA: "quzawa",
    RelaxScheme.DWJ_BASELINE: "dwj",
    RelaxScheme.DIAG_BSR_BASELINE: "diag-bsr",
    RelaxScheme.DIAG_IBSR_BASELINE: "diag-ibsr",
    RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE: "diag-uzawa",
}


def resolve_preset(name: str) -> Tuple[RelaxScheme, RelaxParams]:
    key = str(name).strip().lower()
    if key not in PRESETS:
        raise ValueError(f"Unknown preset: {name}. Must be one of {', '.join(PRESETS)}")
    return PRESETS[key]


def default_params(scheme: RelaxScheme) -> RelaxParams:
    return PRESETS[DEFAULT_PRESETS[RelaxScheme.parse(scheme)]][1]


@runtime_checkable
class StokesOperators(Protocol):
    """
    The operator vocabulary the relaxation stages are written in.

    Implementations act either on grid arrays (``GridOperators``) or on
    per-frequency symbol values (``lfa.SymbolOperators``).
    """

    def laplacian(self, w): ...

    def mass(self, w): ...

    def diagonal_inverse(self, w): ...

    def gradient(self, q): ...

    def constraint(self, u, v): ...

    def schur_solve(self, rhs, mass_based: bool): ...

    def schur_diagonal(self, mass_based: bool) -> float: ...


class GridOperators:
    """Matrix-free stencils of one grid, plus the CG-based exact Schur solve."""

    def __init__(self, grid: GridSpec, schur_tolerance: float = SCHUR_TOLERANCE, schur_maxiter: Optional[int] = None):
        self.grid = grid
        self.schur_tolerance = schur_tolerance
        self.schur_maxiter = schur_maxiter or 10 * grid.n * grid.n

    def laplacian(self, w):
        return apply_laplacian(self.grid, w)

    def mass(self, w):
        return apply_mass(self.grid, w)

    def diagonal_inverse(self, w):
        return w * (self.grid.h ** 2 / 4.0)

    def gradient(self, q):
        return apply_gradient(self.grid, q)

    def constraint(self, u, v):
        return apply_constraint(self.grid, u, v)

    def schur_diagonal(self, mass_based: bool) -> float:
        return MASS_SCHUR_DIAGONAL if mass_based else DIAGONAL_SCHUR_DIAGONAL

    def schur_operator(self, mass_based: bool) -> LinearOperator:
        n = self.grid.n
        inverse_momentum = self.mass if mass_based else self.diagonal_inverse

        def matvec(flat):
            gx, gy = self.gradient(np.reshape(flat, (n, n)))
            return self.constraint(inverse_momentum(gx), inverse_momentum(gy)).ravel()

        return LinearOperator((n * n, n * n), matvec=matvec, dtype=np.float64)

    def schur_solve(self, rhs, mass_based: bool):
        """
        Solve (B C^{-1} B^T) q = rhs on the mean-free pressure space.

        Raises:
            DivergenceError: CG did not reach the relative tolerance within
                the iteration cap; ``residual`` holds the achieved value
        """
        if np.iscomplexobj(rhs):
            return self.schur_solve(rhs.real, mass_based) + 1j * self.schur_solve(rhs.imag, mass_based)
        rhs = rhs - rhs.mean()
        rhs_norm = np.linalg.norm(rhs)
        if rhs_norm == 0.0:
            return np.zeros_like(rhs)
        operator = self.schur_operator(mass_based)
        solution, info = cg(operator, rhs.ravel(), rtol=self.schur_tolerance, atol=0.0, maxiter=self.schur_maxiter)
        if info != 0:
            achieved = np.linalg.norm(rhs.ravel() - operator.matvec(solution)) / rhs_norm
            raise DivergenceError(f"[Relaxation] Schur CG stopped after {self.schur_maxiter} iterations "
                                  f"with relative residual {achieved:.3e} on n={self.grid.n}",
                                  residual=float(achieved))
        solution = solution.reshape(self.grid.shape)
        return solution - solution.mean()


def relaxation_update(ops: StokesOperators, scheme: RelaxScheme, params: RelaxParams, r_u, r_v, r_p):
    """
    Correction (du, dv, dp) = W r of one sweep, before the omega damping.

    Args:
        ops: operator backend (grid stencils or Fourier symbols)
        scheme: relaxation scheme
        params: its parameters
        r_u, r_v, r_p: defect components

    Returns:
        tuple of the three correction components
    """
    inverse_momentum = ops.mass if scheme.mass_based else ops.diagonal_inverse

    if scheme.family is Family.DISTRIBUTIVE:
        alpha = ALPHA_D if scheme.mass_based else params.alpha
        du_hat = inverse_momentum(r_u) / alpha
        dv_hat = inverse_momentum(r_v) / alpha
        dp_hat = inverse_momentum(r_p - ops.constraint(du_hat, dv_hat)) / alpha
        gx, gy = ops.gradient(dp_hat)
        return du_hat + gx, dv_hat + gy, -ops.laplacian(dp_hat)

    if scheme.family is Family.BRAESS_SARAZIN:
        rhs = ops.constraint(inverse_momentum(r_u), inverse_momentum(r_v)) - params.alpha * r_p
        if scheme.exact_schur:
            dp = ops.schur_solve(rhs, scheme.mass_based)
        else:
            # one weighted Jacobi step from a zero initial guess
            dp = params.omega_j * rhs / ops.schur_diagonal(scheme.mass_based)
        gx, gy = ops.gradient(dp)
        return inverse_momentum(r_u - gx) / params.alpha, inverse_momentum(r_v - gy) / params.alpha, dp

    du = inverse_momentum(r_u) / params.alpha
    dv = inverse_momentum(r_v) / params.alpha
    return du, dv, params.sigma * (ops.constraint(du, dv) - r_p)


def sweep(grid: GridSpec, scheme: RelaxScheme, params: RelaxParams, b: StaggeredField, x: StaggeredField,
          ops: Optional[GridOperators] = None, project_mean: bool = False) -> StaggeredField:
    """One relaxation sweep x + omega * W (b - L x)."""
    ops = ops or GridOperators(grid)
    r = residual(grid, b, x)
    du, dv, dp = relaxation_update(ops, scheme, params, r.u, r.v, r.p)
    updated = StaggeredField(x.u + params.omega * du, x.v + params.omega * dv, x.p + params.omega * dp)
    return updated.mean_free() if project_mean else updated


def sweep_qdr(grid, params, b, x, **kwargs) -> StaggeredField:
    return sweep(grid, RelaxScheme.QDR, params, b, x, **kwargs)


def sweep_qbsr_exact(grid, params, b, x, **kwargs) -> StaggeredField:
    return sweep(grid, RelaxScheme.QBSR_EXACT, params, b, x, **kwargs)


def sweep_qibsr(grid, params, b, x, **kwargs) -> StaggeredField:
    return sweep(grid, RelaxScheme.QIBSR, params, b, x, **kwargs)


def sweep_quzawa(grid, params, b, x, **kwargs) -> StaggeredField:
    return sweep(grid, RelaxScheme.QSIGMA_UZAWA, params, b, x, **kwargs)


def sweep_baseline(grid, scheme, params, b, x, **kwargs) -> StaggeredField:
    scheme = RelaxScheme.parse(scheme)
    if not scheme.is_baseline:
        raise ValueError(f"{scheme.value} is not a baseline scheme")
    return sweep(grid, scheme, params, b, x, **kwargs)


@runtime_checkable
class Smoother(Protocol):
    """Anything the multigrid cycle can use for pre- and post-smoothing."""

    scheme: RelaxScheme
    params: RelaxParams

    def smooth(self, grid: GridSpec, b: StaggeredField, x: StaggeredField, sweeps: int) -> StaggeredField: ...


class BlockSmoother:
    """Repeated sweeps of one scheme; keeps one ``GridOperators`` per grid size."""

    def __init__(self, scheme: RelaxScheme, params: RelaxParams, project_mean: bool = True):
        self.scheme = RelaxScheme.parse(scheme)
        self.params = params
        self.project_mean = project_mean
        self._operators: Dict[int, GridOperators] = {}

    def operators(self, grid: GridSpec) -> GridOperators:
        if grid.n not in self._operators:
            self._operators[grid.n] = GridOperators(grid)
        return self._operators[grid.n]

    def smooth(self, grid: GridSpec, b: StaggeredField, x: StaggeredField, sweeps: int) -> StaggeredField:
        ops = self.operators(grid)
        for _ in range(sweeps):
            x = sweep(grid, self.scheme, self.params, b, x, ops=ops, project_mean=self.project_mean)
        return x

    def __repr__(self):
        return f"BlockSmoother({self.scheme.value}, {self.params})"


class SmootherFactory:
    """
    Factory for smoother instances.
    """

    @staticmethod
    def create_smoother(config: Dict[str, Any]) -> Smoother:
        """
        Create a smoother from a configuration dict.

        Args:
            config: dict with
                - preset: preset name (sets scheme and parameters), or
                - scheme: scheme tag, with optional
                - params: RelaxParams (defaults to the scheme's preset)
                - project_mean: remove constants after each sweep (default True)

        Returns:
            Smoother instance

        Raises:
            ValueError: if the preset or scheme is unknown
        """
        if config.get("preset"):
            scheme, params = resolve_preset(config["preset"])
        elif config.get("scheme"):
            scheme = RelaxScheme.parse(config["scheme"])
            params = config.get("params") or default_params(scheme)
        else:
            raise ValueError("Smoother config needs a preset or a scheme")
        return BlockSmoother(scheme, params, project_mean=config.get("project_mean", True))
