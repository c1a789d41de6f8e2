"""
Geometric multigrid for the periodic MAC Stokes system.

Transfers:
    restriction averages fine values onto the coarse grid (4-point for
    pressure, 6-point for each velocity component); prolongation is exactly
    4 R^T. Both are generated from one table of (di, dj, weight) offsets
    relative to the fine anchor (2I, 2J) of coarse point (I, J), so the
    adjoint relation holds for every convention in the table.

Coarse operators are rediscretized on every level. The first coarse level
of a two-grid cycle and the 4x4 coarsest level are solved directly with the
constant nullspace deflated by bordering.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from mac_discretization import (
    DegenerateMeasurementError,
    DivergenceError,
    GridError,
    GridSpec,
    InconsistentSystemError,
    StaggeredField,
    assemble_stokes_matrix,
    nullspace_basis,
    residual,
)
from relaxation import RelaxParams, RelaxScheme, Smoother, SmootherFactory

logger = logging.getLogger(__name__)

COARSEST_N = 4
DENSE_LIMIT = 8
STAGNATION_RATIO = 1e-12
DIVERGENCE_RATIO = 1e3
INCONSISTENCY_TOLERANCE = 1e-8


class CycleKind(str, Enum):
    TWO_GRID = "TwoGrid"
    V = "V"
    W = "W"

    @property
    def gamma(self) -> int:
        return 2 if self is CycleKind.W else 1

    @classmethod
    def parse(cls, tag) -> "CycleKind":
        if isinstance(tag, cls):
            return tag
        text = str(tag).strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if text in (kind.value.lower(), kind.name.lower().replace("_", "")):
                return kind
        raise ValueError(f"Unknown cycle kind: {tag}. Must be one of TwoGrid, V, W")


class RestrictionConvention(str, Enum):
    STANDARD = "standard"
    SHIFTED = "shifted"

    @classmethod
    def parse(cls, tag) -> "RestrictionConvention":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().lower())
        except ValueError:
            raise ValueError(f"Unknown restriction convention: {tag}. Must be standard or shifted")


_PRESSURE = [(0, 0, 0.25), (1, 0, 0.25), (0, 1, 0.25), (1, 1, 0.25)]
# u: two values straddling the coarse point on the same x-line, four on the lines x +- h
_U_STANDARD = [(0, 0, 0.25), (0, 1, 0.25),
               (-1, 0, 0.125), (-1, 1, 0.125), (1, 0, 0.125), (1, 1, 0.125)]
_U_SHIFTED = [(0, 0, 0.25), (0, 1, 0.25),
              (-1, -1, 0.125), (-1, 2, 0.125), (1, -1, 0.125), (1, 2, 0.125)]


def _transpose_offsets(offsets):
    return [(dj, di, weight) for di, dj, weight in offsets]


TRANSFER_STENCILS: Dict[RestrictionConvention, Dict[str, List[Tuple[int, int, float]]]] = {
    RestrictionConvention.STANDARD: {
        "u": _U_STANDARD, "v": _transpose_offsets(_U_STANDARD), "p": _PRESSURE},
    RestrictionConvention.SHIFTED: {
        "u": _U_SHIFTED, "v": _transpose_offsets(_U_SHIFTED), "p": _PRESSURE},
}


def _restrict_component(fine: np.ndarray, offsets) -> np.ndarray:
    coarse = np.zeros((fine.shape[0] // 2, fine.shape[1] // 2), dtype=fine.dtype)
    for di, dj, weight in offsets:
        coarse += weight * np.roll(fine, shift=(-di, -dj), axis=(0, 1))[0::2, 0::2]
    return coarse


def _prolong_component(coarse: np.ndarray, offsets) -> np.ndarray:
    scattered = np.zeros((coarse.shape[0] * 2, coarse.shape[1] * 2), dtype=coarse.dtype)
    scattered[0::2, 0::2] = coarse
    fine = np.zeros_like(scattered)
    for di, dj, weight in offsets:
        fine += 4.0 * weight * np.roll(scattered, shift=(di, dj), axis=(0, 1))
    return fine


def restrict(fine: StaggeredField, convention=RestrictionConvention.STANDARD) -> StaggeredField:
    """
    Restrict a field to the next-coarser grid.

    Raises:
        GridError: if the fine grid cannot be coarsened
    """
    fine.grid.coarsen()
    stencils = TRANSFER_STENCILS[RestrictionConvention.parse(convention)]
    return StaggeredField(*(_restrict_component(component, stencils[name])
                            for name, component in zip("uvp", fine.components())))


def prolong(coarse: StaggeredField, convention=RestrictionConvention.STANDARD) -> StaggeredField:
    """4 R^T: interpolate a coarse correction to the next-finer grid."""
    stencils = TRANSFER_STENCILS[RestrictionConvention.parse(convention)]
    return StaggeredField(*(_prolong_component(component, stencils[name])
                            for name, component in zip("uvp", coarse.components())))


@dataclass(frozen=True)
class CycleSpec:
    nu1: int
    nu2: int
    kind: CycleKind
    scheme: RelaxScheme
    params: RelaxParams
    coarsest_n: int = COARSEST_N
    restriction: RestrictionConvention = RestrictionConvention.STANDARD
    project_mean: bool = True

    def __post_init__(self):
        if self.nu1 < 0 or self.nu2 < 0 or self.nu1 + self.nu2 < 1:
            raise ValueError(f"Need nu1, nu2 >= 0 and nu1 + nu2 >= 1, got ({self.nu1}, {self.nu2})")
        if self.coarsest_n != COARSEST_N:
            raise ValueError(f"Coarsest grid must be {COARSEST_N}x{COARSEST_N}, got {self.coarsest_n}")
        object.__setattr__(self, "kind", CycleKind.parse(self.kind))
        object.__setattr__(self, "scheme", RelaxScheme.parse(self.scheme))
        object.__setattr__(self, "restriction", RestrictionConvention.parse(self.restriction))

    @property
    def nu(self) -> int:
        return self.nu1 + self.nu2

    @classmethod
    def split(cls, nu: int, kind, scheme, params, **kwargs) -> "CycleSpec":
        """nu sweeps split as nu1 = ceil(nu/2) pre- and nu2 = floor(nu/2) post-smoothing."""
        return cls(nu1=(nu + 1) // 2, nu2=nu // 2, kind=kind, scheme=scheme, params=params, **kwargs)


@dataclass
class Hierarchy:
    levels: List[GridSpec] = field(default_factory=list)

    @classmethod
    def build(cls, n: int, coarsest_n: int = COARSEST_N) -> "Hierarchy":
        grid = GridSpec(n)
        levels = [grid]
        while grid.n > coarsest_n:
            grid = grid.coarsen()
            levels.append(grid)
        return cls(levels)

    @property
    def depth(self) -> int:
        return len(self.levels)


class CoarseSolver:
    """
    Direct solve of L x = b on the mean-free subspace.

    The bordered matrix [[L, N], [N^T, 0]] with N the orthonormal constant
    fields is nonsingular; its solution has zero mean in every component.
    Small grids use a dense LU, larger ones a sparse LU.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.basis = nullspace_basis(grid)
        operator = assemble_stokes_matrix(grid)
        bordered = sp.bmat([[operator, sp.csr_matrix(self.basis)],
                            [sp.csr_matrix(self.basis.T), None]], format="csc")
        if grid.n <= DENSE_LIMIT:
            self._dense = scipy.linalg.lu_factor(bordered.toarray())
            self._sparse = None
        else:
            self._dense = None
            self._sparse = splu(bordered)
        logger.debug(f"[Multigrid] factorized coarse system n={grid.n} ({grid.unknowns} unknowns)")

    def solve(self, b: StaggeredField) -> StaggeredField:
        """
        Raises:
            InconsistentSystemError: if b has a constant component beyond
                INCONSISTENCY_TOLERANCE relative to its norm
        """
        rhs = b.flatten()
        scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
        outside = self.basis.T @ rhs
        magnitude = float(np.linalg.norm(outside))
        if magnitude > INCONSISTENCY_TOLERANCE * scale:
            raise InconsistentSystemError(f"[Multigrid] right-hand side on n={self.grid.n} has a nullspace "
                                          f"component of norm {magnitude:.3e}", magnitude)
        rhs = rhs - self.basis @ outside
        bordered_rhs = np.concatenate([rhs, np.zeros(3)])
        if self._dense is not None:
            solution = scipy.linalg.lu_solve(self._dense, bordered_rhs)
        else:
            solution = self._sparse.solve(bordered_rhs)
        return StaggeredField.from_flat(self.grid, solution[:self.grid.unknowns])


@lru_cache(maxsize=None)
def coarse_solver(n: int) -> CoarseSolver:
    return CoarseSolver(GridSpec(n))


def coarsest_solve(grid: GridSpec, b: StaggeredField) -> StaggeredField:
    if grid.n != COARSEST_N:
        raise GridError(f"Coarsest solve expects n={COARSEST_N}, got {grid.n}")
    return coarse_solver(grid.n).solve(b)


class MultigridCycle:
    """
    One cycle of the configured kind.

    Args:
        spec: cycle description
        smoother: optional smoother; built from spec.scheme / spec.params otherwise
        logger: optional logger (default: module logger)
    """

    def __init__(self, spec: CycleSpec, smoother: Optional[Smoother] = None, logger=None):
        self.spec = spec
        self.logger = logger or logging.getLogger(__name__)
        self.smoother = smoother or SmootherFactory.create_smoother({
            "scheme": spec.scheme, "params": spec.params, "project_mean": spec.project_mean})

    def __call__(self, grid: GridSpec, b: StaggeredField, x: StaggeredField) -> StaggeredField:
        return self.cycle(grid, b, x)

    def cycle(self, grid: GridSpec, b: StaggeredField, x: StaggeredField) -> StaggeredField:
        spec = self.spec
        x = self.smoother.smooth(grid, b, x, spec.nu1)
        coarse = grid.coarsen()
        coarse_defect = restrict(residual(grid, b, x), spec.restriction)

        if spec.kind is CycleKind.TWO_GRID or coarse.n == spec.coarsest_n:
            correction = coarse_solver(coarse.n).solve(coarse_defect)
        else:
            correction = StaggeredField.zeros(coarse)
            for _ in range(spec.kind.gamma):
                correction = self.cycle(coarse, coarse_defect, correction)

        x = x + prolong(correction, spec.restriction)
        if spec.project_mean:
            x = x.mean_free()
        return self.smoother.smooth(grid, b, x, spec.nu2)


def cycle(spec: CycleSpec, grid: GridSpec, b: StaggeredField, x: StaggeredField) -> StaggeredField:
    return MultigridCycle(spec)(grid, b, x)


@dataclass
class Measurement:
    rho: float
    k_eff: int
    history: List[float]
    wall_time: float


def measure_rho(spec: CycleSpec, grid: GridSpec, k_max: int = 100, seed: int = 0,
                x0: Optional[StaggeredField] = None, renormalize: bool = False, logger=None) -> Measurement:
    """
    Measure rho = (||d_k|| / ||d_0||)^(1/k) on the homogeneous problem b = 0.

    Args:
        spec: cycle to iterate
        grid: finest grid
        k_max: maximum number of cycles
        seed: seed of the uniform [-0.5, 0.5] initial guess
        x0: explicit initial guess (overrides ``seed``)
        renormalize: rescale the iterate to unit defect after every cycle;
            the stagnation stop is not applied in this mode
        logger: optional logger

    Returns:
        Measurement(rho, k_eff, relative defect history, wall time)

    Raises:
        DegenerateMeasurementError: if the initial defect is zero
        DivergenceError: if the defect grows beyond 1e3 times the initial one
    """
    logger = logger or logging.getLogger(__name__)
    start = time.perf_counter()
    runner = MultigridCycle(spec, logger=logger)
    b = StaggeredField.zeros(grid)
    if x0 is None:
        x0 = StaggeredField.random(grid, np.random.default_rng(seed)).mean_free()
    x = x0
    initial = residual(grid, b, x).norm()
    if initial == 0.0:
        raise DegenerateMeasurementError(f"[Multigrid] zero initial defect on n={grid.n}; nothing to measure")

    log_ratio, previous, history, k_eff = 0.0, initial, [], 0
    for k in range(1, k_max + 1):
        x = runner(grid, b, x)
        current = residual(grid, b, x).norm()
        k_eff = k
        if current == 0.0:
            history.append(0.0)
            log_ratio = -math.inf
            break
        log_ratio += math.log(current / previous)
        history.append(math.exp(log_ratio))
        if log_ratio > math.log(DIVERGENCE_RATIO):
            raise DivergenceError(f"[Multigrid] defect grew by {math.exp(log_ratio):.3e} after {k} cycles "
                                  f"({spec.scheme.value}, {spec.kind.value}, n={grid.n}, nu={spec.nu})",
                                  params=spec.params.as_dict(), residual=math.exp(log_ratio))
        if renormalize:
            x = x / current
            previous = 1.0
        else:
            previous = current
            if log_ratio < math.log(STAGNATION_RATIO):
                break

    rho = math.exp(log_ratio / k_eff)
    elapsed = time.perf_counter() - start
    logger.info(f"[Multigrid] {spec.scheme.value} {spec.kind.value} n={grid.n} nu={spec.nu}: "
                f"rho={rho:.4f} k_eff={k_eff} ({elapsed:.2f}s)")
    return Measurement(rho=rho, k_eff=k_eff, history=history, wall_time=elapsed)
