"""
Staggered (MAC) fields and matrix-free stencils on periodic unit-square grids.

Index convention:
    every component is an ``n x n`` float64 array indexed ``[i, j]`` with
    ``i`` running along x (axis 0) and ``j`` along y (axis 1). In units of
    the mesh width ``h = 1/n``:

    - ``u[i, j]`` lives at ``(i, j + 1/2)``       (vertical-edge midpoints)
    - ``v[i, j]`` lives at ``(i + 1/2, j)``       (horizontal-edge midpoints)
    - ``p[i, j]`` lives at ``(i + 1/2, j + 1/2)`` (cell centers)

    ``n`` is a power of two, so ``h = 1.0 / n`` is exact in binary and
    ``h * n == 1`` holds bit for bit.

Operators (all periodic, all linear):
    apply_laplacian          -Delta_h, 5-point, used for u, v and as A_p
    apply_gradient           (dx)_{h/2} p, (dy)_{h/2} p        (B^T)
    apply_divergence         (dx)_{h/2} u + (dy)_{h/2} v
    apply_constraint         -(divergence)                      (B)
    apply_mass               Q = h^2/36 [1 4 1; 4 16 4; 1 4 1]
    apply_stokes             the saddle operator [[A, B^T], [B, 0]]

The sparse ``assemble_*`` builders use Kronecker products of 1D periodic
difference matrices. They back the coarse-grid solver and serve as an
independent oracle for the stencil code.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

MASS_STENCIL = np.array([[1.0, 4.0, 1.0],
                         [4.0, 16.0, 4.0],
                         [1.0, 4.0, 1.0]]) / 36.0

# Offsets of each component from the node (i, j), in units of h.
COMPONENT_OFFSETS = {
    "u": (0.0, 0.5),
    "v": (0.5, 0.0),
    "p": (0.5, 0.5),
}


class StokesError(Exception):
    """Base class for solver errors."""


class GridError(StokesError, ValueError):
    """Invalid grid size, size mismatch or a grid too small to coarsen."""


class FrequencyDomainError(StokesError, ValueError):
    """Fourier analysis requested outside its domain (zero frequency, empty box)."""


class DivergenceError(StokesError):
    """An iteration grew instead of converging."""

    def __init__(self, message: str, params: Optional[dict] = None, residual: Optional[float] = None):
        super().__init__(message)
        self.params = params or {}
        self.residual = residual


class DegenerateMeasurementError(StokesError):
    """The initial defect is zero, so no convergence factor can be measured."""


class InconsistentSystemError(StokesError):
    """A right-hand side has a component outside the range of the operator."""

    def __init__(self, message: str, magnitude: float):
        super().__init__(message)
        self.magnitude = magnitude


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic mesh of the unit square with ``n`` cells per side."""

    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise GridError(f"Grid size must be an integer, got {self.n!r}")
        if self.n < 4 or self.n & (self.n - 1):
            raise GridError(f"Grid size must be a power of two >= 4, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n, self.n)

    @property
    def unknowns(self) -> int:
        return 3 * self.n * self.n

    def coarsen(self) -> "GridSpec":
        if self.n <= 4:
            raise GridError(f"Grid with n={self.n} is too small to coarsen")
        return GridSpec(self.n // 2)

    def check(self, array: np.ndarray, name: str = "array") -> None:
        if np.shape(array) != self.shape:
            raise GridError(f"{name} has shape {np.shape(array)}, expected {self.shape}")

    def coordinates(self, component: str) -> Tuple[np.ndarray, np.ndarray]:
        """Return the (x, y) positions of a component's unknowns in units of h."""
        dx, dy = COMPONENT_OFFSETS[component]
        index = np.arange(self.n, dtype=float)
        return np.meshgrid(index + dx, index + dy, indexing="ij")


class StaggeredField(object):
    """
    Block unknown (u, v, p) of the discrete Stokes system.

    Components are plain numpy arrays; complex arrays are accepted so that
    sampled Fourier modes can be pushed through every operator.
    """

    __slots__ = ("u", "v", "p")

    def __init__(self, u: np.ndarray, v: np.ndarray, p: np.ndarray):
        u, v, p = np.asarray(u), np.asarray(v), np.asarray(p)
        if not (u.shape == v.shape == p.shape) or u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise GridError(f"Component shapes differ or are not square: {u.shape}, {v.shape}, {p.shape}")
        self.u = u
        self.v = v
        self.p = p

    @classmethod
    def zeros(cls, grid: GridSpec, dtype=np.float64) -> "StaggeredField":
        return cls(np.zeros(grid.shape, dtype), np.zeros(grid.shape, dtype), np.zeros(grid.shape, dtype))

    @classmethod
    def constant(cls, grid: GridSpec, u: float = 0.0, v: float = 0.0, p: float = 0.0) -> "StaggeredField":
        return cls(np.full(grid.shape, u), np.full(grid.shape, v), np.full(grid.shape, p))

    @classmethod
    def random(cls, grid: GridSpec, rng: np.random.Generator, low: float = -0.5, high: float = 0.5) -> "StaggeredField":
        """Uniform random entries; drawn in the order u, v, p."""
        return cls(*(rng.uniform(low, high, size=grid.shape) for _ in range(3)))

    @classmethod
    def fourier_mode(cls, grid: GridSpec, theta: Tuple[float, float], coefficients=(1.0, 1.0, 1.0)) -> "StaggeredField":
        """
        Sample exp(i theta . x / h) at each component's own location.

        Args:
            grid: target grid
            theta: frequency pair (theta1, theta2)
            coefficients: amplitudes of (u, v, p)

        Returns:
            complex field whose components are the scaled samples
        """
        theta1, theta2 = theta
        parts = []
        for name, coefficient in zip(("u", "v", "p"), coefficients):
            x, y = grid.coordinates(name)
            parts.append(coefficient * np.exp(1j * (theta1 * x + theta2 * y)))
        return cls(*parts)

    @classmethod
    def from_flat(cls, grid: GridSpec, vector: np.ndarray) -> "StaggeredField":
        vector = np.asarray(vector)
        if vector.shape != (grid.unknowns,):
            raise GridError(f"Flat vector has shape {vector.shape}, expected ({grid.unknowns},)")
        size = grid.n * grid.n
        return cls(*(vector[k * size:(k + 1) * size].reshape(grid.shape) for k in range(3)))

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n)

    def components(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.u, self.v, self.p

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.u.ravel(), self.v.ravel(), self.p.ravel()])

    def copy(self) -> "StaggeredField":
        return StaggeredField(self.u.copy(), self.v.copy(), self.p.copy())

    def dot(self, other: "StaggeredField") -> complex:
        """Euclidean inner product, conjugate-linear in ``self``; summed u, then v, then p."""
        self._check_same(other)
        total = np.vdot(self.u, other.u) + np.vdot(self.v, other.v) + np.vdot(self.p, other.p)
        return complex(total) if np.iscomplexobj(total) else float(total)

    def norm(self) -> float:
        """2-norm over all 3n^2 entries; squared sums accumulated u, then v, then p."""
        total = 0.0
        for component in self.components():
            total += float(np.vdot(component, component).real)
        return float(np.sqrt(total))

    def means(self) -> Tuple[complex, complex, complex]:
        return tuple(component.mean() for component in self.components())

    def mean_free(self) -> "StaggeredField":
        """Copy with the constant nullspace (u, v, p) = (c1, c2, c3) removed."""
        return StaggeredField(*(component - component.mean() for component in self.components()))

    def _check_same(self, other: "StaggeredField") -> None:
        if not isinstance(other, StaggeredField):
            raise TypeError(f"Expected StaggeredField, got {type(other).__name__}")
        if other.n != self.n:
            raise GridError(f"Field sizes differ: {self.n} vs {other.n}")

    def __add__(self, other: "StaggeredField") -> "StaggeredField":
        self._check_same(other)
        return StaggeredField(self.u + other.u, self.v + other.v, self.p + other.p)

    def __sub__(self, other: "StaggeredField") -> "StaggeredField":
        self._check_same(other)
        return StaggeredField(self.u - other.u, self.v - other.v, self.p - other.p)

    def __mul__(self, scalar) -> "StaggeredField":
        if isinstance(scalar, StaggeredField):
            return NotImplemented
        return StaggeredField(self.u * scalar, self.v * scalar, self.p * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "StaggeredField":
        return StaggeredField(self.u / scalar, self.v / scalar, self.p / scalar)

    def __neg__(self) -> "StaggeredField":
        return StaggeredField(-self.u, -self.v, -self.p)

    def __repr__(self):
        return f"StaggeredField(n={self.n}, dtype={self.u.dtype}, norm={self.norm():.3e})"


def _at(a: np.ndarray, di: int = 0, dj: int = 0) -> np.ndarray:
    """Return ``b`` with ``b[i, j] = a[i + di, j + dj]`` (indices wrap)."""
    return np.roll(a, shift=(-di, -dj), axis=(0, 1))


def apply_laplacian(grid: GridSpec, w: np.ndarray) -> np.ndarray:
    """-Delta_h with the 5-point stencil (1/h^2){-1; -1 4 -1; -1}."""
    grid.check(w, "w")
    neighbours = _at(w, 1, 0) + _at(w, -1, 0) + _at(w, 0, 1) + _at(w, 0, -1)
    return (4.0 * w - neighbours) / grid.h ** 2


def apply_pressure_laplacian(grid: GridSpec, q: np.ndarray) -> np.ndarray:
    """A_p: the same 5-point stencil evaluated at cell centers."""
    return apply_laplacian(grid, q)


def apply_mass(grid: GridSpec, w: np.ndarray) -> np.ndarray:
    """Q w; the 9-point stencil factors as (h^2/36) [1 4 1] x [1 4 1]."""
    grid.check(w, "w")
    t = _at(w, -1, 0) + 4.0 * w + _at(w, 1, 0)
    t = _at(t, 0, -1) + 4.0 * t + _at(t, 0, 1)
    return t * (grid.h ** 2 / 36.0)


def apply_gradient(grid: GridSpec, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cell centers to edges: ((p[i] - p[i-1]) / h, (p[j] - p[j-1]) / h)."""
    grid.check(p, "p")
    return (p - _at(p, -1, 0)) / grid.h, (p - _at(p, 0, -1)) / grid.h


def apply_divergence(grid: GridSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Edges to cell centers: (u[i+1] - u[i]) / h + (v[j+1] - v[j]) / h."""
    grid.check(u, "u")
    grid.check(v, "v")
    return (_at(u, 1, 0) - u) / grid.h + (_at(v, 0, 1) - v) / grid.h


def apply_constraint(grid: GridSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """The block B = -divergence; its transpose is ``apply_gradient``."""
    return -apply_divergence(grid, u, v)


def apply_stokes(grid: GridSpec, x: StaggeredField) -> StaggeredField:
    """y = L_h x for L_h = [[-Delta_h, 0, dx], [0, -Delta_h, dy], [-dx, -dy, 0]]."""
    if x.n != grid.n:
        raise GridError(f"Field has n={x.n}, grid has n={grid.n}")
    gx, gy = apply_gradient(grid, x.p)
    return StaggeredField(apply_laplacian(grid, x.u) + gx,
                          apply_laplacian(grid, x.v) + gy,
                          apply_constraint(grid, x.u, x.v))


def residual(grid: GridSpec, b: StaggeredField, x: StaggeredField) -> StaggeredField:
    """Defect d = b - L_h x."""
    return b - apply_stokes(grid, x)


def _periodic_forward_difference(grid: GridSpec) -> sp.csr_matrix:
    n = grid.n
    shift = sp.eye(n, k=1, format="csr") + sp.eye(n, k=-(n - 1), format="csr")
    return ((shift - sp.identity(n, format="csr")) / grid.h).tocsr()


def _assemble_blocks(grid: GridSpec):
    forward = _periodic_forward_difference(grid)
    backward = (-forward.T).tocsr()
    eye = sp.identity(grid.n, format="csr")
    second = backward @ forward
    laplacian = -(sp.kron(second, eye) + sp.kron(eye, second))
    grad_x = sp.kron(backward, eye)
    grad_y = sp.kron(eye, backward)
    return laplacian.tocsr(), grad_x.tocsr(), grad_y.tocsr()


def assemble_laplacian_matrix(grid: GridSpec) -> sp.csr_matrix:
    return _assemble_blocks(grid)[0]


def assemble_mass_matrix(grid: GridSpec) -> sp.csr_matrix:
    n = grid.n
    tridiagonal = (4.0 * sp.identity(n) + sp.eye(n, k=1) + sp.eye(n, k=-1)
                   + sp.eye(n, k=n - 1) + sp.eye(n, k=-(n - 1)))
    return (sp.kron(tridiagonal, tridiagonal) * (grid.h ** 2 / 36.0)).tocsr()


def assemble_constraint_matrix(grid: GridSpec) -> sp.csr_matrix:
    """B as an n^2 x 2n^2 matrix acting on (u, v)."""
    _, grad_x, grad_y = _assemble_blocks(grid)
    return sp.hstack([grad_x.T, grad_y.T]).tocsr()


def assemble_stokes_matrix(grid: GridSpec) -> sp.csr_matrix:
    """L_h as a 3n^2 x 3n^2 sparse matrix in the ``StaggeredField.flatten`` ordering."""
    laplacian, grad_x, grad_y = _assemble_blocks(grid)
    return sp.bmat([[laplacian, None, grad_x],
                    [None, laplacian, grad_y],
                    [grad_x.T, grad_y.T, None]], format="csr")


def assemble_schur_matrix(grid: GridSpec, mass_based: bool = True) -> sp.csr_matrix:
    """
    B C^{-1} B^T for C^{-1} = blockdiag(Q, Q) or, when ``mass_based`` is
    False, C^{-1} = (h^2/4) I.
    """
    constraint = assemble_constraint_matrix(grid)
    if mass_based:
        mass = assemble_mass_matrix(grid)
        inverse_momentum = sp.block_diag([mass, mass])
    else:
        inverse_momentum = sp.identity(2 * grid.n * grid.n) * (grid.h ** 2 / 4.0)
    return (constraint @ inverse_momentum @ constraint.T).tocsr()


def nullspace_basis(grid: GridSpec) -> np.ndarray:
    """Orthonormal basis (3n^2 x 3) of the constant fields annihilated by L_h."""
    size = grid.n * grid.n
    basis = np.zeros((grid.unknowns, 3))
    for k in range(3):
        basis[k * size:(k + 1) * size, k] = 1.0 / np.sqrt(size)
    return basis
