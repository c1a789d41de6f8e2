"""
Local Fourier analysis of the relaxation schemes.

A Fourier mode of frequency theta = (theta1, theta2) sampled at each
component's own location diagonalizes every periodic MAC operator into a
3x3 complex matrix (its symbol). The smoothing factor of a scheme is the
largest spectral radius of its error-propagation symbol over the high
frequencies T^high = [-pi/2, 3pi/2)^2 minus [-pi/2, pi/2)^2.

All functions are vectorized over frequency arrays: symbols have shape
(..., 3, 3) and scalar channels have shape (...).
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from mac_discretization import FrequencyDomainError
from relaxation import (
    DIAGONAL_SCHUR_DIAGONAL,
    MASS_SCHUR_DIAGONAL,
    Family,
    RelaxParams,
    RelaxScheme,
    relaxation_update,
)

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 256
MIN_RESOLUTION = 32
ORIGIN_EXCLUSION = 1e-8
MR_RANGE = (8.0 / 9.0, 16.0 / 9.0)
M_RANGE = (0.5, 2.0)
MULTIPLE_ROOT_TOLERANCE = 4096 * np.finfo(float).eps

EXPECTED_SMOOTHING = {
    RelaxScheme.QDR: 1.0 / 3.0,
    RelaxScheme.QBSR_EXACT: 1.0 / 3.0,
    RelaxScheme.QIBSR: 1.0 / 3.0,
    RelaxScheme.QSIGMA_UZAWA: float(np.sqrt(1.0 / 3.0)),
    RelaxScheme.DWJ_BASELINE: 0.6,
    RelaxScheme.DIAG_BSR_BASELINE: 0.6,
    RelaxScheme.DIAG_IBSR_BASELINE: 0.6,
    RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE: float(np.sqrt(0.6)),
}


@dataclass(frozen=True)
class Frequency:
    theta1: float
    theta2: float

    @property
    def is_high(self) -> bool:
        return bool(is_high(self.theta1, self.theta2))

    @property
    def is_low(self) -> bool:
        return bool(is_low(self.theta1, self.theta2))

    def __iter__(self):
        return iter((self.theta1, self.theta2))


def _in_period(theta):
    return (theta >= -np.pi / 2) & (theta < 3 * np.pi / 2)


def is_low(theta1, theta2):
    """theta in [-pi/2, pi/2)^2."""
    theta1, theta2 = np.asarray(theta1), np.asarray(theta2)
    return (theta1 >= -np.pi / 2) & (theta1 < np.pi / 2) & (theta2 >= -np.pi / 2) & (theta2 < np.pi / 2)


def is_high(theta1, theta2):
    """theta in [-pi/2, 3pi/2)^2 but not in [-pi/2, pi/2)^2."""
    theta1, theta2 = np.asarray(theta1), np.asarray(theta2)
    return _in_period(theta1) & _in_period(theta2) & ~is_low(theta1, theta2)


@lru_cache(maxsize=16)
def frequency_grid(resolution: int, sampling: str = "cell") -> Tuple[np.ndarray, np.ndarray]:
    """
    Uniform resolution x resolution samples of [-pi/2, 3pi/2)^2, flattened.

    ``cell`` samples the cell centers (offset by half a step); ``node``
    starts at -pi/2 and, for resolutions divisible by 4, contains pi/2 and
    pi exactly.
    """
    if resolution < 4:
        raise FrequencyDomainError(f"Resolution must be at least 4, got {resolution}")
    step = 2 * np.pi / resolution
    if sampling == "cell":
        axis = -np.pi / 2 + (np.arange(resolution) + 0.5) * step
    elif sampling == "node":
        axis = -np.pi / 2 + np.arange(resolution) * step
    else:
        raise ValueError(f"Unknown sampling: {sampling}. Must be cell or node")
    theta1, theta2 = np.meshgrid(axis, axis, indexing="ij")
    return theta1.ravel(), theta2.ravel()


@lru_cache(maxsize=16)
def high_frequencies(resolution: int, sampling: str = "cell") -> Tuple[np.ndarray, np.ndarray]:
    """Samples of T^high, with an ORIGIN_EXCLUSION ball around theta = 0 removed."""
    theta1, theta2 = frequency_grid(resolution, sampling)
    keep = is_high(theta1, theta2) & (np.hypot(theta1, theta2) > ORIGIN_EXCLUSION)
    return theta1[keep], theta2[keep]


def symbol_scalars(theta1, theta2):
    """Return (m, m_s, m_r) with m_r = 4 m / m_s."""
    theta1, theta2 = np.asarray(theta1, dtype=float), np.asarray(theta2, dtype=float)
    m = np.sin(theta1 / 2) ** 2 + np.sin(theta2 / 2) ** 2
    m_s = 9.0 / ((2.0 + np.cos(theta1)) * (2.0 + np.cos(theta2)))
    return m, m_s, 4.0 * m / m_s


@dataclass
class FreqSymbol:
    """3x3 symbol(s) at one or many frequencies, with the scalar channels."""

    entries: np.ndarray
    m: np.ndarray
    m_s: np.ndarray
    m_r: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return eig3(self.entries)

    def spectral_radius(self) -> np.ndarray:
        return np.abs(eig3(self.entries)).max(axis=-1)


class SymbolOperators:
    """
    ``relaxation.StokesOperators`` on Fourier symbols: every stencil becomes
    multiplication by its symbol at each sampled frequency.
    """

    def __init__(self, theta1, theta2, h: float = 1.0):
        self.h = h
        self.theta1 = np.asarray(theta1, dtype=float)
        self.theta2 = np.asarray(theta2, dtype=float)
        self.m, self.m_s, self.m_r = symbol_scalars(self.theta1, self.theta2)
        self.grad_x = 2j * np.sin(self.theta1 / 2) / h
        self.grad_y = 2j * np.sin(self.theta2 / 2) / h
        self.laplacian_symbol = 4.0 * self.m / h ** 2
        self.mass_symbol = h ** 2 / self.m_s

    def laplacian(self, w):
        return self.laplacian_symbol * w

    def mass(self, w):
        return self.mass_symbol * w

    def diagonal_inverse(self, w):
        return w * (self.h ** 2 / 4.0)

    def gradient(self, q):
        return self.grad_x * q, self.grad_y * q

    def constraint(self, u, v):
        # B is the transpose of the gradient, so its symbol is the conjugate
        return np.conj(self.grad_x) * u + np.conj(self.grad_y) * v

    def schur_symbol(self, mass_based: bool):
        inverse_momentum = self.mass_symbol if mass_based else self.h ** 2 / 4.0
        return inverse_momentum * self.laplacian_symbol

    def schur_solve(self, rhs, mass_based: bool):
        return rhs / self.schur_symbol(mass_based)

    def schur_diagonal(self, mass_based: bool) -> float:
        return MASS_SCHUR_DIAGONAL if mass_based else DIAGONAL_SCHUR_DIAGONAL


def _check_nonzero(theta1, theta2):
    if np.any(np.hypot(np.asarray(theta1), np.asarray(theta2)) <= ORIGIN_EXCLUSION):
        raise FrequencyDomainError("Relaxation symbols are singular at theta = (0, 0)")


def stokes_symbol(theta1, theta2, h: float = 1.0) -> FreqSymbol:
    """(1/h^2) [[4m, 0, i2h s1], [0, 4m, i2h s2], [-i2h s1, -i2h s2, 0]], s_k = sin(theta_k/2)."""
    ops = SymbolOperators(theta1, theta2, h)
    shape = np.shape(ops.m)
    entries = np.zeros(shape + (3, 3), dtype=complex)
    entries[..., 0, 0] = ops.laplacian_symbol
    entries[..., 1, 1] = ops.laplacian_symbol
    entries[..., 0, 2] = ops.grad_x
    entries[..., 1, 2] = ops.grad_y
    entries[..., 2, 0] = np.conj(ops.grad_x)
    entries[..., 2, 1] = np.conj(ops.grad_y)
    return FreqSymbol(entries, ops.m, ops.m_s, ops.m_r)


def update_symbol(scheme: RelaxScheme, params: RelaxParams, theta1, theta2, h: float = 1.0) -> np.ndarray:
    """W(theta): the symbol of the correction map r -> dx, assembled column by column."""
    scheme = RelaxScheme.parse(scheme)
    ops = SymbolOperators(theta1, theta2, h)
    shape = np.shape(ops.m)
    columns = []
    for k in range(3):
        unit = [np.full(shape, 1.0 + 0j) if j == k else np.zeros(shape, dtype=complex) for j in range(3)]
        columns.append(np.stack(relaxation_update(ops, scheme, params, *unit), axis=-1))
    return np.stack(columns, axis=-1)


def relaxation_symbol(scheme: RelaxScheme, params: RelaxParams, theta1, theta2, h: float = 1.0) -> FreqSymbol:
    """
    Error-propagation symbol S(theta) = I - omega W(theta) L(theta) of one sweep.

    Raises:
        FrequencyDomainError: if any theta is the zero frequency
    """
    _check_nonzero(theta1, theta2)
    stokes = stokes_symbol(theta1, theta2, h)
    update = update_symbol(scheme, params, theta1, theta2, h)
    entries = np.eye(3) - params.omega * (update @ stokes.entries)
    return FreqSymbol(entries, stokes.m, stokes.m_s, stokes.m_r)


def distribution_symbol(theta1, theta2, h: float = 1.0) -> np.ndarray:
    """P(theta) for P = [[I, B^T], [0, -A_p]]."""
    ops = SymbolOperators(theta1, theta2, h)
    entries = np.zeros(np.shape(ops.m) + (3, 3), dtype=complex)
    entries[..., 0, 0] = 1.0
    entries[..., 1, 1] = 1.0
    entries[..., 0, 2] = ops.grad_x
    entries[..., 1, 2] = ops.grad_y
    entries[..., 2, 2] = -ops.laplacian_symbol
    return entries


def transformed_symbol(theta1, theta2, h: float = 1.0) -> np.ndarray:
    """K = L P, block lower triangular with Laplacian diagonal."""
    return stokes_symbol(theta1, theta2, h).entries @ distribution_symbol(theta1, theta2, h)


def preconditioner_symbol(scheme: RelaxScheme, params: RelaxParams, theta1, theta2, h: float = 1.0) -> np.ndarray:
    """
    Closed-form M(theta) of a scheme with an explicit preconditioner.

    - distributive: M_D = [[alpha C, 0], [B, alpha E]] (relaxes L P)
    - exact Braess-Sarazin: M_B = [[alpha C, B^T], [B, 0]]
    - sigma-Uzawa: M_U = [[alpha C, 0], [B, -1/sigma]]

    C is Q^{-1} (symbol m_s/h^2) for mass-based schemes and diag(A) = 4/h^2
    otherwise; E is chosen the same way at cell centers.

    Raises:
        ValueError: for inexact Braess-Sarazin, whose update has no
            closed-form preconditioner; use ``update_symbol``
    """
    scheme = RelaxScheme.parse(scheme)
    ops = SymbolOperators(theta1, theta2, h)
    momentum = ops.m_s / h ** 2 if scheme.mass_based else np.full(np.shape(ops.m), 4.0 / h ** 2)
    entries = np.zeros(np.shape(ops.m) + (3, 3), dtype=complex)
    entries[..., 2, 0] = np.conj(ops.grad_x)
    entries[..., 2, 1] = np.conj(ops.grad_y)

    if scheme.family is Family.DISTRIBUTIVE:
        alpha = 1.0 if scheme.mass_based else params.alpha
        entries[..., 0, 0] = entries[..., 1, 1] = entries[..., 2, 2] = alpha * momentum
    elif scheme.family is Family.UZAWA:
        entries[..., 0, 0] = entries[..., 1, 1] = params.alpha * momentum
        entries[..., 2, 2] = -1.0 / params.sigma
    elif scheme.exact_schur:
        entries[..., 0, 0] = entries[..., 1, 1] = params.alpha * momentum
        entries[..., 0, 2] = ops.grad_x
        entries[..., 1, 2] = ops.grad_y
    else:
        raise ValueError(f"{scheme.value} has no closed-form preconditioner symbol")
    return entries


def eig3(matrix) -> np.ndarray:
    """
    Eigenvalues of 3x3 complex matrices from the characteristic cubic.

    With lambda = t - a/3 the cubic becomes t^3 + p t + q. When p and q are
    at roundoff level relative to ||M||_F the root is triple (-a/3). When
    the discriminant vanishes to roundoff and p does not, the roots are the
    double -3q/(2p) and the simple 3q/p. All other roots come from Cardano's
    formula followed by one Newton step on the cubic, kept only when it
    lowers |det(M - lambda I)|. Each triple is sorted by (real, imag).

    Args:
        matrix: array of shape (..., 3, 3)

    Returns:
        complex array of shape (..., 3)
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape[-2:] != (3, 3):
        raise ValueError(f"eig3 expects (..., 3, 3) input, got {matrix.shape}")
    m = matrix
    trace = m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2]
    minors = (m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
              + m[..., 0, 0] * m[..., 2, 2] - m[..., 0, 2] * m[..., 2, 0]
              + m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
    # lambda^3 + a lambda^2 + b lambda + c
    a, b, c = np.asarray(-trace), np.asarray(minors), np.asarray(-np.linalg.det(m))
    shift = np.asarray(a / 3.0)
    p = b - a * shift
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    scale = np.linalg.norm(m, axis=(-2, -1))
    discriminant = -4.0 * p ** 3 - 27.0 * q ** 2
    # first-order size of the roundoff in the discriminant
    noise = MULTIPLE_ROOT_TOLERANCE * (12.0 * np.abs(p) ** 2 * scale ** 2 + 54.0 * np.abs(q) * scale ** 3)
    small_p = np.abs(p) <= MULTIPLE_ROOT_TOLERANCE * scale ** 2
    triple = np.asarray(small_p & (np.abs(q) <= MULTIPLE_ROOT_TOLERANCE * scale ** 3))
    double = np.asarray(~triple & ~small_p & (np.abs(discriminant) <= noise))
    simple = np.asarray(~(triple | double))

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        delta0, delta1 = -3.0 * p, 27.0 * q
        root = np.sqrt(delta1 * delta1 - 4.0 * delta0 ** 3)
        big = np.where(np.abs(delta1 + root) >= np.abs(delta1 - root), delta1 + root, delta1 - root) / 2.0
        cube = np.power(big, 1.0 / 3.0)
        cube = np.where(np.abs(cube) > 0.0, cube, 1.0)
        xi = np.exp(2j * np.pi / 3.0)
        cardano = np.stack([-(cube * xi ** k + delta0 / (cube * xi ** k)) / 3.0 for k in range(3)], axis=-1)

        safe_p = np.where(double, p, 1.0)
        paired = np.stack([-1.5 * q / safe_p, -1.5 * q / safe_p, 3.0 * q / safe_p], axis=-1)

        shifted = np.where(double[..., None], paired, cardano)
        shifted = np.where(triple[..., None], 0.0, shifted)
        roots = shifted - shift[..., None]

        def cubic(z):
            return ((z + a[..., None]) * z + b[..., None]) * z + c[..., None]

        derivative = (3.0 * roots + 2.0 * a[..., None]) * roots + b[..., None]
        usable = simple[..., None] & (np.abs(derivative) > 0.0)
        polished = roots - cubic(roots) / np.where(usable, derivative, 1.0)
        improves = usable & np.isfinite(polished) & (np.abs(cubic(polished)) < np.abs(cubic(roots)))
        roots = np.where(improves, polished, roots)

    order = np.lexsort((roots.imag, roots.real), axis=-1)
    return np.take_along_axis(roots, order, axis=-1)


class SmoothingFactor(NamedTuple):
    mu: float
    theta1: float
    theta2: float


def smoothing_factor(scheme: RelaxScheme, params: RelaxParams, resolution: int = DEFAULT_RESOLUTION,
                     sampling: str = "cell", h: float = 1.0) -> SmoothingFactor:
    """
    Largest spectral radius of the sweep symbol over sampled T^high.

    Returns:
        SmoothingFactor(mu, theta1, theta2) with the first maximizing frequency
    """
    if resolution < MIN_RESOLUTION:
        raise FrequencyDomainError(f"Resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    theta1, theta2 = high_frequencies(resolution, sampling)
    radius = relaxation_symbol(scheme, params, theta1, theta2, h).spectral_radius()
    index = int(np.argmax(radius))
    return SmoothingFactor(float(radius[index]), float(theta1[index]), float(theta2[index]))


def scalar_mass_smoothing_factor(omega: float) -> float:
    """Smoothing factor of S_s = I - omega Q (-Delta_h): eigenvalues 1 - omega m_r."""
    low, high = MR_RANGE
    return max(abs(1.0 - omega * low), abs(1.0 - omega * high))


@dataclass
class UzawaDiagnostics:
    """Closed-form quantities of the sigma-Uzawa symbol at one value of m_r."""

    m_r: float
    m2: float
    lambda_star: float
    d_roots: Tuple[complex, complex]
    upsilon: float
    chi_plus: complex
    chi_minus: complex
    mu_R: float
    mu_C: float
    x: float
    y: float
    branch: str

    @property
    def smoothing_factor(self) -> float:
        return max(self.mu_R, self.mu_C)


def _chi(params: RelaxParams, m_r: float) -> Tuple[complex, complex]:
    """omega times the roots of d(lambda) = lambda^2 - (1+sigma) m_r/alpha lambda + sigma m_r/alpha."""
    total = (1.0 + params.sigma) * m_r / params.alpha
    product = params.sigma * m_r / params.alpha
    discriminant = complex(total * total - 4.0 * product)
    half_root = np.sqrt(discriminant) / 2.0
    return params.omega * (total / 2.0 + half_root), params.omega * (total / 2.0 - half_root)


def _upsilon_squared(params: RelaxParams, m_r: float) -> float:
    return 1.0 + (params.omega / params.alpha) * (params.omega * params.sigma - params.sigma - 1.0) * m_r


def uzawa_branches(params: RelaxParams, m_r: float, m_r_range: Tuple[float, float] = MR_RANGE) -> UzawaDiagnostics:
    """
    Uzawa diagnostics at ``m_r``.

    mu_C is the largest Upsilon over the complex branch m_r < m2 inside
    ``m_r_range``; mu_R the largest |1 - chi| over the real branch. Both are
    monotone in m_r on their branch, so only branch endpoints are evaluated.
    """
    low, high = m_r_range
    sigma, alpha, omega = params.sigma, params.alpha, params.omega
    x = (1.0 + sigma) * omega / alpha
    y = omega * omega * sigma / alpha
    m2 = 4.0 * alpha * sigma / (1.0 + sigma) ** 2

    chi_plus, chi_minus = _chi(params, m_r)
    upsilon_sq = _upsilon_squared(params, m_r)

    if m2 > low:
        edge = min(m2, high)
        mu_c = float(np.sqrt(max(0.0, _upsilon_squared(params, low), _upsilon_squared(params, edge))))
    else:
        mu_c = 0.0
    if m2 <= high:
        ends = [_chi(params, max(m2, low)), _chi(params, high)]
        mu_r = float(max(abs(1.0 - chi.real) for pair in ends for chi in pair))
    else:
        mu_r = 0.0

    return UzawaDiagnostics(
        m_r=float(m_r), m2=m2, lambda_star=m_r / alpha,
        d_roots=(chi_plus / omega, chi_minus / omega),
        upsilon=float(np.sqrt(upsilon_sq)) if upsilon_sq >= 0 else float("nan"),
        chi_plus=chi_plus, chi_minus=chi_minus, mu_R=mu_r, mu_C=mu_c, x=x, y=y,
        branch="complex" if m_r < m2 else "real",
    )


def uzawa_smoothing_factor(params: RelaxParams, m_r_range: Tuple[float, float] = MR_RANGE) -> float:
    """Closed-form smoothing factor including the divergence-free mode 1 - omega m_r/alpha."""
    low, high = m_r_range
    diagnostics = uzawa_branches(params, low, m_r_range)
    ratio = params.omega / params.alpha
    star = max(abs(1.0 - ratio * low), abs(1.0 - ratio * high))
    return max(diagnostics.mu_R, diagnostics.mu_C, star)


def uzawa_optimal_params(omega: float) -> RelaxParams:
    """(alpha, sigma) = (8 omega^2 / (3 (3 omega - 1)), 1 / (3 omega - 1)) for a given omega."""
    if omega <= 1.0 / 3.0:
        raise ValueError(f"omega must exceed 1/3, got {omega}")
    return RelaxParams(omega=omega, alpha=8.0 * omega ** 2 / (3.0 * (3.0 * omega - 1.0)),
                       sigma=1.0 / (3.0 * omega - 1.0))


def uzawa_omega_range(mu: float = float(np.sqrt(1.0 / 3.0))) -> Tuple[float, float]:
    """Admissible omega interval [1/(3 mu), 2/(3 (1 - mu))] for the optimal family."""
    return 1.0 / (3.0 * mu), 2.0 / (3.0 * (1.0 - mu))


def uzawa_lower_bound_high_m2() -> float:
    """Lower bound on the Uzawa factor when m2 > 16/9."""
    return float(np.sqrt(2.0) / 2.0)


def uzawa_lower_bound_low_m2(gamma: float) -> float:
    """Lower bound sqrt(1 - 8/(9 gamma)) on the Uzawa factor when m2 <= 8/9."""
    return float(np.sqrt(max(0.0, 1.0 - 8.0 / (9.0 * gamma))))


@dataclass
class ParameterSearch:
    """
    Box for ``optimize_params``.

    Attributes:
        axes: parameter name -> (low, high, points); points >= 1
        base: parameters not searched over
        resolution: frequency samples per axis during the search
        sampling: frequency sampling mode during the search
        refine: rerun once on a box of +-1 step around the incumbent
    """

    axes: Dict[str, Tuple[float, float, int]]
    base: RelaxParams = field(default_factory=lambda: RelaxParams(omega=1.0))
    resolution: int = 32
    sampling: str = "node"
    refine: bool = True


class OptimizationResult(NamedTuple):
    params: RelaxParams
    mu: float
    evaluations: int


def _axis_values(low: float, high: float, points: int) -> np.ndarray:
    if points < 1 or high < low:
        raise FrequencyDomainError(f"Empty search axis [{low}, {high}] with {points} points")
    return np.linspace(low, high, points) if points > 1 else np.array([low])


def _grid_search(scheme, search: ParameterSearch, axes) -> OptimizationResult:
    names = list(axes)
    values = [_axis_values(*axes[name]) for name in names]
    best_params, best_mu, evaluations = None, np.inf, 0
    for combination in itertools.product(*values):
        changes = dict(zip(names, (float(value) for value in combination)))
        if any(value <= 0 for value in changes.values()):
            continue
        params = search.base.replace(**changes)
        mu = smoothing_factor(scheme, params, search.resolution, search.sampling).mu
        evaluations += 1
        if mu < best_mu - 1e-12:
            best_params, best_mu = params, mu
    if best_params is None:
        raise FrequencyDomainError("Parameter box contains no admissible point")
    return OptimizationResult(best_params, float(best_mu), evaluations)


def optimize_params(scheme: RelaxScheme, search: ParameterSearch) -> OptimizationResult:
    """
    Exhaustive grid search of the smoothing factor over a parameter box.

    Raises:
        FrequencyDomainError: if the box is empty
    """
    scheme = RelaxScheme.parse(scheme)
    if not search.axes:
        raise FrequencyDomainError("Parameter box has no axes")
    result = _grid_search(scheme, search, search.axes)
    logger.info(f"[LFA] {scheme.value}: coarse search mu={result.mu:.6f} at {result.params.as_dict()}")
    if not search.refine:
        return result

    refined_axes = {}
    for name, (low, high, points) in search.axes.items():
        center = getattr(result.params, name)
        step = (high - low) / (points - 1) if points > 1 else 0.0
        refined_axes[name] = (max(center - step, 1e-6), center + step, 21 if points > 1 else 1)
    refined = _grid_search(scheme, search, refined_axes)
    best = refined if refined.mu < result.mu else result
    logger.info(f"[LFA] {scheme.value}: refined search mu={best.mu:.6f} at {best.params.as_dict()}")
    return OptimizationResult(best.params, best.mu, result.evaluations + refined.evaluations)


DEFAULT_SEARCHES: Dict[RelaxScheme, ParameterSearch] = {
    RelaxScheme.QDR: ParameterSearch({"omega": (0.1, 1.5, 141)}),
    RelaxScheme.QBSR_EXACT: ParameterSearch({"omega": (0.5, 1.5, 21), "alpha": (0.5, 1.5, 21)}),
    RelaxScheme.QIBSR: ParameterSearch({"omega": (0.7, 1.3, 13), "alpha": (1.0, 1.6, 19)}),
    RelaxScheme.QSIGMA_UZAWA: ParameterSearch({"omega": (0.7, 1.3, 13), "alpha": (1.0, 1.6, 19),
                                               "sigma": (0.3, 0.7, 9)}),
    RelaxScheme.DWJ_BASELINE: ParameterSearch({"omega": (0.6, 1.4, 17), "alpha": (0.8, 1.8, 21)}),
    RelaxScheme.DIAG_BSR_BASELINE: ParameterSearch({"omega": (0.6, 1.4, 17), "alpha": (0.8, 1.8, 21)}),
    RelaxScheme.DIAG_IBSR_BASELINE: ParameterSearch({"omega": (0.6, 1.4, 9), "alpha": (0.8, 1.8, 21),
                                                     "omega_j": (0.5, 1.2, 15)}),
    RelaxScheme.DIAG_SIGMA_UZAWA_BASELINE: ParameterSearch({"omega": (0.6, 1.4, 9), "alpha": (0.8, 1.8, 21),
                                                            "sigma": (0.1, 0.6, 11)}),
}


def mass_ratio_range(resolution: int = DEFAULT_RESOLUTION, sampling: str = "node") -> Tuple[float, float]:
    """min and max of m_r over sampled T^high."""
    theta1, theta2 = high_frequencies(resolution, sampling)
    m_r = symbol_scalars(theta1, theta2)[2]
    return float(m_r.min()), float(m_r.max())


def grid_frequencies(n: int) -> List[Tuple[float, float]]:
    """Frequencies 2 pi k / n representable on an n x n periodic grid, shifted into [-pi/2, 3pi/2)."""
    axis = 2 * np.pi * np.arange(n) / n
    axis = np.where(axis >= 3 * np.pi / 2, axis - 2 * np.pi, axis)
    return [(float(t1), float(t2)) for t1 in axis for t2 in axis]


def spectral_radius_on_grid(scheme: RelaxScheme, params: RelaxParams, n: int,
                            exclude: Optional[Sequence[Tuple[float, float]]] = None) -> float:
    """Largest |eigenvalue| of the sweep symbol over the nonzero frequencies of an n x n grid."""
    thetas = [theta for theta in grid_frequencies(n) if np.hypot(*theta) > ORIGIN_EXCLUSION]
    if exclude:
        thetas = [theta for theta in thetas if theta not in exclude]
    theta1, theta2 = (np.array(values) for values in zip(*thetas))
    return float(relaxation_symbol(scheme, params, theta1, theta2).spectral_radius().max())
