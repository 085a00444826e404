"""
Discrete Riemann-Liouville operators on sampled functions.

A sampled function carries a declared leading exponent mu: near the origin
u(x) ~ x^mu r(x) with r continuous. Every operator works on the regular part
r, interpolated by a cubic between grid points, and applies a
Gauss-Jacobi product rule whose weight absorbs both tau^mu and the kernel
(1 - tau)^(s - 1) after the substitution t = x tau:

    I^s u(x) = x^(mu + s) / Gamma(s) * int_0^1 tau^mu (1 - tau)^(s - 1) r(x tau) dtau
             = x^(mu + s) R(x)

R is smooth, so derivatives of I^s u are taken through the product rule with
centered differences of R only.

The default interpolant is the monotone PCHIP cubic. It depends nonlinearly on
the samples, so the operators are linear only up to interpolation error. The
"spline" option uses a not-a-knot cubic spline, which is linear in the samples,
and makes every operator linear to rounding.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from fracivp.logger import get_logger
from fracivp.specfun import gamma, gauss_jacobi_rule

logger = get_logger()

DEFAULT_QUAD_POINTS = 32

INTERP_PCHIP = "pchip"
INTERP_SPLINE = "spline"
INTERPOLATIONS = (INTERP_PCHIP, INTERP_SPLINE)


class FracOpsError(ValueError):
    """Invalid operator input (order out of range, grid mismatch)."""


class InsufficientRegularityError(FracOpsError):
    """The declared leading exponent makes the requested derivative unbounded at 0."""


def make_interpolant(x: np.ndarray, y: np.ndarray, interpolation: str = INTERP_PCHIP):
    """Cubic interpolant of y over x that extrapolates past both ends."""
    if interpolation == INTERP_PCHIP:
        return PchipInterpolator(x, y, extrapolate=True)
    if interpolation == INTERP_SPLINE:
        return CubicSpline(x, y, bc_type="not-a-knot", extrapolate=True)
    raise FracOpsError(f"interpolation must be one of {INTERPOLATIONS}, got '{interpolation}'")


@dataclass(frozen=True)
class Grid:
    """
    Uniform grid x_i = i X / n, i = 0..n, on [0, X].

    Attributes:
        X: Right endpoint, > 0.
        n: Number of subintervals, >= 1.
    """
    X: float
    n: int

    def __post_init__(self):
        if not self.X > 0:
            raise FracOpsError(f"grid endpoint must be positive, got {self.X}")
        if int(self.n) != self.n or self.n < 1:
            raise FracOpsError(f"grid needs n >= 1 subintervals, got {self.n}")

    @property
    def h(self) -> float:
        return self.X / self.n

    @property
    def points(self) -> np.ndarray:
        return np.linspace(0.0, self.X, self.n + 1)

    def index_of(self, x: float) -> int:
        """Index of the grid point closest to x."""
        return int(round(x / self.h))


@dataclass(frozen=True)
class SampledFunction:
    """
    Samples of u on a grid with declared behaviour u(x) ~ c x^leading_exponent near 0.

    Attributes:
        grid: Sampling grid.
        values: n + 1 samples.
        leading_exponent: mu >= 0; when mu > 0, values[0] must be 0.
    """
    grid: Grid
    values: np.ndarray
    leading_exponent: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n + 1,):
            raise FracOpsError(
                f"expected {self.grid.n + 1} samples on the grid, got shape {values.shape}")
        if self.leading_exponent < 0:
            raise FracOpsError(f"leading exponent must be >= 0, got {self.leading_exponent}")
        if self.leading_exponent > 0 and values[0] != 0.0:
            raise FracOpsError(
                f"leading exponent {self.leading_exponent} > 0 requires u(0) = 0, got {values[0]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: Grid, func, leading_exponent: float = 0.0) -> "SampledFunction":
        """Sample a vectorized callable on the grid."""
        values = np.asarray(func(grid.points), dtype=float)
        if leading_exponent > 0:
            values = values.copy()
            values[0] = 0.0
        return cls(grid=grid, values=values, leading_exponent=leading_exponent)

    def regular_part(self, interpolation: str = INTERP_PCHIP) -> np.ndarray:
        """r = u / x^mu on the grid; r(0) is extrapolated from the interior."""
        mu = self.leading_exponent
        if mu == 0:
            return np.array(self.values)
        x = self.grid.points
        r = np.empty_like(x)
        r[1:] = self.values[1:] / x[1:] ** mu
        r[0] = make_interpolant(x[1:], r[1:], interpolation)(0.0)
        return r

    def is_zero(self) -> bool:
        return not np.any(self.values)


def _check_same_grid(u: SampledFunction, other: SampledFunction):
    if u.grid != other.grid:
        raise FracOpsError(f"grid mismatch: {u.grid} vs {other.grid}")


def _regular_integral(s: float, u: SampledFunction, quad_points: int,
                      interpolation: str) -> np.ndarray:
    """R(x_i) with I^s u(x_i) = x_i^(mu + s) R(x_i)."""
    rule = gauss_jacobi_rule(u.leading_exponent, s - 1.0, quad_points)
    x = u.grid.points
    interpolant = make_interpolant(x, u.regular_part(interpolation), interpolation)
    nodes = np.outer(x, rule.nodes)
    samples = interpolant(nodes.ravel()).reshape(nodes.shape)
    return rule.integrate(samples) / gamma(s)


def _second_difference(R: np.ndarray, h: float) -> np.ndarray:
    """R'' on a uniform grid; four-point one-sided stencils at both ends."""
    if R.size < 4:
        return np.gradient(np.gradient(R, h, edge_order=1), h, edge_order=1)
    d2R = np.empty_like(R)
    d2R[1:-1] = (R[2:] - 2.0 * R[1:-1] + R[:-2]) / h ** 2
    d2R[0] = (2.0 * R[0] - 5.0 * R[1] + 4.0 * R[2] - R[3]) / h ** 2
    d2R[-1] = (2.0 * R[-1] - 5.0 * R[-2] + 4.0 * R[-3] - R[-4]) / h ** 2
    return d2R


def _safe_power(x: np.ndarray, p: float) -> np.ndarray:
    # 0^0 = 1; callers never request negative powers at x = 0
    with np.errstate(divide="ignore"):
        out = np.power(x, p)
    if p == 0:
        out[...] = 1.0
    return out


def frac_integral(sigma: float, u: SampledFunction,
                  quad_points: int = DEFAULT_QUAD_POINTS,
                  interpolation: str = INTERP_PCHIP) -> SampledFunction:
    """
    Riemann-Liouville integral I^sigma u on the grid of u.

    Args:
        sigma: Order in (0, 2).
        u: Sampled integrand.
        quad_points: Gauss-Jacobi points per grid point.
        interpolation: "pchip" (default) or "spline" for the regular part.

    Returns:
        I^sigma u with leading exponent mu + sigma.

    Raises:
        FracOpsError: If sigma is outside (0, 2).
    """
    if not 0.0 < sigma < 2.0:
        raise FracOpsError(f"frac_integral order must lie in (0, 2), got {sigma}")
    if u.is_zero():
        return SampledFunction(u.grid, np.zeros(u.grid.n + 1), u.leading_exponent + sigma)
    p = u.leading_exponent + sigma
    R = _regular_integral(sigma, u, quad_points, interpolation)
    values = _safe_power(u.grid.points, p) * R
    values[0] = 0.0
    return SampledFunction(u.grid, values, p)


def _check_derivative_order(sigma: float):
    if not 1.0 < sigma < 2.0:
        raise FracOpsError(f"derivative order sigma must lie in (1, 2), got {sigma}")


def frac_derivative_minus_one(sigma: float, u: SampledFunction,
                              quad_points: int = DEFAULT_QUAD_POINTS,
                              interpolation: str = INTERP_PCHIP) -> SampledFunction:
    """
    D^(sigma - 1) u = d/dx I^(2 - sigma) u.

    With I^(2 - sigma) u = x^p R(x), p = mu + 2 - sigma, the derivative is
    x^(p - 1) (p R + x R'), R' by centered differences (second-order one-sided
    at the ends).

    Raises:
        InsufficientRegularityError: If mu < sigma - 1 and u is not identically 0.
    """
    _check_derivative_order(sigma)
    mu = u.leading_exponent
    if u.is_zero():
        return SampledFunction(u.grid, np.zeros(u.grid.n + 1), max(mu + 1.0 - sigma, 0.0))
    if mu < sigma - 1.0 - 1e-12:
        raise InsufficientRegularityError(
            f"D^(sigma-1) of a function with leading exponent {mu} is unbounded at 0 "
            f"(needs >= sigma - 1 = {sigma - 1.0})")
    mu = max(mu, sigma - 1.0)
    x = u.grid.points
    p = mu + 2.0 - sigma
    R = _regular_integral(2.0 - sigma, u, quad_points, interpolation)
    dR = np.gradient(R, u.grid.h, edge_order=2)
    exponent = p - 1.0
    if abs(exponent) < 1e-12:
        exponent = 0.0
    values = _safe_power(x, exponent) * (p * R + x * dR)
    if exponent > 0:
        values[0] = 0.0
    return SampledFunction(u.grid, values, exponent)


def frac_derivative(sigma: float, u: SampledFunction,
                    quad_points: int = DEFAULT_QUAD_POINTS,
                    interpolation: str = INTERP_PCHIP) -> SampledFunction:
    """
    D^sigma u = d^2/dx^2 I^(2 - sigma) u.

    With I^(2 - sigma) u = x^p R(x):
        D^sigma u = p (p - 1) x^(p - 2) R + 2 p x^(p - 1) R' + x^p R''.
    R' uses centered differences and R'' the three-point second difference, both
    with second-order one-sided stencils at the ends. Less accurate than
    frac_derivative_minus_one; used for residual diagnostics only.

    Raises:
        InsufficientRegularityError: Unless mu = sigma - 1 (p = 1) or mu >= sigma (p >= 2),
            or u is identically 0.
    """
    _check_derivative_order(sigma)
    mu = u.leading_exponent
    if u.is_zero():
        return SampledFunction(u.grid, np.zeros(u.grid.n + 1), max(mu - sigma, 0.0))
    p = mu + 2.0 - sigma
    if abs(p - 1.0) < 1e-12:
        p = 1.0
    elif abs(p - 2.0) < 1e-12:
        p = 2.0
    if not (p == 1.0 or p >= 2.0):
        raise InsufficientRegularityError(
            f"D^sigma of a function with leading exponent {mu} is unbounded at 0 "
            f"(needs sigma - 1 = {sigma - 1.0} or >= sigma = {sigma})")
    x = u.grid.points
    h = u.grid.h
    R = _regular_integral(2.0 - sigma, u, quad_points, interpolation)
    dR = np.gradient(R, h, edge_order=2)
    d2R = _second_difference(R, h)

    values = 2.0 * p * _safe_power(x, p - 1.0) * dR + _safe_power(x, p) * d2R
    if p != 1.0:
        values += p * (p - 1.0) * _safe_power(x, p - 2.0) * R

    exponent = p - 2.0 if p >= 2.0 else 0.0
    if exponent > 0:
        values[0] = 0.0
    return SampledFunction(u.grid, values, exponent)


def check_composition(sigma: float, u: SampledFunction, d_init: float,
                      quad_points: int = DEFAULT_QUAD_POINTS,
                      interpolation: str = INTERP_PCHIP) -> float:
    """
    Max-norm defect of the two composition identities over the grid interior.

    Left identity (the subtraction form the integral equation is built on):
        I^sigma D^sigma u = u - d_init x^(sigma - 1) / Gamma(sigma)
    Right identity:
        D^sigma I^sigma u = u

    Args:
        sigma: Order in (1, 2).
        u: Sampled function admissible for frac_derivative.
        d_init: Known value D^(sigma - 1) u(0).

    Returns:
        The larger of the two defects.
    """
    _check_derivative_order(sigma)
    x = u.grid.points
    interior = slice(1, -1)

    left = frac_integral(sigma, frac_derivative(sigma, u, quad_points, interpolation),
                         quad_points, interpolation)
    expected = u.values - d_init * _safe_power(x, sigma - 1.0) / gamma(sigma)
    left_defect = float(np.max(np.abs(left.values[interior] - expected[interior])))

    right = frac_derivative(sigma, frac_integral(sigma, u, quad_points, interpolation),
                            quad_points, interpolation)
    right_defect = float(np.max(np.abs(right.values[interior] - u.values[interior])))

    logger.debug(f"Composition defects (sigma={sigma}, n={u.grid.n}): "
                 f"I^s D^s = {left_defect:.3e}, D^s I^s = {right_defect:.3e}")
    return max(left_defect, right_defect)


def linear_combination(a: float, u: SampledFunction, b: float,
                       w: SampledFunction) -> SampledFunction:
    """a u + b w for samples sharing a grid and leading exponent."""
    _check_same_grid(u, w)
    if u.leading_exponent != w.leading_exponent:
        raise FracOpsError("linear combination needs matching leading exponents")
    return SampledFunction(u.grid, a * u.values + b * w.values, u.leading_exponent)
