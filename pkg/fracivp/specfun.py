"""
Special functions and quadrature rules.

Gamma and log-Gamma (Lanczos approximation), the two-parameter Mittag-Leffler
function on the real line, and Gauss-Jacobi rules on [0, 1] for weights of
the form tau^a (1 - tau)^b. The product-integration kernels of the fractional
operators and of the Picard solver are all of this form after the substitution
t = x * tau.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from fracivp.logger import get_logger

logger = get_logger()


class GammaPoleError(ValueError):
    """Gamma evaluated at a non-positive integer."""


class SeriesBudgetError(ValueError):
    """Mittag-Leffler series outside its convergence budget."""


class QuadratureError(ValueError):
    """Invalid Gauss-Jacobi request or failed node computation."""


# Lanczos approximation, g = 7, n = 9 (Godfrey coefficients)
_LANCZOS_G = 7.0
_LANCZOS_COEFFICIENTS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])


@numba.njit(cache=True)
def _lanczos_series(x):
    # x is the shifted argument (original - 1)
    a = _LANCZOS_COEFFICIENTS[0]
    for i in range(1, _LANCZOS_COEFFICIENTS.size):
        a += _LANCZOS_COEFFICIENTS[i] / (x + i)
    return a


@numba.njit(cache=True)
def _lanczos_gamma_right(x):
    # valid for x >= 0.5
    x -= 1.0
    t = x + _LANCZOS_G + 0.5
    half = t ** (0.5 * (x + 0.5))
    return math.sqrt(2.0 * math.pi) * half * math.exp(-t) * half * _lanczos_series(x)


@numba.njit(cache=True)
def _lanczos_gamma(x):
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _lanczos_gamma_right(1.0 - x))
    return _lanczos_gamma_right(x)


@numba.njit(cache=True)
def _lanczos_log_gamma(x):
    # x > 0
    shift = 0.0
    if x < 0.5:
        shift = -math.log(x)
        x += 1.0
    x -= 1.0
    t = x + _LANCZOS_G + 0.5
    return (0.5 * math.log(2.0 * math.pi) + (x + 0.5) * math.log(t) - t
            + math.log(_lanczos_series(x)) + shift)


def gamma(x: float) -> float:
    """
    Gamma function via the Lanczos approximation with reflection for x < 1/2.

    Args:
        x: Real argument, not a non-positive integer.

    Returns:
        Gamma(x), relative error below 1e-13 on [0.1, 50].

    Raises:
        GammaPoleError: If x is 0, -1, -2, ...
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise GammaPoleError(f"Gamma has a pole at x={x:g}")
    return float(_lanczos_gamma(x))


def log_gamma(x: float) -> float:
    """Natural logarithm of Gamma(x) for x > 0."""
    x = float(x)
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x:g}")
    return float(_lanczos_log_gamma(x))


def beta_function(a: float, b: float) -> float:
    """Euler Beta function B(a, b) = Gamma(a)Gamma(b)/Gamma(a+b) for a, b > 0."""
    return math.exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b))


def mittag_leffler(alpha: float,
                   beta: float,
                   z: float,
                   tol: float = 1e-12,
                   budget: float = 50.0,
                   max_terms: int = 2000) -> float:
    """
    Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z.

    Sums z^k / Gamma(alpha k + beta) until a tail bound drops below `tol`.
    The ratio of consecutive term magnitudes, |z| Gamma(y) / Gamma(y + alpha)
    with y = alpha k + beta, is non-increasing in k because log Gamma is convex,
    so once the ratio q is below one the remaining tail is bounded by
    |t_k| q / (1 - q). The rounding error of the sum is estimated as
    16 eps sum |t_k|; for negative z this grows like exp(|z|) while the value
    decays, so large negative arguments are refused rather than returned
    inaccurately.

    Args:
        alpha: Order parameter, > 0.
        beta: Shift parameter, > 0.
        z: Real argument with |z| <= budget.
        tol: Absolute tolerance on the truncated tail, and on the rounding estimate
            (relative once |E| > 1).
        budget: Largest |z| accepted.
        max_terms: Term limit.

    Returns:
        E_{alpha,beta}(z).

    Raises:
        SeriesBudgetError: If |z| exceeds the budget, the tail bound is not met
            within max_terms, or cancellation pushes the rounding estimate past tol.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError(f"mittag_leffler requires alpha > 0 and beta > 0, got {alpha}, {beta}")
    z = float(z)
    if abs(z) > budget:
        raise SeriesBudgetError(f"|z|={abs(z):g} exceeds the series budget {budget:g}")
    if z == 0.0:
        return 1.0 / gamma(beta)

    log_abs_z = math.log(abs(z))
    sign = -1.0 if z < 0 else 1.0
    terms = []
    for k in range(max_terms):
        arg = alpha * k + beta
        magnitude = math.exp(k * log_abs_z - log_gamma(arg))
        terms.append((sign ** k) * magnitude)
        ratio = abs(z) * math.exp(log_gamma(arg) - log_gamma(arg + alpha))
        if ratio < 1.0 and magnitude * ratio / (1.0 - ratio) <= tol:
            break
    else:
        raise SeriesBudgetError(
            f"Mittag-Leffler tail bound {tol:g} not met within {max_terms} terms (z={z:g})")

    value = math.fsum(terms)
    rounding = np.finfo(float).eps * math.fsum(abs(t) for t in terms) * 16
    if rounding > tol * max(1.0, abs(value)):
        raise SeriesBudgetError(
            f"Mittag-Leffler E_{{{alpha},{beta}}}({z:g}): cancellation estimate {rounding:.2e} "
            f"exceeds tolerance {tol:.1e}")
    logger.debug(f"Mittag-Leffler E_{{{alpha},{beta}}}({z:g}) = {value!r} using {len(terms)} terms")
    return value


@dataclass(frozen=True)
class QuadratureRule:
    """
    Gauss-Jacobi rule on [0, 1] for the weight tau^exponent_left (1 - tau)^exponent_right.

    Attributes:
        nodes: Strictly increasing nodes in the open interval (0, 1).
        weights: Positive weights.
        exponent_left: Power of tau, > -1.
        exponent_right: Power of (1 - tau), > -1.
    """
    nodes: np.ndarray
    weights: np.ndarray
    exponent_left: float
    exponent_right: float

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def total_mass(self) -> float:
        """Exact integral of the weight, B(a + 1, b + 1)."""
        return beta_function(self.exponent_left + 1.0, self.exponent_right + 1.0)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Apply the rule along the last axis of `values` (samples at `nodes`)."""
        return np.asarray(values) @ self.weights


@numba.njit(cache=True)
def _jacobi_value(n, alpha, beta, x):
    # P_n^{(alpha, beta)}(x) on [-1, 1], three-term recurrence
    if n == 0:
        return 1.0
    ab = alpha + beta
    p0 = 1.0
    p1 = 0.5 * (alpha - beta + (ab + 2.0) * x)
    for k in range(2, n + 1):
        c = 2.0 * k + ab
        a1 = 2.0 * k * (k + ab) * (c - 2.0)
        a2 = (c - 1.0) * (alpha * alpha - beta * beta)
        a3 = (c - 2.0) * (c - 1.0) * c
        a4 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * c
        p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1
        p0 = p1
        p1 = p2
    return p1


@numba.njit(cache=True)
def _jacobi_derivative(n, alpha, beta, x):
    if n == 0:
        return 0.0
    return 0.5 * (n + alpha + beta + 1.0) * _jacobi_value(n - 1, alpha + 1.0, beta + 1.0, x)


@numba.njit(cache=True)
def _jacobi_roots(n, alpha, beta):
    # Newton with polynomial deflation, Chebyshev initial guesses
    roots = np.empty(n)
    for k in range(n):
        r = -math.cos((2.0 * k + 1.0) * math.pi / (2.0 * n))
        if k > 0:
            r = 0.5 * (r + roots[k - 1])
        for _ in range(100):
            s = 0.0
            for i in range(k):
                s += 1.0 / (r - roots[i])
            f = _jacobi_value(n, alpha, beta, r)
            fp = _jacobi_derivative(n, alpha, beta, r)
            delta = f / (fp - f * s)
            r -= delta
            if abs(delta) <= 1e-16 * max(1.0, abs(r)):
                break
        roots[k] = r
    return roots


@numba.njit(cache=True)
def _jacobi_weights(n, alpha, beta, roots):
    log_scale = (_lanczos_log_gamma(alpha + n + 1.0) + _lanczos_log_gamma(beta + n + 1.0)
                 - _lanczos_log_gamma(alpha + beta + n + 1.0) - _lanczos_log_gamma(n + 1.0))
    scale = math.exp(log_scale)
    weights = np.empty(n)
    for i in range(n):
        d = _jacobi_derivative(n, alpha, beta, roots[i])
        weights[i] = scale / ((1.0 - roots[i] * roots[i]) * d * d)
    return weights


@lru_cache(maxsize=64)
def gauss_jacobi_rule(exponent_left: float, exponent_right: float, n: int) -> QuadratureRule:
    """
    n-point Gauss-Jacobi rule on [0, 1] for the weight tau^a (1 - tau)^b.

    Nodes are the roots of the Jacobi polynomial P_n^{(b, a)} mapped from [-1, 1]
    by tau = (1 + x) / 2; the rule is exact for polynomials of degree <= 2n - 1.
    Rules are cached and returned as read-only arrays.

    Args:
        exponent_left: a, power of tau, > -1.
        exponent_right: b, power of (1 - tau), > -1.
        n: Number of points, >= 1.

    Returns:
        QuadratureRule.

    Raises:
        QuadratureError: If an exponent is <= -1, n < 1, or the computed weights
            fail the total-mass check.
    """
    a = float(exponent_left)
    b = float(exponent_right)
    if a <= -1.0 or b <= -1.0:
        raise QuadratureError(f"Gauss-Jacobi exponents must exceed -1, got a={a}, b={b}")
    if int(n) != n or n < 1:
        raise QuadratureError(f"Gauss-Jacobi rule needs n >= 1, got {n}")
    n = int(n)

    # [-1, 1] weight (1 - x)^b (1 + x)^a
    roots = _jacobi_roots(n, b, a)
    weights = _jacobi_weights(n, b, a, roots)
    order = np.argsort(roots)
    nodes = 0.5 * (1.0 + roots[order])
    weights = weights[order]

    if not (np.all(nodes > 0.0) and np.all(nodes < 1.0) and np.all(np.diff(nodes) > 0.0)):
        raise QuadratureError(f"Gauss-Jacobi nodes not strictly inside (0, 1) for a={a}, b={b}, n={n}")
    if not np.all(weights > 0.0):
        raise QuadratureError(f"Gauss-Jacobi weights not positive for a={a}, b={b}, n={n}")

    nodes.setflags(write=False)
    weights.setflags(write=False)
    rule = QuadratureRule(nodes=nodes, weights=weights, exponent_left=a, exponent_right=b)

    mass_error = abs(weights.sum() - rule.total_mass) / rule.total_mass
    if mass_error > 1e-10:
        raise QuadratureError(
            f"Gauss-Jacobi total mass mismatch {mass_error:.2e} for a={a}, b={b}, n={n}")
    logger.debug(f"Gauss-Jacobi rule a={a:.6g}, b={b:.6g}, n={n}: mass error {mass_error:.2e}")
    return rule
