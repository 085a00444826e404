"""
Problem data model and the existence window.

The initial value problem

    D^sigma w(x) = f(x, w(x), D^(sigma-1) w(x)),   w(0) = 0,   D^(sigma-1) w(0) = b,

with 1 < sigma < 2 is stored through the regular part g(x, w, v) = x^(sigma-1) f(x, w, v),
which stays continuous on the box I = [0, T] x [-r1, r1] x [b - r2, b + r2] even
when f blows up like x^(1-sigma) at the origin.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fracivp.expr import Expr, parse, serialize
from fracivp.logger import get_logger
from fracivp.specfun import gamma

logger = get_logger()

SAFETY_FACTOR = 1.1

CASE_RATIO_GE_ONE = "r/C >= 1 (alpha = 1)"
CASE_LOW_SIGMA = "r/C < 1, 1 < sigma <= 1.5 (alpha = sigma - 1)"
CASE_HIGH_SIGMA = "r/C < 1, 1.5 <= sigma < 2 (alpha = 2 - sigma)"
CASE_HORIZON = "T < r/C window"


class ProblemValidationError(ValueError):
    """A ProblemSpec invariant is violated; `field` names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ProblemSpec:
    """
    Immutable description of one fractional initial value problem.

    Attributes:
        sigma: Order, 1 < sigma < 2.
        b: Second initial value D^(sigma-1) w(0), nonzero.
        T: Horizon, > 0.
        g: Regular part g(x, w, v) = x^(sigma-1) f(x, w, v).
        r1: Box radius in w.
        r2: Box radius in v (around b).
        M: Optional declared bound of |g| on the box.
    """
    sigma: float
    b: float
    T: float
    g: Expr
    r1: float
    r2: float
    M: Optional[float] = None
    name: str = field(default="problem", compare=False)

    def __post_init__(self):
        if not 1.0 < self.sigma < 2.0:
            raise ProblemValidationError("sigma", f"must lie in (1, 2), got {self.sigma}")
        if self.b == 0:
            raise ProblemValidationError("b", "must be nonzero")
        if not self.T > 0:
            raise ProblemValidationError("T", f"must be positive, got {self.T}")
        if not self.r1 > 0:
            raise ProblemValidationError("r1", f"must be positive, got {self.r1}")
        if not self.r2 > 0:
            raise ProblemValidationError("r2", f"must be positive, got {self.r2}")
        if self.M is not None and not self.M > 0:
            raise ProblemValidationError("M", f"must be positive when given, got {self.M}")
        if not self.g.variables() <= {"x", "w", "v"}:
            raise ProblemValidationError("g", "may only use the variables x, w, v")

    @classmethod
    def from_text(cls, sigma: float, b: float, T: float, g: str, r1: float, r2: float,
                  M: Optional[float] = None, name: str = "problem") -> "ProblemSpec":
        """Build a spec from an expression string for g."""
        return cls(sigma=float(sigma), b=float(b), T=float(T), g=parse(g), r1=float(r1),
                   r2=float(r2), M=None if M is None else float(M), name=name)

    @property
    def r(self) -> float:
        """Total radius r = r1 + r2."""
        return self.r1 + self.r2

    def g_values(self, x, w, v):
        """Vectorized g(x, w, v)."""
        return self.g.evaluate(x=x, w=w, v=v)

    def f_display(self) -> str:
        """The right-hand side f = x^(1 - sigma) g reconstructed for display."""
        return f"x^({1.0 - self.sigma!r}) * {serialize(self.g)}"

    def in_box(self, w: np.ndarray, v: np.ndarray) -> bool:
        return bool(np.max(np.abs(w)) <= self.r1 and np.max(np.abs(v - self.b)) <= self.r2)


@dataclass(frozen=True)
class ExistenceWindow:
    """
    Horizon on which a solution is guaranteed to exist.

    Attributes:
        T0: min(T, (r / C)^(1 / alpha)).
        alpha: Exponent chosen from r / C and sigma (one of sigma - 1, 1, 2 - sigma).
        C: The constant C(b, sigma, M).
        case_tag: Which branch fixed T0 (CASE_* constants); CASE_HORIZON when T did.
        alpha_case: Which branch chose alpha, kept when T truncates the window.
        M: Bound of |g| used.
        ratio: r / C.
        truncated: True when the horizon T cut the window.
        equicontinuity_K: max(1/(T0 Gamma(2 - sigma)), (2 - sigma)/T0^(2 - sigma)).
    """
    T0: float
    alpha: float
    C: float
    case_tag: str
    alpha_case: str
    M: float
    ratio: float
    truncated: bool
    equicontinuity_K: float

    def to_dict(self) -> dict:
        return {
            'T0': self.T0,
            'alpha': self.alpha,
            'C': self.C,
            'case': self.case_tag,
            'alpha_case': self.alpha_case,
            'M': self.M,
            'r_over_C': self.ratio,
            'truncated': self.truncated,
            'equicontinuity_K': self.equicontinuity_K,
        }


def bound_M(spec: ProblemSpec, density: int = 21) -> float:
    """
    Sup bound M of |g| on the box I.

    A declared spec.M is returned unchanged. Otherwise |g| is maximised over a
    density^3 lattice on I and inflated by SAFETY_FACTOR; the lattice maximum is
    a lower estimate of the true supremum.

    Raises:
        ExprDomainError: If g cannot be evaluated somewhere on the lattice.
    """
    if spec.M is not None:
        return spec.M
    if density < 2:
        raise ValueError(f"bound_M needs density >= 2, got {density}")
    xs = np.linspace(0.0, spec.T, density)
    ws = np.linspace(-spec.r1, spec.r1, density)
    vs = np.linspace(spec.b - spec.r2, spec.b + spec.r2, density)
    X, W, V = np.meshgrid(xs, ws, vs, indexing="ij")
    lattice_max = float(np.max(np.abs(spec.g_values(X, W, V))))
    M = SAFETY_FACTOR * lattice_max
    logger.info(f"Estimated M on {density}^3 lattice: max|g| = {lattice_max:.6g}, M = {M:.6g}")
    return M


def existence_constant(b: float, sigma: float, M: float) -> float:
    """C(b, sigma, M) = |b| / Gamma(sigma) + M (1 + Gamma(3 - sigma)) / (2 - sigma)."""
    return abs(b) / gamma(sigma) + M * (1.0 + gamma(3.0 - sigma)) / (2.0 - sigma)


def select_alpha(ratio: float, sigma: float) -> tuple:
    """Exponent alpha and case tag from r / C and sigma."""
    if ratio >= 1.0:
        return 1.0, CASE_RATIO_GE_ONE
    if sigma <= 1.5:
        return sigma - 1.0, CASE_LOW_SIGMA
    return 2.0 - sigma, CASE_HIGH_SIGMA


def existence_window(spec: ProblemSpec, M: Optional[float] = None,
                     density: int = 21) -> ExistenceWindow:
    """
    Existence window T0 = min(T, (r / C)^(1 / alpha)).

    alpha = 1 when r / C >= 1; otherwise alpha = sigma - 1 for sigma <= 1.5 and
    2 - sigma for sigma >= 1.5 (both give 0.5 at sigma = 1.5). With this alpha,
    C T0^alpha = r, which is what keeps the solution operator inside the box.

    Args:
        spec: Problem.
        M: Bound of |g|; defaults to bound_M(spec, density).
        density: Lattice density for bound_M.

    Returns:
        ExistenceWindow.
    """
    if M is None:
        M = bound_M(spec, density)
    C = existence_constant(spec.b, spec.sigma, M)
    ratio = spec.r / C
    alpha, alpha_case = select_alpha(ratio, spec.sigma)
    window = ratio ** (1.0 / alpha)
    truncated = spec.T <= window
    T0 = spec.T if truncated else window
    case_tag = CASE_HORIZON if truncated else alpha_case
    s = spec.sigma
    K = max(1.0 / (T0 * gamma(2.0 - s)), (2.0 - s) / T0 ** (2.0 - s))
    logger.info(f"Existence window: C={C:.10g}, r/C={ratio:.10g}, alpha={alpha:g}, "
                f"T0={T0:.10g} [{case_tag}, alpha from {alpha_case}]")
    return ExistenceWindow(T0=T0, alpha=alpha, C=C, case_tag=case_tag, alpha_case=alpha_case,
                           M=M, ratio=ratio, truncated=truncated, equicontinuity_K=K)


def kk_horizon(window: ExistenceWindow) -> float:
    """Horizon min(T0, 1) on which the Krasnoselskii-Krein certificate applies."""
    return min(window.T0, 1.0)


def affine_part(spec: ProblemSpec, x: np.ndarray) -> np.ndarray:
    """b x^(sigma-1) / Gamma(sigma), the solution for g = 0."""
    return spec.b * np.power(x, spec.sigma - 1.0) / gamma(spec.sigma)

