"""
Uniqueness certificates.

Each check evaluates the hypotheses of one uniqueness criterion for a
ProblemSpec and returns a CertificateReport:

    nagumo      L <= (2 - sigma) / (T (1 + Gamma(3 - sigma)))
    kk          |dg| <= L/2 (|dw| + |dv|),  |dg| <= C (|dw| + x^(alpha(sigma-1)) |dv|),
                (1 - sigma)(1 - alpha) - L (1 - alpha) + 1 > 0
    osgood      |dg| <= C (m(|dw|^p + |dv|^p))^(1/p) with a non-decreasing modulus m,
                m(0) = 0 and int_0 du / m(u) = infinity

Inequalities over (w, v) pairs are sampled on the certification box with a
seeded generator. Sampling can falsify a hypothesis but never prove it, so a
report that holds means "no counterexample found".
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from fracivp.expr import Expr, ExprDomainError, parse
from fracivp.logger import get_logger
from fracivp.problem import (
    ExistenceWindow,
    ProblemSpec,
    ProblemValidationError,
    existence_window,
    kk_horizon,
)
from fracivp.solver import SolutionPair
from fracivp.specfun import gamma

logger = get_logger()

KIND_NAGUMO = "nagumo"
KIND_KK = "krasnoselskii_krein"
KIND_OSGOOD = "osgood"

DEFAULT_SAMPLES = 10000
DEFAULT_EPS = tuple(10.0 ** -k for k in range(1, 9))

# relative slack for sampled inequalities that are tight up to rounding
SAMPLE_RTOL = 1e-12
PROBE_RTOL = 1e-8


class CertificateInputError(ValueError):
    """Certificate parameters outside their admissible range."""


@dataclass
class CertificateReport:
    """
    Outcome of one certificate check.

    Attributes:
        kind: One of nagumo, krasnoselskii_krein, osgood.
        holds: True only if every margin is >= 0 (and strict conditions are strict).
        thresholds: Named reference values (nagumo_bound, feasible_alpha_low, ...).
        margins: Named slack of each condition; negative means violated.
        witnesses: Sample points where a sampled inequality was tightest.
        notes: Free text.
        probes: Osgood divergence probe values, one per epsilon.
    """
    kind: str
    holds: bool
    thresholds: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    witnesses: List[dict] = field(default_factory=list)
    notes: str = ""
    probes: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        record = {
            'kind': self.kind,
            'holds': self.holds,
            'thresholds': dict(self.thresholds),
            'margins': dict(self.margins),
            'witnesses': list(self.witnesses),
            'notes': self.notes,
        }
        if self.probes:
            record['probes'] = list(self.probes)
        return record


@dataclass
class CertificateParams:
    """
    Certificate parameters as read from a problem file.

    Any of L, C, alpha, p, modulus may be missing; the check that needs one
    reports it.
    """
    L: Optional[float] = None
    C: Optional[float] = None
    alpha: Optional[float] = None
    p: Optional[float] = None
    modulus: Optional[str] = None
    samples: int = DEFAULT_SAMPLES
    seed: Optional[int] = None
    eps: tuple = DEFAULT_EPS
    gamma: float = 1.0
    density: int = 21

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise ProblemValidationError("certificates.samples",
                                         f"must be a positive integer, got {self.samples}")
        self.samples = int(self.samples)
        if self.seed is not None:
            if int(self.seed) != self.seed:
                raise ProblemValidationError("certificates.seed", f"must be an integer, got {self.seed}")
            self.seed = int(self.seed)
        eps = tuple(float(e) for e in self.eps)
        if len(eps) < 4 or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ProblemValidationError(
                "certificates.eps", "must be at least four strictly decreasing positive reals")
        self.eps = eps
        if not self.gamma > eps[0]:
            raise ProblemValidationError(
                "certificates.gamma", f"must exceed the largest eps {eps[0]:g}, got {self.gamma}")
        if int(self.density) != self.density or self.density < 2:
            raise ProblemValidationError("certificates.density",
                                         f"must be an integer >= 2, got {self.density}")
        self.density = int(self.density)

    def to_dict(self) -> dict:
        return {
            'L': self.L,
            'C': self.C,
            'alpha': self.alpha,
            'p': self.p,
            'modulus': self.modulus,
            'samples': self.samples,
            'seed': self.seed,
            'eps': list(self.eps),
            'gamma': self.gamma,
            'density': self.density,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'CertificateParams':
        return cls(
            L=data.get('L'),
            C=data.get('C'),
            alpha=data.get('alpha'),
            p=data.get('p'),
            modulus=data.get('modulus'),
            samples=data.get('samples', DEFAULT_SAMPLES),
            seed=data.get('seed'),
            eps=tuple(data.get('eps', DEFAULT_EPS)),
            gamma=data.get('gamma', 1.0),
            density=data.get('density', 21),
        )


# =============================================================================
# Sampling
# =============================================================================

@dataclass(frozen=True)
class _PairSample:
    x: np.ndarray
    w1: np.ndarray
    v1: np.ndarray
    w2: np.ndarray
    v2: np.ndarray
    dg: np.ndarray

    @property
    def dw(self) -> np.ndarray:
        return np.abs(self.w1 - self.w2)

    @property
    def dv(self) -> np.ndarray:
        return np.abs(self.v1 - self.v2)

    def witness(self, i: int, label: str, margin: float) -> dict:
        return {
            'condition': label,
            'x': float(self.x[i]),
            'w1': float(self.w1[i]),
            'v1': float(self.v1[i]),
            'w2': float(self.w2[i]),
            'v2': float(self.v2[i]),
            'margin': float(margin),
        }


def _sample_pairs(spec: ProblemSpec, samples: int, rng: np.random.Generator) -> _PairSample:
    """
    Random point pairs sharing x on the box [0, T] x [-r1, r1] x [b - r2, b + r2].

    A third of the pairs differ in w only, a third in v only and the rest in
    both, so maps that are linear in one component attain their exact ratio.
    """
    x = rng.uniform(0.0, spec.T, samples)
    w1 = rng.uniform(-spec.r1, spec.r1, samples)
    v1 = rng.uniform(spec.b - spec.r2, spec.b + spec.r2, samples)
    w2 = rng.uniform(-spec.r1, spec.r1, samples)
    v2 = rng.uniform(spec.b - spec.r2, spec.b + spec.r2, samples)
    family = np.arange(samples) % 3
    w2 = np.where(family == 1, w1, w2)
    v2 = np.where(family == 0, v1, v2)
    dg = np.abs(spec.g_values(x, w1, v1) - spec.g_values(x, w2, v2))
    return _PairSample(x, w1, v1, w2, v2, np.asarray(dg, dtype=float))


def _rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(0 if seed is None else seed)


def _sampled_margin(bound: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """bound - dg with rounding-level defects reported as 0."""
    margin = bound - dg
    slack = SAMPLE_RTOL * np.maximum(bound, dg) + 1e-15
    margin[(margin < 0) & (margin >= -slack)] = 0.0
    return margin


# =============================================================================
# Lipschitz estimate
# =============================================================================

def estimate_lipschitz(spec: ProblemSpec, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """
    Sampled Lipschitz constant of g in the sum norm |dw| + |dv|.

    Returns the largest ratio |g(x, a) - g(x, b)| / (|a1 - b1| + |a2 - b2|)
    over `samples` random pairs on the box. This is a lower estimate of the
    true constant.
    """
    if int(samples) != samples or samples < 1:
        raise CertificateInputError(f"samples must be a positive integer, got {samples}")
    pairs = _sample_pairs(spec, int(samples), _rng(seed))
    distance = pairs.dw + pairs.dv
    valid = distance > 0
    if not np.any(valid):
        return 0.0
    L = float(np.max(pairs.dg[valid] / distance[valid]))
    logger.info(f"Estimated Lipschitz constant L = {L:.10g} from {int(samples)} pairs (seed {seed})")
    return L


# =============================================================================
# Nagumo
# =============================================================================

def nagumo_bound(sigma: float, T: float) -> float:
    """(2 - sigma) / (T (1 + Gamma(3 - sigma)))."""
    return (2.0 - sigma) / (T * (1.0 + gamma(3.0 - sigma)))


def nagumo_check(spec: ProblemSpec, L: float, horizon: Optional[float] = None) -> CertificateReport:
    """
    Nagumo-type uniqueness: holds iff L <= (2 - sigma) / (T (1 + Gamma(3 - sigma))).

    Args:
        spec: Problem.
        L: Lipschitz constant of g in the sum norm, >= 0.
        horizon: Certified horizon; defaults to spec.T (pass T0 when solving
            on the existence window).
    """
    if L is None or not L >= 0:
        raise CertificateInputError(f"Nagumo check needs L >= 0, got {L}")
    T = spec.T if horizon is None else horizon
    threshold = nagumo_bound(spec.sigma, T)
    margin = threshold - L
    holds = margin >= 0
    logger.info(f"Nagumo check: L={L:g}, bound={threshold:.10g}, margin={margin:.10g}, "
                f"holds={holds}")
    return CertificateReport(
        kind=KIND_NAGUMO,
        holds=holds,
        thresholds={'nagumo_bound': threshold, 'horizon': T, 'L': float(L)},
        margins={'lipschitz': margin},
        notes="L is compared against the bound; it is not verified against g here",
    )


# =============================================================================
# Krasnoselskii-Krein
# =============================================================================

def feasible_alpha_low(sigma: float, L: float) -> float:
    """Lower end of the alpha interval (max(0, 1 - 1/(sigma - 1 + L)), 1)."""
    return max(0.0, 1.0 - 1.0 / (sigma - 1.0 + L))


def kk_check(spec: ProblemSpec, L: float, C: float, alpha: float,
             samples: int = DEFAULT_SAMPLES, seed: int = 0,
             window: Optional[ExistenceWindow] = None) -> CertificateReport:
    """
    Krasnoselskii-Krein-type uniqueness on [0, min(T0, 1)].

    Holds iff the exponent condition (1 - sigma)(1 - alpha) - L (1 - alpha) + 1 > 0
    is met and both sampled inequalities
        |dg| <= L/2 (|dw| + |dv|)
        |dg| <= C (|dw| + x^(alpha (sigma - 1)) |dv|)
    hold on every sampled pair.

    Raises:
        CertificateInputError: If alpha is outside (0, 1) or L, C are not positive.
    """
    if alpha is None or not 0.0 < alpha < 1.0:
        raise CertificateInputError(f"alpha must lie in (0, 1), got {alpha}")
    if L is None or not L > 0:
        raise CertificateInputError(f"Krasnoselskii-Krein check needs L > 0, got {L}")
    if C is None or not C > 0:
        raise CertificateInputError(f"Krasnoselskii-Krein check needs C > 0, got {C}")
    s = spec.sigma
    if window is None:
        window = existence_window(spec)

    exponent_margin = (1.0 - s) * (1.0 - alpha) - L * (1.0 - alpha) + 1.0
    pairs = _sample_pairs(spec, int(samples), _rng(seed))
    lipschitz = _sampled_margin(0.5 * L * (pairs.dw + pairs.dv), pairs.dg)
    weighted = _sampled_margin(C * (pairs.dw + np.power(pairs.x, alpha * (s - 1.0)) * pairs.dv),
                               pairs.dg)
    i_lip = int(np.argmin(lipschitz))
    i_weighted = int(np.argmin(weighted))

    holds = bool(exponent_margin > 0 and lipschitz[i_lip] >= 0 and weighted[i_weighted] >= 0)
    logger.info(f"Krasnoselskii-Krein check: L={L:g}, C={C:g}, alpha={alpha:g}, "
                f"exponent margin={exponent_margin:.6g}, holds={holds}")
    return CertificateReport(
        kind=KIND_KK,
        holds=holds,
        thresholds={
            'feasible_alpha_low': feasible_alpha_low(s, L),
            'feasible_alpha_high': 1.0,
            'kk_horizon': kk_horizon(window),
            'T0': window.T0,
        },
        margins={
            'exponent': exponent_margin,
            'lipschitz_half': float(lipschitz[i_lip]),
            'weighted_lipschitz': float(weighted[i_weighted]),
        },
        witnesses=[
            pairs.witness(i_lip, 'lipschitz_half', lipschitz[i_lip]),
            pairs.witness(i_weighted, 'weighted_lipschitz', weighted[i_weighted]),
        ],
        notes=f"{int(samples)} sampled pairs, seed {seed}; uniqueness on [0, kk_horizon]",
    )


# =============================================================================
# Osgood
# =============================================================================

def osgood_constant_bound(spec: ProblemSpec, q: float, T0: float) -> float:
    """
    Smallest admissible C^q:
    2 max(|b| Gamma(sigma)^q / (T0 Gamma(1 + (1 - sigma) q) Gamma(1 + (sigma - 1) q)),
          (1 + (1 - sigma) q) T0^(-1 - q (1 - sigma))).
    """
    s = spec.sigma
    first = abs(spec.b) * gamma(s) ** q / (
        T0 * gamma(1.0 + (1.0 - s) * q) * gamma(1.0 + (s - 1.0) * q))
    second = (1.0 + (1.0 - s) * q) * T0 ** (-1.0 - q * (1.0 - s))
    return 2.0 * max(first, second)


def _modulus_callable(modulus: Expr):
    def m(u):
        return modulus.evaluate(u=u)
    return m


def _check_modulus(m, upper: float, density: int = 513):
    try:
        at_zero = m(0.0)
    except ExprDomainError as exc:
        raise CertificateInputError(f"modulus cannot be evaluated at u = 0: {exc}") from exc
    if at_zero != 0.0:
        raise CertificateInputError(f"modulus must vanish at u = 0, got m(0) = {at_zero:g}")
    u = np.linspace(0.0, upper, density)
    try:
        values = np.asarray(m(u), dtype=float)
    except ExprDomainError as exc:
        raise CertificateInputError(f"modulus cannot be evaluated on [0, {upper:g}]: {exc}") from exc
    if np.any(values < 0):
        i = int(np.argmax(values < 0))
        raise CertificateInputError(f"modulus is negative at u = {u[i]:g}")
    drops = np.diff(values) < -SAMPLE_RTOL * np.abs(values[:-1])
    if np.any(drops):
        i = int(np.argmax(drops))
        raise CertificateInputError(
            f"modulus is not non-decreasing: m({u[i + 1]:g}) < m({u[i]:g})")


def divergence_probe(modulus: Expr, eps_sequence: Sequence[float],
                     gamma_upper: float = 1.0) -> List[float]:
    """
    Values of int_eps^gamma du / m(u) for each eps.

    The integral is taken in the variable s = log u, which turns the
    near-origin singularity into a long smooth interval. A modulus that
    vanishes somewhere in (0, gamma] gives infinite probes.
    """
    m = _modulus_callable(modulus)
    eps = np.asarray(eps_sequence, dtype=float)
    check = np.geomspace(eps.min(), gamma_upper, 257)
    if np.any(np.asarray(m(check)) == 0.0):
        return [math.inf] * eps.size

    def integrand(s):
        u = math.exp(s)
        return u / m(u)

    # accumulate piecewise from gamma down to each eps
    values = []
    total = 0.0
    upper = math.log(gamma_upper)
    for e in eps:
        lower = math.log(e)
        piece, _ = integrate.quad(integrand, lower, upper, limit=200)
        total += piece
        values.append(total)
        upper = lower
    return values


def probe_consistent(values: Sequence[float]) -> bool:
    """
    True if probe values grow strictly and the last three increments are non-decreasing.

    Consistency with divergence only; a finite sequence cannot prove it.
    """
    values = np.asarray(values, dtype=float)
    if np.all(np.isinf(values)):
        return True
    increments = np.diff(values)
    if not np.all(increments > 0):
        return False
    tail = increments[-3:]
    return bool(np.all(tail[1:] >= tail[:-1] * (1.0 - PROBE_RTOL)))


def osgood_check(spec: ProblemSpec, modulus: Expr, p: float, C: float,
                 samples: int = DEFAULT_SAMPLES,
                 eps_sequence: Sequence[float] = DEFAULT_EPS,
                 gamma_upper: float = 1.0, seed: int = 0,
                 window: Optional[ExistenceWindow] = None) -> CertificateReport:
    """
    Osgood-type uniqueness.

    Holds iff q = p / (p - 1) satisfies q < 1 / (sigma - 1), C^q is at least
    the bound from osgood_constant_bound, the sampled inequality
        |dg| <= C (m(|dw|^p + |dv|^p))^(1/p)
    holds on every pair, and the divergence probe of 1 / m is consistent with
    divergence.

    Args:
        spec: Problem.
        modulus: Expression in the single variable u.
        p: Hoelder exponent, > 1.
        C: Constant, > 0.
        samples: Number of sampled pairs.
        eps_sequence: Strictly decreasing lower limits for the probe.
        gamma_upper: Upper limit of the probe.
        seed: Sampling seed.
        window: Existence window; computed when omitted.

    Raises:
        CertificateInputError: If p <= 1, q >= 1 / (sigma - 1), C <= 0, the modulus
            is not in u alone, m(0) != 0, or m decreases at a sampled point.
    """
    s = spec.sigma
    if p is None or not p > 1.0:
        raise CertificateInputError(f"p must exceed 1, got {p}")
    q = p / (p - 1.0)
    q_max = 1.0 / (s - 1.0)
    if q >= q_max:
        raise CertificateInputError(
            f"q-range violation: q = p/(p-1) = {q:.10g} must be below 1/(sigma-1) = {q_max:.10g}")
    if C is None or not C > 0:
        raise CertificateInputError(f"Osgood check needs C > 0, got {C}")
    if isinstance(modulus, str):
        modulus = parse(modulus, variables=("u",))
    if not modulus.variables() <= {"u"}:
        raise CertificateInputError("modulus may only use the variable u")
    eps = [float(e) for e in eps_sequence]
    if len(eps) < 4 or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
        raise CertificateInputError("eps_sequence must hold at least four strictly decreasing positive reals")
    if not gamma_upper > eps[0]:
        raise CertificateInputError(f"gamma must exceed the largest eps {eps[0]:g}")

    m = _modulus_callable(modulus)
    span = (2.0 * spec.r1) ** p + (2.0 * spec.r2) ** p
    _check_modulus(m, max(span, gamma_upper))
    if window is None:
        window = existence_window(spec)

    required = osgood_constant_bound(spec, q, window.T0)
    constant_margin = C ** q - required

    pairs = _sample_pairs(spec, int(samples), _rng(seed))
    bound = C * np.power(m(pairs.dw ** p + pairs.dv ** p), 1.0 / p)
    modulus_margin = _sampled_margin(np.asarray(bound, dtype=float), pairs.dg)
    i_mod = int(np.argmin(modulus_margin))

    probes = divergence_probe(modulus, eps, gamma_upper)
    consistent = probe_consistent(probes)

    holds = bool(constant_margin >= 0 and modulus_margin[i_mod] >= 0 and consistent)
    logger.info(f"Osgood check: p={p:g}, q={q:.6g}, C={C:g}, C^q margin={constant_margin:.6g}, "
                f"divergence {'consistent' if consistent else 'not consistent'}, holds={holds}")
    notes = ("divergence probe consistent with divergence (not a proof)" if consistent
             else "divergence probe shows no unbounded growth")
    return CertificateReport(
        kind=KIND_OSGOOD,
        holds=holds,
        thresholds={
            'q': q,
            'osgood_q_max': q_max,
            'C_min': required ** (1.0 / q),
            'T0': window.T0,
            'gamma': gamma_upper,
        },
        margins={
            'q_range': q_max - q,
            'constant': constant_margin,
            'modulus_bound': float(modulus_margin[i_mod]),
            'divergence': 1.0 if consistent else -1.0,
        },
        witnesses=[pairs.witness(i_mod, 'modulus_bound', modulus_margin[i_mod])],
        notes=f"{notes}; {int(samples)} sampled pairs, seed {seed}",
        probes=[{'eps': e, 'integral': v} for e, v in zip(eps, probes)],
    )


# =============================================================================
# Mean-value diagnostic
# =============================================================================

def mean_value_witness(sigma: float, sol: SolutionPair, x: float) -> Optional[float]:
    """
    Search (0, x) for mu with
        w(x) + v(0) x^(sigma-1) / Gamma(sigma) = Gamma(2 - sigma) mu^(sigma-1) v(mu).

    Scans the grid points of `sol` below x for a sign change of the defect and
    refines it by bisection on the PCHIP interpolant of v. Returns x / 2 when
    the defect vanishes identically and None when no sign change exists.

    Raises:
        ValueError: If x is not a positive grid point of sol.
    """
    grid = sol.grid
    if not 0.0 < x <= grid.X * (1.0 + 1e-12):
        raise ValueError(f"x must lie in (0, {grid.X:g}], got {x}")
    k = grid.index_of(x)
    if abs(grid.points[k] - x) > 1e-9 * max(1.0, grid.X):
        raise ValueError(f"x={x} is not a grid point")
    x = float(grid.points[k])

    v = np.asarray(sol.v, dtype=float)
    target = float(sol.w[k]) + v[0] * x ** (sigma - 1.0) / gamma(sigma)
    g2 = gamma(2.0 - sigma)

    mu = grid.points[:k + 1]
    defect = target - g2 * np.power(mu, sigma - 1.0) * v[:k + 1]
    scale = max(1.0, abs(target))
    if np.all(np.abs(defect) <= 1e-14 * scale):
        return 0.5 * x

    v_interp = PchipInterpolator(grid.points, v)

    def F(t):
        return target - g2 * t ** (sigma - 1.0) * float(v_interp(t))

    for j in range(k):
        left, right = defect[j], defect[j + 1]
        if j > 0 and left == 0.0:
            return float(mu[j])
        if left * right < 0:
            a, b = float(mu[j]), float(mu[j + 1])
            fa = F(a)
            for _ in range(100):
                mid = 0.5 * (a + b)
                fm = F(mid)
                if fm == 0.0 or b - a <= 4 * np.finfo(float).eps * b:
                    break
                if (fa < 0) == (fm < 0):
                    a, fa = mid, fm
                else:
                    b = mid
            root = 0.5 * (a + b)
            if 0.0 < root < x:
                logger.debug(f"Mean-value witness at x={x:g}: mu={root:.10g}")
                return root
    logger.debug(f"No mean-value witness in (0, {x:g})")
    return None
