"""
Picard iteration on the coupled integral system.

A solution of the initial value problem is a fixed point of the operator S
acting on the pair (w, v = D^(sigma-1) w):

    S_w(x) = b x^(sigma-1) / Gamma(sigma)
             + x / Gamma(sigma) * int_0^1 tau^(1-sigma) (1-tau)^(sigma-1) g(x tau, w(x tau), v(x tau)) dtau
    S_v(x) = b + x^(2-sigma) * int_0^1 tau^(1-sigma) g(x tau, w(x tau), v(x tau)) dtau

Both integrals are Gauss-Jacobi product rules; values between grid points come
from monotone cubic interpolation of the regular parts w / x^(sigma-1) and v.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator

from fracivp.expr import Expr
from fracivp.fracops import Grid
from fracivp.logger import get_logger
from fracivp.problem import (
    ExistenceWindow,
    ProblemSpec,
    ProblemValidationError,
    affine_part,
    existence_window,
)
from fracivp.specfun import gamma, gauss_jacobi_rule

logger = get_logger()

# errors below ROUNDING_FLOOR * eps * max|exact| get no convergence order
ROUNDING_FLOOR = 1e3


class ConvergenceError(RuntimeError):
    """Picard iteration hit max_iter; carries the last update norm and the last iterate."""

    def __init__(self, message: str, last_update_norm: float, solution: "SolutionPair"):
        super().__init__(message)
        self.last_update_norm = last_update_norm
        self.solution = solution


@dataclass
class SolverConfig:
    """
    Picard solver settings.

    Attributes:
        n: Grid subintervals (>= 8).
        quad_points: Gauss-Jacobi points per grid point.
        tol: Stopping threshold on ||dw||_inf + ||dv||_inf.
        max_iter: Iteration limit (>= 1).
        X: Solve endpoint; None means the existence window T0. Capped at T0.
    """
    n: int = 512
    quad_points: int = 32
    tol: float = 1e-10
    max_iter: int = 200
    X: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ProblemValidationError("solver.n", f"must be an integer >= 8, got {self.n}")
        if int(self.quad_points) != self.quad_points or self.quad_points < 1:
            raise ProblemValidationError("solver.quad_points",
                                         f"must be a positive integer, got {self.quad_points}")
        if not self.tol > 0:
            raise ProblemValidationError("solver.tol", f"must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ProblemValidationError("solver.max_iter", f"must be >= 1, got {self.max_iter}")
        if self.X is not None and not self.X > 0:
            raise ProblemValidationError("solver.X", f"must be positive, got {self.X}")
        self.n = int(self.n)
        self.quad_points = int(self.quad_points)
        self.max_iter = int(self.max_iter)

    def to_dict(self) -> dict:
        return {
            'n': self.n,
            'quad_points': self.quad_points,
            'tol': self.tol,
            'max_iter': self.max_iter,
            'X': self.X,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SolverConfig':
        return cls(
            n=data.get('n', 512),
            quad_points=data.get('quad_points', 32),
            tol=data.get('tol', 1e-10),
            max_iter=data.get('max_iter', 200),
            X=data.get('X'),
        )


@dataclass
class SolutionPair:
    """
    Samples of w and v = D^(sigma-1) w on a grid over [0, X].

    Solver outputs satisfy w[0] = 0 and v[0] = b exactly.
    """
    grid: Grid
    w: np.ndarray
    v: np.ndarray
    iterations: int = 0
    final_update_norm: float = 0.0
    box_escape: bool = False
    box_norm: float = 0.0
    update_norms: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'x': self.x, 'w': self.w, 'v': self.v})


class PicardOperator:
    """The solution operator S on a fixed grid, with its quadrature nodes precomputed."""

    def __init__(self, spec: ProblemSpec, grid: Grid, quad_points: int = 32):
        s = spec.sigma
        self.spec = spec
        self.grid = grid
        x = grid.points
        self.x = x
        self.rule_w = gauss_jacobi_rule(1.0 - s, s - 1.0, quad_points)
        self.rule_v = gauss_jacobi_rule(1.0 - s, 0.0, quad_points)
        self.nodes_w = np.outer(x, self.rule_w.nodes).ravel()
        self.nodes_v = np.outer(x, self.rule_v.nodes).ravel()
        self.shape_w = (x.size, self.rule_w.size)
        self.shape_v = (x.size, self.rule_v.size)
        self.affine = affine_part(spec, x)
        self.scale_w = x / gamma(s)
        self.scale_v = np.power(x, 2.0 - s)
        self.rho0 = spec.b / gamma(s)

    def _interpolants(self, w: np.ndarray, v: np.ndarray):
        s = self.spec.sigma
        rho = np.empty_like(self.x)
        rho[0] = self.rho0
        rho[1:] = w[1:] / np.power(self.x[1:], s - 1.0)
        return PchipInterpolator(self.x, rho), PchipInterpolator(self.x, v)

    def _g_at(self, nodes: np.ndarray, shape: tuple, rho, v_interp) -> np.ndarray:
        w_nodes = np.power(nodes, self.spec.sigma - 1.0) * rho(nodes)
        v_nodes = v_interp(nodes)
        return np.asarray(self.spec.g_values(nodes, w_nodes, v_nodes)).reshape(shape)

    def apply(self, w: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """One application of S to the pair (w, v)."""
        rho, v_interp = self._interpolants(w, v)
        g_w = self._g_at(self.nodes_w, self.shape_w, rho, v_interp)
        g_v = self._g_at(self.nodes_v, self.shape_v, rho, v_interp)
        w_new = self.affine + self.scale_w * self.rule_w.integrate(g_w)
        v_new = self.spec.b + self.scale_v * self.rule_v.integrate(g_v)
        w_new[0] = 0.0
        v_new[0] = self.spec.b
        return w_new, v_new


def _box_norm(spec: ProblemSpec, w: np.ndarray, v: np.ndarray) -> float:
    return float(np.max(np.abs(w)) + np.max(np.abs(v - spec.b)))


def picard_solve(spec: ProblemSpec,
                 config: Optional[SolverConfig] = None,
                 window: Optional[ExistenceWindow] = None,
                 initial: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> SolutionPair:
    """
    Solve the integral system by Picard iteration on [0, X], X <= T0.

    Starts from w0 = b x^(sigma-1) / Gamma(sigma), v0 = b (the g = 0 solution)
    unless `initial` supplies arrays on the solve grid, and stops when
    ||w_{k+1} - w_k||_inf + ||v_{k+1} - v_k||_inf < tol.

    Args:
        spec: Problem.
        config: Solver settings; defaults to SolverConfig().
        window: Existence window; computed from spec when omitted.
        initial: Optional (w0, v0) on the grid of n + 1 points.

    Returns:
        SolutionPair. `box_escape` is set when any iterate left
        [-r1, r1] x [b - r2, b + r2]; the result is then no longer covered
        by the existence window.

    Raises:
        ConvergenceError: If max_iter iterations do not reach tol.
        ExprDomainError: If g cannot be evaluated at an iterate.
    """
    config = config or SolverConfig()
    if window is None:
        window = existence_window(spec)
    X = window.T0 if config.X is None else config.X
    if X > window.T0 * (1.0 + 1e-12):
        logger.warning(f"Solve endpoint X={X:g} exceeds the existence window T0={window.T0:.10g}; "
                       f"capping at T0")
        X = window.T0

    grid = Grid(X, config.n)
    operator = PicardOperator(spec, grid, config.quad_points)
    logger.info(f"Picard solve: sigma={spec.sigma}, b={spec.b}, X={X:.10g}, n={config.n}, "
                f"quad_points={config.quad_points}, tol={config.tol:g}")

    if initial is None:
        w = operator.affine.copy()
        v = np.full(grid.n + 1, spec.b)
    else:
        w = np.array(initial[0], dtype=float)
        v = np.array(initial[1], dtype=float)
        if w.shape != (grid.n + 1,) or v.shape != (grid.n + 1,):
            raise ValueError(f"initial iterate must have {grid.n + 1} samples per component")

    norms = []
    escaped = False
    update = math.inf
    for k in range(1, config.max_iter + 1):
        w_new, v_new = operator.apply(w, v)
        update = float(np.max(np.abs(w_new - w)) + np.max(np.abs(v_new - v)))
        norms.append(update)
        w, v = w_new, v_new
        if not escaped and not spec.in_box(w, v):
            escaped = True
            logger.warning(f"Iterate {k} left the box |w| <= {spec.r1}, |v - b| <= {spec.r2}; "
                           f"solution is not certified by the existence window")
        logger.debug(f"Picard iteration {k}: update norm {update:.3e}")
        if update < config.tol:
            break
    else:
        solution = SolutionPair(grid, w, v, config.max_iter, update, escaped,
                                _box_norm(spec, w, v), tuple(norms))
        raise ConvergenceError(
            f"Picard iteration did not converge in {config.max_iter} iterations "
            f"(last update norm {update:.3e}, tol {config.tol:g})", update, solution)

    logger.info(f"Picard converged in {len(norms)} iterations, update norm {update:.3e}")
    return SolutionPair(grid, w, v, len(norms), update, escaped, _box_norm(spec, w, v),
                        tuple(norms))


def residual(spec: ProblemSpec, sol: SolutionPair, quad_points: int = 32) -> Tuple[float, float]:
    """
    Max-norm defects (w-equation, v-equation) of `sol` in the integral system.

    One extra application of S, no iteration.
    """
    operator = PicardOperator(spec, sol.grid, quad_points)
    w_s, v_s = operator.apply(np.asarray(sol.w, dtype=float), np.asarray(sol.v, dtype=float))
    defect_w = float(np.max(np.abs(w_s - sol.w)))
    defect_v = float(np.max(np.abs(v_s - sol.v)))
    logger.debug(f"Residual: w-equation {defect_w:.3e}, v-equation {defect_v:.3e}")
    return defect_w, defect_v


OracleComponent = Union[Callable[[np.ndarray], np.ndarray], Expr]


def _as_callable(component: OracleComponent) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(component, Expr):
        return lambda x: np.asarray(component.evaluate(x=x, w=0.0, v=0.0), dtype=float)
    return component


def _orders(errors: np.ndarray, ns: np.ndarray, floor: float) -> np.ndarray:
    orders = np.full(errors.size, np.nan)
    for i in range(1, errors.size):
        if errors[i - 1] > floor and errors[i] > floor:
            orders[i] = math.log(errors[i - 1] / errors[i]) / math.log(ns[i] / ns[i - 1])
    return orders


def refine_study(spec: ProblemSpec,
                 ns: Sequence[int],
                 oracle: Tuple[OracleComponent, OracleComponent],
                 config: Optional[SolverConfig] = None,
                 window: Optional[ExistenceWindow] = None) -> pd.DataFrame:
    """
    Grid-refinement study against an exact solution pair.

    Args:
        spec: Problem.
        ns: Grid sizes, increasing.
        oracle: Exact (w, v), each a vectorized callable of x or an Expr in x.
        config: Base solver settings; n is replaced by each entry of ns.
        window: Existence window; computed once when omitted.

    Returns:
        DataFrame with columns n, err_w, err_v, order_w, order_v. Orders are
        log(e_prev / e) / log(n / n_prev); NaN on the first row and wherever
        an error is within ROUNDING_FLOOR * eps of the largest exact value.
    """
    config = config or SolverConfig()
    if window is None:
        window = existence_window(spec)
    w_exact, v_exact = (_as_callable(c) for c in oracle)

    rows = []
    scale = 1.0
    for n in ns:
        sol = picard_solve(spec, replace(config, n=int(n)), window)
        we = w_exact(sol.x)
        ve = v_exact(sol.x)
        scale = max(scale, float(np.max(np.abs(we))), float(np.max(np.abs(ve))))
        rows.append((int(n), float(np.max(np.abs(sol.w - we))), float(np.max(np.abs(sol.v - ve)))))
        logger.info(f"Refinement n={n}: err_w={rows[-1][1]:.3e}, err_v={rows[-1][2]:.3e}")

    table = pd.DataFrame(rows, columns=['n', 'err_w', 'err_v'])
    floor = ROUNDING_FLOOR * np.finfo(float).eps * scale
    grid_sizes = table['n'].to_numpy(dtype=float)
    table['order_w'] = _orders(table['err_w'].to_numpy(), grid_sizes, floor)
    table['order_v'] = _orders(table['err_v'].to_numpy(), grid_sizes, floor)
    return table
