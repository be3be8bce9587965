"""Deterministic solvers for empirical (regularized) saddle problems.

The workhorse is mirror prox (extragradient with Bregman steps).  The
regularizer is handled inside the prox step in closed form, so only the smooth
family objective enters the extragradient operator.  Gaps are certified with
exact best responses built from each family's block structure.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import ConvergenceError, InvalidArgumentError, UnsupportedError
from .problems import QuadraticSaddle, RegKind, SaddleObjective

log = logging.getLogger(__name__)


class Geometry(enum.Enum):
    EUCLIDEAN = "euclidean"
    ENTROPY = "entropy"


class Side(enum.Enum):
    MINIMIZE_X = "minimize-x"
    MAXIMIZE_Y = "maximize-y"


@dataclass(frozen=True)
class FixedStep:
    eta: float


@dataclass(frozen=True)
class AdaptiveBacktracking:
    eta0: float = 1.0
    shrink: float = 0.5
    grow: float = 1.2


@dataclass(frozen=True)
class SolverConfig:
    """Mirror-prox settings.

    ``gap_tol=None`` means ``1e-8 * (1 + |objective(x0, y0)|)``.  A geometry of
    None picks entropy on simplex-like sets with an entropy regularizer and
    Euclidean otherwise.
    """

    max_iter: int = 20000
    gap_tol: float | None = None
    step_rule: FixedStep | AdaptiveBacktracking = field(default_factory=AdaptiveBacktracking)
    geometry_x: Geometry | None = None
    geometry_y: Geometry | None = None
    check_every: int = 10

    def __post_init__(self):
        if self.gap_tol is not None and not self.gap_tol > 0:
            raise InvalidArgumentError("gap_tol must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be >= 1")
        if isinstance(self.step_rule, FixedStep) and not self.step_rule.eta > 0:
            raise InvalidArgumentError("fixed step must be positive")


@dataclass
class SaddleSolution:
    x_hat: np.ndarray
    y_hat: np.ndarray
    certified_gap: float
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# Best responses


def _structured_best_response(obj: SaddleObjective, fixed, side: Side):
    reg = obj.regularizer
    kx, ky = reg.block_kinds
    if side is Side.MINIMIZE_X:
        q, c = obj.block_x(fixed)
        kind, alpha, s = kx, reg.alpha_x, obj.set_x
    else:
        q, c = obj.block_y(fixed)
        kind, alpha, s = ky, reg.alpha_y, obj.set_y
    # Both sides reduce to  max <c,z> - (q/2)|z|^2 - alpha h(z).
    if kind == "entropy" and alpha > 0:
        if q != 0:
            return None
        return geo.argmax_entropic(s, c, alpha)
    curv = q + (alpha if kind == "quadratic" else 0.0)
    if curv > 0:
        return geo.project_euclidean(s, c / curv)
    return geo.argmax_linear(s, c)


def _generic_best_response(obj, fixed, side: Side, s, tol, max_iter=100000):
    """Accelerated projected gradient on one block of a smooth objective."""
    sign = 1.0 if side is Side.MINIMIZE_X else -1.0
    if side is Side.MINIMIZE_X:
        f = lambda z: obj.value(z, fixed)
        g = lambda z: obj.grad_x(z, fixed)
    else:
        f = lambda z: -obj.value(fixed, z)
        g = lambda z: -obj.grad_y(fixed, z)
    z = geo.project_euclidean(s, s.center())
    v, t, L = z.copy(), 1.0, 1.0
    resid = np.inf
    for _ in range(max_iter):
        gv = g(v)
        fv = f(v)
        while True:
            z_new = geo.project_euclidean(s, v - gv / L)
            d = z_new - v
            if f(z_new) <= fv + gv @ d + 0.5 * L * (d @ d) + 1e-15 * abs(fv):
                break
            L *= 2.0
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        v = z_new + ((t - 1) / t_new) * (z_new - z)
        z, t = z_new, t_new
        resid = float(np.linalg.norm(L * (z - geo.project_euclidean(s, z - g(z) / L))))
        if resid <= tol:
            return z, sign * f(z)
    raise ConvergenceError("best response did not converge; gradient-mapping norm", resid)


def best_response(objective, fixed_point, side: Side, set_=None, config: SolverConfig | None = None):
    """Exact (or first-order) optimizer of one block with the other held fixed.

    Returns ``(point, value)`` where ``value`` is the objective at the pair.
    """
    fixed = np.asarray(fixed_point, dtype=float)
    point = None
    if isinstance(objective, SaddleObjective):
        point = _structured_best_response(objective, fixed, side)
    if point is None:
        if set_ is None:
            raise InvalidArgumentError("a feasible set is required for unstructured objectives")
        tol = (config.gap_tol if config and config.gap_tol else 1e-8) / 10
        point, _ = _generic_best_response(objective, fixed, side, set_, tol)
    if side is Side.MINIMIZE_X:
        return point, objective.value(point, fixed)
    return point, objective.value(fixed, point)


def empirical_duality_gap(objective, x, y) -> float:
    """``max_y' obj(x, y') - min_x' obj(x', y)``."""
    _, vmax = best_response(objective, x, Side.MAXIMIZE_Y)
    _, vmin = best_response(objective, y, Side.MINIMIZE_X)
    return float(vmax - vmin)


# ---------------------------------------------------------------------------
# Mirror prox


def _resolve_geometry(g, s, reg_kind):
    if g is None:
        g = Geometry.ENTROPY if reg_kind == "entropy" else Geometry.EUCLIDEAN
    if g is Geometry.ENTROPY and not isinstance(s, geo.SIMPLEX_LIKE):
        raise InvalidArgumentError("entropy geometry needs a simplex-like set")
    if g is Geometry.ENTROPY and reg_kind == "quadratic":
        raise UnsupportedError("quadratic regularizer needs Euclidean geometry")
    if g is Geometry.EUCLIDEAN and reg_kind == "entropy":
        raise UnsupportedError("entropy regularizer needs entropy geometry")
    return g


class _Block:
    """Composite prox step and Bregman divergence for one block."""

    def __init__(self, s, geometry, alpha, sign):
        self.s, self.geometry, self.alpha, self.sign = s, geometry, alpha, sign

    def prox(self, z0, g, eta):
        # sign=+1 descends (x block), sign=-1 ascends (y block); g is the smooth gradient
        if self.geometry is Geometry.EUCLIDEAN:
            return geo.project_euclidean(self.s, (z0 - self.sign * eta * g) / (1.0 + eta * self.alpha))
        c = -self.sign * eta * g + np.log(np.maximum(z0, geo.LOG_FLOOR))
        return geo.argmax_entropic(self.s, c, 1.0 + eta * self.alpha)

    def divergence(self, a, b):
        if self.geometry is Geometry.EUCLIDEAN:
            d = a - b
            return 0.5 * float(d @ d)
        a = np.maximum(a, geo.LOG_FLOOR)
        b = np.maximum(b, geo.LOG_FLOOR)
        return float(np.sum(a * (np.log(a) - np.log(b)) - a + b))


def _start_point(s, geometry):
    if isinstance(s, geo.Unbounded):
        return np.zeros(s.dim)
    c = s.center()
    return np.maximum(c, geo.LOG_FLOOR) if geometry is Geometry.ENTROPY else c


def solve_mirror_prox(objective: SaddleObjective, config: SolverConfig | None = None, x0=None, y0=None) -> SaddleSolution:
    """Mirror prox with composite prox steps and certified duality gap.

    Stops when the certified gap at the best candidate (last iterate or
    step-weighted average) is below ``gap_tol``.
    """
    config = config or SolverConfig()
    reg = objective.regularizer
    kx, ky = reg.block_kinds
    gx = _resolve_geometry(config.geometry_x, objective.set_x, kx)
    gy = _resolve_geometry(config.geometry_y, objective.set_y, ky)
    bx = _Block(objective.set_x, gx, reg.alpha_x if kx else 0.0, +1.0)
    by = _Block(objective.set_y, gy, reg.alpha_y if ky else 0.0, -1.0)

    x = _start_point(objective.set_x, gx) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = _start_point(objective.set_y, gy) if y0 is None else np.asarray(y0, dtype=float).copy()
    gap_tol = config.gap_tol
    if gap_tol is None:
        gap_tol = 1e-8 * (1.0 + abs(objective.value(x, y)))

    def F(x_, y_):
        return objective.smooth_grad_x(x_, y_), objective.smooth_grad_y(x_, y_)

    rule = config.step_rule
    eta = rule.eta if isinstance(rule, FixedStep) else rule.eta0
    best = (x, y)
    best_gap = empirical_duality_gap(objective, x, y)
    initial_gap = max(best_gap, 1e-300)
    if best_gap <= gap_tol:
        return SaddleSolution(x, y, best_gap, 0, True)

    sx, sy, wsum = np.zeros_like(x), np.zeros_like(y), 0.0
    fx, fy = F(x, y)
    it = 0
    for it in range(1, config.max_iter + 1):
        while True:
            wx, wy = bx.prox(x, fx, eta), by.prox(y, fy, eta)
            gwx, gwy = F(wx, wy)
            nx, ny = bx.prox(x, gwx, eta), by.prox(y, gwy, eta)
            if isinstance(rule, FixedStep):
                break
            lhs = eta * (float((gwx - fx) @ (wx - nx)) - float((gwy - fy) @ (wy - ny)))
            rhs = bx.divergence(wx, x) + by.divergence(wy, y) + bx.divergence(nx, wx) + by.divergence(ny, wy)
            if lhs <= rhs + 1e-15 * (1 + abs(rhs)):
                break
            eta *= rule.shrink
            if eta < 1e-14:
                raise ConvergenceError("mirror prox step size collapsed", best_gap)
        sx += eta * wx
        sy += eta * wy
        wsum += eta
        x, y = nx, ny
        fx, fy = F(x, y)
        if not isinstance(rule, FixedStep):
            eta *= rule.grow

        if it % config.check_every == 0 or it == config.max_iter:
            for cand in ((x, y), (sx / wsum, sy / wsum)):
                g = empirical_duality_gap(objective, *cand)
                if g < best_gap:
                    best, best_gap = cand, g
            if not np.isfinite(best_gap) or empirical_duality_gap(objective, x, y) > 1e6 * initial_gap:
                raise ConvergenceError("mirror prox diverged", best_gap)
            if best_gap <= gap_tol:
                return SaddleSolution(best[0].copy(), best[1].copy(), best_gap, it, True)
    log.debug("mirror prox hit max_iter=%d with gap %.3e", config.max_iter, best_gap)
    return SaddleSolution(best[0].copy(), best[1].copy(), best_gap, it, False)


def solve_quadratic_closed_form(objective: SaddleObjective) -> SaddleSolution:
    """Exact stationary point of an unconstrained quadratic-family objective."""
    p = objective.problem
    if not isinstance(p, QuadraticSaddle):
        raise UnsupportedError("closed form is only available for the quadratic family")
    if not (isinstance(p.set_x, geo.Unbounded) and isinstance(p.set_y, geo.Unbounded)):
        raise UnsupportedError("closed form needs unbounded sets")
    reg = objective.regularizer
    if reg.kind not in (RegKind.NONE, RegKind.QUADRATIC_QUADRATIC):
        raise UnsupportedError("closed form supports no regularizer or quadratic-quadratic only")
    ax = reg.alpha_x if reg.kind is RegKind.QUADRATIC_QUADRATIC else 0.0
    ay = reg.alpha_y if reg.kind is RegKind.QUADRATIC_QUADRATIC else 0.0
    mx, my = p.mu_x + ax, p.mu_y + ay
    if mx <= 0 or my <= 0:
        raise UnsupportedError("stationarity system is singular (zero total modulus in a block)")
    a, b = p._split(objective.payload)
    C = p.coupling
    dx, dy = C.shape
    K = np.block([[mx * np.eye(dx), C], [-C.T, my * np.eye(dy)]])
    z = np.linalg.solve(K, np.concatenate([a, b]))
    x, y = z[:dx], z[dx:]
    return SaddleSolution(x, y, empirical_duality_gap(objective, x, y), 0, True)
