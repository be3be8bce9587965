"""Monte Carlo estimators of WGM, SGM and squared distance, plus closed-form bounds.

Every family objective is bilinear in ``(x, y)`` up to separable terms, so the
block coefficients ``block_y(p, x)`` are affine in ``x``.  Averaging
``Phi(x_r, .)`` over replications therefore gives the block at the mean
``x_bar``, and the WGM best responses reduce to one structured solve per side.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import InvalidArgumentError, UnsupportedError
from .parallel import pmap
from .problems import (
    ProblemConstants,
    QuadraticSaddle,
    Regularizer,
    StochasticSaddleProblem,
    default_regularizer_corollary,
    empirical_objective,
)
from .solver import (
    SaddleSolution,
    Side,
    SolverConfig,
    best_response,
    empirical_duality_gap,
    solve_mirror_prox,
    solve_quadratic_closed_form,
)


class MetricKind(enum.Enum):
    WGM = "wgm"
    SGM = "sgm"
    D2 = "d2"


class BoundKind(enum.Enum):
    WGM_SC = "wgm-sc"
    SGM_SC = "sgm-sc"
    UNBOUNDED_D2 = "unbounded-d2"
    UNBOUNDED_SGM = "unbounded-sgm"
    REG_WGM = "reg-wgm"
    COROLLARY_WGM = "corollary-wgm"
    STABILITY_RHS_SC = "stability-rhs-sc"
    STABILITY_RHS_REG = "stability-rhs-reg"


@dataclass
class GeneralizationEstimate:
    metric_kind: MetricKind
    n: int
    replications: int
    mean: float
    std_error: float
    per_rep_values: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Regularizer rules (module-level so they pickle into worker processes)


def no_regularizer(problem, n) -> Regularizer:
    return Regularizer.none()


def corollary_regularizer(problem, n) -> Regularizer:
    return default_regularizer_corollary(problem.constants, n)


# ---------------------------------------------------------------------------
# Solving


def solve_objective(objective, config: SolverConfig | None = None) -> SaddleSolution:
    """Closed form for unconstrained quadratics, mirror prox otherwise."""
    p = objective.problem
    if (
        isinstance(p, QuadraticSaddle)
        and isinstance(p.set_x, geo.Unbounded)
        and isinstance(p.set_y, geo.Unbounded)
    ):
        return solve_quadratic_closed_form(objective)
    return solve_mirror_prox(objective, config)


def population_saddle(problem: StochasticSaddleProblem, config: SolverConfig | None = None):
    """Population saddle point: closed form when feasible, else solved to gap 1e-10."""
    closed = problem.population_saddle_closed_form()
    if closed is not None:
        return closed
    pop = problem.population_objective()
    base = config or SolverConfig()
    cfg = SolverConfig(
        max_iter=max(base.max_iter, 200000),
        gap_tol=1e-10,
        step_rule=base.step_rule,
        geometry_x=base.geometry_x,
        geometry_y=base.geometry_y,
        check_every=base.check_every,
    )
    sol = solve_objective(pop, cfg)
    if not sol.converged:
        raise UnsupportedError(f"population saddle not certified (gap {sol.certified_gap:.3e})")
    return sol.x_hat, sol.y_hat


def _solve_one(args):
    problem, n, r, seed, rule, config = args
    samples = problem.sample_set(n, seed, n, r)
    reg = (rule or no_regularizer)(problem, n)
    return solve_objective(empirical_objective(problem, samples, reg), config)


def solve_replications(problem, n, replications, regularizer_rule=None, config=None, master_seed=0, threads=1):
    """ESP solutions for replications ``0..R-1`` drawn from stream ``(seed, n, r)``."""
    jobs = [(problem, n, r, master_seed, regularizer_rule, config) for r in range(replications)]
    return pmap(_solve_one, jobs, threads)


# ---------------------------------------------------------------------------
# Measures


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
    return float(v.mean()), se


def weak_gap(pop, xs, ys) -> float:
    """``max_y mean_r Phi(x_r, y) - min_x mean_r Phi(x, y_r)`` on a population objective."""
    x_bar, y_bar = np.mean(xs, axis=0), np.mean(ys, axis=0)
    y_br, _ = best_response(pop, x_bar, Side.MAXIMIZE_Y)
    x_br, _ = best_response(pop, y_bar, Side.MINIMIZE_X)
    hi = np.mean([pop.value(x, y_br) for x in xs])
    lo = np.mean([pop.value(x_br, y) for y in ys])
    return float(hi - lo)


def measure(problem, solutions, metric: MetricKind, n: int, saddle=None) -> GeneralizationEstimate:
    """Turn a list of ESP solutions into one metric estimate.

    WGM has no per-replication decomposition; its standard error comes from a
    leave-one-replication-out jackknife.
    """
    R = len(solutions)
    if R < 2:
        raise InvalidArgumentError("at least two replications are required")
    xs = np.array([s.x_hat for s in solutions])
    ys = np.array([s.y_hat for s in solutions])
    if metric is MetricKind.D2:
        xs_star, ys_star = saddle if saddle is not None else population_saddle(problem)
        vals = [problem.norm_x(x - xs_star) ** 2 + problem.norm_y(y - ys_star) ** 2 for x, y in zip(xs, ys)]
        m, se = _mean_se(vals)
        return GeneralizationEstimate(metric, n, R, m, se, vals)
    pop = problem.population_objective()
    if metric is MetricKind.SGM:
        vals = [empirical_duality_gap(pop, x, y) for x, y in zip(xs, ys)]
        m, se = _mean_se(vals)
        return GeneralizationEstimate(metric, n, R, m, se, vals)
    w = weak_gap(pop, xs, ys)
    keep = np.ones(R, dtype=bool)
    jack = []
    for r in range(R):
        keep[r] = False
        jack.append(weak_gap(pop, xs[keep], ys[keep]))
        keep[r] = True
    jack = np.asarray(jack)
    se = float(np.sqrt((R - 1) / R * np.sum((jack - jack.mean()) ** 2)))
    return GeneralizationEstimate(metric, n, R, w, se, [])


def estimate_generalization(
    problem,
    n,
    replications,
    metric_kind: MetricKind,
    solver_config: SolverConfig | None = None,
    regularizer_rule=None,
    master_seed=0,
    threads=1,
) -> GeneralizationEstimate:
    if replications < 2:
        raise InvalidArgumentError("replications must be >= 2")
    if problem.population_payload() is None:
        raise UnsupportedError(f"{metric_kind.value} needs a population objective")
    sols = solve_replications(problem, n, replications, regularizer_rule, solver_config, master_seed, threads)
    return measure(problem, sols, metric_kind, n)


# ---------------------------------------------------------------------------
# Bounds


def _need(value, what):
    if not value > 0:
        raise InvalidArgumentError(f"bound divides by {what}, which must be positive (got {value})")
    return value


def theoretical_bound(kind: BoundKind, constants: ProblemConstants, regularizer: Regularizer | None, n: int) -> float:
    """Closed-form generalization and stability bounds as functions of ``n``."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    c = constants
    reg = regularizer or Regularizer.none()
    if kind is BoundKind.WGM_SC:
        mx = _need(c.mu_x, "mu_x (strong convexity)")
        my = _need(c.mu_y, "mu_y (strong concavity)")
        return 2 * np.sqrt(2) / n * (c.lx_w**2 / mx + c.ly_w**2 / my)
    if kind is BoundKind.SGM_SC:
        mx = _need(c.mu_x, "mu_x (strong convexity)")
        my = _need(c.mu_y, "mu_y (strong concavity)")
        base = 2 * np.sqrt(2) / n * (c.lx_s**2 / mx + c.ly_s**2 / my)
        return base * np.sqrt(c.L_xy**2 / (mx * my) + 1)
    if kind in (BoundKind.UNBOUNDED_D2, BoundKind.UNBOUNDED_SGM):
        mu = _need(min(c.mu_x, c.mu_y), "min(mu_x, mu_y)")
        k = c.kappa
        if kind is BoundKind.UNBOUNDED_D2:
            return c.C * k**2 / (n * mu**2)
        return c.C * k**4 / (n * mu)
    if kind is BoundKind.COROLLARY_WGM:
        reg = default_regularizer_corollary(c, n)
        kind = BoundKind.REG_WGM
    if kind is BoundKind.REG_WGM:
        mx = _need(c.mu_x + reg.nu_x, "mu_x + nu_x")
        my = _need(c.mu_y + reg.nu_y, "mu_y + nu_y")
        return 2 * c.lx_w**2 / (n * mx) + 2 * c.ly_w**2 / (n * my) + 2 * reg.bound_r
    if kind in (BoundKind.STABILITY_RHS_SC, BoundKind.STABILITY_RHS_REG):
        nx = reg.nu_x if kind is BoundKind.STABILITY_RHS_REG else 0.0
        ny = reg.nu_y if kind is BoundKind.STABILITY_RHS_REG else 0.0
        mx = _need(c.mu_x + nx, "mu_x + nu_x")
        my = _need(c.mu_y + ny, "mu_y + nu_y")
        return stability_rhs(n, 2 * c.lx_s, 2 * c.ly_s, mx, my)
    raise InvalidArgumentError(f"unknown bound kind {kind!r}")


def stability_rhs(n, lx_sum, ly_sum, mx, my) -> float:
    """``(1/n) sqrt(lx_sum^2 / mx + ly_sum^2 / my)`` with summed per-sample constants."""
    return float(np.sqrt(lx_sum**2 / mx + ly_sum**2 / my) / n)
