"""Direct checks of leave-one-out stability and the supporting Lipschitz and distance bounds."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import ConvergenceError, InvalidArgumentError, UnsupportedError
from .metrics import population_saddle, solve_objective
from .parallel import pmap
from .problems import Regularizer, empirical_objective, leave_one_out_swap, stream
from .solver import Side, SolverConfig, best_response

log = logging.getLogger(__name__)


def random_point(s, rng: np.random.Generator) -> np.ndarray:
    """A random feasible point (Gaussian on unbounded sets)."""
    if isinstance(s, geo.Unbounded):
        return rng.standard_normal(s.dim)
    if isinstance(s, geo.LinfBox):
        return rng.uniform(-s.radius, s.radius, s.dim)
    if isinstance(s, geo.Simplex):
        return rng.dirichlet(np.ones(s.dim))
    if isinstance(s, geo.OccupancySet):
        z = rng.dirichlet(np.ones(s.dim))
        return geo.argmax_entropic(s, np.log(z), 1.0)
    raise UnsupportedError(f"no sampler for {s!r}")


@dataclass
class StabilityTrial:
    lhs: float
    rhs: float
    i: int
    seeds: tuple
    slack: float = 0.0
    valid: bool = True
    reason: str = ""

    @property
    def passes(self) -> bool:
        return self.lhs <= self.rhs + self.slack


def run_loo_trial(
    problem,
    n: int,
    reg: Regularizer | None,
    i: int,
    seeds: tuple,
    solver_config: SolverConfig | None = None,
    replacement=None,
) -> StabilityTrial:
    """Solve on a sample set and on its copy with entry ``i`` redrawn, then compare.

    ``seeds = (master_seed, trial)`` keys both the sample set and the
    replacement draw.
    """
    reg = reg or Regularizer.none()
    mx = problem.constants.mu_x + reg.nu_x
    my = problem.constants.mu_y + reg.nu_y
    if not (mx > 0 and my > 0):
        raise InvalidArgumentError("stability check needs mu + nu > 0 in both blocks")
    config = solver_config or SolverConfig(gap_tol=1e-12)
    gap_tol = config.gap_tol if config.gap_tol is not None else 1e-8
    samples = problem.sample_set(n, *seeds)
    if replacement is None:
        replacement = problem.draw(stream(*seeds, 0x5A), 1)[0]
    swapped = leave_one_out_swap(samples, i, replacement)

    s1 = solve_objective(empirical_objective(problem, samples, reg), config)
    s2 = solve_objective(empirical_objective(problem, swapped, reg), config)
    trial = StabilityTrial(0.0, 0.0, i, tuple(seeds), slack=10 * gap_tol)
    if not (s1.converged and s2.converged):
        trial.valid = False
        trial.reason = f"inner solve not converged (gaps {s1.certified_gap:.2e}, {s2.certified_gap:.2e})"
        log.info("trial %s excluded: %s", seeds, trial.reason)
        return trial

    xh, yh, xi, yi = s1.x_hat, s1.y_hat, s2.x_hat, s2.y_hat
    trial.lhs = float(np.sqrt(mx * problem.norm_x(xh - xi) ** 2 + my * problem.norm_y(yh - yi) ** 2))
    p_old = problem.datum_payload(samples[i])
    p_new = problem.datum_payload(replacement)
    lx = problem.lipschitz_x(p_old, yi) + problem.lipschitz_x(p_new, yh)
    ly = problem.lipschitz_y(p_old, xi) + problem.lipschitz_y(p_new, xh)
    trial.rhs = float(np.sqrt(lx**2 / mx + ly**2 / my) / n)
    return trial


def _trial_job(args):
    problem, n, reg, t, seed, config = args
    return run_loo_trial(problem, n, reg, t % n, (seed, t), config)


def run_loo_suite(problem, n, reg, trials, master_seed=0, solver_config=None, threads=1) -> list:
    jobs = [(problem, n, reg, t, master_seed, solver_config) for t in range(trials)]
    return pmap(_trial_job, jobs, threads)


@dataclass
class LipschitzReport:
    violations: int = 0
    max_ratio: float = 0.0
    bound: float = float("nan")
    checked: int = 0
    skipped: int = 0
    details: dict = field(default_factory=dict)


MIN_SEPARATION = 1e-8


def _pair_ratios(pairs, s_fixed, respond, norm_in, norm_out, bound, slack, rng):
    rep = LipschitzReport(bound=bound)
    for _ in range(pairs):
        a, b = random_point(s_fixed, rng), random_point(s_fixed, rng)
        sep = norm_in(a - b)
        if sep < MIN_SEPARATION:
            rep.skipped += 1
            continue
        try:
            ra, rb = respond(a), respond(b)
        except (ConvergenceError, UnsupportedError):
            rep.skipped += 1
            continue
        ratio = norm_out(ra - rb) / sep
        rep.checked += 1
        rep.max_ratio = max(rep.max_ratio, ratio)
        if ratio > bound + slack:
            rep.violations += 1
    return rep


def check_argmap_lipschitz(problem, pairs: int, seed=0, slack=1e-6):
    """Best-response maps are ``L_xy/mu``-Lipschitz; returns (x-map report, y-map report)."""
    c = problem.constants
    if not (c.mu_x > 0 and c.mu_y > 0):
        raise InvalidArgumentError("argmap check needs strong convexity and concavity")
    pop = problem.population_objective()
    rng = stream(seed, 0x1E5)
    rx = _pair_ratios(
        pairs, problem.set_y, lambda y: best_response(pop, y, Side.MINIMIZE_X)[0],
        problem.norm_y, problem.norm_x, c.L_xy / c.mu_x, slack, rng,
    )
    ry = _pair_ratios(
        pairs, problem.set_x, lambda x: best_response(pop, x, Side.MAXIMIZE_Y)[0],
        problem.norm_x, problem.norm_y, c.L_xy / c.mu_y, slack, rng,
    )
    return rx, ry


def _fd_grad(f, z, h):
    g = np.empty_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def check_primal_smoothness(problem, pairs: int, seed=0, slack=1e-6, h=1e-6):
    """Finite-difference gradients of ``f = max_y Phi`` and ``g = min_x Phi`` vs ``L_f``, ``L_g``.

    Returns (primal report, dual report).
    """
    c = problem.constants
    if not (c.mu_x > 0 and c.mu_y > 0):
        raise InvalidArgumentError("smoothness check needs strong convexity and concavity")
    pop = problem.population_objective()
    f = lambda x: best_response(pop, x, Side.MAXIMIZE_Y)[1]
    g = lambda y: best_response(pop, y, Side.MINIMIZE_X)[1]
    lf = c.L_x + c.L_xy**2 / c.mu_y
    lg = c.L_y + c.L_xy**2 / c.mu_x
    rng = stream(seed, 0x5300)
    l2 = geo.NormTag.L2
    rp = _pair_ratios(pairs, problem.set_x, lambda x: _fd_grad(f, x, h), l2, l2, lf, slack, rng)
    rd = _pair_ratios(pairs, problem.set_y, lambda y: _fd_grad(g, y, h), l2, l2, lg, slack, rng)
    return rp, rd


@dataclass
class DistanceReport:
    violations_x: int = 0
    violations_y: int = 0
    replications: int = 0
    mean_grad_x_sq: float = 0.0
    mean_grad_y_sq: float = 0.0
    rhs_x: float = float("nan")
    rhs_y: float = float("nan")
    mean_d2: float = 0.0
    values: list = field(default_factory=list)

    @property
    def moments_hold(self) -> bool:
        return self.mean_grad_x_sq <= self.rhs_x and self.mean_grad_y_sq <= self.rhs_y


def _distance_job(args):
    problem, n, r, seed, xs, ys, slack = args
    obj = empirical_objective(problem, problem.sample_set(n, seed, n, r))
    sol = solve_objective(obj)
    c = problem.constants
    yn, _ = best_response(obj, xs, Side.MAXIMIZE_Y)
    xn, _ = best_response(obj, ys, Side.MINIMIZE_X)
    gx = obj.smooth_grad_x(xs, yn)
    gy = obj.smooth_grad_y(xn, ys)
    dx = float(np.sum((sol.x_hat - xs) ** 2))
    dy = float(np.sum((sol.y_hat - ys) ** 2))
    ok_x = dx <= 4 / c.mu_x**2 * float(gx @ gx) + slack
    ok_y = dy <= 4 / c.mu_y**2 * float(gy @ gy) + slack
    return dx, dy, float(gx @ gx), float(gy @ gy), ok_x, ok_y


def check_distance_inequalities(problem, n, replications, seed=0, slack=1e-12, threads=1) -> DistanceReport:
    """Distance-to-population bounds on an unconstrained quadratic, per replication.

    Also compares the replication means of the squared empirical gradients at
    the population saddle with their second-moment bounds.
    """
    if not (isinstance(problem.set_x, geo.Unbounded) and isinstance(problem.set_y, geo.Unbounded)):
        raise InvalidArgumentError("distance check needs unbounded sets")
    c = problem.constants
    xs, ys = population_saddle(problem)
    jobs = [(problem, n, r, seed, xs, ys, slack) for r in range(replications)]
    rows = pmap(_distance_job, jobs, threads)
    rep = DistanceReport(replications=replications, values=rows)
    rep.violations_x = sum(not r[4] for r in rows)
    rep.violations_y = sum(not r[5] for r in rows)
    rep.mean_grad_x_sq = float(np.mean([r[2] for r in rows]))
    rep.mean_grad_y_sq = float(np.mean([r[3] for r in rows]))
    rep.mean_d2 = float(np.mean([r[0] + r[1] for r in rows]))
    ex, ey = problem.gradient_second_moments(xs, ys)
    rep.rhs_x = (8 * c.L_xy**2 / c.mu_y**2 * ey + 2 * ex) / n
    rep.rhs_y = (8 * c.L_xy**2 / c.mu_x**2 * ex + 2 * ey) / n
    return rep
