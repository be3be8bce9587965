"""Sample-size sweeps, log-log slope fits and bound comparisons."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import InvalidArgumentError
from .metrics import (
    BoundKind,
    MetricKind,
    corollary_regularizer,
    measure,
    population_saddle,
    solve_replications,
    theoretical_bound,
)

CSV_HEADER = ("n", "metric", "mean", "std_error", "bound", "replications", "seed")


@dataclass
class RateRow:
    n: int
    metric: str
    mean: float
    std_error: float
    bound: float
    replications: int
    seed: int
    extra: dict = field(default_factory=dict)


@dataclass
class RateSweep:
    rows: list
    problem_tag: str
    replications: int
    master_seed: int
    failed: bool = False
    error: str = ""

    def metric_rows(self, metric) -> list:
        name = metric.value if isinstance(metric, MetricKind) else str(metric)
        return [r for r in self.rows if r.metric == name]


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    used: int = 0
    excluded: int = 0
    degenerate: bool = False


def fit_loglog_slope(points, floor: float = 0.0) -> RateFit:
    """OLS of ``log value`` on ``log n``; values ``<= floor`` are dropped and counted."""
    pts = [(float(n), float(v)) for n, v in points]
    keep = [(n, v) for n, v in pts if v > max(floor, 0.0) and n > 0]
    if len(keep) < 2:
        raise InvalidArgumentError(f"need at least 2 positive points above the floor, got {len(keep)}")
    lx = np.log([n for n, _ in keep])
    ly = np.log([v for _, v in keep])
    if np.ptp(lx) == 0:
        raise InvalidArgumentError("all points share the same n")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - float(resid @ resid) / ss_tot)
    return RateFit(float(slope), float(intercept), min(r2, 1.0), len(keep), len(pts) - len(keep))


def fit_sweep(sweep: RateSweep, metric, floor: float = 0.0) -> RateFit:
    """Fit one metric of a sweep; too few usable rows gives a degenerate fit, not an error."""
    rows = sweep.metric_rows(metric)
    try:
        return fit_loglog_slope([(r.n, r.mean) for r in rows], floor)
    except InvalidArgumentError:
        return RateFit(float("nan"), float("nan"), float("nan"), 0, len(rows), True)


def _sc_bound(kind, constants, n):
    return theoretical_bound(kind, constants, None, n)


def _d2_from_wgm(constants, n):
    # SC-SC: mu/2 * E d^2 <= WGM, so the WGM bound caps E d^2 at 2/mu times it.
    mu = min(constants.mu_x, constants.mu_y)
    return 2.0 / mu * theoretical_bound(BoundKind.WGM_SC, constants, None, n)


def _corollary_bound(constants, n):
    return theoretical_bound(BoundKind.COROLLARY_WGM, constants, None, n)


def _nan_bound(n):
    return float("nan")


def default_bounds(problem, regularizer_rule=None) -> dict:
    """Map each metric to a callable ``n -> bound`` matching the problem's regime."""
    c = problem.constants
    if regularizer_rule is corollary_regularizer:
        return {MetricKind.WGM: functools.partial(_corollary_bound, c)}
    out = {}
    if c.mu_x > 0 and c.mu_y > 0:
        unbounded = isinstance(problem.set_x, geo.Unbounded) and isinstance(problem.set_y, geo.Unbounded)
        if unbounded:
            out[MetricKind.D2] = functools.partial(_sc_bound, BoundKind.UNBOUNDED_D2, c)
            out[MetricKind.SGM] = functools.partial(_sc_bound, BoundKind.UNBOUNDED_SGM, c)
        else:
            out[MetricKind.WGM] = functools.partial(_sc_bound, BoundKind.WGM_SC, c)
            out[MetricKind.SGM] = functools.partial(_sc_bound, BoundKind.SGM_SC, c)
            out[MetricKind.D2] = functools.partial(_d2_from_wgm, c)
    return out


def run_rate_sweep(
    problem,
    n_grid,
    replications,
    metric_kinds,
    regularizer_rule=None,
    solver_config=None,
    master_seed=0,
    bounds: dict | None = None,
    threads=1,
    problem_tag="",
) -> RateSweep:
    """One row per ``(n, metric)``; all metrics at a given ``n`` share the same solves."""
    n_grid = [int(n) for n in n_grid]
    if not n_grid:
        raise InvalidArgumentError("n grid is empty")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise InvalidArgumentError("n grid must be strictly increasing")
    if isinstance(metric_kinds, MetricKind):
        metric_kinds = [metric_kinds]
    bounds = default_bounds(problem, regularizer_rule) if bounds is None else bounds
    saddle = population_saddle(problem) if MetricKind.D2 in metric_kinds else None
    sweep = RateSweep([], problem_tag or type(problem).__name__, replications, master_seed)
    for n in n_grid:
        try:
            sols = solve_replications(problem, n, replications, regularizer_rule, solver_config, master_seed, threads)
            for m in metric_kinds:
                est = measure(problem, sols, m, n, saddle)
                b = bounds.get(m, _nan_bound)(n)
                sweep.rows.append(RateRow(n, m.value, est.mean, est.std_error, float(b), replications, master_seed))
        except Exception as exc:  # a failed row aborts the sweep; keep what we have
            sweep.failed = True
            sweep.error = f"n={n}: {exc}"
            break
    return sweep


def bound_dominance(rows, k_se: float = 3.0) -> bool:
    return all(r.mean <= r.bound + k_se * r.std_error for r in rows if np.isfinite(r.bound))
