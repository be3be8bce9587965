import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saddlegen.errors import InvalidArgumentError
from saddlegen.metrics import MetricKind, corollary_regularizer
from saddlegen.problems import make_bilinear_game, make_quadratic_scsc
from saddlegen.rates import (
    RateRow,
    RateSweep,
    bound_dominance,
    default_bounds,
    fit_loglog_slope,
    fit_sweep,
    run_rate_sweep,
)


def test_fit_examples():
    f = fit_loglog_slope([(10, 0.1), (100, 0.01), (1000, 0.001)])
    assert f.slope == pytest.approx(-1.0, abs=1e-12) and f.r_squared == pytest.approx(1.0)
    assert fit_loglog_slope([(10, 0.3), (100, 0.3)]).slope == pytest.approx(0.0, abs=1e-12)
    assert fit_loglog_slope([(4, 1), (16, 0.5), (64, 0.25)]).slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_excludes_nonpositive():
    f = fit_loglog_slope([(10, 0.1), (20, -1e-9), (100, 0.01), (1000, 0.0)])
    assert f.used == 2 and f.excluded == 2
    assert fit_loglog_slope([(10, 1e-12), (100, 0.01), (1000, 0.001)], floor=1e-10).excluded == 1


def test_fit_too_few_points():
    with pytest.raises(InvalidArgumentError):
        fit_loglog_slope([(10, 0.1), (100, 0.0)])


@given(st.floats(-3, 1), st.floats(1e-3, 1e3), st.lists(st.integers(1, 10**6), min_size=2, max_size=8, unique=True))
def test_fit_exact_power_law(slope, c, ns):
    f = fit_loglog_slope([(n, c * n**slope) for n in ns])
    assert f.slope == pytest.approx(slope, abs=1e-8)
    assert 0.0 <= f.r_squared <= 1.0


def test_synthetic_sweep_fit():
    rows = [RateRow(n, "wgm", 2.0 / n, 0.0, np.nan, 10, 0) for n in (10, 100, 1000)]
    f = fit_sweep(RateSweep(rows, "t", 10, 0), MetricKind.WGM)
    assert f.slope == pytest.approx(-1.0) and f.r_squared == pytest.approx(1.0) and not f.degenerate


def test_zero_noise_sweep_degenerate():
    p = make_quadratic_scsc(2, 2, np.eye(2) * 0.3, 1.0, 1.0, 0.0, seed=1, radius_x=1.0, radius_y=1.0)
    sweep = run_rate_sweep(p, [4, 8, 16], 3, [MetricKind.SGM])
    assert all(r.mean <= 1e-7 for r in sweep.rows)
    assert fit_sweep(sweep, MetricKind.SGM, floor=5e-7).degenerate


def test_sweep_rows_and_bounds():
    p = make_quadratic_scsc(2, 2, [[0.3, 0.1], [0.0, 0.2]], 1.0, 1.0, 1.0, seed=2, radius_x=1.5, radius_y=1.5)
    sweep = run_rate_sweep(p, [8, 32], 20, [MetricKind.WGM, MetricKind.SGM, MetricKind.D2], master_seed=5)
    assert [(r.n, r.metric) for r in sweep.rows] == [(8, "wgm"), (8, "sgm"), (8, "d2"), (32, "wgm"), (32, "sgm"), (32, "d2")]
    assert all(np.isfinite(r.bound) for r in sweep.rows)
    assert all(r.mean >= -4 * r.std_error for r in sweep.rows)
    assert bound_dominance(sweep.rows, 3)


def test_sweep_determinism():
    p = make_bilinear_game(3, 3, seed=1)
    a = run_rate_sweep(p, [8, 16], 4, [MetricKind.WGM], corollary_regularizer, master_seed=7, threads=1)
    b = run_rate_sweep(p, [8, 16], 4, [MetricKind.WGM], corollary_regularizer, master_seed=7, threads=2)
    assert [(r.mean, r.std_error, r.bound) for r in a.rows] == [(r.mean, r.std_error, r.bound) for r in b.rows]


def test_sweep_grid_validation():
    p = make_quadratic_scsc(1, 1, [[1.0]], 1.0, 1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        run_rate_sweep(p, [], 2, [MetricKind.D2])
    with pytest.raises(InvalidArgumentError):
        run_rate_sweep(p, [8, 8], 2, [MetricKind.D2])


def test_failed_row_aborts_sweep():
    p = make_quadratic_scsc(1, 1, [[1.0]], 1.0, 1.0, 1.0)
    sweep = run_rate_sweep(p, [4, 8], 1, [MetricKind.D2])  # one replication cannot give an SE
    assert sweep.failed and sweep.rows == [] and "n=4" in sweep.error


def test_default_bounds_regimes():
    bounded = make_quadratic_scsc(1, 1, [[1.0]], 1.0, 1.0, 1.0, radius_x=1.0, radius_y=1.0)
    assert set(default_bounds(bounded)) == {MetricKind.WGM, MetricKind.SGM, MetricKind.D2}
    unbounded = make_quadratic_scsc(1, 1, [[1.0]], 1.0, 1.0, 1.0)
    assert set(default_bounds(unbounded)) == {MetricKind.SGM, MetricKind.D2}
    game = make_bilinear_game(2, 2)
    assert set(default_bounds(game, corollary_regularizer)) == {MetricKind.WGM}
    assert default_bounds(game) == {}


def test_bound_dominance_rule():
    rows = [RateRow(8, "wgm", 1.0, 0.1, 0.75, 5, 0), RateRow(16, "wgm", 1.0, 0.1, np.nan, 5, 0)]
    assert not bound_dominance(rows, 2)
    assert bound_dominance(rows, 3)
