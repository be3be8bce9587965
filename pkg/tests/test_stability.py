import numpy as np
import pytest

from saddlegen.errors import InvalidArgumentError
from saddlegen.metrics import corollary_regularizer, stability_rhs
from saddlegen.problems import Regularizer, make_bilinear_game, make_quadratic_scsc
from saddlegen.stability import (
    check_argmap_lipschitz,
    check_distance_inequalities,
    check_primal_smoothness,
    run_loo_suite,
    run_loo_trial,
)


def quad(noise=1.0, C=None, bounded=True, seed=3):
    C = np.array([[0.5, -0.3], [0.2, 0.4], [-0.1, 0.3]]) if C is None else C
    r = 1.5 if bounded else None
    return make_quadratic_scsc(C.shape[0], C.shape[1], C, 1.0, 1.0, noise, seed=seed, radius_x=r, radius_y=r)


def test_rhs_formula_unit_values():
    # four per-sample Lipschitz values equal to 1, unit moduli, n = 10
    assert stability_rhs(10, 1 + 1, 1 + 1, 1.0, 1.0) == pytest.approx(0.28284271, abs=1e-8)


def test_identity_swap_gives_zero_lhs():
    p = quad()
    samples = p.sample_set(20, 5, 0)
    t = run_loo_trial(p, 20, None, 3, (5, 0), replacement=samples[3])
    assert t.valid and t.lhs == 0.0 and t.passes


def test_zero_noise_lhs_zero():
    p = quad(noise=0.0)
    for i in range(5):
        t = run_loo_trial(p, 10, None, i, (1, i))
        assert t.valid and t.lhs <= 1e-9


def test_rhs_uses_per_sample_constants():
    p = quad()
    t = run_loo_trial(p, 10, None, 2, (4, 1))
    # rhs can never exceed the worst-case version built from the strong constants
    c = p.constants
    assert 0 <= t.rhs <= stability_rhs(10, 2 * c.lx_s, 2 * c.ly_s, c.mu_x, c.mu_y) + 1e-15


def test_loo_suite_sc_small():
    trials = run_loo_suite(quad(), 20, None, 30, master_seed=9)
    assert all(t.valid for t in trials)
    assert sum(not t.passes for t in trials) == 0
    assert [t.i for t in trials[:3]] == [0, 1, 2]


def test_loo_suite_regularized_game_small():
    g = make_bilinear_game(3, 3, seed=2)
    reg = corollary_regularizer(g, 20)
    trials = run_loo_suite(g, 20, reg, 20, master_seed=1)
    assert all(t.valid for t in trials)
    assert sum(not t.passes for t in trials) == 0


def test_loo_needs_moduli():
    g = make_bilinear_game(2, 2, seed=0)
    with pytest.raises(InvalidArgumentError):
        run_loo_trial(g, 5, Regularizer.none(), 0, (0, 0))


def test_argmap_decoupled_zero():
    rx, ry = check_argmap_lipschitz(quad(C=np.zeros((3, 2))), 50, seed=1)
    assert rx.max_ratio == 0.0 and ry.max_ratio == 0.0 and rx.violations == ry.violations == 0


def test_argmap_scalar_exact_ratio():
    p = make_quadratic_scsc(1, 1, [[0.7]], 2.0, 1.0, 1.0, mean_a=[0.1], mean_b=[0.2])
    rx, ry = check_argmap_lipschitz(p, 100, seed=2)
    assert rx.max_ratio == pytest.approx(0.7 / 2.0, rel=1e-9)
    assert ry.max_ratio == pytest.approx(0.7 / 1.0, rel=1e-9)
    assert rx.violations == ry.violations == 0


def test_argmap_bounded_no_violations():
    rx, ry = check_argmap_lipschitz(quad(), 200, seed=3)
    assert rx.violations == ry.violations == 0 and rx.checked == 200


def test_smoothness_scalar_envelope():
    p = make_quadratic_scsc(1, 1, [[1.0]], 1.0, 1.0, 1.0, mean_a=[0.1], mean_b=[0.2])
    rp, rd = check_primal_smoothness(p, 100, seed=4)
    assert rp.bound == pytest.approx(p.constants.L_x + 1.0)
    assert rp.violations == rd.violations == 0
    # unconstrained: f is quadratic with curvature mu_x + C^2/mu_y, exactly the envelope
    assert rp.max_ratio == pytest.approx(2.0, rel=1e-4)


def test_smoothness_decoupled():
    p = quad(C=np.zeros((3, 2)), bounded=False)
    rp, rd = check_primal_smoothness(p, 50, seed=5)
    assert rp.max_ratio == pytest.approx(p.constants.L_x, rel=1e-4)
    assert rp.violations == 0


def test_separation_filter_skips_coincident_points():
    # a one-point set makes every sampled pair coincide
    from saddlegen.geometry import Simplex
    from saddlegen.stability import _pair_ratios
    from saddlegen.geometry import NormTag

    rep = _pair_ratios(10, Simplex(1), lambda z: z, NormTag.L2, NormTag.L2, 1.0, 0.0, np.random.default_rng(0))
    assert rep.skipped == 10 and rep.checked == 0


def test_distance_zero_noise():
    rep = check_distance_inequalities(quad(noise=0.0, bounded=False), 8, 5)
    assert rep.mean_d2 == pytest.approx(0.0, abs=1e-24)
    assert rep.mean_grad_x_sq == pytest.approx(0.0, abs=1e-24)
    assert rep.violations_x == rep.violations_y == 0


def test_distance_scalar_single_sample():
    # n = 1: x-hat - x* follows from a perturbed linear system; the bound holds with slack
    p = make_quadratic_scsc(1, 1, [[1.0]], 1.0, 1.0, 1.0, mean_a=[1.0], mean_b=[0.0])
    rep = check_distance_inequalities(p, 1, 50, seed=1)
    assert rep.violations_x == rep.violations_y == 0
    for dx, dy, gx2, gy2, _, _ in rep.values:
        assert dx <= 4 * gx2 + 1e-12 and dy <= 4 * gy2 + 1e-12


def test_distance_requires_unbounded():
    with pytest.raises(InvalidArgumentError):
        check_distance_inequalities(quad(), 4, 2)


def test_distance_moments_hold():
    rep = check_distance_inequalities(quad(bounded=False), 64, 100, seed=2)
    assert rep.violations_x == rep.violations_y == 0
    assert rep.moments_hold
