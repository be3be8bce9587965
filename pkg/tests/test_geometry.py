import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from saddlegen import geometry as geo
from saddlegen.errors import InvalidArgumentError, UnsupportedError
from saddlegen.stability import random_point

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def vectors(dim):
    return arrays(np.float64, dim, elements=finite)


# -- norms ------------------------------------------------------------------


def test_dual_pairing_table():
    assert geo.NormTag.L1.dual is geo.NormTag.LINF
    assert geo.NormTag.LINF.dual is geo.NormTag.L1
    assert geo.NormTag.L2.dual is geo.NormTag.L2


@given(vectors(5), vectors(5), st.sampled_from(list(geo.NormTag)))
def test_dual_norm_holder(u, v, norm):
    assert abs(u @ v) <= norm(u) * norm.dual(v) + 1e-9


@given(vectors(4), st.sampled_from(list(geo.NormTag)))
def test_dual_maximizer_attains(v, norm):
    # maximizer of <v, u> over the dual unit ball attains the primal norm
    u = geo.dual_maximizer(v, norm)
    assert norm.dual(u) <= 1 + 1e-12
    assert u @ v == pytest.approx(norm(v), abs=1e-9)


# -- projections ------------------------------------------------------------


def test_project_simplex_examples():
    np.testing.assert_allclose(geo.project_euclidean(geo.Simplex(2), [0.8, 0.8]), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(geo.project_euclidean(geo.LinfBox(1.0, 2), [2.0, -0.5]), [1.0, -0.5])


def _qp_oracle(v):
    # independent oracle: scipy SLSQP on the simplex
    from scipy.optimize import minimize

    n = len(v)
    res = minimize(lambda z: 0.5 * np.sum((z - v) ** 2), np.full(n, 1 / n), jac=lambda z: z - v,
                   bounds=[(0, None)] * n, constraints=[{"type": "eq", "fun": lambda z: z.sum() - 1}],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
    return res.x


def test_project_simplex_against_qp_oracle():
    v = np.array([0.1, 0.3, 0.2])
    expected = np.array([0.1 + 0.4 / 3, 0.3 + 0.4 / 3, 0.2 + 0.4 / 3])  # frozen: 0.2333..., 0.4333..., 0.3333...
    np.testing.assert_allclose(_qp_oracle(v), expected, atol=1e-7)
    np.testing.assert_allclose(geo.project_euclidean(geo.Simplex(3), v), expected, atol=1e-14)


@given(vectors(6))
def test_project_simplex_matches_oracle_random(v):
    np.testing.assert_allclose(geo.project_simplex(v), _qp_oracle(v), atol=1e-6)


def test_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        geo.project_euclidean(geo.Simplex(3), [1.0, 0.0])


def test_dykstra_examples():
    np.testing.assert_allclose(geo.dykstra_project([geo.Simplex(2)], [0.5, 0.5]), [0.5, 0.5])
    np.testing.assert_allclose(geo.dykstra_project([geo.Simplex(2), geo.LinfBox(1.0, 2)], [0.8, 0.8]), [0.5, 0.5])
    occ = geo.OccupancySet(2, 1, 0.4, 0.6)
    np.testing.assert_allclose(geo.project_euclidean(occ, [0.9, 0.1]), [0.6, 0.4], atol=1e-10)
    np.testing.assert_allclose(geo.dykstra_project(occ.components(), [0.9, 0.1]), [0.6, 0.4], atol=1e-9)


def test_dykstra_empty_intersection():
    with pytest.raises(Exception) as info:
        geo.dykstra_project([geo.Simplex(2), geo.LinfBox(0.1, 2)], [0.3, 0.3], max_iter=500)
    assert hasattr(info.value, "residual")


def test_occupancy_validation():
    with pytest.raises(InvalidArgumentError):
        geo.OccupancySet(2, 2, 0.6, 0.7)  # low above 1/S


SETS = [
    geo.Simplex(4),
    geo.LinfBox(1.5, 3),
    geo.OccupancySet(3, 2, 0.2, 0.5),
    geo.OccupancySet(2, 3, 0.45, 0.55),
]


@pytest.mark.parametrize("s", SETS, ids=lambda s: type(s).__name__)
def test_projection_idempotent_and_optimal(s):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        p = rng.normal(scale=2.0, size=s.dim)
        q = geo.project_euclidean(s, p)
        assert s.contains(q, 1e-9)
        np.testing.assert_allclose(geo.project_euclidean(s, q), q, atol=1e-12)
        other = random_point(s, rng)
        assert np.linalg.norm(p - q) <= np.linalg.norm(p - other) + 1e-9


def test_occupancy_projection_matches_cvx_oracle():
    cvxpy = pytest.importorskip("cvxpy")
    s = geo.OccupancySet(3, 2, 0.2, 0.5)
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = rng.normal(size=6)
        z = cvxpy.Variable(6)
        marg = cvxpy.hstack([z[2 * i] + z[2 * i + 1] for i in range(3)])
        cvxpy.Problem(cvxpy.Minimize(cvxpy.sum_squares(z - p)),
                      [z >= 0, cvxpy.sum(z) == 1, marg >= 0.2, marg <= 0.5]).solve()
        np.testing.assert_allclose(geo.project_euclidean(s, p), z.value, atol=1e-5)


# -- entropy steps ----------------------------------------------------------


def test_entropy_step_examples():
    np.testing.assert_allclose(geo.entropy_mirror_step([0.5, 0.5], [0.0, 0.0], 3.0), [0.5, 0.5])
    np.testing.assert_allclose(geo.entropy_mirror_step([0.5, 0.5], [1.0, 0.0], np.log(2)), [1 / 3, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(geo.entropy_mirror_step(np.full(5, 0.2), np.full(5, 7.0), 0.3), np.full(5, 0.2))


def test_entropy_step_rejects_nonpositive():
    with pytest.raises(InvalidArgumentError):
        geo.entropy_mirror_step([1.0, 0.0], [0.0, 0.0], 1.0)


@given(arrays(np.float64, 5, elements=st.floats(0.01, 1)), arrays(np.float64, 5, elements=st.floats(-1e4, 1e4)),
       st.floats(1e-3, 50))
def test_entropy_step_simplex_output(p, g, eta):
    p = p / p.sum()
    out = geo.entropy_mirror_step(p, g, eta)
    assert np.all(np.isfinite(out))
    assert abs(out.sum() - 1) <= 1e-12
    assert np.all(out > 0)


@pytest.mark.parametrize("s", [geo.Simplex(4), geo.OccupancySet(3, 2, 0.2, 0.5)], ids=["simplex", "occupancy"])
def test_argmax_entropic_matches_scipy(s):
    # max <c, z> - beta * sum z log z over the set, checked with SLSQP
    from scipy.optimize import minimize

    rng = np.random.default_rng(5)
    beta = 0.7
    c = rng.normal(size=s.dim)
    z = geo.argmax_entropic(s, c, beta)
    assert s.contains(z, 1e-9)
    f = lambda v: -(c @ v - beta * np.sum(v * np.log(np.maximum(v, 1e-300))))
    cons = [{"type": "eq", "fun": lambda v: v.sum() - 1}]
    if isinstance(s, geo.OccupancySet):
        M = np.kron(np.eye(s.num_states), np.ones(s.num_actions))
        cons += [{"type": "ineq", "fun": lambda v: M @ v - s.marginal_low},
                 {"type": "ineq", "fun": lambda v: s.marginal_high - M @ v}]
    ref = minimize(f, s.center(), bounds=[(1e-12, 1)] * s.dim, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 1000}).x
    assert f(z) <= f(ref) + 1e-9
    np.testing.assert_allclose(z, ref, atol=1e-4)


# -- diameters --------------------------------------------------------------


def test_diameters():
    assert geo.set_diameter(geo.Simplex(7), geo.NormTag.L1) == pytest.approx(2.0)
    assert geo.set_diameter(geo.LinfBox(1.5, 4), geo.NormTag.L2) == pytest.approx(2 * 1.5 * 2)
    assert geo.set_diameter(geo.Simplex(2), geo.NormTag.L2) == pytest.approx(np.sqrt(2))


def test_unbounded_diameter_unsupported():
    with pytest.raises(UnsupportedError):
        geo.set_diameter(geo.Unbounded(3), geo.NormTag.L2)


@pytest.mark.parametrize("norm", list(geo.NormTag))
def test_occupancy_diameter_dominates_samples(norm):
    s = geo.OccupancySet(3, 2, 0.2, 0.5)
    d = geo.set_diameter(s, norm)
    rng = np.random.default_rng(0)
    best = max(norm(random_point(s, rng) - random_point(s, rng)) for _ in range(2000))
    assert best <= d + 1e-12
