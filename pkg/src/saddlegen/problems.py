"""Stochastic saddle-point problem families, sample sets and empirical objectives.

Every family here has an objective that is affine in the sample payload, so
the empirical objective over a sample set is the family objective evaluated at
the *mean* payload.  Families also expose each block as an isotropic quadratic
plus a linear term,

    Phi(., y) = (q/2)||x||^2 - <c, x> + const      (block_x)
    Phi(x, .) = -(q/2)||y||^2 + <c, y> + const     (block_y)

which is what lets the solver compute exact best responses and certified gaps.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog

from . import geometry as geo
from .errors import InvalidArgumentError, UnsupportedError
from .geometry import LinfBox, NormTag, Simplex, Unbounded


def stream(seed, *keys) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *keys)``.

    Independent of call order, so replication ``r`` can be drawn on any worker.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class ProblemConstants:
    mu_x: float
    mu_y: float
    lx_w: float
    ly_w: float
    lx_s: float
    ly_s: float
    L_x: float
    L_y: float
    L_xy: float
    D_x: float
    D_y: float
    C: float
    # True when some Lipschitz constant is a sampled estimate, not a proven bound.
    estimated: bool = False

    @property
    def kappa(self) -> float:
        mu = min(self.mu_x, self.mu_y)
        if mu <= 0:
            return float("inf")
        return max(self.L_x, self.L_y, self.L_xy) / mu


@dataclass(frozen=True)
class SampleSet:
    """``n`` i.i.d. sample payloads stacked along axis 0."""

    data: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.data[i]


def leave_one_out_swap(samples: SampleSet, i: int, replacement) -> SampleSet:
    """Copy of ``samples`` with entry ``i`` replaced by ``replacement``."""
    if not 0 <= i < samples.n:
        raise InvalidArgumentError(f"index {i} out of range for n={samples.n}")
    data = samples.data.copy()
    data[i] = replacement
    return SampleSet(data, samples.seed)


# ---------------------------------------------------------------------------
# Regularizers


class RegKind(enum.Enum):
    NONE = "none"
    QUADRATIC_QUADRATIC = "quadratic-quadratic"
    QUADRATIC_ENTROPY = "quadratic-entropy"
    ENTROPY_ENTROPY = "entropy-entropy"

    @property
    def blocks(self):
        return {
            RegKind.NONE: (None, None),
            RegKind.QUADRATIC_QUADRATIC: ("quadratic", "quadratic"),
            RegKind.QUADRATIC_ENTROPY: ("quadratic", "entropy"),
            RegKind.ENTROPY_ENTROPY: ("entropy", "entropy"),
        }[self]


def _sup_half_sq(s) -> float:
    if isinstance(s, LinfBox):
        return 0.5 * s.radius**2 * s.dim
    if isinstance(s, Simplex):
        return 0.5
    if isinstance(s, geo.OccupancySet):
        return 0.5 * geo._window_max_sumsq(s.num_states, s.marginal_low, s.marginal_high)[0]
    return float("inf")


def _term_value(kind, z) -> float:
    if kind == "quadratic":
        return 0.5 * float(z @ z)
    if kind == "entropy":
        return geo.negentropy(z)
    return 0.0


def _term_grad(kind, z) -> np.ndarray:
    if kind == "quadratic":
        return np.array(z, dtype=float)
    if kind == "entropy":
        return np.log(np.maximum(z, geo.LOG_FLOOR)) + 1.0
    return np.zeros_like(z, dtype=float)


@dataclass(frozen=True)
class Regularizer:
    """``Psi(x, y) = alpha_x h_x(x) - alpha_y h_y(y)``.

    ``h`` is ``||z||^2 / 2`` (quadratic) or ``sum z log z`` (entropy).  The
    entropy term is 1-strongly convex in L1 on the simplex, so ``nu = alpha``
    for both kinds.
    """

    kind: RegKind = RegKind.NONE
    alpha_x: float = 0.0
    alpha_y: float = 0.0
    nu_x: float = 0.0
    nu_y: float = 0.0
    bound_r: float = 0.0

    @classmethod
    def none(cls) -> "Regularizer":
        return cls()

    @classmethod
    def make(cls, kind: RegKind, alpha_x, alpha_y, set_x, set_y) -> "Regularizer":
        if alpha_x < 0 or alpha_y < 0:
            raise InvalidArgumentError("regularization weights must be nonnegative")
        kx, ky = kind.blocks
        bound = 0.0
        for k, a, s in ((kx, alpha_x, set_x), (ky, alpha_y, set_y)):
            if k is None or a == 0:
                continue
            if k == "quadratic":
                bound += a * _sup_half_sq(s)
            else:
                if not isinstance(s, geo.SIMPLEX_LIKE):
                    raise InvalidArgumentError("entropy regularizer needs a simplex-like set")
                bound += a * np.log(s.dim)
        return cls(kind, float(alpha_x), float(alpha_y), float(alpha_x), float(alpha_y), float(bound))

    @property
    def block_kinds(self):
        return self.kind.blocks

    def value(self, x, y) -> float:
        kx, ky = self.kind.blocks
        return self.alpha_x * _term_value(kx, x) - self.alpha_y * _term_value(ky, y)

    def grad_x(self, x) -> np.ndarray:
        return self.alpha_x * _term_grad(self.kind.blocks[0], x)

    def grad_y(self, y) -> np.ndarray:
        return -self.alpha_y * _term_grad(self.kind.blocks[1], y)


def default_regularizer_corollary(constants: ProblemConstants, n: int) -> Regularizer:
    """Quadratic regularizer with ``alpha = l^w / (sqrt(n) D)`` in each block."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    Dx, Dy = constants.D_x, constants.D_y
    if not (Dx > 0 and Dy > 0) or not (np.isfinite(Dx) and np.isfinite(Dy)):
        raise InvalidArgumentError("corollary regularizer needs finite positive diameters")
    ax = constants.lx_w / (np.sqrt(n) * Dx)
    ay = constants.ly_w / (np.sqrt(n) * Dy)
    bound = 0.5 * ax * Dx**2 + 0.5 * ay * Dy**2
    return Regularizer(RegKind.QUADRATIC_QUADRATIC, ax, ay, ax, ay, bound)


# ---------------------------------------------------------------------------
# Problem families


class StochasticSaddleProblem:
    """Base class; subclasses fill in the payload algebra and constants."""

    set_x = None
    set_y = None
    norm_x = NormTag.L2
    norm_y = NormTag.L2
    constants: ProblemConstants

    @property
    def dim_x(self) -> int:
        return self.set_x.dim

    @property
    def dim_y(self) -> int:
        return self.set_y.dim

    # payload algebra -------------------------------------------------------
    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def mean_payload(self, data: np.ndarray):
        raise NotImplementedError

    def datum_payload(self, datum):
        return self.mean_payload(np.asarray(datum)[None])

    def population_payload(self):
        return None

    def sample_set(self, n: int, seed: int, *keys) -> SampleSet:
        return SampleSet(self.draw(stream(seed, *keys), n), seed)

    # objective -------------------------------------------------------------
    def value(self, p, x, y) -> float:
        raise NotImplementedError

    def grad_x(self, p, x, y) -> np.ndarray:
        raise NotImplementedError

    def grad_y(self, p, x, y) -> np.ndarray:
        raise NotImplementedError

    def block_x(self, p, y):
        raise NotImplementedError

    def block_y(self, p, x):
        raise NotImplementedError

    # per-sample Lipschitz values, in the problem's norms --------------------
    def lipschitz_x(self, p, y) -> float:
        raise NotImplementedError

    def lipschitz_y(self, p, x) -> float:
        raise NotImplementedError

    def population_saddle_closed_form(self):
        return None

    def population_objective(self, reg: Regularizer | None = None) -> "SaddleObjective":
        p = self.population_payload()
        if p is None:
            raise UnsupportedError(f"{type(self).__name__} has no population objective")
        return SaddleObjective(self, p, reg or Regularizer.none())


def _box_sup_sq(k, m, s):
    """``E (k + |m + u|)^2`` for ``u ~ U[-s, s]``, elementwise."""
    am = np.abs(m)
    if s == 0:
        e_abs = am
    else:
        e_abs = np.where(am >= s, am, (m * m + s * s) / (2 * s))
    return k * k + 2 * k * e_abs + m * m + s * s / 3.0


def _vertices(s):
    if isinstance(s, LinfBox):
        if s.dim > 12:
            raise UnsupportedError("vertex enumeration limited to 12 box dimensions")
        return [s.radius * np.array(v) for v in itertools.product((-1.0, 1.0), repeat=s.dim)]
    if isinstance(s, Simplex):
        return list(np.eye(s.dim))
    raise UnsupportedError(f"no vertex enumeration for {s!r}")


@dataclass(eq=False)
class QuadraticSaddle(StochasticSaddleProblem):
    """``Phi_xi = (mu_x/2)|x|^2 - a.x - (mu_y/2)|y|^2 + b.y + x'Cy`` with L2 norms.

    ``a = mean_a + u``, ``b = mean_b + v`` with ``u, v`` uniform on
    ``[-noise_scale, noise_scale]`` coordinatewise.  Moduli may be zero here;
    use :func:`make_quadratic_scsc` for the validated SC-SC testbed.
    """

    coupling: np.ndarray
    mu_x: float
    mu_y: float
    mean_a: np.ndarray
    mean_b: np.ndarray
    noise_scale: float
    set_x: object = None
    set_y: object = None
    constants: ProblemConstants = field(init=False)

    def __post_init__(self):
        self.coupling = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        dx, dy = self.coupling.shape
        self.mean_a = np.asarray(self.mean_a, dtype=float).reshape(dx)
        self.mean_b = np.asarray(self.mean_b, dtype=float).reshape(dy)
        if self.set_x is None:
            self.set_x = Unbounded(dx)
        if self.set_y is None:
            self.set_y = Unbounded(dy)
        if self.set_x.dim != dx or self.set_y.dim != dy:
            raise InvalidArgumentError("set dimensions do not match the coupling matrix")
        self.constants = self._constants()

    # payload: concatenated (a, b)
    def draw(self, rng, n):
        dx, dy = self.coupling.shape
        u = rng.uniform(-1.0, 1.0, size=(n, dx + dy)) * self.noise_scale
        return np.concatenate([self.mean_a, self.mean_b])[None, :] + u

    def mean_payload(self, data):
        return np.asarray(data, dtype=float).mean(axis=0)

    def population_payload(self):
        return np.concatenate([self.mean_a, self.mean_b])

    def _split(self, p):
        dx = self.coupling.shape[0]
        return p[:dx], p[dx:]

    def value(self, p, x, y):
        a, b = self._split(p)
        return float(
            0.5 * self.mu_x * (x @ x) - a @ x - 0.5 * self.mu_y * (y @ y) + b @ y
            + x @ self.coupling @ y
        )

    def grad_x(self, p, x, y):
        a, _ = self._split(p)
        return self.mu_x * x - a + self.coupling @ y

    def grad_y(self, p, x, y):
        _, b = self._split(p)
        return -self.mu_y * y + b + self.coupling.T @ x

    def block_x(self, p, y):
        a, _ = self._split(p)
        return self.mu_x, a - self.coupling @ y

    def block_y(self, p, x):
        _, b = self._split(p)
        return self.mu_y, b + self.coupling.T @ x

    @staticmethod
    def _sup_grad_norm(s, mu, v):
        # sup over z in s of ||mu z - v||_2
        if mu == 0:
            return float(np.linalg.norm(v))
        if isinstance(s, LinfBox):
            return float(np.sqrt(np.sum((mu * s.radius + np.abs(v)) ** 2)))
        if isinstance(s, Simplex):
            return float(np.sqrt(max(v @ v - 2 * mu * v[i] + mu * mu for i in range(s.dim))))
        return float("inf")

    def lipschitz_x(self, p, y):
        a, _ = self._split(p)
        return self._sup_grad_norm(self.set_x, self.mu_x, a - self.coupling @ y)

    def lipschitz_y(self, p, x):
        _, b = self._split(p)
        return self._sup_grad_norm(self.set_y, self.mu_y, b + self.coupling.T @ x)

    def _lipschitz_pair(self, own_set, mu, mean, other_set, cross):
        """(l^w, l^s) for one block; ``cross`` maps the other block into this gradient."""
        s = self.noise_scale
        if isinstance(own_set, Unbounded) and mu > 0:
            return float("inf"), float("inf")
        if not np.any(cross):
            others = [np.zeros(cross.shape[1])]
        elif isinstance(other_set, Unbounded):
            return float("inf"), float("inf")
        else:
            others = _vertices(other_set)
        if isinstance(own_set, LinfBox) or mu == 0:
            k = mu * own_set.radius if isinstance(own_set, LinfBox) else 0.0
            w = max(float(np.sum(_box_sup_sq(k, mean - cross @ o, s))) for o in others)
            st = max(float(np.sum((k + np.abs(mean - cross @ o) + s) ** 2)) for o in others)
            return float(np.sqrt(w)), float(np.sqrt(st))
        raise UnsupportedError("closed-form Lipschitz constants need box or unbounded sets")

    def gradient_second_moments(self, x, y):
        """``(E|grad_x Phi_xi(x,y)|^2, E|grad_y Phi_xi(x,y)|^2)`` under the uniform noise law."""
        p = self.population_payload()
        dx, dy = self.coupling.shape
        gx, gy = self.grad_x(p, x, y), self.grad_y(p, x, y)
        v = self.noise_scale**2 / 3.0
        return float(gx @ gx + dx * v), float(gy @ gy + dy * v)

    def population_saddle_closed_form(self):
        """Stationary point of the population objective, if it is feasible."""
        C = self.coupling
        try:
            x, y = _solve_quadratic_stationarity(self.mu_x, self.mu_y, C, self.mean_a, self.mean_b)
        except UnsupportedError:
            return None
        if self.set_x.contains(x, 0.0) and self.set_y.contains(y, 0.0):
            return x, y
        return None

    def _constants(self):
        C = self.coupling
        lxw, lxs = self._lipschitz_pair(self.set_x, self.mu_x, self.mean_a, self.set_y, C)
        lyw, lys = self._lipschitz_pair(self.set_y, self.mu_y, self.mean_b, self.set_x, -C.T)
        dx, dy = C.shape
        variance = (dx + dy) * self.noise_scale**2 / 3.0
        sol = self.population_saddle_closed_form()
        grad_sq = 0.0 if sol is not None else float("nan")
        return ProblemConstants(
            mu_x=self.mu_x,
            mu_y=self.mu_y,
            lx_w=lxw,
            ly_w=lyw,
            lx_s=lxs,
            ly_s=lys,
            L_x=self.mu_x,
            L_y=self.mu_y,
            L_xy=float(np.linalg.norm(C, 2)),
            D_x=_diam(self.set_x, NormTag.L2),
            D_y=_diam(self.set_y, NormTag.L2),
            C=variance + grad_sq,
        )


def _diam(s, norm):
    return geo.set_diameter(s, norm) if geo.is_bounded(s) else float("inf")


def _solve_quadratic_stationarity(mu_x, mu_y, C, a, b):
    """Solve ``mu_x x - a + C y = 0`` and ``-mu_y y + b + C'x = 0``."""
    dx, dy = C.shape
    K = np.block([[mu_x * np.eye(dx), C], [-C.T, mu_y * np.eye(dy)]])
    rhs = np.concatenate([a, b])
    if mu_x <= 0 or mu_y <= 0:
        raise UnsupportedError("stationarity system is singular without strong convexity")
    z = np.linalg.solve(K, rhs)
    return z[:dx], z[dx:]


def make_quadratic_scsc(
    dim_x,
    dim_y,
    coupling,
    mu_x,
    mu_y,
    noise_scale,
    seed=0,
    mean_a=None,
    mean_b=None,
    radius_x=None,
    radius_y=None,
) -> QuadraticSaddle:
    """SC-SC quadratic testbed; means default to ``U[-1, 1]`` draws from ``seed``."""
    if not (mu_x > 0 and mu_y > 0):
        raise InvalidArgumentError(f"moduli must be positive, got mu_x={mu_x}, mu_y={mu_y}")
    C = np.asarray(coupling, dtype=float).reshape(dim_x, dim_y)
    if noise_scale < 0:
        raise InvalidArgumentError("noise scale must be nonnegative")
    rng = stream(seed, 0xA)
    if mean_a is None:
        mean_a = rng.uniform(-1, 1, dim_x)
    if mean_b is None:
        mean_b = rng.uniform(-1, 1, dim_y)
    set_x = LinfBox(radius_x, dim_x) if radius_x is not None else Unbounded(dim_x)
    set_y = LinfBox(radius_y, dim_y) if radius_y is not None else Unbounded(dim_y)
    return QuadraticSaddle(C, float(mu_x), float(mu_y), mean_a, mean_b, float(noise_scale), set_x, set_y)


@dataclass(frozen=True)
class PayoffLaw:
    """Bounded payoff noise around a mean matrix.

    ``kind="uniform"``: ``A_ij = mean_ij + U[-w_ij, w_ij]`` with
    ``w_ij = min(width, 1 - |mean_ij|)`` so ``|A_ij| <= 1`` without clipping
    the mean away.  ``kind="rademacher"``: ``A_ij = ±1`` with mean ``mean_ij``.
    When ``mean`` is None it is drawn uniformly from ``[-mean_scale, mean_scale]``.
    """

    mean: tuple | None = None
    kind: str = "uniform"
    width: float = 0.5
    mean_scale: float = 0.5


@dataclass(eq=False)
class BilinearGame(StochasticSaddleProblem):
    """``Phi_xi(x, y) = x' A_xi y`` over a product of simplices."""

    mean_payoff: np.ndarray
    law: PayoffLaw
    norm: NormTag = NormTag.L1
    constants: ProblemConstants = field(init=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.mean_payoff, dtype=float))
        if np.any(np.abs(A) > 1):
            raise InvalidArgumentError("payoff entries must satisfy |A_ij| <= 1")
        if self.law.kind not in ("uniform", "rademacher"):
            raise InvalidArgumentError(f"unknown payoff law {self.law.kind!r}")
        if self.law.width < 0:
            raise InvalidArgumentError("noise width must be nonnegative")
        self.mean_payoff = A
        self.set_x = Simplex(A.shape[0])
        self.set_y = Simplex(A.shape[1])
        self.norm_x = self.norm_y = self.norm
        self._width = np.minimum(self.law.width, 1.0 - np.abs(A))
        self.constants = self._constants()

    def draw(self, rng, n):
        A = self.mean_payoff
        if self.law.kind == "rademacher":
            u = rng.random(size=(n,) + A.shape)
            return np.where(u < (1.0 + A) / 2.0, 1.0, -1.0)
        return A[None] + rng.uniform(-1.0, 1.0, size=(n,) + A.shape) * self._width[None]

    def mean_payoff_variance(self):
        if self.law.kind == "rademacher":
            return 1.0 - self.mean_payoff**2
        return self._width**2 / 3.0

    def mean_payload(self, data):
        return np.asarray(data, dtype=float).mean(axis=0)

    def population_payload(self):
        return self.mean_payoff

    def value(self, p, x, y):
        return float(x @ p @ y)

    def grad_x(self, p, x, y):
        return p @ y

    def grad_y(self, p, x, y):
        return p.T @ x

    def block_x(self, p, y):
        return 0.0, -(p @ y)

    def block_y(self, p, x):
        return 0.0, p.T @ x

    def population_saddle_closed_form(self):
        """Exact Nash pair of the mean game from its two linear programs."""
        return solve_matrix_game(self.mean_payoff)

    def lipschitz_x(self, p, y):
        return self.norm_x.dual(p @ y)

    def lipschitz_y(self, p, x):
        return self.norm_y.dual(p.T @ x)

    def _constants(self):
        A = self.mean_payoff
        if self.norm is NormTag.L1:
            lxw = lyw = lxs = lys = 1.0
            lxy = float(np.abs(A).max())
        else:
            var = self.mean_payoff_variance()
            second = A**2 + var
            if self.law.kind == "rademacher":
                sup = np.ones_like(A)
            else:
                sup = (np.abs(A) + self._width) ** 2
            # sup over simplex vertices of a convex second moment
            lxw = float(np.sqrt(second.sum(axis=0).max()))
            lyw = float(np.sqrt(second.sum(axis=1).max()))
            lxs = float(np.sqrt(sup.sum(axis=0).max()))
            lys = float(np.sqrt(sup.sum(axis=1).max()))
            lxy = float(np.linalg.norm(A, 2))
        return ProblemConstants(
            mu_x=0.0,
            mu_y=0.0,
            lx_w=lxw,
            ly_w=lyw,
            lx_s=lxs,
            ly_s=lys,
            L_x=0.0,
            L_y=0.0,
            L_xy=lxy,
            D_x=geo.set_diameter(self.set_x, self.norm),
            D_y=geo.set_diameter(self.set_y, self.norm),
            C=float("nan"),
        )


def solve_matrix_game(A):
    """Optimal mixed strategies of ``min_x max_y x'Ay`` over simplices via HiGHS."""
    A = np.asarray(A, dtype=float)
    n1, n2 = A.shape

    def lp(M):
        # min v  s.t.  M' z <= v,  sum z = 1,  z >= 0
        k, m = M.shape
        res = linprog(
            c=np.r_[np.zeros(k), 1.0],
            A_ub=np.c_[M.T, -np.ones(m)],
            b_ub=np.zeros(m),
            A_eq=np.r_[np.ones(k), 0.0][None],
            b_eq=[1.0],
            bounds=[(0, None)] * k + [(None, None)],
            method="highs",
        )
        if res.status != 0:
            raise UnsupportedError(f"matrix game LP failed: {res.message}")
        z = np.maximum(res.x[:k], 0.0)
        return z / z.sum()

    return lp(A), lp(-A.T)


def make_bilinear_game(n1, n2, payoff_law: PayoffLaw | None = None, seed=0, norm=NormTag.L1) -> BilinearGame:
    if n1 < 2 or n2 < 2:
        raise InvalidArgumentError("each player needs at least two strategies")
    law = payoff_law or PayoffLaw()
    if law.mean is None:
        if not 0 <= law.mean_scale <= 1:
            raise InvalidArgumentError("mean_scale must lie in [0, 1]")
        mean = stream(seed, 0xB).uniform(-law.mean_scale, law.mean_scale, size=(n1, n2))
    else:
        mean = np.asarray(law.mean, dtype=float)
        if mean.shape != (n1, n2):
            raise InvalidArgumentError(f"mean payoff has shape {mean.shape}, expected {(n1, n2)}")
    return BilinearGame(mean, law, norm)


# ---------------------------------------------------------------------------
# Objectives


@dataclass
class SaddleObjective:
    """``Phi(payload; x, y) + Psi(x, y)`` for a fixed payload (empirical or population)."""

    problem: StochasticSaddleProblem
    payload: object
    regularizer: Regularizer = field(default_factory=Regularizer.none)
    samples: SampleSet | None = None

    @property
    def set_x(self):
        return self.problem.set_x

    @property
    def set_y(self):
        return self.problem.set_y

    def raw_value(self, x, y) -> float:
        return self.problem.value(self.payload, x, y)

    def value(self, x, y) -> float:
        return self.raw_value(x, y) + self.regularizer.value(x, y)

    def __call__(self, x, y) -> float:
        return self.value(x, y)

    def smooth_grad_x(self, x, y):
        return self.problem.grad_x(self.payload, x, y)

    def smooth_grad_y(self, x, y):
        return self.problem.grad_y(self.payload, x, y)

    def grad_x(self, x, y):
        return self.smooth_grad_x(x, y) + self.regularizer.grad_x(x)

    def grad_y(self, x, y):
        return self.smooth_grad_y(x, y) + self.regularizer.grad_y(y)

    def block_x(self, y):
        return self.problem.block_x(self.payload, y)

    def block_y(self, x):
        return self.problem.block_y(self.payload, x)

    def with_regularizer(self, reg: Regularizer) -> "SaddleObjective":
        return replace(self, regularizer=reg)

    def direct_value(self, x, y) -> float:
        """Mean of per-sample values plus Psi, by explicit summation."""
        if self.samples is None:
            raise UnsupportedError("population objective has no sample set")
        p = self.problem
        total = sum(p.value(p.datum_payload(d), x, y) for d in self.samples.data)
        return total / self.samples.n + self.regularizer.value(x, y)


EmpiricalObjective = SaddleObjective


def empirical_objective(problem, samples: SampleSet, reg: Regularizer | None = None) -> SaddleObjective:
    if samples.n == 0:
        raise InvalidArgumentError("empirical objective needs at least one sample")
    return SaddleObjective(problem, problem.mean_payload(samples.data), reg or Regularizer.none(), samples)
