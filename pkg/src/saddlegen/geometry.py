"""Norms, feasible sets and the projection / prox primitives used by the solvers.

All functions here are pure and operate on 1-d float arrays.  Occupancy
vectors are stored flattened in state-major order, ``y[s * num_actions + a]``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError, UnsupportedError

LOG_FLOOR = 1e-300


class NormTag(enum.Enum):
    L2 = "l2"
    L1 = "l1"
    LINF = "linf"

    @property
    def dual(self) -> "NormTag":
        return _DUAL[self]

    def __call__(self, v) -> float:
        v = np.asarray(v, dtype=float).ravel()
        if self is NormTag.L2:
            return float(np.sqrt(v @ v))
        if self is NormTag.L1:
            return float(np.abs(v).sum())
        return float(np.abs(v).max()) if v.size else 0.0


_DUAL = {NormTag.L2: NormTag.L2, NormTag.L1: NormTag.LINF, NormTag.LINF: NormTag.L1}


def dual_maximizer(u, norm: NormTag) -> np.ndarray:
    """Return ``v`` with ``norm.dual(v) == 1`` and ``<u, v> == norm(u)``."""
    u = np.asarray(u, dtype=float)
    v = np.zeros_like(u)
    if not np.any(u):
        return v
    if norm is NormTag.L2:
        u = u / np.max(np.abs(u))  # rescale first so tiny inputs do not underflow
        return u / np.linalg.norm(u)
    if norm is NormTag.L1:
        return np.sign(u)
    i = int(np.argmax(np.abs(u)))
    v[i] = np.sign(u[i])
    return v


# ---------------------------------------------------------------------------
# Feasible sets


@dataclass(frozen=True)
class LinfBox:
    radius: float
    dim: int

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgumentError(f"box radius must be positive, got {self.radius}")
        if self.dim < 1:
            raise InvalidArgumentError("box dimension must be >= 1")

    def contains(self, z, tol=1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        return z.shape == (self.dim,) and bool(np.all(np.abs(z) <= self.radius + tol))

    def center(self) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True)
class Simplex:
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError("simplex dimension must be >= 1")

    def contains(self, z, tol=1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        return z.shape == (self.dim,) and bool(np.all(z >= -tol)) and abs(z.sum() - 1.0) <= tol

    def center(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)


@dataclass(frozen=True)
class MarginalWindow:
    """``{y : low <= sum_a y[s, a] <= high for every s}``; a Dykstra component."""

    num_states: int
    num_actions: int
    low: float
    high: float

    @property
    def dim(self) -> int:
        return self.num_states * self.num_actions

    def contains(self, z, tol=1e-9) -> bool:
        m = np.asarray(z, dtype=float).reshape(self.num_states, self.num_actions).sum(axis=1)
        return bool(np.all(m >= self.low - tol) and np.all(m <= self.high + tol))


@dataclass(frozen=True)
class OccupancySet:
    num_states: int
    num_actions: int
    marginal_low: float
    marginal_high: float

    def __post_init__(self):
        S = self.num_states
        if S < 1 or self.num_actions < 1:
            raise InvalidArgumentError("occupancy set needs at least one state and action")
        if not (0 < self.marginal_low <= 1.0 / S <= self.marginal_high):
            raise InvalidArgumentError(
                f"need 0 < low <= 1/|S| <= high, got low={self.marginal_low}, "
                f"high={self.marginal_high}, |S|={S}"
            )

    @property
    def dim(self) -> int:
        return self.num_states * self.num_actions

    def components(self):
        return [
            Simplex(self.dim),
            MarginalWindow(self.num_states, self.num_actions, self.marginal_low, self.marginal_high),
        ]

    def contains(self, z, tol=1e-9) -> bool:
        return all(c.contains(z, tol) for c in self.components())

    def center(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)


@dataclass(frozen=True)
class Unbounded:
    dim: int

    def contains(self, z, tol=1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        return z.shape == (self.dim,) and bool(np.all(np.isfinite(z)))

    def center(self) -> np.ndarray:
        return np.zeros(self.dim)


FeasibleSet = LinfBox | Simplex | OccupancySet | Unbounded | MarginalWindow

SIMPLEX_LIKE = (Simplex, OccupancySet)


def is_bounded(s) -> bool:
    return not isinstance(s, (Unbounded, MarginalWindow))


def _check_dim(s, point) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    if p.shape != (s.dim,):
        raise InvalidArgumentError(f"point has shape {p.shape}, set has dimension {s.dim}")
    return p


# ---------------------------------------------------------------------------
# Euclidean projections


def project_simplex(v) -> np.ndarray:
    """Sort-and-threshold projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _project_window(s: MarginalWindow, v) -> np.ndarray:
    # Shifting each state's block equally is the L2-nearest way to fix its marginal.
    y = np.asarray(v, dtype=float).reshape(s.num_states, s.num_actions)
    m = y.sum(axis=1)
    shift = (np.clip(m, s.low, s.high) - m) / s.num_actions
    return (y + shift[:, None]).ravel()


def _project_rows_to_mass(W, c) -> np.ndarray:
    # row-wise sort-and-threshold onto {z >= 0, sum z = c_i}
    U = -np.sort(-W, axis=1)
    css = np.cumsum(U, axis=1) - c[:, None]
    ind = np.arange(1, W.shape[1] + 1)
    rho = np.count_nonzero(U - css / ind > 0, axis=1)
    theta = css[np.arange(W.shape[0]), rho - 1] / rho
    return np.maximum(W - theta[:, None], 0.0)


def _occupancy_mass(y, t, low, high):
    # each row: nearest z >= 0 with low <= sum(z) <= high, after shifting by t
    w = y - t
    z = np.maximum(w, 0.0)
    m = z.sum(axis=1)
    clamp = (m > high) | (m < low)
    if clamp.any():
        c = np.where(m[clamp] > high, high, low)
        z[clamp] = _project_rows_to_mass(w[clamp], c)
    return z, float(z.sum())


def _project_occupancy(s: "OccupancySet", v) -> np.ndarray:
    """Exact L2 projection: one global shift ``t`` plus a per-state mass clamp.

    Total mass is nonincreasing and piecewise linear in ``t``; bisection
    locates the active piece and one secant step on it lands on the root.
    """
    y = np.asarray(v, dtype=float).reshape(s.num_states, s.num_actions)
    low, high = s.marginal_low, s.marginal_high
    lo, hi = float(y.min()) - 1.0, float(y.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _occupancy_mass(y, mid, low, high)[1] > 1.0:
            lo = mid
        else:
            hi = mid
    z_lo, m_lo = _occupancy_mass(y, lo, low, high)
    z_hi, m_hi = _occupancy_mass(y, hi, low, high)
    if m_lo == m_hi:
        return z_lo.ravel()
    t = lo + (m_lo - 1.0) * (hi - lo) / (m_lo - m_hi)
    z, m = _occupancy_mass(y, t, low, high)
    # a secant across a kink can miss by rounding; one more step fixes it
    free = [row > 0 for row, mass in zip(z, z.sum(axis=1)) if low < mass < high]
    k = int(sum(f.sum() for f in free))
    if k and m != 1.0:
        z, _ = _occupancy_mass(y, t + (m - 1.0) / k, low, high)
    return z.ravel()


def _project_component(s, v) -> np.ndarray:
    if isinstance(s, Simplex):
        return project_simplex(v)
    if isinstance(s, LinfBox):
        return np.clip(v, -s.radius, s.radius)
    if isinstance(s, MarginalWindow):
        return _project_window(s, v)
    if isinstance(s, Unbounded):
        return np.array(v, dtype=float)
    if isinstance(s, OccupancySet):
        return _project_occupancy(s, v)
    raise InvalidArgumentError(f"unknown set {s!r}")


def project_euclidean(s, point) -> np.ndarray:
    """L2-nearest point of ``s``; exact for every supported set."""
    return _project_component(s, _check_dim(s, point))


def dykstra_project(sets, point, tolerance=1e-10, max_iter=10000) -> np.ndarray:
    """Project onto the intersection of convex ``sets`` with Dykstra's algorithm."""
    if not tolerance > 0:
        raise InvalidArgumentError("tolerance must be positive")
    x = np.asarray(point, dtype=float).copy()
    for s in sets:
        _check_dim(s, x)
    if len(sets) == 1:
        return _project_component(sets[0], x)

    increments = [np.zeros_like(x) for _ in sets]
    residual = np.inf
    for _ in range(max_iter):
        x_prev = x
        for k, s in enumerate(sets):
            z = _project_component(s, x + increments[k])
            increments[k] = x + increments[k] - z
            x = z
        change = float(np.max(np.abs(x - x_prev)))
        # The last projection is exact, so only earlier components can be violated.
        residual = max(
            float(np.max(np.abs(x - _project_component(s, x)))) for s in sets[:-1]
        )
        if change <= tolerance and residual <= tolerance:
            return x
    raise ConvergenceError(
        "Dykstra projection did not converge; the intersection may be empty", residual
    )


# ---------------------------------------------------------------------------
# Entropy geometry


def entropy_mirror_step(point, gradient, stepsize) -> np.ndarray:
    """Multiplicative-weights update ``p_i ∝ p_i exp(-stepsize * g_i)``."""
    p = np.asarray(point, dtype=float)
    g = np.asarray(gradient, dtype=float)
    if p.shape != g.shape:
        raise InvalidArgumentError("point and gradient shapes differ")
    if not stepsize > 0:
        raise InvalidArgumentError("stepsize must be positive")
    if np.any(p <= 0):
        raise InvalidArgumentError("entropy step needs a strictly positive point")
    z = np.log(np.maximum(p, LOG_FLOOR)) - stepsize * g
    z -= z.max()
    w = np.exp(z)
    out = w / w.sum()
    # exp underflow can produce exact zeros; keep the iterate in the relative interior
    return np.maximum(out, LOG_FLOOR)


def negentropy(z) -> float:
    z = np.asarray(z, dtype=float)
    pos = z[z > 0]
    return float(np.sum(pos * np.log(pos)))


def _softmax(v):
    v = v - v.max()
    w = np.exp(v)
    return w / w.sum()


def _logsumexp(v):
    m = v.max()
    return m + np.log(np.exp(v - m).sum())


def _window_masses(log_w, low, high):
    """Solve ``sum_s clip(t * w_s, low, high) = 1`` exactly; ``log_w`` are log-weights."""
    log_lo, log_hi = np.log(low), np.log(high)
    breaks = np.sort(np.concatenate([log_lo - log_w, log_hi - log_w]))

    def masses(log_t):
        return np.clip(np.exp(np.minimum(log_t + log_w, 0.0)), low, high)

    totals = np.array([masses(b).sum() for b in breaks])
    k = int(np.searchsorted(totals, 1.0))
    if k == 0:
        return masses(breaks[0])
    if k >= breaks.size:
        return masses(breaks[-1])
    # On (breaks[k-1], breaks[k]) each coordinate is either clamped or linear in t.
    mid = 0.5 * (breaks[k - 1] + breaks[k])
    m_mid = np.exp(mid + log_w)
    free = (m_mid > low) & (m_mid < high)
    fixed = np.where(m_mid <= low, low, high)
    fixed_total = fixed[~free].sum()
    if not np.any(free):
        return masses(breaks[k])
    wf = log_w[free]
    shift = wf.max()
    t = (1.0 - fixed_total) / np.exp(wf - shift).sum()
    m = fixed.copy()
    m[free] = t * np.exp(wf - shift)
    return np.clip(m, low, high)


def argmax_entropic(s, c, beta) -> np.ndarray:
    """``argmax_{z in s} <c, z> - beta * sum z log z`` for a simplex-like set."""
    c = np.asarray(c, dtype=float)
    if not beta > 0:
        raise InvalidArgumentError("entropy weight must be positive")
    if isinstance(s, Simplex):
        return np.maximum(_softmax(c / beta), LOG_FLOOR)
    if isinstance(s, OccupancySet):
        S, A = s.num_states, s.num_actions
        cs = c.reshape(S, A) / beta
        q = np.exp(cs - cs.max(axis=1, keepdims=True))
        q /= q.sum(axis=1, keepdims=True)
        lse = np.array([_logsumexp(row) for row in cs])
        m = _window_masses(lse - lse.max(), s.marginal_low, s.marginal_high)
        return np.maximum((m[:, None] * q).ravel(), LOG_FLOOR)
    raise UnsupportedError(f"entropy geometry is only defined on simplex-like sets, not {s!r}")


def argmax_linear(s, c) -> np.ndarray:
    """A maximizer of ``<c, z>`` over ``s`` (ties broken by lowest index)."""
    c = np.asarray(c, dtype=float)
    if isinstance(s, Simplex):
        z = np.zeros(s.dim)
        z[int(np.argmax(c))] = 1.0
        return z
    if isinstance(s, LinfBox):
        return s.radius * np.where(c >= 0, 1.0, -1.0) * (c != 0)
    if isinstance(s, OccupancySet):
        S, A = s.num_states, s.num_actions
        cs = c.reshape(S, A)
        best_a = np.argmax(cs, axis=1)
        g = cs[np.arange(S), best_a]
        m = np.full(S, s.marginal_low)
        left = 1.0 - m.sum()
        for st in np.argsort(-g, kind="stable"):
            add = min(s.marginal_high - m[st], left)
            m[st] += add
            left -= add
        y = np.zeros((S, A))
        y[np.arange(S), best_a] = m
        return y.ravel()
    if isinstance(s, Unbounded):
        if np.any(c):
            raise UnsupportedError("linear objective is unbounded over an unbounded set")
        return np.zeros(s.dim)
    raise InvalidArgumentError(f"unknown set {s!r}")


# ---------------------------------------------------------------------------
# Diameters


def _window_max_sumsq(S, low, high):
    m = np.full(S, low)
    left = 1.0 - S * low
    for k in range(S):
        add = min(high - low, left)
        m[k] += add
        left -= add
    return float(m @ m), float(m.max())


def _window_vertices(S, low, high):
    verts = []
    for pattern in itertools.product((0, 1, 2), repeat=S):
        free = [k for k, p in enumerate(pattern) if p == 2]
        if len(free) > 1:
            continue
        m = np.array([low if p == 0 else high for p in pattern], dtype=float)
        if free:
            m[free[0]] = 0.0
            m[free[0]] = 1.0 - m.sum()
            if not (low - 1e-12 <= m[free[0]] <= high + 1e-12):
                continue
        elif abs(m.sum() - 1.0) > 1e-12:
            continue
        verts.append(m)
    return verts


def set_diameter(s, norm: NormTag) -> float:
    """``sup_{u, v in s} norm(u - v)``."""
    if isinstance(s, (Unbounded, MarginalWindow)):
        raise UnsupportedError("diameter of an unbounded set")
    if isinstance(s, LinfBox):
        d, b = s.dim, s.radius
        return {NormTag.L2: 2 * b * np.sqrt(d), NormTag.L1: 2 * b * d, NormTag.LINF: 2 * b}[norm]
    if isinstance(s, Simplex):
        if s.dim == 1:
            return 0.0
        return {NormTag.L2: np.sqrt(2.0), NormTag.L1: 2.0, NormTag.LINF: 1.0}[norm]
    if isinstance(s, OccupancySet):
        S, A = s.num_states, s.num_actions
        lo, hi = s.marginal_low, s.marginal_high
        if A >= 2:
            # Two occupancies with the same extreme marginal on disjoint actions.
            sumsq, top = _window_max_sumsq(S, lo, hi)
            return {NormTag.L2: np.sqrt(2 * sumsq), NormTag.L1: 2.0, NormTag.LINF: top}[norm]
        if S > 12:
            raise UnsupportedError("single-action occupancy diameter limited to 12 states")
        verts = _window_vertices(S, lo, hi)
        return max(norm(u - v) for u in verts for v in verts)
    raise InvalidArgumentError(f"unknown set {s!r}")
