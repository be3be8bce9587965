"""Average-reward MDPs as stochastic bilinear saddle problems.

The saddle objective is

    Phi(x, y) = sum_{s,a} y_sa (r_sa + (P_a x)_s - x_s)

with ``x`` a bias (difference-of-value) vector and ``y`` a state-action
occupancy measure flattened state-major.  A sample ``xi`` draws one successor
(and reward) for every state-action pair.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import geometry as geo
from .errors import ConvergenceError, InvalidArgumentError
from .parallel import pmap
from .problems import (
    ProblemConstants,
    Regularizer,
    RegKind,
    SampleSet,
    SaddleObjective,
    StochasticSaddleProblem,
    empirical_objective,
    stream,
)
from .rates import RateRow, RateSweep, fit_loglog_slope
from .solver import SolverConfig, solve_mirror_prox

log = logging.getLogger(__name__)

TAU_INFLATION = 1.05


@dataclass(frozen=True, eq=False)
class MdpInstance:
    transitions: np.ndarray  # (A, S, S), row-stochastic per action
    rewards: np.ndarray  # (S, A) in [0, 1]

    def __post_init__(self):
        P = np.asarray(self.transitions, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        if P.ndim != 3 or P.shape[1] != P.shape[2]:
            raise InvalidArgumentError(f"transitions must have shape (A, S, S), got {P.shape}")
        if r.shape != (P.shape[1], P.shape[0]):
            raise InvalidArgumentError(f"rewards must have shape (S, A) = {(P.shape[1], P.shape[0])}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1)) > 1e-12:
            raise InvalidArgumentError("each transition row must be a probability vector")
        if np.any(r < 0) or np.any(r > 1):
            raise InvalidArgumentError("rewards must lie in [0, 1]")
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", r)

    @property
    def num_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[0]


@dataclass(frozen=True)
class MdpConstants:
    t_mix: int
    tau: float
    policy_set_size: int = 0


class MdpPayload(NamedTuple):
    P: np.ndarray  # (A, S, S)
    r: np.ndarray  # (S, A)


@dataclass
class SampledTransitionSet:
    next_state: np.ndarray  # (S, A) int
    sampled_reward: np.ndarray  # (S, A)

    def as_datum(self) -> np.ndarray:
        return np.stack([self.next_state.astype(float), self.sampled_reward], axis=-1)

    @classmethod
    def from_datum(cls, d) -> "SampledTransitionSet":
        d = np.asarray(d)
        return cls(d[..., 0].astype(int), d[..., 1].copy())


def make_random_ergodic_mdp(num_states, num_actions, min_transition_prob, seed=0) -> MdpInstance:
    S, A = int(num_states), int(num_actions)
    if S < 1 or A < 1:
        raise InvalidArgumentError("need at least one state and one action")
    if not 0 < min_transition_prob <= 1.0 / S:
        raise InvalidArgumentError(f"min_transition_prob must lie in (0, 1/{S}], got {min_transition_prob}")
    rng = stream(seed, 0x3D9)
    free = 1.0 - S * min_transition_prob
    P = min_transition_prob + free * rng.dirichlet(np.ones(S), size=(A, S))
    P /= P.sum(axis=2, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(S, A))
    return MdpInstance(P, r)


# ---------------------------------------------------------------------------
# Chains and policies


def policy_chain(mdp: MdpInstance, policy) -> np.ndarray:
    """``P_pi(s, s') = sum_a pi(a|s) P_a(s, s')``."""
    pi = np.asarray(policy, dtype=float)
    return np.einsum("sa,ast->st", pi, mdp.transitions)


def stationary_distribution(P) -> np.ndarray:
    S = P.shape[0]
    M = P.T - np.eye(S)
    M[-1] = 1.0
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    try:
        lam = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("stationary system is singular (chain not ergodic)") from exc
    resid = float(np.max(np.abs(lam @ P - lam)))
    if resid > 1e-10 or np.any(lam <= 0):
        raise ConvergenceError("chain has no strictly positive stationary distribution", resid)
    return lam


def mixing_time(P, lam, max_t=100000) -> int:
    Pt = P.copy()
    for t in range(1, max_t + 1):
        if 0.5 * np.max(np.abs(Pt - lam[None]).sum(axis=1)) <= 0.25:
            return t
        Pt = Pt @ P
    raise ConvergenceError("mixing time exceeds limit")


def _deterministic_policies(S, A):
    for acts in itertools.product(range(A), repeat=S):
        pi = np.zeros((S, A))
        pi[np.arange(S), acts] = 1.0
        yield pi


def estimate_mixing_constants(mdp: MdpInstance, extra_random_policies=0, seed=0) -> MdpConstants:
    """Scan policies for the ergodicity constant ``tau`` and mixing time.

    These are lower bounds on the suprema over all stationary policies.
    """
    S, A = mdp.num_states, mdp.num_actions
    policies = []
    if A**S <= 4096:
        policies.extend(_deterministic_policies(S, A))
    rng = stream(seed, 0x7A0)
    policies.extend(rng.dirichlet(np.ones(A), size=S) for _ in range(extra_random_policies))
    if not policies:
        raise InvalidArgumentError("no policies scanned; request random policies for large MDPs")
    tau_root, t_mix = 1.0, 1
    for k, pi in enumerate(policies):
        P = policy_chain(mdp, pi)
        try:
            lam = stationary_distribution(P)
        except ConvergenceError as exc:
            raise ConvergenceError(f"policy #{k} ({pi.argmax(axis=1).tolist()}) is not ergodic", exc.residual) from exc
        tau_root = max(tau_root, S * lam.max(), 1.0 / (S * lam.min()))
        t_mix = max(t_mix, mixing_time(P, lam))
    return MdpConstants(int(t_mix), float(tau_root**2), len(policies))


def extract_policy(y_bar) -> np.ndarray:
    """Row-normalize an occupancy matrix (shape (S, A), or flat with ``num_actions`` implied)."""
    y = np.asarray(y_bar, dtype=float)
    if y.ndim != 2:
        raise InvalidArgumentError("occupancy must be an (S, A) matrix")
    m = y.sum(axis=1, keepdims=True)
    if np.any(m <= 0):
        raise InvalidArgumentError("a state has zero occupancy mass")
    return y / m


def evaluate_policy(mdp: MdpInstance, policy) -> float:
    pi = np.asarray(policy, dtype=float)
    lam = stationary_distribution(policy_chain(mdp, pi))
    return float(lam @ (pi * mdp.rewards).sum(axis=1))


@dataclass
class ExactSolution:
    v_star: float
    x_star: np.ndarray
    y_star: np.ndarray  # flattened (S*A)
    policy: np.ndarray


def solve_average_reward_exact(mdp: MdpInstance, tolerance=1e-12, max_iter=1_000_000) -> ExactSolution:
    """Relative value iteration, then the greedy policy's stationary occupancy.

    The bias is shifted so its range is centered at zero.
    """
    S, A = mdp.num_states, mdp.num_actions
    P, r = mdp.transitions, mdp.rewards
    # Iterate on the lazy chain (I + P_a)/2: same gain and optimal policies, bias
    # doubled, and aperiodic so the span contracts even for periodic chains.
    lazy = 0.5 * (P + np.eye(S)[None])
    h = np.zeros(S)
    span = np.inf
    for _ in range(max_iter):
        Th = (r + np.einsum("ast,t->sa", lazy, h)).max(axis=1)
        d = Th - h
        span = float(d.max() - d.min())
        h = Th - Th[0]
        if span <= tolerance:
            break
    else:
        raise ConvergenceError("relative value iteration did not converge; span", span)
    v = 0.5 * float(d.max() + d.min())
    h = 0.5 * h
    q = r + np.einsum("ast,t->sa", P, h)
    pi = np.zeros((S, A))
    pi[np.arange(S), q.argmax(axis=1)] = 1.0
    lam = stationary_distribution(policy_chain(mdp, pi))
    y = (lam[:, None] * pi).ravel()
    x = h - 0.5 * (h.max() + h.min())
    # complementarity and primal feasibility
    if abs(float(y @ r.ravel()) - v) > 10 * tolerance + 1e-13:
        raise ConvergenceError("complementarity check failed", abs(float(y @ r.ravel()) - v))
    slack = v + x[:, None] - r - np.einsum("ast,t->sa", P, x)
    if slack.min() < -10 * tolerance - 1e-13:
        raise ConvergenceError("primal feasibility check failed", float(-slack.min()))
    return ExactSolution(v, x, y, pi)


# ---------------------------------------------------------------------------
# Sampling and the saddle family


def _draw_transitions(mdp: MdpInstance, rng, n, reward_noise=0.0) -> np.ndarray:
    S, A = mdp.num_states, mdp.num_actions
    cum = np.cumsum(np.transpose(mdp.transitions, (1, 0, 2)), axis=2)  # (S, A, S)
    u = rng.random(size=(n, S, A))
    nxt = np.minimum((u[..., None] >= cum[None]).sum(axis=-1), S - 1)
    rew = np.broadcast_to(mdp.rewards, (n, S, A)).copy()
    if reward_noise > 0:
        rew += rng.uniform(-reward_noise, reward_noise, size=(n, S, A))
    return np.stack([nxt.astype(float), rew], axis=-1)


def sample_xi(mdp: MdpInstance, seed, *keys, reward_noise=0.0) -> SampledTransitionSet:
    d = _draw_transitions(mdp, stream(seed, *keys), 1, reward_noise)[0]
    return SampledTransitionSet.from_datum(d)


@dataclass(eq=False)
class MdpSaddle(StochasticSaddleProblem):
    """Bellman saddle family over ``LinfBox(2 t_mix) x OccupancySet``.

    ``mdp`` may be None when only samples are available; the population
    objective then is unavailable.
    """

    num_states: int
    num_actions: int
    mdp_constants: MdpConstants
    mdp: MdpInstance | None = None
    reward_noise: float = 0.0
    constants: ProblemConstants = field(init=False)

    def __post_init__(self):
        S, A = self.num_states, self.num_actions
        c = self.mdp_constants
        if c.t_mix < 1 or c.tau < 1:
            raise InvalidArgumentError("mixing constants must satisfy t_mix >= 1, tau >= 1")
        root = np.sqrt(TAU_INFLATION * c.tau)
        self.set_x = geo.LinfBox(2.0 * c.t_mix, S)
        self.set_y = geo.OccupancySet(S, A, 1.0 / (root * S), min(root / S, 1.0))
        self.norm_x = geo.NormTag.L2
        self.norm_y = geo.NormTag.L1
        ly = 1.0 + self.reward_noise + 2.0 * self.set_x.radius
        self.constants = ProblemConstants(
            mu_x=0.0,
            mu_y=0.0,
            lx_w=2.0,
            ly_w=ly,
            lx_s=2.0,
            ly_s=ly,
            L_x=0.0,
            L_y=0.0,
            L_xy=float("nan"),
            D_x=geo.set_diameter(self.set_x, geo.NormTag.L2),
            D_y=2.0,
            C=float("nan"),
            estimated=True,
        )

    def draw(self, rng, n):
        if self.mdp is None:
            raise InvalidArgumentError("cannot draw samples without an MDP instance")
        return _draw_transitions(self.mdp, rng, n, self.reward_noise)

    def mean_payload(self, data):
        data = np.asarray(data, dtype=float)
        n = data.shape[0]
        S, A = self.num_states, self.num_actions
        nxt = data[..., 0].astype(int)  # (n, S, A)
        P = np.zeros((A, S, S))
        s_idx = np.broadcast_to(np.arange(S)[None, :, None], nxt.shape)
        a_idx = np.broadcast_to(np.arange(A)[None, None, :], nxt.shape)
        np.add.at(P, (a_idx.ravel(), s_idx.ravel(), nxt.ravel()), 1.0)
        return MdpPayload(P / n, data[..., 1].mean(axis=0))

    def population_payload(self):
        if self.mdp is None:
            return None
        return MdpPayload(self.mdp.transitions, self.mdp.rewards)

    def _Y(self, y):
        return np.asarray(y).reshape(self.num_states, self.num_actions)

    def grad_y(self, p, x, y=None):
        Px = np.einsum("ast,t->sa", p.P, x)
        return (p.r + Px - x[:, None]).ravel()

    def grad_x(self, p, x, y):
        Y = self._Y(y)
        return -Y.sum(axis=1) + np.einsum("sa,ast->t", Y, p.P)

    def value(self, p, x, y):
        return float(np.asarray(y) @ self.grad_y(p, x))

    def block_x(self, p, y):
        return 0.0, -self.grad_x(p, None, y)

    def block_y(self, p, x):
        return 0.0, self.grad_y(p, x)

    def lipschitz_x(self, p, y):
        return float(np.linalg.norm(self.grad_x(p, None, y)))

    def lipschitz_y(self, p, x):
        # sup over the box of |r + P x - x|_inf
        return float(np.max(np.abs(p.r)) + 2.0 * self.set_x.radius)


def mdp_regularizer(problem: MdpSaddle, n: int) -> Regularizer:
    S, A = problem.num_states, problem.num_actions
    if S * A == 1:
        raise InvalidArgumentError("|S||A| = 1 makes the entropy weight undefined (log 1 = 0)")
    c = problem.mdp_constants
    ax = c.tau**1.5 / (np.sqrt(n) * S * c.t_mix)
    ay = c.t_mix / np.sqrt(n * np.log(S * A))
    return Regularizer.make(RegKind.QUADRATIC_ENTROPY, ax, ay, problem.set_x, problem.set_y)


def build_mdp_resp(samples, constants: MdpConstants, n: int | None = None, mdp: MdpInstance | None = None, reward_noise=0.0) -> SaddleObjective:
    """Regularized empirical Bellman saddle objective for a list or set of samples."""
    if isinstance(samples, SampleSet):
        data = samples.data
    else:
        data = np.array([s.as_datum() if isinstance(s, SampledTransitionSet) else s for s in samples])
    if data.shape[0] < 1:
        raise InvalidArgumentError("need at least one sample")
    n = data.shape[0] if n is None else n
    if n != data.shape[0]:
        raise InvalidArgumentError(f"n={n} does not match {data.shape[0]} samples")
    S, A = data.shape[1], data.shape[2]
    problem = MdpSaddle(S, A, constants, mdp, reward_noise)
    return empirical_objective(problem, SampleSet(data), mdp_regularizer(problem, n))


# ---------------------------------------------------------------------------
# Experiment


def identity_residual(problem: MdpSaddle, exact: ExactSolution, x_bar, y_bar) -> float:
    """``|(v* - <y_bar, r + (P - I) x*>) - (Phi(x_bar, y*) - Phi(x*, y_bar))|``."""
    p = problem.population_payload()
    lhs = exact.v_star - problem.value(p, exact.x_star, y_bar)
    rhs = problem.value(p, x_bar, exact.y_star) - problem.value(p, exact.x_star, y_bar)
    return abs(lhs - rhs)


def _mdp_replication(args):
    problem, exact, n, r, seed, config = args
    samples = problem.sample_set(n, seed, n, r)
    obj = empirical_objective(problem, samples, mdp_regularizer(problem, n))
    sol = solve_mirror_prox(obj, config)
    pi = extract_policy(sol.y_hat.reshape(problem.num_states, problem.num_actions))
    regret = exact.v_star - evaluate_policy(problem.mdp, pi)
    return regret, identity_residual(problem, exact, sol.x_hat, sol.y_hat), sol.converged, sol.certified_gap


MDP_CSV_HEADER = ("n", "metric", "mean", "std_error", "bound", "replications", "seed", "identity_residual")


def run_mdp_experiment(
    mdp: MdpInstance,
    n_grid,
    replications,
    master_seed=0,
    constants: MdpConstants | None = None,
    exact: ExactSolution | None = None,
    solver_config: SolverConfig | None = None,
    threads=1,
    reward_noise=0.0,
) -> RateSweep:
    """Regret ``v* - v^pi_bar`` of the policy read off the regularized empirical saddle."""
    constants = constants or estimate_mixing_constants(mdp)
    exact = exact or solve_average_reward_exact(mdp)
    problem = MdpSaddle(mdp.num_states, mdp.num_actions, constants, mdp, reward_noise)
    if not problem.set_x.contains(exact.x_star, 0.0):
        log.warning("centered bias leaves the box of radius %g", problem.set_x.radius)
    sweep = RateSweep([], "mdp", replications, master_seed)
    for n in n_grid:
        jobs = [(problem, exact, int(n), r, master_seed, solver_config) for r in range(replications)]
        out = pmap(_mdp_replication, jobs, threads)
        regrets = np.array([o[0] for o in out])
        resid = np.array([o[1] for o in out])
        se = float(regrets.std(ddof=1) / np.sqrt(replications)) if replications > 1 else float("nan")
        row = RateRow(int(n), "regret", float(regrets.mean()), se, float("nan"), replications, master_seed)
        row.extra = {
            "identity_residual": float(resid.max()),
            "min_regret": float(regrets.min()),
            "unconverged": int(sum(not o[2] for o in out)),
            "max_gap": float(max(o[3] for o in out)),
        }
        sweep.rows.append(row)
    return sweep


def check_moment_envelopes(mdp: MdpInstance, constants: MdpConstants, num_points=20, draws=2000, seed=0) -> dict:
    """Monte Carlo second moments of the sampled gradients against their envelopes.

    Returns the two ratios measured / envelope-scale, with scales
    ``tau^3 / |S|`` (x gradient, L2) and ``(1 + 4 t_mix)^2`` (y gradient, L_inf).
    """
    from .stability import random_point

    problem = MdpSaddle(mdp.num_states, mdp.num_actions, constants, mdp)
    rng = stream(seed, 0x9209)
    data = problem.draw(rng, draws)
    payloads = [problem.datum_payload(d) for d in data]
    worst_x = 0.0
    worst_y = 0.0
    for _ in range(num_points):
        y = random_point(problem.set_y, rng)
        x = random_point(problem.set_x, rng)
        worst_x = max(worst_x, float(np.mean([np.sum(problem.grad_x(p, x, y) ** 2) for p in payloads])))
        worst_y = max(worst_y, float(np.mean([np.max(np.abs(problem.grad_y(p, x))) ** 2 for p in payloads])))
    S = mdp.num_states
    return {
        "x_moment": worst_x,
        "x_scale": constants.tau**3 / S,
        "x_ratio": worst_x / (constants.tau**3 / S),
        "y_moment": worst_y,
        "y_scale": (1 + 4 * constants.t_mix) ** 2,
        "y_ratio": worst_y / (1 + 4 * constants.t_mix) ** 2,
    }


# ---------------------------------------------------------------------------
# Plain-text matrix format


def dump_mdp(mdp: MdpInstance) -> str:
    """Row-major text: header, one block per action, then the reward matrix."""
    S, A = mdp.num_states, mdp.num_actions
    lines = [f"mdp {S} {A}"]
    for a in range(A):
        lines.append(f"action {a}")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in mdp.transitions[a])
    lines.append("rewards")
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in mdp.rewards)
    return "\n".join(lines) + "\n"


def load_mdp(text: str) -> MdpInstance:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        tag, S, A = lines[0].split()
        S, A = int(S), int(A)
        if tag != "mdp":
            raise ValueError("missing 'mdp' header")
        P = np.zeros((A, S, S))
        k = 1
        for a in range(A):
            if lines[k] != f"action {a}":
                raise ValueError(f"expected 'action {a}' at data line {k + 1}")
            P[a] = [[float(v) for v in lines[k + 1 + s].split()] for s in range(S)]
            k += S + 1
        if lines[k] != "rewards":
            raise ValueError(f"expected 'rewards' at data line {k + 1}")
        r = np.array([[float(v) for v in lines[k + 1 + s].split()] for s in range(S)])
    except (IndexError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed MDP text: {exc}") from exc
    return MdpInstance(P, r)
