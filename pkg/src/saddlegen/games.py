"""Stochastic matrix games: entropy-regularized empirical Nash and epsilon-Nash certificates."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .parallel import pmap
from .problems import (
    BilinearGame,
    PayoffLaw,
    Regularizer,
    RegKind,
    SampleSet,
    SaddleObjective,
    empirical_objective,
)
from .rates import RateRow, RateSweep
from .solver import SolverConfig, solve_mirror_prox


@dataclass(frozen=True)
class NashCertificate:
    player1_gain: float
    player2_gain: float

    @property
    def epsilon(self) -> float:
        return max(self.player1_gain, self.player2_gain)


def game_regularizer(n1: int, n2: int, n: int) -> Regularizer:
    """Entropy in both blocks with weights ``1/sqrt(n log N)``."""
    if n1 < 2 or n2 < 2:
        raise InvalidArgumentError("entropy weights need N1, N2 >= 2 (log 1 = 0)")
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    ax = 1.0 / np.sqrt(n * np.log(n1))
    ay = 1.0 / np.sqrt(n * np.log(n2))
    bound = (np.sqrt(np.log(n1)) + np.sqrt(np.log(n2))) / np.sqrt(n)
    return Regularizer(RegKind.ENTROPY_ENTROPY, ax, ay, ax, ay, float(bound))


def game_rule(problem, n) -> Regularizer:
    return game_regularizer(problem.set_x.dim, problem.set_y.dim, n)


def build_game_resp(samples, n1: int, n2: int, n: int | None = None, game: BilinearGame | None = None) -> SaddleObjective:
    """Regularized empirical game from stacked payoff matrices.

    Without ``game`` the family is built around the sample mean, so the
    population objective coincides with the empirical one.
    """
    data = samples.data if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    if data.ndim != 3 or data.shape[1:] != (n1, n2):
        raise InvalidArgumentError(f"samples must have shape (n, {n1}, {n2}), got {data.shape}")
    n = data.shape[0] if n is None else n
    if n != data.shape[0] or n < 1:
        raise InvalidArgumentError(f"n={n} does not match {data.shape[0]} samples")
    reg = game_regularizer(n1, n2, n)
    if np.any(np.abs(data) > 1):
        raise InvalidArgumentError("payoff samples must satisfy |A_ij| <= 1")
    if game is None:
        game = BilinearGame(data.mean(axis=0), PayoffLaw(width=0.0))
    return empirical_objective(game, SampleSet(data), reg)


def epsilon_nash_gap(true_payoff, x_bar, y_bar) -> NashCertificate:
    """Unilateral-deviation gains against ``true_payoff`` (x minimizes, y maximizes)."""
    A = np.asarray(true_payoff, dtype=float)
    x = np.asarray(x_bar, dtype=float)
    y = np.asarray(y_bar, dtype=float)
    if A.ndim != 2 or x.shape != (A.shape[0],) or y.shape != (A.shape[1],):
        raise InvalidArgumentError("strategy dimensions do not match the payoff matrix")
    value = float(x @ A @ y)
    p2 = float((A.T @ x).max()) - value
    p1 = value - float((A @ y).min())
    return NashCertificate(p1, p2)


def game_bound(n1, n2, n) -> float:
    return 16.0 * np.sqrt(np.log(n1 * n2) / n)


def _game_replication(args):
    game, n, r, seed, config = args
    samples = game.sample_set(n, seed, n, r)
    obj = empirical_objective(game, samples, game_rule(game, n))
    sol = solve_mirror_prox(obj, config)
    cert = epsilon_nash_gap(game.mean_payoff, sol.x_hat, sol.y_hat)
    return cert.epsilon, sol.converged


def run_game_experiment(game: BilinearGame, n_grid, replications, master_seed=0, solver_config=None, threads=1) -> RateSweep:
    """Mean epsilon-Nash gap of the regularized empirical solution, per ``n``."""
    n1, n2 = game.mean_payoff.shape
    sweep = RateSweep([], "game", replications, master_seed)
    for n in n_grid:
        jobs = [(game, int(n), r, master_seed, solver_config) for r in range(replications)]
        out = pmap(_game_replication, jobs, threads)
        eps = np.array([o[0] for o in out])
        se = float(eps.std(ddof=1) / np.sqrt(replications)) if replications > 1 else float("nan")
        row = RateRow(int(n), "epsilon", float(eps.mean()), se, game_bound(n1, n2, n), replications, master_seed)
        row.extra = {
            "q50": float(np.quantile(eps, 0.5)),
            "q90": float(np.quantile(eps, 0.9)),
            "unconverged": int(sum(not o[1] for o in out)),
        }
        sweep.rows.append(row)
    return sweep


def load_payoff_csv(text: str, n1: int, n2: int) -> np.ndarray:
    """Group ``i,j,payoff`` rows into per-play matrices.

    Rows are read in order; a play is complete once every cell has appeared
    exactly once.
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["i", "j", "payoff"]:
        raise InvalidArgumentError("payoff CSV header must be exactly i,j,payoff")
    plays, cur, seen = [], np.zeros((n1, n2)), np.zeros((n1, n2), dtype=bool)
    for line, row in enumerate(reader, start=2):
        try:
            i, j, v = int(row["i"]), int(row["j"]), float(row["payoff"])
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"line {line}: {exc}") from exc
        if not (0 <= i < n1 and 0 <= j < n2):
            raise InvalidArgumentError(f"line {line}: cell ({i},{j}) out of range")
        if abs(v) > 1:
            raise InvalidArgumentError(f"line {line}: |payoff| > 1")
        if seen[i, j]:
            raise InvalidArgumentError(f"line {line}: cell ({i},{j}) repeated before the play completed")
        cur[i, j], seen[i, j] = v, True
        if seen.all():
            plays.append(cur)
            cur, seen = np.zeros((n1, n2)), np.zeros((n1, n2), dtype=bool)
    if seen.any():
        raise InvalidArgumentError("trailing incomplete play in payoff CSV")
    if not plays:
        raise InvalidArgumentError("payoff CSV has no complete play")
    return np.array(plays)
