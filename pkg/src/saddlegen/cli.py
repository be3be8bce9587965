"""Config-driven experiment runner.

Each subcommand reads one flat TOML file, writes ``results.csv``,
``fits.csv`` and ``manifest.json`` to the output directory, and exits 0 only
when every asserted check passes (1 on failure, 2 on an invalid config).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import tomli
import tomli_w

from . import __version__
from .errors import InvalidArgumentError
from .games import run_game_experiment
from .geometry import NormTag
from .mdp import (
    MDP_CSV_HEADER,
    check_moment_envelopes,
    estimate_mixing_constants,
    load_mdp,
    make_random_ergodic_mdp,
    run_mdp_experiment,
    solve_average_reward_exact,
)
from .metrics import MetricKind, corollary_regularizer, no_regularizer, solve_objective
from .parallel import default_threads
from .problems import PayoffLaw, empirical_objective, make_bilinear_game, make_quadratic_scsc
from .rates import CSV_HEADER, bound_dominance, fit_sweep, run_rate_sweep
from .solver import AdaptiveBacktracking, FixedStep, Geometry, SolverConfig
from .stability import check_argmap_lipschitz, check_primal_smoothness, run_loo_suite

EXPERIMENTS = ("rate-sweep", "stability", "mdp", "game", "solve")


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# Schema

_TOP = {
    "experiment": str,
    "seed": int,
    "n_grid": list,
    "replications": int,
    "metrics": list,
    "regularizer": str,
    "n": int,
    "trials": int,
    "pairs": int,
}
_PROBLEM = {
    "family": str,
    # quadratic
    "dim_x": int,
    "dim_y": int,
    "coupling": list,
    "mu_x": (int, float),
    "mu_y": (int, float),
    "noise_scale": (int, float),
    "mean_a": list,
    "mean_b": list,
    "radius_x": (int, float),
    "radius_y": (int, float),
    # game
    "n1": int,
    "n2": int,
    "law": str,
    "width": (int, float),
    "mean_scale": (int, float),
    "mean": list,
    "norm": str,
    # mdp
    "states": int,
    "actions": int,
    "min_transition_prob": (int, float),
    "extra_random_policies": int,
    "reward_noise": (int, float),
    "file": str,
    # shared
    "instance_seed": int,
}
_SOLVER = {
    "max_iter": int,
    "gap_tol": (int, float),
    "step": (str, int, float),
    "geometry_x": str,
    "geometry_y": str,
    "check_every": int,
}
_CHECKS = {
    "slopes": dict,
    "bound_se": (int, float),
    "ordering_se": (int, float),
    "max_violations": int,
    "slope_max": (int, float),
    "improvement_se": (int, float),
    "residual_max": (int, float),
    "envelope_ratio_max": (int, float),
    "gap_max": (int, float),
}
_SECTIONS = {"problem": _PROBLEM, "solver": _SOLVER, "checks": _CHECKS}


def _check_keys(d: dict, schema: dict, where: str):
    for k, v in d.items():
        if k not in schema:
            raise ConfigError(f"{where}: unknown key '{k}'")
        want = schema[k]
        if isinstance(v, bool) or not isinstance(v, want):
            raise ConfigError(f"{where}.{k}: expected {want}, got {type(v).__name__}")


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    n_grid: list = field(default_factory=list)
    replications: int = 0
    metrics: list = field(default_factory=list)
    regularizer: str = "none"
    n: int = 0
    trials: int = 0
    pairs: int = 0
    problem: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        sections = {k: d.pop(k) for k in list(d) if k in _SECTIONS}
        _check_keys(d, _TOP, "config")
        for name, sec in sections.items():
            if not isinstance(sec, dict):
                raise ConfigError(f"[{name}] must be a table")
            _check_keys(sec, _SECTIONS[name], f"[{name}]")
        if "experiment" not in d:
            raise ConfigError("config: missing key 'experiment'")
        if d["experiment"] not in EXPERIMENTS:
            raise ConfigError(f"config.experiment: must be one of {EXPERIMENTS}")
        cfg = cls(**d, **sections)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "seed": self.seed}
        for k in ("n_grid", "replications", "metrics", "n", "trials", "pairs"):
            v = getattr(self, k)
            if v:
                out[k] = v
        if self.regularizer != "none":
            out["regularizer"] = self.regularizer
        for k in _SECTIONS:
            if getattr(self, k):
                out[k] = getattr(self, k)
        return out

    def validate(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigError("config.seed: must be an unsigned 64-bit integer")
        if self.experiment in ("rate-sweep", "mdp", "game"):
            if not self.n_grid or any(not isinstance(n, int) or n < 1 for n in self.n_grid):
                raise ConfigError("config.n_grid: need a nonempty list of positive integers")
            if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
                raise ConfigError("config.n_grid: must be strictly increasing")
            if self.replications < 2:
                raise ConfigError("config.replications: must be >= 2")
        if self.experiment == "rate-sweep":
            for m in self.metrics or ["wgm"]:
                if m not in {k.value for k in MetricKind}:
                    raise ConfigError(f"config.metrics: unknown metric '{m}'")
        if self.regularizer not in ("none", "corollary"):
            raise ConfigError("config.regularizer: must be 'none' or 'corollary'")
        if self.experiment in ("stability", "solve") and self.n < 1:
            raise ConfigError("config.n: must be >= 1")
        fam = self.problem.get("family")
        allowed = {"rate-sweep": ("quadratic", "game"), "stability": ("quadratic", "game"),
                   "solve": ("quadratic", "game"), "mdp": ("mdp",), "game": ("game",)}[self.experiment]
        if fam not in allowed:
            raise ConfigError(f"[problem].family: must be one of {allowed} for {self.experiment}")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        d = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(d)


def dump_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


# ---------------------------------------------------------------------------
# Builders


def _req(d, key, where="[problem]"):
    if key not in d:
        raise ConfigError(f"{where}: missing key '{key}'")
    return d[key]


def build_problem(section: dict):
    fam = section["family"]
    seed = section.get("instance_seed", 0)
    try:
        if fam == "quadratic":
            dx, dy = _req(section, "dim_x"), _req(section, "dim_y")
            C = np.array(_req(section, "coupling"), dtype=float)
            return make_quadratic_scsc(
                dx, dy, C, _req(section, "mu_x"), _req(section, "mu_y"), section.get("noise_scale", 0.0), seed,
                section.get("mean_a"), section.get("mean_b"), section.get("radius_x"), section.get("radius_y"),
            )
        if fam == "game":
            n1, n2 = _req(section, "n1"), _req(section, "n2")
            mean = section.get("mean")
            law = PayoffLaw(
                mean=None if mean is None else tuple(map(tuple, mean)),
                kind=section.get("law", "uniform"),
                width=float(section.get("width", 0.5)),
                mean_scale=float(section.get("mean_scale", 0.5)),
            )
            norm = NormTag(section.get("norm", "l1"))
            return make_bilinear_game(n1, n2, law, seed, norm)
    except (ValueError, InvalidArgumentError) as exc:
        raise ConfigError(f"[problem]: {exc}") from exc
    raise ConfigError(f"[problem].family: unsupported '{fam}'")


def build_mdp(section: dict):
    try:
        if "file" in section:
            return load_mdp(Path(section["file"]).read_text())
        return make_random_ergodic_mdp(
            _req(section, "states"), _req(section, "actions"), _req(section, "min_transition_prob"), section.get("instance_seed", 0)
        )
    except (OSError, InvalidArgumentError) as exc:
        raise ConfigError(f"[problem]: {exc}") from exc


def build_solver(section: dict) -> SolverConfig:
    step = section.get("step", "adaptive")
    if step == "adaptive":
        rule = AdaptiveBacktracking()
    elif isinstance(step, (int, float)):
        rule = FixedStep(float(step))
    else:
        raise ConfigError("[solver].step: must be 'adaptive' or a positive number")
    try:
        return SolverConfig(
            max_iter=section.get("max_iter", 20000),
            gap_tol=section.get("gap_tol"),
            step_rule=rule,
            geometry_x=Geometry(section["geometry_x"]) if "geometry_x" in section else None,
            geometry_y=Geometry(section["geometry_y"]) if "geometry_y" in section else None,
            check_every=section.get("check_every", 10),
        )
    except (ValueError, InvalidArgumentError) as exc:
        raise ConfigError(f"[solver]: {exc}") from exc


# ---------------------------------------------------------------------------
# Output


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])
    return buf.getvalue()


def _row_tuple(r, extra_keys=()):
    return (r.n, r.metric, r.mean, r.std_error, r.bound, r.replications, r.seed) + tuple(
        r.extra.get(k, float("nan")) for k in extra_keys
    )


@dataclass
class RunResult:
    results: str
    fits: str
    suites: dict
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.suites.values())


def _fits_csv(entries) -> str:
    return _csv_text(("metric", "slope", "intercept", "r_squared", "slope_min", "slope_max", "verdict"), entries)


def _floor(solver: SolverConfig) -> float:
    return 5 * (solver.gap_tol or 1e-8)


def _slope_checks(cfg, sweep, metrics, solver, suites):
    entries = []
    for m in metrics:
        fit = fit_sweep(sweep, m, _floor(solver))
        band = cfg.checks.get("slopes", {}).get(m)
        ok = True
        if band is not None:
            ok = (not fit.degenerate) and band[0] <= fit.slope <= band[1]
            suites[f"slope_{m}"] = {"passed": bool(ok), "slope": fit.slope, "band": list(band)}
        entries.append((m, fit.slope, fit.intercept, fit.r_squared,
                        band[0] if band else float("nan"), band[1] if band else float("nan"),
                        "pass" if ok else "fail"))
    return entries


def run_rate_sweep_config(cfg: ExperimentConfig, threads: int) -> RunResult:
    problem = build_problem(cfg.problem)
    solver = build_solver(cfg.solver)
    metrics = cfg.metrics or ["wgm"]
    kinds = [MetricKind(m) for m in metrics]
    rule = corollary_regularizer if cfg.regularizer == "corollary" else no_regularizer
    sweep = run_rate_sweep(problem, cfg.n_grid, cfg.replications, kinds, rule, solver, cfg.seed, threads=threads)
    if sweep.failed:
        raise RuntimeError(f"rates: {sweep.error}")
    suites = {}
    entries = _slope_checks(cfg, sweep, metrics, solver, suites)
    if "bound_se" in cfg.checks:
        ok = bound_dominance(sweep.rows, cfg.checks["bound_se"])
        suites["bound_dominance"] = {"passed": bool(ok)}
    if "ordering_se" in cfg.checks and {"wgm", "sgm", "d2"} <= set(metrics):
        k = cfg.checks["ordering_se"]
        mu = min(problem.constants.mu_x, problem.constants.mu_y)
        ok = True
        for n in cfg.n_grid:
            row = {r.metric: r for r in sweep.rows if r.n == n}
            w, s, d = row["wgm"], row["sgm"], row["d2"]
            ok &= mu * d.mean / 2 <= w.mean + k * w.std_error
            ok &= w.mean + k * w.std_error <= s.mean + 2 * k * s.std_error
        suites["metric_ordering"] = {"passed": bool(ok)}
    results = _csv_text(CSV_HEADER, [_row_tuple(r) for r in sweep.rows])
    return RunResult(results, _fits_csv(entries), suites)


def run_game_config(cfg, threads) -> RunResult:
    game = build_problem(cfg.problem)
    solver = build_solver(cfg.solver)
    sweep = run_game_experiment(game, cfg.n_grid, cfg.replications, cfg.seed, solver, threads)
    suites = {}
    entries = _slope_checks(cfg, sweep, ["epsilon"], solver, suites)
    if "bound_se" in cfg.checks:
        suites["bound_dominance"] = {"passed": bool(bound_dominance(sweep.rows, cfg.checks["bound_se"]))}
    results = _csv_text(CSV_HEADER, [_row_tuple(r) for r in sweep.rows])
    return RunResult(results, _fits_csv(entries), suites)


def run_mdp_config(cfg, threads) -> RunResult:
    mdp = build_mdp(cfg.problem)
    solver = build_solver(cfg.solver)
    constants = estimate_mixing_constants(mdp, cfg.problem.get("extra_random_policies", 0), cfg.problem.get("instance_seed", 0))
    exact = solve_average_reward_exact(mdp)
    sweep = run_mdp_experiment(mdp, cfg.n_grid, cfg.replications, cfg.seed, constants, exact, solver, threads,
                               cfg.problem.get("reward_noise", 0.0))
    suites = {}
    fit = fit_sweep(sweep, "regret", _floor(solver))
    entries = [("regret", fit.slope, fit.intercept, fit.r_squared, float("nan"), cfg.checks.get("slope_max", float("nan")), "")]
    if "slope_max" in cfg.checks:
        ok = (not fit.degenerate) and fit.slope <= cfg.checks["slope_max"]
        suites["slope_regret"] = {"passed": bool(ok), "slope": fit.slope}
        entries[0] = entries[0][:-1] + ("pass" if ok else "fail",)
    if "improvement_se" in cfg.checks:
        a, b = sweep.rows[0], sweep.rows[-1]
        joint = math.sqrt(a.std_error**2 + b.std_error**2)
        suites["improvement"] = {"passed": bool(a.mean - b.mean > cfg.checks["improvement_se"] * joint)}
    if "residual_max" in cfg.checks:
        worst = max(r.extra["identity_residual"] for r in sweep.rows)
        suites["identity_residual"] = {"passed": bool(worst <= cfg.checks["residual_max"]), "max": worst}
    if "envelope_ratio_max" in cfg.checks:
        env = check_moment_envelopes(mdp, constants, seed=cfg.seed)
        lim = cfg.checks["envelope_ratio_max"]
        suites["moment_envelopes"] = {"passed": bool(env["x_ratio"] <= lim and env["y_ratio"] <= lim), **env}
    results = _csv_text(MDP_CSV_HEADER, [_row_tuple(r, ("identity_residual",)) for r in sweep.rows])
    details = {"t_mix": constants.t_mix, "tau": constants.tau, "policies_scanned": constants.policy_set_size,
               "v_star": exact.v_star}
    return RunResult(results, _fits_csv(entries), suites, details)


def run_stability_config(cfg, threads) -> RunResult:
    problem = build_problem(cfg.problem)
    solver = build_solver(cfg.solver) if cfg.solver else SolverConfig(gap_tol=1e-12)
    rule = corollary_regularizer if cfg.regularizer == "corollary" else no_regularizer
    reg = rule(problem, cfg.n)
    trials = run_loo_suite(problem, cfg.n, reg, cfg.trials or 200, cfg.seed, solver, threads)
    valid = [t for t in trials if t.valid]
    viol = sum(not t.passes for t in valid)
    lhs = np.array([t.lhs for t in valid])
    rhs = np.array([t.rhs for t in valid])
    rows = []
    if valid:
        se = lambda v: float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        rows.append((cfg.n, "loo_lhs", lhs.mean(), se(lhs), rhs.mean(), len(valid), cfg.seed))
        rows.append((cfg.n, "loo_violations", viol, 0.0, cfg.checks.get("max_violations", 0), len(valid), cfg.seed))
    suites = {"loo": {"passed": viol <= cfg.checks.get("max_violations", 0) and len(valid) > 0,
                      "violations": viol, "invalid": len(trials) - len(valid)}}
    if cfg.pairs and problem.constants.mu_x > 0 and problem.constants.mu_y > 0:
        rx, ry = check_argmap_lipschitz(problem, cfg.pairs, cfg.seed)
        rp, rd = check_primal_smoothness(problem, cfg.pairs, cfg.seed)
        for name, rep in (("argmap_x", rx), ("argmap_y", ry), ("smooth_primal", rp), ("smooth_dual", rd)):
            suites[name] = {"passed": rep.violations == 0, "violations": rep.violations, "max_ratio": rep.max_ratio,
                            "bound": rep.bound}
            rows.append((cfg.n, name + "_max_ratio", rep.max_ratio, float("nan"), rep.bound, rep.checked, cfg.seed))
    return RunResult(_csv_text(CSV_HEADER, rows), _fits_csv([]), suites)


def run_solve_config(cfg, threads) -> RunResult:
    problem = build_problem(cfg.problem)
    solver = build_solver(cfg.solver)
    rule = corollary_regularizer if cfg.regularizer == "corollary" else no_regularizer
    obj = empirical_objective(problem, problem.sample_set(cfg.n, cfg.seed, cfg.n, 0), rule(problem, cfg.n))
    sol = solve_objective(obj, solver)
    tol = cfg.checks.get("gap_max", solver.gap_tol or 1e-8)
    suites = {"solve": {"passed": bool(sol.converged and sol.certified_gap <= tol), "certified_gap": sol.certified_gap}}
    rows = [(cfg.n, "certified_gap", sol.certified_gap, float("nan"), tol, 1, cfg.seed)]
    details = {"certified_gap": sol.certified_gap, "iterations": sol.iterations, "converged": sol.converged,
               "x_hat": [float(v) for v in sol.x_hat], "y_hat": [float(v) for v in sol.y_hat]}
    return RunResult(_csv_text(CSV_HEADER, rows), _fits_csv([]), suites, details)


RUNNERS = {
    "rate-sweep": run_rate_sweep_config,
    "stability": run_stability_config,
    "mdp": run_mdp_config,
    "game": run_game_config,
    "solve": run_solve_config,
}


def run_config(cfg: ExperimentConfig, out_dir, threads: int = 1) -> int:
    """Run one experiment and write the artifact bundle; returns the exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": cfg.to_dict(),
        "versions": {"saddlegen": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "seed": cfg.seed,
        "threads": threads,
    }
    t0 = time.time()
    code = 0
    try:
        res = RUNNERS[cfg.experiment](cfg, threads)
        (out / "results.csv").write_text(res.results)
        (out / "fits.csv").write_text(res.fits)
        manifest["suites"] = res.suites
        manifest.update(res.details)
        manifest["status"] = "passed" if res.passed else "failed"
        code = 0 if res.passed else 1
    except ConfigError:
        raise
    except Exception as exc:
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__module__}.{type(exc).__name__}: {exc}"
        print(f"error: {manifest['error']}", file=sys.stderr)
        code = 1
    manifest["wall_clock_seconds"] = time.time() - t0
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="saddlegen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=default_threads(), help="worker processes")
        p.add_argument("--seed", type=int, default=None, help="override the config master seed")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.experiment != args.command:
            raise ConfigError(f"config.experiment: '{cfg.experiment}' does not match subcommand '{args.command}'")
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        return run_config(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"{args.config}: invalid config: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
