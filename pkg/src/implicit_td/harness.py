"""Experiment harness: config parsing, seeded sweeps, audits, CSV emission.

Determinism contract: every output row is a pure function of the config
values and the base seed. Cell seeds come from a splitmix64 chain over
(base seed, alpha0 bits, seed index), so results do not depend on execution
order or parallelism; rows are emitted sorted by (alpha0, seed index).

CSV dialect: comma separated, header row, LF line endings, floats via repr
(shortest round-trip), booleans as true/false. No field ever contains a
comma, so there is no quoting.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .control import SarsaAgent, StepHook, sarsa_episode
from .core import DiscountSpec, Transition, update_trace
from .envs import (
    CartPole,
    FiniteMrp,
    PuddleWorld,
    fourier_features,
    make_fourier_basis,
    random_chain_mrp,
    sample_state_path,
)
from .learners import (
    DIVERGENCE_THRESHOLD,
    make_learner,
    td_fixed_point_oracle,
    td_step_implicit,
    td_step_standard,
    TdStepRecord,
)
from .stability import TransitionGeometry, audit_step
from .stepsize import StepSizeSchedule, make_schedule, next_alpha

OUTPUT_DIR_ENV_VAR = "IMPLICIT_TD_OUT"

DOMAINS = ("puddle_world", "cart_pole", "random_mrp")
ALGORITHMS = (
    "td_standard",
    "td_implicit",
    "sarsa_standard",
    "sarsa_implicit",
    "sarsa_alpha_bound",
    "sarsa_implicit_alpha_bound",
)
DEFAULT_ALPHA0_GRID = tuple(2.0**i for i in range(-8, 4))

SWEEP_HEADER = (
    "domain,algorithm,alpha0,seed,final_avg_reward,"
    "diverged,max_weight_norm,steps_completed,status"
)
AUDIT_HEADER = (
    "step,beta,lam_plus,lam_minus,lam_im_plus,lam_im_minus,"
    "sq_norm_standard,sq_norm_implicit,ratio"
)


class ConfigError(ValueError):
    """Invalid configuration file, key, or value (CLI exit code 2)."""


# ---------------------------------------------------------------------------
# Seed derivation

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer; the only hash used for seed derivation."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def float_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def cell_seed(base_seed: int, alpha0: float, seed_idx: int) -> int:
    h = mix64(base_seed)
    h = mix64(h ^ float_bits(alpha0))
    return mix64(h ^ seed_idx)


def episode_seed(cell: int, episode_idx: int) -> int:
    return mix64(cell ^ (((episode_idx + 1) * _GOLDEN) & _MASK64))


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    domain: str
    algorithm: str
    alpha0_grid: tuple[float, ...] = DEFAULT_ALPHA0_GRID
    lam: float = 0.5
    gamma: float = 0.999
    fourier_order: int = 3
    total_steps: int = 40_000
    n_seeds: int = 5
    eval_window: int = 10_000
    base_seed: int = 0
    epsilon: float = 0.1
    mrp_states: int = 5
    mrp_reward_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}, expected one of {DOMAINS}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}"
            )
        td = self.algorithm.startswith("td_")
        if td and self.domain != "random_mrp":
            raise ConfigError("td_* algorithms evaluate a fixed policy; use domain random_mrp")
        if not td and self.domain == "random_mrp":
            raise ConfigError("sarsa_* algorithms need a control domain, not random_mrp")
        # an empty grid is legal and yields a header-only sweep
        if any(not a > 0.0 for a in self.alpha0_grid):
            raise ConfigError("alpha0_grid values must be positive")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if not 1 <= self.eval_window <= self.total_steps:
            raise ConfigError("eval_window must lie in [1, total_steps]")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.fourier_order < 0:
            raise ConfigError("fourier_order must be >= 0")
        if self.mrp_states < 2:
            raise ConfigError("mrp_states must be >= 2")
        if not 0 <= self.base_seed <= _MASK64:
            raise ConfigError("base_seed must be an unsigned 64-bit integer")

    @property
    def disc(self) -> DiscountSpec:
        return DiscountSpec(gamma=self.gamma, lam=self.lam)


# config-file key -> (field name, parser)
def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as err:
        raise ConfigError(f"bad alpha0_grid entry: {err}") from None


_CONFIG_KEYS: dict[str, tuple[str, Callable[[str], object]]] = {
    "domain": ("domain", str),
    "algorithm": ("algorithm", str),
    "alpha0_grid": ("alpha0_grid", _parse_grid),
    "lambda": ("lam", float),
    "gamma": ("gamma", float),
    "fourier_order": ("fourier_order", int),
    "total_steps": ("total_steps", int),
    "n_seeds": ("n_seeds", int),
    "eval_window": ("eval_window", int),
    "base_seed": ("base_seed", int),
    "epsilon": ("epsilon", float),
    "mrp_states": ("mrp_states", int),
    "mrp_reward_scale": ("mrp_reward_scale", float),
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat key=value format ('#' comments, blank lines allowed)."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        field_name, parse = _CONFIG_KEYS[key]
        if field_name in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[field_name] = parse(val)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from None
    missing = {"domain", "algorithm"} - values.keys()
    if missing:
        raise ConfigError(f"missing required keys: {sorted(missing)}")
    try:
        return ExperimentConfig(**values)  # type: ignore[arg-type]
    except TypeError as err:
        raise ConfigError(str(err)) from None


def load_config(path: str | Path, overrides: dict[str, object] | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    config = parse_config_text(text)
    if overrides:
        valid = {f.name for f in fields(ExperimentConfig)}
        unknown = overrides.keys() - valid
        if unknown:
            raise ConfigError(f"unknown override fields: {sorted(unknown)}")
        config = replace(config, **overrides)  # type: ignore[arg-type]
    return config


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True, slots=True)
class SweepResult:
    domain: str
    algorithm: str
    alpha0: float
    seed: int  # seed index within the sweep, not the derived u64
    final_avg_reward: float
    diverged: bool
    max_weight_norm: float
    steps_completed: int
    status: str = "ok"


@dataclass(frozen=True, slots=True)
class AuditRow:
    step: int
    beta: float
    lam_plus: float
    lam_minus: float
    lam_im_plus: float
    lam_im_minus: float
    sq_norm_standard: float
    sq_norm_implicit: float
    ratio: float


@dataclass(frozen=True, slots=True)
class TdEvalResult:
    weights: np.ndarray
    steps_completed: int
    diverged: bool
    max_weight_abs: float
    mean_reward_last_window: float


@dataclass(frozen=True, slots=True)
class FixedPointReport:
    n_states: int
    seed: int
    w_star: np.ndarray
    err_standard: float
    err_implicit: float
    steps_standard: int
    steps_implicit: int


# ---------------------------------------------------------------------------
# MRP evaluation driver

# Sentinel reported as max_weight_norm when divergence was detected through a
# non-finite candidate before any finite weight crossed the threshold.
_NONFINITE_NORM = 10.0 * DIVERGENCE_THRESHOLD


def run_td_evaluation(
    mrp: FiniteMrp,
    disc: DiscountSpec,
    schedule: StepSizeSchedule,
    total_steps: int,
    seed: int,
    implicit: bool,
    eval_window: int | None = None,
    target_weights: np.ndarray | None = None,
    target_tol: float | None = None,
    check_every: int = 1000,
    on_step: StepHook | None = None,
) -> TdEvalResult:
    """Evaluate the MRP's fixed policy for total_steps transitions.

    The state path is presampled from default_rng(seed). Two routes produce
    bit-identical weights: a generic route through the step functions
    (always taken when on_step is set or the schedule is alpha_bound), and
    an inlined loop performing the same float operations without the
    per-step object plumbing. Divergence and the optional early-exit target
    are checked every check_every steps on the inlined route and every step
    on the generic one, so early-exit runs may stop at different step counts
    between routes; final weights at any common step count agree bitwise.
    """
    rng = np.random.default_rng(seed)
    path = sample_state_path(mrp, total_steps + 1, rng)
    rewards = mrp.r[path[:-1]]
    feats = mrp.features
    if on_step is not None or schedule.kind == "alpha_bound":
        return _run_eval_generic(
            mrp, disc, schedule, total_steps, implicit, path, rewards,
            eval_window, target_weights, target_tol, on_step,
        )

    k = feats.shape[1]
    w = np.zeros(k)
    e = np.zeros(k)
    gamma = disc.gamma
    decay = disc.trace_decay
    alpha0 = schedule.alpha0
    polynomial = schedule.kind == "polynomial"
    exponent = schedule.exponent
    alpha = alpha0
    max_abs = 0.0
    diverged = False
    steps_done = 0
    for t in range(total_steps):
        phi = feats[path[t]]
        phi2 = feats[path[t + 1]]
        if polynomial:
            alpha = alpha0 * float(t + 1) ** -exponent
        if implicit:
            prev_dot = float(e @ w)
            e *= decay
            e += phi
            bootstrap = gamma * float(phi2 @ w)
            bracket = float(rewards[t]) + bootstrap + decay * prev_dot
            u = w + (alpha * bracket) * e
            shrink = alpha / (1.0 + alpha * float(e @ e))
            w = u - (shrink * float(e @ u)) * e
        else:
            e *= decay
            e += phi
            bootstrap = gamma * float(phi2 @ w)
            delta = float(rewards[t]) + bootstrap - float(phi @ w)
            w = w + (alpha * delta) * e
        steps_done = t + 1
        if steps_done % check_every == 0 or steps_done == total_steps:
            if not np.isfinite(w).all():
                diverged = True
                max_abs = max(max_abs, _NONFINITE_NORM)
                break
            cur = float(np.max(np.abs(w)))
            if cur > max_abs:
                max_abs = cur
            if cur > DIVERGENCE_THRESHOLD:
                diverged = True
                break
            if (
                target_weights is not None
                and target_tol is not None
                and float(np.max(np.abs(w - target_weights))) <= target_tol
            ):
                break
    return TdEvalResult(
        weights=w,
        steps_completed=steps_done,
        diverged=diverged,
        max_weight_abs=max_abs,
        mean_reward_last_window=_window_mean(rewards, steps_done, eval_window),
    )


def _window_mean(rewards: np.ndarray, steps_done: int, window: int | None) -> float:
    if steps_done == 0:
        return 0.0
    if window is None:
        window = steps_done
    lo = max(0, steps_done - window)
    return float(rewards[lo:steps_done].mean())


def _run_eval_generic(
    mrp: FiniteMrp,
    disc: DiscountSpec,
    schedule: StepSizeSchedule,
    total_steps: int,
    implicit: bool,
    path: np.ndarray,
    rewards: np.ndarray,
    eval_window: int | None,
    target_weights: np.ndarray | None,
    target_tol: float | None,
    on_step: StepHook | None,
) -> TdEvalResult:
    feats = mrp.features
    learner = make_learner(feats.shape[1], disc)
    step_fn = td_step_implicit if implicit else td_step_standard
    max_abs = 0.0
    diverged = False
    steps_done = 0
    for t in range(total_steps):
        phi = feats[path[t]]
        tr = Transition(phi_t=phi, reward=float(rewards[t]), phi_next=feats[path[t + 1]])
        if schedule.kind == "alpha_bound":
            e_entering = update_trace(learner.trace, phi, disc)
        else:
            e_entering = phi  # only alpha_bound reads the trace argument
        alpha = next_alpha(
            schedule, learner.step_count, e_entering, phi, tr.phi_next, disc.gamma
        )
        trace_in = learner.trace
        _, rec = step_fn(learner, tr, alpha)
        if on_step is not None:
            on_step(tr, alpha, update_trace(trace_in, phi, disc), rec)
        steps_done = t + 1
        if rec.max_weight_abs > max_abs:
            max_abs = rec.max_weight_abs
        if learner.diverged:
            diverged = True
            if max_abs <= DIVERGENCE_THRESHOLD:
                max_abs = _NONFINITE_NORM
            break
        if (
            target_weights is not None
            and target_tol is not None
            and float(np.max(np.abs(learner.weights - target_weights))) <= target_tol
        ):
            break
    return TdEvalResult(
        weights=learner.weights,
        steps_completed=steps_done,
        diverged=diverged,
        max_weight_abs=max_abs,
        mean_reward_last_window=_window_mean(rewards, steps_done, eval_window),
    )


# ---------------------------------------------------------------------------
# Cells and sweeps


def _make_env(config: ExperimentConfig):
    if config.domain == "puddle_world":
        return PuddleWorld()
    if config.domain == "cart_pole":
        return CartPole()
    raise ConfigError(f"domain {config.domain!r} has no environment")


def _algorithm_parts(algorithm: str) -> tuple[str, str]:
    """Map an algorithm name to (learner variant, schedule kind)."""
    variant = "implicit" if "implicit" in algorithm else "standard"
    kind = "alpha_bound" if algorithm.endswith("alpha_bound") else "constant"
    return variant, kind


def _shared_mrp(config: ExperimentConfig) -> FiniteMrp:
    # one MRP per sweep (derived from the base seed), shared by all cells
    return random_chain_mrp(
        config.mrp_states,
        mix64(config.base_seed ^ 0x6D72705F736565),
        config.mrp_reward_scale,
    )


def run_cell(
    config: ExperimentConfig,
    alpha0: float,
    seed_idx: int,
    on_step: StepHook | None = None,
) -> SweepResult:
    """Run one (alpha0, seed index) cell to completion or divergence."""
    if not alpha0 > 0.0:
        raise ConfigError(f"alpha0 must be positive, got {alpha0}")
    if seed_idx < 0:
        raise ConfigError(f"seed index must be >= 0, got {seed_idx}")
    seed = cell_seed(config.base_seed, alpha0, seed_idx)
    variant, sched_kind = _algorithm_parts(config.algorithm)
    if config.algorithm.startswith("td_"):
        result = run_td_evaluation(
            _shared_mrp(config),
            config.disc,
            make_schedule(sched_kind, alpha0),
            config.total_steps,
            seed,
            implicit=(variant == "implicit"),
            eval_window=config.eval_window,
            on_step=on_step,
        )
        return SweepResult(
            domain=config.domain,
            algorithm=config.algorithm,
            alpha0=alpha0,
            seed=seed_idx,
            final_avg_reward=result.mean_reward_last_window,
            diverged=result.diverged,
            max_weight_norm=result.max_weight_abs,
            steps_completed=result.steps_completed,
        )

    env = _make_env(config)
    basis = make_fourier_basis(config.fourier_order, env.obs_dim)
    agent = SarsaAgent(
        learner=make_learner(basis.k * env.n_actions, config.disc),
        schedule=make_schedule(sched_kind, alpha0),
        k_state=basis.k,
        n_actions=env.n_actions,
        epsilon=config.epsilon,
        variant=variant,
        featurize=lambda obs: fourier_features(basis, obs),
    )
    steps_done = 0
    episode_idx = 0
    finished: list[tuple[int, float]] = []  # (cumulative step at end, return)
    partial_return: float | None = None
    max_abs = 0.0
    diverged = False
    while steps_done < config.total_steps:
        budget = config.total_steps - steps_done
        stats = sarsa_episode(
            agent, env, episode_seed(seed, episode_idx), max_steps=budget,
            on_step=on_step,
        )
        steps_done += stats.steps
        episode_idx += 1
        if stats.max_weight_abs > max_abs:
            max_abs = stats.max_weight_abs
        if stats.diverged:
            diverged = True
            if max_abs <= DIVERGENCE_THRESHOLD:
                max_abs = _NONFINITE_NORM
            break
        if stats.terminated:
            finished.append((steps_done, stats.total_return))
        else:
            partial_return = stats.total_return  # budget cut the episode
    window_start = steps_done - config.eval_window
    in_window = [ret for end, ret in finished if end > window_start]
    if in_window:
        final_avg = sum(in_window) / len(in_window)
    elif finished:
        final_avg = sum(ret for _, ret in finished) / len(finished)
    elif partial_return is not None:
        final_avg = partial_return
    else:
        final_avg = 0.0
    return SweepResult(
        domain=config.domain,
        algorithm=config.algorithm,
        alpha0=alpha0,
        seed=seed_idx,
        final_avg_reward=final_avg,
        diverged=diverged,
        max_weight_norm=max_abs,
        steps_completed=steps_done,
    )


def _cell_worker(args: tuple[ExperimentConfig, float, int]) -> SweepResult:
    config, alpha0, seed_idx = args
    try:
        return run_cell(config, alpha0, seed_idx)
    except Exception as err:  # record in-row, keep the sweep going
        return SweepResult(
            domain=config.domain,
            algorithm=config.algorithm,
            alpha0=alpha0,
            seed=seed_idx,
            final_avg_reward=0.0,
            diverged=False,
            max_weight_norm=0.0,
            steps_completed=0,
            status=f"error:{type(err).__name__}",
        )


def run_sweep(
    config: ExperimentConfig,
    parallelism: int = 1,
    out_path: str | Path | None = None,
) -> list[SweepResult]:
    """Run the alpha0 x seed grid; optionally write sweep.csv at out_path."""
    if parallelism < 1:
        raise ConfigError(f"parallelism must be >= 1, got {parallelism}")
    grid = sorted(
        (alpha0, idx)
        for alpha0 in config.alpha0_grid
        for idx in range(config.n_seeds)
    )
    cells = [(config, alpha0, idx) for alpha0, idx in grid]
    if parallelism == 1:
        results = [_cell_worker(cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_cell_worker, cells))
    if out_path is not None:
        write_sweep_csv(results, out_path)
    return results


def stability_audit_run(
    config: ExperimentConfig,
    alpha0: float,
    seed_idx: int,
    sample_every: int,
    out_path: str | Path | None = None,
) -> tuple[SweepResult, list[AuditRow]]:
    """Run one cell, auditing every sample_every-th applied transition."""
    if sample_every < 1:
        raise ConfigError(f"sample_every must be >= 1, got {sample_every}")
    gamma = config.gamma
    rows: list[AuditRow] = []
    count = 0

    def hook(tr: Transition, alpha: float, e_used: np.ndarray, rec: TdStepRecord) -> None:
        nonlocal count
        count += 1
        if count % sample_every:
            return
        report = audit_step(
            TransitionGeometry(e=e_used, d=tr.phi_t - gamma * tr.phi_next, alpha=alpha)
        )
        rows.append(
            AuditRow(
                step=count,
                beta=report.beta,
                lam_plus=report.lam_plus,
                lam_minus=report.lam_minus,
                lam_im_plus=report.lam_im_plus,
                lam_im_minus=report.lam_im_minus,
                sq_norm_standard=report.sq_norm_standard,
                sq_norm_implicit=report.sq_norm_implicit,
                ratio=report.sq_norm_implicit / report.sq_norm_standard,
            )
        )

    result = run_cell(config, alpha0, seed_idx, on_step=hook)
    if out_path is not None:
        write_audit_csv(rows, out_path)
    return result, rows


def fixed_point_check(
    n_states: int,
    seed: int,
    disc: DiscountSpec,
    steps: int,
    alpha0: float = 0.5,
    exponent: float = 0.7,
    target_tol: float | None = None,
    reward_scale: float = 1.0,
) -> FixedPointReport:
    """Run both learners on a seeded random chain against the series oracle.

    Both learners see the same presampled state path. With target_tol set,
    each run stops as soon as the max-abs error reaches it.
    """
    mrp = random_chain_mrp(n_states, mix64(seed), reward_scale)
    w_star = td_fixed_point_oracle(mrp, disc)
    path_seed = mix64(seed ^ 1)
    runs = {}
    for implicit in (False, True):
        runs[implicit] = run_td_evaluation(
            mrp,
            disc,
            make_schedule("polynomial", alpha0, exponent=exponent),
            steps,
            path_seed,
            implicit=implicit,
            target_weights=w_star,
            target_tol=target_tol,
        )
    return FixedPointReport(
        n_states=n_states,
        seed=seed,
        w_star=w_star,
        err_standard=float(np.max(np.abs(runs[False].weights - w_star))),
        err_implicit=float(np.max(np.abs(runs[True].weights - w_star))),
        steps_standard=runs[False].steps_completed,
        steps_implicit=runs[True].steps_completed,
    )


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"refusing to write non-finite CSV value {value}")
        return repr(value)
    return str(value)


def format_sweep_row(row: SweepResult) -> str:
    return ",".join(
        _fmt(v)
        for v in (
            row.domain,
            row.algorithm,
            row.alpha0,
            row.seed,
            row.final_avg_reward,
            row.diverged,
            row.max_weight_norm,
            row.steps_completed,
            row.status,
        )
    )


def write_sweep_csv(results: list[SweepResult], path: str | Path) -> None:
    lines = [SWEEP_HEADER]
    lines.extend(format_sweep_row(r) for r in results)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def format_audit_row(row: AuditRow) -> str:
    return ",".join(
        _fmt(v)
        for v in (
            row.step,
            row.beta,
            row.lam_plus,
            row.lam_minus,
            row.lam_im_plus,
            row.lam_im_minus,
            row.sq_norm_standard,
            row.sq_norm_implicit,
            row.ratio,
        )
    )


def write_audit_csv(rows: list[AuditRow], path: str | Path) -> None:
    lines = [AUDIT_HEADER]
    lines.extend(format_audit_row(r) for r in rows)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
