"""SARSA(lambda) control on top of either TD learner.

Action values share one weight vector: the feature vector for (s, a) is the
state features of s written into block a of a k*n_actions vector, zeros
elsewhere, so Q(s, a) = w . stack(phi(s), a) and both TD step rules apply
unchanged. Exploration is epsilon-greedy with ties broken toward the lowest
action index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Transition, update_trace
from .envs import DiscreteActionEnv
from .learners import TdLearnerState, TdStepRecord, td_step_implicit, td_step_standard
from .stepsize import StepSizeSchedule, next_alpha, reset_schedule

VARIANTS = ("standard", "implicit")

# hook called after each applied step: (transition, alpha, trace used, record)
StepHook = Callable[[Transition, float, np.ndarray, TdStepRecord], None]


@dataclass(slots=True)
class SarsaAgent:
    learner: TdLearnerState
    schedule: StepSizeSchedule
    k_state: int
    n_actions: int
    epsilon: float = 0.1
    variant: str = "standard"
    featurize: Callable[[np.ndarray], np.ndarray] = field(default=lambda obs: obs)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.n_actions < 1:
            raise ValueError(f"n_actions must be >= 1, got {self.n_actions}")
        if self.learner.k != self.k_state * self.n_actions:
            raise ValueError(
                f"learner dimension {self.learner.k} != "
                f"k_state*n_actions = {self.k_state * self.n_actions}"
            )


@dataclass(frozen=True, slots=True)
class EpisodeStats:
    total_return: float
    steps: int
    diverged: bool
    terminated: bool  # env signalled done (cap included); False on budget cut
    max_weight_abs: float


def stack_features(phi_s: np.ndarray, action: int, n_actions: int) -> np.ndarray:
    if not 0 <= action < n_actions:
        raise ValueError(f"action must be in [0, {n_actions}), got {action}")
    k = phi_s.shape[0]
    stacked = np.zeros(k * n_actions)
    stacked[action * k : (action + 1) * k] = phi_s
    return stacked


def action_values(agent: SarsaAgent, phi_s: np.ndarray) -> np.ndarray:
    """Q(s, .) for all actions: one matvec against the blocked weight vector."""
    return agent.learner.weights.reshape(agent.n_actions, agent.k_state) @ phi_s


def epsilon_greedy(
    q_values: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    if q_values.shape[0] == 0:
        raise ValueError("q_values must be nonempty")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(q_values.shape[0]))
    return int(np.argmax(q_values))


def sarsa_episode(
    agent: SarsaAgent,
    env: DiscreteActionEnv,
    seed: int,
    max_steps: int | None = None,
    on_step: StepHook | None = None,
) -> EpisodeStats:
    """Run one episode, updating the agent's learner on every transition.

    `seed` drives both the environment reset and an independent policy
    stream. `max_steps` cuts the episode at a step budget without terminal
    bookkeeping (the trace survives for the caller to inspect). Divergence
    aborts the episode with the flag set.
    """
    learner = agent.learner
    if learner.diverged:
        return EpisodeStats(0.0, 0, True, False, float(np.max(np.abs(learner.weights))))
    rng = np.random.default_rng((seed, 1))
    disc = learner.disc
    step_fn = td_step_implicit if agent.variant == "implicit" else td_step_standard
    sched = agent.schedule
    reset_schedule(sched)  # the adaptive bound is episode-scoped, like the trace
    learner.trace = np.zeros(learner.k)
    n_actions = agent.n_actions
    zero_next = np.zeros(learner.k)

    obs = env.reset(seed)
    phi = agent.featurize(obs)
    action = epsilon_greedy(action_values(agent, phi), agent.epsilon, rng)
    sphi = stack_features(phi, action, n_actions)

    total = 0.0
    steps = 0
    max_weight_abs = float(np.max(np.abs(learner.weights)))
    while True:
        obs, reward, done = env.step(action)
        total += reward
        steps += 1
        if done:
            tr = Transition(phi_t=sphi, reward=reward, phi_next=zero_next, terminal=True)
            sphi_next = zero_next
        else:
            phi = agent.featurize(obs)
            action = epsilon_greedy(action_values(agent, phi), agent.epsilon, rng)
            sphi_next = stack_features(phi, action, n_actions)
            tr = Transition(phi_t=sphi, reward=reward, phi_next=sphi_next)

        if sched.kind == "alpha_bound":
            e_entering = update_trace(learner.trace, sphi, disc)
        else:
            e_entering = sphi  # only alpha_bound reads the trace argument
        alpha = next_alpha(
            sched, learner.step_count, e_entering, sphi, sphi_next, disc.gamma
        )
        trace_in = learner.trace if on_step is not None else None
        _, rec = step_fn(learner, tr, alpha)
        if on_step is not None:
            on_step(tr, alpha, update_trace(trace_in, sphi, disc), rec)
        if rec.max_weight_abs > max_weight_abs:
            max_weight_abs = rec.max_weight_abs
        if learner.diverged:
            return EpisodeStats(total, steps, True, done, max_weight_abs)
        if done:
            return EpisodeStats(total, steps, False, True, max_weight_abs)
        if max_steps is not None and steps >= max_steps:
            return EpisodeStats(total, steps, False, False, max_weight_abs)
        sphi = sphi_next
