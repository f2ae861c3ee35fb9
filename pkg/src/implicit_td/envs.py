"""Finite MRPs with exact solvers' inputs, two control benchmarks, Fourier features.

The finite MRP type carries everything the fixed-point oracle needs (P, r,
features, initial distribution) and validates stochasticity and strong
connectivity on construction. Periodic chains are accepted on purpose: every
quantity computed downstream (stationary distribution, discounted series,
long-run sample averages) only needs irreducibility, and the deterministic
two-state cycle used as a hand-checkable test bed has period 2.

The two benchmark environments are small mutable state machines with a
shared interface: `reset(seed) -> obs`, `step(action) -> (obs, reward,
done)`, observations already normalized to the unit box so they can go
straight into `fourier_features`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.sparse.csgraph import connected_components

from .core import DimensionMismatchError, Transition, as_vector


# ---------------------------------------------------------------------------
# Fourier basis


@dataclass(frozen=True, slots=True)
class FourierBasis:
    """All (order+1)^dims cosine features cos(pi * c . s) over [0,1]^dims."""

    order: int
    dims: int
    coefficients: np.ndarray  # shape (k, dims), float for fast matvec

    @property
    def k(self) -> int:
        return self.coefficients.shape[0]


def make_fourier_basis(order: int, dims: int) -> FourierBasis:
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    coeffs = np.array(
        list(itertools.product(range(order + 1), repeat=dims)), dtype=np.float64
    )
    return FourierBasis(order=order, dims=dims, coefficients=coeffs)


def fourier_features(basis: FourierBasis, s: np.ndarray) -> np.ndarray:
    """Featurize one point of the unit box. Caller clamps; here we only check."""
    if s.shape != (basis.dims,):
        raise DimensionMismatchError(
            f"expected point of shape ({basis.dims},), got {s.shape}"
        )
    return np.cos(np.pi * (basis.coefficients @ s))


# ---------------------------------------------------------------------------
# Finite Markov reward processes


@dataclass(frozen=True, slots=True)
class FiniteMrp:
    """A finite MRP: row-stochastic P, per-state rewards, features, start dist.

    Validation requires strong connectivity of the transition graph so the
    stationary distribution is unique.
    """

    n_states: int
    p: np.ndarray
    r: np.ndarray
    xi0: np.ndarray
    features: np.ndarray

    def __post_init__(self) -> None:
        n = self.n_states
        if self.p.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}, got {self.p.shape}")
        if self.r.shape != (n,) or self.xi0.shape != (n,):
            raise ValueError("r and xi0 must have length n_states")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError("features must be an n_states x k matrix")
        if np.any(self.p < 0.0) or np.any(self.xi0 < 0.0):
            raise ValueError("probabilities must be nonnegative")
        if not np.allclose(self.p.sum(axis=1), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("each row of P must sum to 1 within 1e-12")
        if not math.isclose(float(self.xi0.sum()), 1.0, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError("xi0 must sum to 1")
        n_comp, _ = connected_components(
            self.p > 0.0, directed=True, connection="strong"
        )
        if n_comp != 1:
            raise ValueError(
                "transition graph must be strongly connected "
                f"(found {n_comp} components)"
            )

    @property
    def k(self) -> int:
        return self.features.shape[1]


def random_chain_mrp(n_states: int, seed: int, reward_scale: float = 1.0) -> FiniteMrp:
    """Seeded dense random chain: all transition entries positive, tabular features."""
    if n_states < 2:
        raise ValueError(f"n_states must be >= 2, got {n_states}")
    rng = np.random.default_rng(seed)
    raw = rng.random((n_states, n_states))
    p = raw / raw.sum(axis=1, keepdims=True)
    r = rng.uniform(-reward_scale, reward_scale, size=n_states)
    xi0 = np.full(n_states, 1.0 / n_states)
    return FiniteMrp(
        n_states=n_states, p=p, r=r, xi0=xi0, features=np.eye(n_states)
    )


def stationary_distribution(mrp: FiniteMrp) -> np.ndarray:
    """Unique xi with xi P = xi, by replacing one balance equation with sum=1."""
    n = mrp.n_states
    a = mrp.p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    xi = np.linalg.solve(a, b)
    # irreducibility makes xi positive; clip float dust from the solve
    return np.clip(xi, 0.0, None) / xi.sum()


def mrp_sample_episode(mrp: FiniteMrp, horizon: int, seed: int) -> list[Transition]:
    """Sample `horizon` continuing transitions (xi0 start, then P)."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    rng = np.random.default_rng(seed)
    states = sample_state_path(mrp, horizon + 1, rng)
    return [
        Transition(
            phi_t=mrp.features[states[t]],
            reward=float(mrp.r[states[t]]),
            phi_next=mrp.features[states[t + 1]],
        )
        for t in range(horizon)
    ]


def sample_state_path(
    mrp: FiniteMrp, length: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized state-index path: one uniform draw per step via inverse CDF."""
    cdf = np.cumsum(mrp.p, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(length)
    path = np.empty(length, dtype=np.int64)
    path[0] = int(np.searchsorted(np.cumsum(mrp.xi0), u[0], side="right"))
    s = path[0]
    for t in range(1, length):
        s = int(np.searchsorted(cdf[s], u[t], side="right"))
        path[t] = s
    return path


# ---------------------------------------------------------------------------
# Benchmark environments


class DiscreteActionEnv(Protocol):
    n_actions: int
    obs_dim: int

    def reset(self, seed: int) -> np.ndarray: ...

    def step(self, action: int) -> tuple[np.ndarray, float, bool]: ...


def _segment_distance(
    px: float, py: float, ax: float, ay: float, bx: float, by: float
) -> float:
    vx, vy = bx - ax, by - ay
    t = ((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy)
    t = min(1.0, max(0.0, t))
    dx, dy = px - (ax + t * vx), py - (ay + t * vy)
    return math.hypot(dx, dy)


@dataclass(frozen=True, slots=True)
class PuddleWorldConfig:
    """All puddle-world constants in one place."""

    move: float = 0.05
    noise_sigma: float = 0.01
    radius: float = 0.1
    penalty_scale: float = 400.0
    goal_threshold: float = 1.8  # terminate when x + y >= this
    episode_cap: int = 1000
    # capsule axes as (ax, ay, bx, by)
    capsules: tuple[tuple[float, float, float, float], ...] = (
        (0.10, 0.75, 0.45, 0.75),
        (0.45, 0.40, 0.45, 0.80),
    )


class PuddleWorld:
    """2-D navigation with two capsule-shaped puddles and a corner goal.

    Actions 0..3 move up/down/left/right by `move` plus Gaussian noise on
    both coordinates, clamped to the unit square. Each step costs -1 plus
    penalty_scale times the deepest puddle intrusion; the step that lands in
    the goal region contributes 0 and ends the episode.
    """

    n_actions = 4
    obs_dim = 2

    def __init__(self, config: PuddleWorldConfig | None = None) -> None:
        self.config = config or PuddleWorldConfig()
        self._x = 0.0
        self._y = 0.0
        self._rng: np.random.Generator | None = None
        self._steps = 0
        self.done = True
        self.truncated = False

    def _obs(self) -> np.ndarray:
        return np.array([self._x, self._y])

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        cfg = self.config
        while True:
            x, y = self._rng.random(2)
            if x + y < cfg.goal_threshold:
                break
        self._x, self._y = float(x), float(y)
        self._steps = 0
        self.done = False
        self.truncated = False
        return self._obs()

    def puddle_depth(self, x: float, y: float) -> float:
        cfg = self.config
        depth = 0.0
        for ax, ay, bx, by in cfg.capsules:
            d = cfg.radius - _segment_distance(x, y, ax, ay, bx, by)
            if d > depth:
                depth = d
        return depth

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode; reset first")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action must be in [0, {self.n_actions}), got {action}")
        cfg = self.config
        dx, dy = ((0.0, cfg.move), (0.0, -cfg.move), (-cfg.move, 0.0), (cfg.move, 0.0))[
            action
        ]
        assert self._rng is not None
        nx, ny = self._rng.normal(0.0, cfg.noise_sigma, size=2)
        self._x = min(1.0, max(0.0, self._x + dx + float(nx)))
        self._y = min(1.0, max(0.0, self._y + dy + float(ny)))
        self._steps += 1
        if self._x + self._y >= cfg.goal_threshold:
            self.done = True
            return self._obs(), 0.0, True
        reward = -1.0 - cfg.penalty_scale * self.puddle_depth(self._x, self._y)
        if self._steps >= cfg.episode_cap:
            self.done = True
            self.truncated = True
        return self._obs(), reward, self.done


@dataclass(frozen=True, slots=True)
class CartPoleConfig:
    """All cart-pole constants in one place."""

    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    force: float = 10.0
    dt: float = 0.02
    x_limit: float = 2.4
    theta_limit: float = 12.0 * math.pi / 180.0
    # velocity box used only for observation normalization
    xdot_limit: float = 3.0
    thetadot_limit: float = 3.5
    episode_cap: int = 3000
    reset_spread: float = 0.05


class CartPole:
    """Classic pole balancing, Euler-integrated, +1 per surviving step.

    Observations are (x, xdot, theta, thetadot) mapped affinely into [0,1]^4
    by the position/angle failure bounds and the velocity normalization box;
    velocities outside the box clip.
    """

    n_actions = 2
    obs_dim = 4

    def __init__(self, config: CartPoleConfig | None = None) -> None:
        self.config = config or CartPoleConfig()
        self._s = (0.0, 0.0, 0.0, 0.0)
        self._steps = 0
        self.done = True
        self.truncated = False

    def _obs(self) -> np.ndarray:
        cfg = self.config
        x, xd, th, thd = self._s
        lo = (-cfg.x_limit, -cfg.xdot_limit, -cfg.theta_limit, -cfg.thetadot_limit)
        hi = (cfg.x_limit, cfg.xdot_limit, cfg.theta_limit, cfg.thetadot_limit)
        vals = (x, xd, th, thd)
        return np.array(
            [
                min(1.0, max(0.0, (v - l) / (h - l)))
                for v, l, h in zip(vals, lo, hi)
            ]
        )

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        spread = self.config.reset_spread
        self._s = tuple(float(v) for v in rng.uniform(-spread, spread, size=4))
        self._steps = 0
        self.done = False
        self.truncated = False
        return self._obs()

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode; reset first")
        if action not in (0, 1):
            raise ValueError(f"action must be 0 or 1, got {action}")
        cfg = self.config
        x, xd, th, thd = self._s
        force = cfg.force if action == 1 else -cfg.force
        total_mass = cfg.cart_mass + cfg.pole_mass
        pole_ml = cfg.pole_mass * cfg.half_length
        sin_th, cos_th = math.sin(th), math.cos(th)
        temp = (force + pole_ml * thd * thd * sin_th) / total_mass
        th_acc = (cfg.gravity * sin_th - cos_th * temp) / (
            cfg.half_length * (4.0 / 3.0 - cfg.pole_mass * cos_th * cos_th / total_mass)
        )
        x_acc = temp - pole_ml * th_acc * cos_th / total_mass
        x += cfg.dt * xd
        xd += cfg.dt * x_acc
        th += cfg.dt * thd
        thd += cfg.dt * th_acc
        self._s = (x, xd, th, thd)
        self._steps += 1
        if abs(x) > cfg.x_limit or abs(th) > cfg.theta_limit:
            self.done = True
            return self._obs(), 0.0, True
        if self._steps >= cfg.episode_cap:
            self.done = True
            self.truncated = True
        return self._obs(), 1.0, self.done
