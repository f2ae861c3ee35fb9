"""Feature basis, finite chains, and the two control benchmarks."""

import math

import numpy as np
import pytest

from implicit_td.core import DimensionMismatchError
from implicit_td.envs import (
    CartPole,
    FiniteMrp,
    PuddleWorld,
    fourier_features,
    make_fourier_basis,
    mrp_sample_episode,
    random_chain_mrp,
    sample_state_path,
    stationary_distribution,
)

# --- Fourier basis


def test_fourier_1d_endpoints():
    basis = make_fourier_basis(order=3, dims=1)
    assert np.array_equal(fourier_features(basis, np.array([0.0])), [1, 1, 1, 1])
    assert fourier_features(basis, np.array([1.0])) == pytest.approx([1, -1, 1, -1])


def test_fourier_first_feature_constant():
    basis = make_fourier_basis(order=3, dims=2)
    feats = fourier_features(basis, np.array([0.37, 0.91]))
    assert feats.shape == (16,)
    assert feats[0] == 1.0
    assert np.all(np.abs(feats) <= 1.0)


def test_fourier_coefficients_lexicographic():
    basis = make_fourier_basis(order=1, dims=2)
    assert basis.coefficients.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_fourier_dimension_mismatch():
    basis = make_fourier_basis(order=2, dims=2)
    with pytest.raises(DimensionMismatchError):
        fourier_features(basis, np.array([0.5]))


def test_fourier_midpoint_values():
    basis = make_fourier_basis(order=3, dims=1)
    assert fourier_features(basis, np.array([0.5])) == pytest.approx(
        [1.0, 0.0, -1.0, 0.0], abs=1e-12
    )


# --- finite MRPs


def test_random_chain_deterministic_and_stochastic():
    a = random_chain_mrp(4, seed=99)
    b = random_chain_mrp(4, seed=99)
    assert np.array_equal(a.p, b.p) and np.array_equal(a.r, b.r)
    assert a.p.sum(axis=1) == pytest.approx(np.ones(4))
    assert np.all(a.p > 0.0)
    assert np.array_equal(a.features, np.eye(4))


def test_stationary_distribution_two_oracles():
    mrp = random_chain_mrp(5, seed=7)
    xi = stationary_distribution(mrp)
    assert xi.sum() == pytest.approx(1.0)
    # power iteration as the second, independent computation
    v = np.full(5, 0.2)
    for _ in range(10_000):
        v = v @ mrp.p
    assert xi == pytest.approx(v, abs=1e-10)


def test_reducible_chain_rejected():
    p = np.array([[1.0, 0.0], [0.5, 0.5]])  # state 0 absorbs
    with pytest.raises(ValueError):
        FiniteMrp(
            n_states=2,
            p=p,
            r=np.zeros(2),
            xi0=np.array([0.5, 0.5]),
            features=np.eye(2),
        )


def test_periodic_but_irreducible_chain_accepted():
    # deterministic 2-cycle; period 2 is fine, only reducibility is fatal
    p = np.array([[0.0, 1.0], [1.0, 0.0]])
    mrp = FiniteMrp(
        n_states=2, p=p, r=np.array([1.0, 0.0]), xi0=np.array([0.5, 0.5]),
        features=np.eye(2),
    )
    assert stationary_distribution(mrp) == pytest.approx([0.5, 0.5])


def test_mrp_episode_horizon_and_determinism():
    mrp = random_chain_mrp(3, seed=1)
    assert len(mrp_sample_episode(mrp, horizon=1, seed=0)) == 1
    a = mrp_sample_episode(mrp, horizon=20, seed=5)
    b = mrp_sample_episode(mrp, horizon=20, seed=5)
    for ta, tb in zip(a, b):
        assert np.array_equal(ta.phi_t, tb.phi_t) and ta.reward == tb.reward


def test_mrp_episode_cycle_alternates():
    p = np.array([[0.0, 1.0], [1.0, 0.0]])
    mrp = FiniteMrp(
        n_states=2, p=p, r=np.array([1.0, 0.0]), xi0=np.array([1.0, 0.0]),
        features=np.eye(2),
    )
    episode = mrp_sample_episode(mrp, horizon=6, seed=3)
    for i, tr in enumerate(episode):
        state = i % 2
        assert tr.phi_t[state] == 1.0
        assert tr.phi_next[1 - state] == 1.0
        assert tr.reward == mrp.r[state]


def test_state_path_frequencies_match_stationary():
    mrp = random_chain_mrp(5, seed=42)
    path = sample_state_path(mrp, 100_000, np.random.default_rng(17))
    xi = stationary_distribution(mrp)
    freq = np.bincount(path, minlength=5) / path.shape[0]
    assert 0.5 * np.sum(np.abs(freq - xi)) < 0.01


# --- puddle world


def test_puddle_depth_hand_values():
    env = PuddleWorld()
    assert env.puddle_depth(0.2, 0.75) == pytest.approx(0.1)  # on axis 1
    assert env.puddle_depth(0.45, 0.6) == pytest.approx(0.1)  # on axis 2
    assert env.puddle_depth(0.2, 0.80) == pytest.approx(0.05)
    assert env.puddle_depth(0.9, 0.1) == 0.0


def test_puddle_step_reward_matches_depth():
    env = PuddleWorld()
    env.reset(seed=4)
    obs, reward, done = env.step(3)
    if not done:
        x, y = obs
        assert reward == pytest.approx(-1.0 - 400.0 * env.puddle_depth(x, y))


def test_puddle_clean_step_costs_exactly_one():
    env = PuddleWorld()
    env.reset(seed=0)
    env._x, env._y = 0.9, 0.1  # far from both puddles, outside the goal
    obs, reward, done = env.step(1)
    assert reward == -1.0
    assert not done


def test_puddle_goal_terminates_with_zero_reward():
    env = PuddleWorld()
    env.reset(seed=0)
    env._x, env._y = 0.95, 0.95
    obs, reward, done = env.step(0)
    assert done and reward == 0.0
    with pytest.raises(RuntimeError):
        env.step(0)


def test_puddle_seeded_trajectories_identical():
    def run(seed):
        env = PuddleWorld()
        env.reset(seed)
        out = []
        for i in range(30):
            obs, reward, done = env.step(i % 4)
            out.append((tuple(obs), reward, done))
            if done:
                break
        return out

    assert run(123) == run(123)
    assert run(123) != run(124)


def test_puddle_positions_stay_in_unit_square():
    env = PuddleWorld()
    rng = np.random.default_rng(0)
    obs = env.reset(seed=8)
    for _ in range(200):
        obs, _, done = env.step(int(rng.integers(4)))
        assert 0.0 <= obs[0] <= 1.0 and 0.0 <= obs[1] <= 1.0
        if done:
            obs = env.reset(seed=9)


# --- cart-pole


def _integrate_cartpole(cfg, substeps, n_steps):
    # independent re-derivation of the dynamics, Euler at dt/substeps
    def accel(s, force):
        x, xd, th, thd = s
        total = cfg.cart_mass + cfg.pole_mass
        pole_ml = cfg.pole_mass * cfg.half_length
        sin, cos = math.sin(th), math.cos(th)
        temp = (force + pole_ml * thd * thd * sin) / total
        th_acc = (cfg.gravity * sin - cos * temp) / (
            cfg.half_length * (4.0 / 3.0 - cfg.pole_mass * cos * cos / total)
        )
        return temp - pole_ml * th_acc * cos / total, th_acc

    s = (0.0, 0.0, 0.0, 0.0)
    h = cfg.dt / substeps
    for i in range(n_steps):
        force = cfg.force if i % 2 == 1 else -cfg.force
        for _ in range(substeps):
            x, xd, th, thd = s
            x_acc, th_acc = accel(s, force)
            s = (x + h * xd, xd + h * x_acc, th + h * thd, thd + h * th_acc)
    return s


def test_cartpole_matches_fine_integration():
    # drive the env with alternating forces from the zero state and compare
    # against a reimplementation of the dynamics at two resolutions
    env = CartPole()
    cfg = env.config
    env.reset(seed=1)
    env._s = (0.0, 0.0, 0.0, 0.0)
    for i in range(20):
        _, _, done = env.step(i % 2)
        assert not done
    x, _, th, _ = env._s
    assert abs(th) < cfg.theta_limit

    # at matching resolution the trajectories must agree exactly
    same = _integrate_cartpole(cfg, substeps=1, n_steps=20)
    assert env._s == pytest.approx(same, abs=1e-12)

    # against a 20x finer grid only discretization error remains
    fine = _integrate_cartpole(cfg, substeps=20, n_steps=20)
    assert th == pytest.approx(fine[2], abs=0.02)
    assert x == pytest.approx(fine[0], abs=0.02)


def test_cartpole_angle_failure_sets_done():
    env = CartPole()
    env.reset(seed=0)
    env._s = (0.0, 0.0, 0.20, 2.0)  # past 12 degrees after one step
    obs, reward, done = env.step(1)
    assert done and reward == 0.0
    with pytest.raises(RuntimeError):
        env.step(0)


def test_cartpole_surviving_step_rewards_one():
    env = CartPole()
    env.reset(seed=3)
    _, reward, done = env.step(0)
    assert reward == 1.0 and not done


def test_cartpole_seeded_reset_deterministic():
    a = CartPole().reset(seed=11)
    b = CartPole().reset(seed=11)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, CartPole().reset(seed=12))


def test_cartpole_observation_in_unit_box():
    env = CartPole()
    obs = env.reset(seed=2)
    for _ in range(100):
        assert np.all(obs >= 0.0) and np.all(obs <= 1.0)
        obs, _, done = env.step(1)
        if done:
            break
