"""Standard and implicit TD(lambda) update rules, with the oracles that check them.

Both learners keep (weights, trace) where the stored trace is the one
*entering* the next update; each step first decays it and adds the incoming
features, then applies its rule with the fresh trace:

    standard:  w' = w + alpha * [r + gamma*phi'.w - phi.w] * e
    implicit:  w' solves w' = w + alpha * [r + gamma*phi'.w
                                           + gamma*lambda*(e_prev.w) - e.w'] * e

The implicit solution is evaluated with two inner products and a scalar
divide (rank-one inverse), never a k x k matrix, so both steps cost O(k).
Terminal transitions zero the bootstrap term and reset the trace after the
update.

Divergence contract: a step that would produce non-finite weights sets the
`diverged` flag and leaves the state otherwise untouched; a finite result
whose max-abs exceeds DIVERGENCE_THRESHOLD is applied and then flagged.
Flagged learners ignore further steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DiscountSpec, Transition, as_vector, check_same_length, update_trace
from .envs import FiniteMrp, stationary_distribution

DIVERGENCE_THRESHOLD = 1e8
ORACLE_MAX_K = 64


@dataclass(slots=True)
class TdLearnerState:
    weights: np.ndarray
    trace: np.ndarray
    disc: DiscountSpec
    step_count: int = 0
    diverged: bool = False

    @property
    def k(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, slots=True)
class TdStepRecord:
    """Per-step scalars: the applied update's bracketed error, alpha, ||e||^2,
    and the post-step max-abs weight (pre-step when the step was rejected)."""

    td_error: float
    alpha_used: float
    trace_norm_sq: float
    max_weight_abs: float


def make_learner(
    k: int, disc: DiscountSpec, w0: np.ndarray | None = None
) -> TdLearnerState:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if w0 is None:
        weights = np.zeros(k)
    else:
        weights = as_vector(w0).copy()
        if weights.shape[0] != k:
            raise ValueError(f"w0 has length {weights.shape[0]}, expected {k}")
    return TdLearnerState(weights=weights, trace=np.zeros(k), disc=disc)


def _noop_record(state: TdLearnerState) -> TdStepRecord:
    return TdStepRecord(0.0, 0.0, 0.0, float(np.max(np.abs(state.weights))))


def _commit(
    state: TdLearnerState,
    tr: Transition,
    alpha: float,
    e: np.ndarray,
    td_error: float,
    w_new: np.ndarray,
) -> tuple[TdLearnerState, TdStepRecord]:
    trace_norm_sq = float(e @ e)
    if not np.isfinite(w_new).all():
        state.diverged = True
        return state, TdStepRecord(
            td_error, alpha, trace_norm_sq, float(np.max(np.abs(state.weights)))
        )
    state.weights = w_new
    state.trace = np.zeros_like(e) if tr.terminal else e
    state.step_count += 1
    max_abs = float(np.max(np.abs(w_new)))
    if max_abs > DIVERGENCE_THRESHOLD:
        state.diverged = True
    return state, TdStepRecord(td_error, alpha, trace_norm_sq, max_abs)


def td_step_standard(
    state: TdLearnerState, tr: Transition, alpha: float
) -> tuple[TdLearnerState, TdStepRecord]:
    """One accumulating-trace TD(lambda) step. Mutates and returns `state`."""
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if state.diverged:
        return state, _noop_record(state)
    check_same_length(state.weights, tr.phi_t)
    disc = state.disc
    w = state.weights
    e = update_trace(state.trace, tr.phi_t, disc)
    bootstrap = 0.0 if tr.terminal else disc.gamma * float(tr.phi_next @ w)
    delta = tr.reward + bootstrap - float(tr.phi_t @ w)
    w_new = w + (alpha * delta) * e
    return _commit(state, tr, alpha, e, delta, w_new)


def td_step_implicit(
    state: TdLearnerState, tr: Transition, alpha: float
) -> tuple[TdLearnerState, TdStepRecord]:
    """One implicit TD(lambda) step via the rank-one inverse.

    With b = r + gamma*phi'.w + gamma*lambda*(e_prev.w), the fixed point of
    w' = w + alpha*(b - e.w')*e is

        u  = w + alpha * b * e
        w' = u - (alpha / (1 + alpha*||e||^2)) * (e.u) * e

    The recorded td_error is the bracketed scalar of the applied update,
    b - e.w'.
    """
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if state.diverged:
        return state, _noop_record(state)
    check_same_length(state.weights, tr.phi_t)
    disc = state.disc
    w = state.weights
    e_prev = state.trace
    e = update_trace(e_prev, tr.phi_t, disc)
    bootstrap = 0.0 if tr.terminal else disc.gamma * float(tr.phi_next @ w)
    bracket = tr.reward + bootstrap + disc.trace_decay * float(e_prev @ w)
    u = w + (alpha * bracket) * e
    shrink = alpha / (1.0 + alpha * float(e @ e))
    w_new = u - (shrink * float(e @ u)) * e
    td_error = bracket - float(e @ w_new)
    return _commit(state, tr, alpha, e, td_error, w_new)


def td_step_implicit_oracle(
    state: TdLearnerState, tr: Transition, alpha: float
) -> np.ndarray:
    """Dense solve of (I + alpha e e^T) w' = w + alpha*b*e. Test oracle.

    Accepts alpha = 0 (the identity solve) so the zero-step limit is
    checkable; does not mutate the state.
    """
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    k = state.k
    if k > ORACLE_MAX_K:
        raise ValueError(f"dense oracle capped at k={ORACLE_MAX_K}, got {k}")
    check_same_length(state.weights, tr.phi_t)
    disc = state.disc
    w = state.weights
    e = update_trace(state.trace, tr.phi_t, disc)
    bootstrap = 0.0 if tr.terminal else disc.gamma * float(tr.phi_next @ w)
    bracket = tr.reward + bootstrap + disc.trace_decay * float(state.trace @ w)
    lhs = np.eye(k) + alpha * np.outer(e, e)
    rhs = w + (alpha * bracket) * e
    return np.linalg.solve(lhs, rhs)


SERIES_TOL = 1e-14
SERIES_TERM_CAP = 10**6


def td_fixed_point_oracle(mrp: FiniteMrp, disc: DiscountSpec) -> np.ndarray:
    """w* of linear TD(lambda) on a finite MRP, by truncated matrix series.

    Solves A w* = b with

        A = Phi^T D S (I - gamma P) Phi,   b = Phi^T D S r,
        S = sum_{m>=0} (gamma*lambda*P)^m,  D = diag(stationary distribution).

    The series is truncated when the next term's max-abs falls below
    SERIES_TOL; gamma*lambda < 1 makes the decay geometric.
    """
    xi = stationary_distribution(mrp)
    n = mrp.n_states
    series = np.eye(n)
    term = np.eye(n)
    decay = disc.trace_decay
    for _ in range(SERIES_TERM_CAP):
        term = decay * (mrp.p @ term)
        if float(np.abs(term).max()) < SERIES_TOL:
            break
        series += term
    weighted = xi[:, None] * series  # D @ S without forming D
    a = mrp.features.T @ weighted @ (np.eye(n) - disc.gamma * mrp.p) @ mrp.features
    b = mrp.features.T @ weighted @ mrp.r
    return np.linalg.solve(a, b)
