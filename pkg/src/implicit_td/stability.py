"""Closed-form stability analysis of single TD(lambda) steps.

A zero-reward TD(lambda) step applies a linear gain matrix to the weights:

    standard:  w' = (I - alpha * X) w          with X = e d^T
    implicit:  w' = (I - alpha * Q X) w        with Q = (I + alpha e e^T)^-1

where e is the eligibility trace entering the update and d = phi_t -
gamma * phi_next. Because X is rank-one, the Gram matrix M M^T of either gain
matrix M has k-2 eigenvalues equal to 1 plus an explicit pair, here evaluated
in closed form. Q shrinks the trace direction by beta = 1 / (1 + alpha
||e||^2), so the implicit pair is the standard pair with alpha replaced by
alpha * beta in every coefficient.

Norm convention: the two closed-form pairs are eigenvalues of M M^T, i.e.
squared singular values. Reports therefore store *squared* spectral norms
(`sq_norm_*`); the spectral norm itself is sqrt(sq_norm). Note also that the
shrinkage obeys alpha * beta * ||e||^2 = alpha ||e||^2 / (1 + alpha ||e||^2)
< 1 for every finite trace, which is the quantitative form of the implicit
step's built-in contraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import check_same_length

DENSE_ORACLE_MAX_K = 64


class FormulaDomainError(ArithmeticError):
    """A closed-form eigenvalue expression was evaluated outside its domain.

    The discriminant of the gain-matrix eigenvalue pair is provably
    nonnegative for Gram matrices; if this error ever triggers on finite
    input it indicates a genuine numerical anomaly worth reporting, not a
    user mistake.
    """


@dataclass(frozen=True, slots=True)
class TransitionGeometry:
    """The quantities one audit needs: trace e, TD direction d, step-size."""

    e: np.ndarray
    d: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        check_same_length(self.e, self.d)
        if self.e.shape[0] < 2:
            raise ValueError(
                "geometry needs k >= 2 (the gain matrix has k-2 unit "
                f"eigenvalues), got k={self.e.shape[0]}"
            )
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (np.isfinite(self.e).all() and np.isfinite(self.d).all()):
            raise ValueError("geometry vectors must be finite")

    @property
    def k(self) -> int:
        return self.e.shape[0]


@dataclass(frozen=True, slots=True)
class StabilityReport:
    """Eigenvalue pairs and squared spectral norms for one transition."""

    beta: float
    lam_plus: float
    lam_minus: float
    lam_im_plus: float
    lam_im_minus: float
    sq_norm_standard: float
    sq_norm_implicit: float


@dataclass(frozen=True, slots=True)
class RankTwoEigs:
    """The two nonzero-subspace eigenvalues of a rank-two matrix.

    For a real rank-two matrix the pair is either real (complex_pair False,
    lam1 >= lam2) or a complex-conjugate pair (complex_pair True, lam1 the
    member with positive imaginary part).
    """

    lam1: complex
    lam2: complex
    complex_pair: bool


def compute_beta(alpha: float, e: np.ndarray) -> float:
    """Shrinkage factor 1 / (1 + alpha ||e||^2) of the rank-one inverse."""
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return 1.0 / (1.0 + alpha * float(e @ e))


def _gram_eig_pair(
    a: float, e_norm_sq: float, d_norm_sq: float, e_dot_d: float
) -> tuple[float, float]:
    """Eigenvalue pair of (I - a*e*d^T)(I - a*e*d^T)^T beyond the unit ones."""
    prod = a * a * e_norm_sq * d_norm_sq
    disc = prod + 4.0 - 4.0 * a * e_dot_d
    if disc < 0.0:
        raise FormulaDomainError(
            f"negative discriminant {disc!r} for a={a!r}, |e|^2={e_norm_sq!r}, "
            f"|d|^2={d_norm_sq!r}, e.d={e_dot_d!r}"
        )
    half_spread = 0.5 * a * math.sqrt(e_norm_sq * d_norm_sq) * math.sqrt(disc)
    center = 1.0 + 0.5 * (prod - 2.0 * a * e_dot_d)
    return center + half_spread, center - half_spread


def standard_gain_eigenvalues(g: TransitionGeometry) -> tuple[float, float]:
    """Non-unit eigenvalue pair of the standard gain Gram matrix M M^T."""
    return _gram_eig_pair(
        g.alpha,
        float(g.e @ g.e),
        float(g.d @ g.d),
        float(g.e @ g.d),
    )


def implicit_gain_eigenvalues(g: TransitionGeometry) -> tuple[float, float]:
    """Non-unit eigenvalue pair for the implicit gain: alpha -> alpha*beta."""
    beta = compute_beta(g.alpha, g.e)
    return _gram_eig_pair(
        g.alpha * beta,
        float(g.e @ g.e),
        float(g.d @ g.d),
        float(g.e @ g.d),
    )


def rank_two_eigenvalues(
    a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray
) -> RankTwoEigs:
    """Nonzero-subspace eigenvalues of a b^T + c d^T.

    Derived from the trace identities lam1 + lam2 = a.b + c.d and
    lam1 * lam2 = (a.b)(c.d) - (a.d)(b.c); the remaining k-2 eigenvalues of
    the matrix are zero.
    """
    check_same_length(a, b)
    check_same_length(a, c)
    check_same_length(a, d)
    ab = float(a @ b)
    cd = float(c @ d)
    ad = float(a @ d)
    bc = float(b @ c)
    trace = ab + cd
    disc = (ab - cd) ** 2 + 4.0 * ad * bc
    if disc >= 0.0:
        half_spread = 0.5 * math.sqrt(disc)
        lam1 = 0.5 * trace + half_spread
        lam2 = 0.5 * trace - half_spread
        return RankTwoEigs(complex(lam1), complex(lam2), False)
    imag = 0.5 * math.sqrt(-disc)
    return RankTwoEigs(
        complex(0.5 * trace, imag), complex(0.5 * trace, -imag), True
    )


def dense_gain_matrix(g: TransitionGeometry, implicit: bool) -> np.ndarray:
    """Materialize the k x k gain matrix. Test oracle; k is capped.

    The implicit variant constructs Q explicitly through the rank-one inverse
    identity Q = I - (alpha / (1 + alpha ||e||^2)) e e^T before multiplying.
    """
    if g.k > DENSE_ORACLE_MAX_K:
        raise ValueError(f"dense oracle capped at k={DENSE_ORACLE_MAX_K}, got {g.k}")
    eye = np.eye(g.k)
    x = np.outer(g.e, g.d)
    if not implicit:
        return eye - g.alpha * x
    q = eye - (g.alpha / (1.0 + g.alpha * float(g.e @ g.e))) * np.outer(g.e, g.e)
    return eye - g.alpha * (q @ x)


def spectral_sq_norm(m: np.ndarray) -> float:
    """Largest eigenvalue of M M^T (the squared spectral norm). Test oracle."""
    if m.shape[0] > DENSE_ORACLE_MAX_K or m.shape[1] > DENSE_ORACLE_MAX_K:
        raise ValueError(f"dense oracle capped at k={DENSE_ORACLE_MAX_K}, got {m.shape}")
    return float(np.linalg.eigvalsh(m @ m.T)[-1])


def audit_step(g: TransitionGeometry) -> StabilityReport:
    """Evaluate both closed-form pairs plus the squared norms for one step."""
    lam_plus, lam_minus = standard_gain_eigenvalues(g)
    lam_im_plus, lam_im_minus = implicit_gain_eigenvalues(g)
    return StabilityReport(
        beta=compute_beta(g.alpha, g.e),
        lam_plus=lam_plus,
        lam_minus=lam_minus,
        lam_im_plus=lam_im_plus,
        lam_im_minus=lam_im_minus,
        sq_norm_standard=max(lam_plus, 1.0),
        sq_norm_implicit=max(lam_im_plus, 1.0),
    )
