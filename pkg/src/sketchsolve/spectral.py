"""Spectral analysis of the expected sketched projection matrix.

The worst-case convergence rate of a sketch-and-project solver equals the
smallest eigenvalue of E[P], P = (SA)^+ SA.  This module estimates E[P] by
Monte Carlo, evaluates the closed-form surrogate
``gamma * Sigma (gamma * Sigma + I)^{-1}`` (Sigma = A^T A), and computes the
family of closed-form lower bounds on the rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import symmetrize
from .randsvd import ErrEstimate, err_monte_carlo
from .rng import child_seed
from .sketch import SketchSpec, apply_sketch, draw_sketch

__all__ = [
    "ProjectionEstimate",
    "SurrogateSpec",
    "GaussianRateBound",
    "RateBoundSet",
    "SurrogateComparison",
    "expected_projection",
    "rate_bound_set",
    "worst_case_rate",
    "gamma_implicit",
    "surrogate_projection",
    "surrogate_eigenvalues",
    "surrogate_rate",
    "gaussian_rate_bound",
    "gaussian_rate_variant",
    "decay_rate_bound",
    "surrogate_vs_empirical",
    "projection_matrix",
]


@dataclass(frozen=True)
class ProjectionEstimate:
    """Symmetrized Monte-Carlo mean of sampled projections and its spectrum."""

    mean_P: np.ndarray
    trials: int
    eigenvalues: np.ndarray  # non-increasing, inside [-1e-8, 1 + 1e-8]

    @property
    def n(self) -> int:
        return self.mean_P.shape[0]


@dataclass(frozen=True)
class SurrogateSpec:
    """Parameters of the surrogate for E[P]: eigenvalues g*s2/(g*s2 + 1)."""

    gamma: float
    sigma_sq: np.ndarray
    mode: str  # "monte_carlo_gamma" | "implicit_gamma"
    epsilon_report: float = 0.0


@dataclass(frozen=True)
class GaussianRateBound:
    """(1 - eps) * k * sigma_min^2 / Err(A, k-1) with the Gaussian epsilon.

    ``epsilon`` uses the natural logarithm; ``epsilon_log10`` is the same
    expression with a base-10 logarithm, reported because the two choices
    differ materially for moderate n and only the base-10 value stays below
    0.25 at (n=1000, k=50).
    """

    bound: float
    epsilon: float
    vacuous: bool
    epsilon_log10: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.bound, self.epsilon)


@dataclass(frozen=True)
class RateBoundSet:
    """The stack of closed-form rate lower bounds for one (A, k) cell.

    ``simple`` is k sigma_min^2 / ||A||_F^2; ``gaussian`` carries the
    explicit-epsilon bound, ``variant`` the wider-range form with its
    constant C, ``surrogate`` the Err-based expression, and ``decay`` an
    optional decay-aware bound labelled by its kind.
    """

    k: int
    simple: float
    gaussian: GaussianRateBound
    variant: float | None
    surrogate: float
    decay: float | None = None
    decay_kind: str | None = None


def rate_bound_set(
    sigma: np.ndarray,
    k: int,
    err_km1: float,
    decay_kind: str | None = None,
    C_user: float = 1.0,
    **decay_params,
) -> RateBoundSet:
    """Assemble every closed-form bound from a spectrum and Err(A, k-1)."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    sig_min_sq = float(sigma[-1] ** 2)
    fro_sq = float(np.sum(sigma**2))
    gaussian = gaussian_rate_bound(sig_min_sq, err_km1, k, n)
    try:
        variant = gaussian_rate_variant(sig_min_sq, err_km1, k, n)
    except ValueError:
        variant = None
    decay = None
    if decay_kind is not None:
        decay = decay_rate_bound(decay_kind, k, sigma, C_user, **decay_params)
    return RateBoundSet(
        k=k,
        simple=min(k * sig_min_sq / fro_sq, 1.0),
        gaussian=gaussian,
        variant=variant,
        surrogate=k * sig_min_sq / (k * sig_min_sq + err_km1),
        decay=decay,
        decay_kind=decay_kind,
    )


@dataclass(frozen=True)
class SurrogateComparison:
    """Empirical smallest eigenvalue of mean_P vs. the surrogate bound."""

    k: int
    family: str
    s: int | None
    s_min: float
    surrogate: float
    rel_gap: float
    gamma_mode: str
    trials: int
    err_trials: int

    def csv_row(self) -> dict:
        return {
            "k": self.k,
            "family": self.family,
            "s": "" if self.s is None else self.s,
            "s_min": self.s_min,
            "surrogate": self.surrogate,
            "gap": self.rel_gap,
            "gamma_mode": self.gamma_mode,
            "trials": self.trials,
        }


def projection_matrix(S, A: np.ndarray) -> np.ndarray:
    """Orthogonal projection (n x n) onto the row span of ``S A``."""
    from .linalg import orth_rowspace

    Q = orth_rowspace(apply_sketch(S, A))
    return Q @ Q.T


def expected_projection(A: np.ndarray, spec: SketchSpec, trials: int) -> ProjectionEstimate:
    """Monte-Carlo mean of P = (SA)^+ SA over independent sketches.

    The mean is explicitly symmetrized before its eigendecomposition.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    acc = np.zeros((n, n))
    for t in range(trials):
        acc += projection_matrix(draw_sketch(spec, A.shape[0], trial=t), A)
    mean_P = symmetrize(acc / trials)
    eigs = np.linalg.eigvalsh(mean_P)[::-1]
    return ProjectionEstimate(mean_P=mean_P, trials=trials, eigenvalues=eigs)


def worst_case_rate(estimate: ProjectionEstimate) -> float:
    """Smallest eigenvalue of the estimated E[P], clamped to [0, 1]."""
    return float(np.clip(estimate.eigenvalues[-1], 0.0, 1.0))


def gamma_implicit(sigma_sq: np.ndarray, k: int) -> float:
    """Solve ``sum_i g*s2_i / (g*s2_i + 1) = k`` for g by bracketed bisection.

    The left side increases from 0 to rank(Sigma), so the root exists iff
    k < rank; the bracket starts at k / tr(Sigma) and expands geometrically.
    """
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    nonzero = sigma_sq[sigma_sq > 0.0]
    rank = int(nonzero.size)
    if not 1 <= k < rank:
        raise ValueError(f"k={k} outside [1, rank) with rank={rank}")

    def f(gamma: float) -> float:
        x = gamma * nonzero
        return float(np.sum(x / (x + 1.0)))

    lo = k / float(nonzero.sum())
    hi = lo
    while f(hi) < k:
        hi *= 2.0
    if f(lo) > k:
        lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < k:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


def surrogate_eigenvalues(sigma_sq: np.ndarray, gamma: float) -> np.ndarray:
    x = gamma * np.asarray(sigma_sq, dtype=float)
    return x / (x + 1.0)


def surrogate_projection(
    A: np.ndarray,
    k: int,
    mode: str = "implicit_gamma",
    err_km1: ErrEstimate | float | None = None,
) -> tuple[SurrogateSpec, np.ndarray]:
    """Surrogate matrix for E[P]: ``g A^T A (g A^T A + I)^{-1}``.

    ``mode="monte_carlo_gamma"`` sets g = k / Err(A, k-1) from the supplied
    estimate; ``mode="implicit_gamma"`` inverts the trace equation instead.
    The returned matrix shares A's right-singular-vector eigenbasis.
    """
    A = np.asarray(A, dtype=float)
    if k < 1:
        raise ValueError("k must be >= 1")
    _, svals, Vt = np.linalg.svd(A, full_matrices=False)
    sigma_sq = svals**2
    if mode == "monte_carlo_gamma":
        if err_km1 is None:
            raise ValueError("monte_carlo_gamma mode needs an Err(A, k-1) estimate")
        err_val = err_km1.mean if isinstance(err_km1, ErrEstimate) else float(err_km1)
        if err_val <= 0.0:
            raise ValueError("Err(A, k-1) must be positive")
        gamma = k / err_val
    elif mode == "implicit_gamma":
        gamma = gamma_implicit(sigma_sq, k)
    else:
        raise ValueError(f"unknown gamma mode {mode!r}")
    lam = surrogate_eigenvalues(sigma_sq, gamma)
    P_bar = (Vt.T * lam) @ Vt
    return SurrogateSpec(gamma=gamma, sigma_sq=sigma_sq, mode=mode), P_bar


def surrogate_rate(sigma_min_sq: float, gamma: float, epsilon: float = 0.0) -> float:
    """(1 - eps) * g * sigma_min^2 / (g * sigma_min^2 + 1)."""
    if sigma_min_sq <= 0.0 or gamma <= 0.0:
        raise ValueError("sigma_min_sq and gamma must be positive")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    x = gamma * sigma_min_sq
    return (1.0 - epsilon) * x / (x + 1.0)


def gaussian_rate_bound(sigma_min_sq: float, err_km1: float, k: int, n: int) -> GaussianRateBound:
    """Rate lower bound for Gaussian sketches with explicit epsilon.

    eps = 4k/n + 8 ln(3n)/n; the bound is reported even when eps >= 1, in
    which case it is non-positive and flagged vacuous.
    """
    if k < 1 or n < k or err_km1 <= 0.0:
        raise ValueError("need k >= 1, n >= k, err_km1 > 0")
    epsilon = 4.0 * k / n + 8.0 * math.log(3.0 * n) / n
    epsilon_log10 = 4.0 * k / n + 8.0 * math.log10(3.0 * n) / n
    bound = (1.0 - epsilon) * k * sigma_min_sq / err_km1
    return GaussianRateBound(
        bound=bound,
        epsilon=epsilon,
        vacuous=epsilon >= 1.0,
        epsilon_log10=epsilon_log10,
    )


def gaussian_rate_variant(sigma_min_sq: float, err_km1: float, k: int, n: int) -> float:
    """Wider-range variant ``0.05/(1+C) * k sigma_min^2 / Err(A, k-1)``.

    C = ((sqrt(k) + 2) / (sqrt(n) - sqrt(k) - 2))^2, valid for
    k < (sqrt(n) - 2)^2.
    """
    if k >= (math.sqrt(n) - 2.0) ** 2:
        raise ValueError(f"k={k} outside validity range k < (sqrt(n) - 2)^2")
    if err_km1 <= 0.0:
        raise ValueError("err_km1 must be positive")
    C = ((math.sqrt(k) + 2.0) / (math.sqrt(n) - math.sqrt(k) - 2.0)) ** 2
    return 0.05 / (1.0 + C) * k * sigma_min_sq / err_km1


def decay_rate_bound(
    kind: str,
    k: int,
    sigma: np.ndarray,
    C_user: float = 1.0,
    *,
    beta: float | None = None,
    alpha: float | None = None,
    r: int | None = None,
    c: float | None = None,
    C1: float = 1.0,
) -> float:
    """Closed-form k-scaling rate bounds, with the absolute constant exposed.

    kind="general":     k   * sigma_min^2 / (C ||A||_F^2)
    kind="polynomial":  k^beta  * sigma_min^2 / (C ||A||_F^2)   (k <= n/2)
    kind="exponential": alpha^k * sigma_min^2 / (C ||A||_F^2)   (k <= n/2)
    kind="flat_tail":   k / (C n)       (k >= max(2r, C1); tail index r)

    Values are clamped to [0, 1]; the unspecified constants live in C_user.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    if C_user <= 0.0 or k < 1:
        raise ValueError("need C_user > 0 and k >= 1")
    sig_min_sq = float(sigma[-1] ** 2)
    fro_sq = float(np.sum(sigma**2))
    if kind == "general":
        val = k * sig_min_sq / (C_user * fro_sq)
    elif kind == "polynomial":
        if beta is None or beta <= 1.0:
            raise ValueError("polynomial kind needs beta > 1")
        if k > n // 2:
            raise ValueError(f"k={k} outside validity range k <= n/2")
        val = k**beta * sig_min_sq / (C_user * fro_sq)
    elif kind == "exponential":
        if alpha is None or alpha <= 1.0:
            raise ValueError("exponential kind needs alpha > 1")
        if k > n // 2:
            raise ValueError(f"k={k} outside validity range k <= n/2")
        val = alpha**k * sig_min_sq / (C_user * fro_sq)
    elif kind == "flat_tail":
        if r is None or not 1 <= r <= n:
            raise ValueError("flat_tail kind needs a tail index r in [1, n]")
        if c is not None and c < 1.0:
            raise ValueError("flat-tail constant c must be >= 1")
        if k < max(2 * r, C1):
            raise ValueError(f"k={k} below validity range max(2r, C1)")
        val = k / (C_user * n)
    else:
        raise ValueError(f"unknown decay kind {kind!r}")
    return float(np.clip(val, 0.0, 1.0))


def surrogate_vs_empirical(
    A: np.ndarray,
    spec: SketchSpec,
    k: int,
    trials: int,
    err_trials: int = 50,
) -> SurrogateComparison:
    """Compare lambda_min of the Monte-Carlo mean projection with the
    surrogate bound ``k s_min^2 / (k s_min^2 + Err(A, k-1))``.

    Err(A, k-1) is estimated from Gaussian sketches of size k-1 on a seed
    stream derived from (but independent of) the projection stream.
    """
    A = np.asarray(A, dtype=float)
    spec_k = SketchSpec(
        family=spec.family,
        k=k,
        s=spec.s,
        sampling=spec.sampling,
        seed_stream=spec.seed_stream,
    )
    est = expected_projection(A, spec_k, trials)
    s_min = worst_case_rate(est)
    sigma_min_sq = float(np.linalg.svd(A, compute_uv=False)[-1] ** 2)
    err_spec = SketchSpec(
        family="gaussian", k=max(k - 1, 1),
        seed_stream=child_seed(spec.seed_stream, 1),
    )
    err = err_monte_carlo(A, k - 1, err_spec, err_trials)
    surrogate = k * sigma_min_sq / (k * sigma_min_sq + err.mean)
    rel_gap = abs(s_min - surrogate) / s_min if s_min > 0 else float("inf")
    return SurrogateComparison(
        k=k,
        family=spec.family,
        s=spec.s,
        s_min=s_min,
        surrogate=surrogate,
        rel_gap=rel_gap,
        gamma_mode="monte_carlo_gamma",
        trials=trials,
        err_trials=err_trials,
    )
