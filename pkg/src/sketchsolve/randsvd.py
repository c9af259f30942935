"""Randomized SVD: the sketch-based factorization, its squared-Frobenius
residual, Monte-Carlo estimation of the expected residual, and the analytic
upper bound from Gaussian range-finder theory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import orth_rowspace
from .rng import KeyPath
from .sketch import SketchSpec, apply_sketch, draw_sketch

__all__ = [
    "LowRankFactorization",
    "ErrEstimate",
    "rand_svd",
    "residual_error",
    "err_monte_carlo",
    "err_upper_bound",
    "err_upper_bound_min_p",
    "best_rank_error",
]


@dataclass(frozen=True)
class LowRankFactorization:
    """A ~= U diag(sigma) V^T with orthonormal U, V and r <= sketch size."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.size)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


@dataclass(frozen=True)
class ErrEstimate:
    """Monte-Carlo estimate of the expected squared projection residual."""

    mean: float
    stderr: float
    trials: int
    k: int
    family: str
    s: int | None = None

    def csv_row(self) -> dict:
        return {
            "k": self.k,
            "family": self.family,
            "s": "" if self.s is None else self.s,
            "trials": self.trials,
            "mean": self.mean,
            "stderr": self.stderr,
        }


def _sketch_basis(S, A: np.ndarray) -> np.ndarray:
    """Orthonormal basis Q (n x r) of the row span of S A."""
    return orth_rowspace(apply_sketch(S, A))


def rand_svd(A: np.ndarray, spec: SketchSpec, trial: KeyPath = 0) -> LowRankFactorization:
    """Two-stage randomized SVD through the row span of a sketch.

    Draws S, takes Q = orthonormal basis of rowspan(S A), factors the small
    matrix A Q = U diag(sigma) W^T and returns V = Q W, so that
    ``||A - U diag(sigma) V^T||_F^2 = ||A (I - Q Q^T)||_F^2``.
    """
    A = np.asarray(A, dtype=float)
    if spec.k > A.shape[1]:
        raise ValueError(f"sketch size k={spec.k} exceeds column count {A.shape[1]}")
    S = draw_sketch(spec, A.shape[0], trial)
    Q = _sketch_basis(S, A)
    if Q.shape[1] == 0:
        raise ValueError("degenerate sketch: S A has rank 0")
    U, sigma, Wt = np.linalg.svd(A @ Q, full_matrices=False)
    return LowRankFactorization(U=U, sigma=sigma, V=Q @ Wt.T)


def residual_error(A: np.ndarray, S) -> float:
    """Single-sample squared Frobenius residual ``||A (I - (SA)^+ SA)||_F^2``."""
    A = np.asarray(A, dtype=float)
    Q = _sketch_basis(S, A)
    total = float(np.sum(A * A))
    if Q.shape[1] == 0:
        return total
    captured = float(np.sum((A @ Q) ** 2))
    return max(total - captured, 0.0)


def err_monte_carlo(A: np.ndarray, k: int, spec: SketchSpec, trials: int) -> ErrEstimate:
    """Mean and standard error of ``residual_error`` over independent sketches.

    ``k = 0`` is exact: the projection is empty so the residual is always
    ``||A||_F^2`` and the standard error is 0.
    """
    A = np.asarray(A, dtype=float)
    if k == 0:
        return ErrEstimate(mean=float(np.sum(A * A)), stderr=0.0, trials=0,
                           k=0, family=spec.family, s=spec.s)
    if trials < 2:
        raise ValueError("trials must be >= 2")
    spec_k = replace(spec, k=k)
    samples = np.array([
        residual_error(A, draw_sketch(spec_k, A.shape[0], trial=t))
        for t in range(trials)
    ])
    return ErrEstimate(
        mean=float(samples.mean()),
        stderr=float(samples.std(ddof=1) / np.sqrt(trials)),
        trials=trials,
        k=k,
        family=spec.family,
        s=spec.s,
    )


def best_rank_error(sigma: np.ndarray, k: int) -> float:
    """Squared Frobenius error of the best rank-k approximation: sum_{i>k} sigma_i^2."""
    sigma = np.asarray(sigma, dtype=float)
    if not 0 <= k <= sigma.size:
        raise ValueError(f"k={k} outside [0, {sigma.size}]")
    return float(np.sum(sigma[k:] ** 2))


def err_upper_bound(sigma: np.ndarray, k: int, p: int) -> float:
    """Gaussian range-finder bound ``(k-1)/(p-1) * sum_{i >= k-p} sigma_i^2``.

    Valid for 2 <= p <= k - 2 (indices are 1-based as in the spectrum).
    """
    sigma = np.asarray(sigma, dtype=float)
    if not 2 <= p <= k - 2:
        raise ValueError(f"p={p} outside [2, {k - 2}]")
    tail = float(np.sum(sigma[k - p - 1:] ** 2))
    return (k - 1) / (p - 1) * tail


def err_upper_bound_min_p(sigma: np.ndarray, k: int) -> tuple[float, int]:
    """Minimize :func:`err_upper_bound` over admissible p; returns (bound, p)."""
    if k < 4:
        raise ValueError("need k >= 4 for a non-empty p range")
    best = (np.inf, 2)
    for p in range(2, k - 1):
        val = err_upper_bound(sigma, k, p)
        if val < best[0]:
            best = (val, p)
    return best
