"""Step-vector subspaces approximating bounded monotone vectors.

For ``1 <= N <= n`` the vectors ``h_j`` (``j = 0..N-1``) with
``h_j[i] = 0`` for ``i <= floor(j n / N)`` (1-based ``i``) and 1 otherwise
span a subspace within empirical distance ``2 sqrt(2) C / sqrt(N)`` of every
non-decreasing vector bounded by ``C``. The audit below checks that bound on
random vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["StepBasis", "build_basis", "subspace_distance", "delta", "random_monotone", "lemma_bound_audit"]


@dataclass(frozen=True)
class StepBasis:
    n: int
    N: int
    vectors: np.ndarray  # shape (N, n)
    direction: str = "isotone"

    @property
    def delta_factor(self) -> float:
        """``delta / C``."""
        return 2.0 * np.sqrt(2.0) / np.sqrt(self.N)


def build_basis(n: int, N: int, direction: str = "isotone") -> StepBasis:
    """0/1 step basis of dimension ``N`` in ``R^n``.

    ``direction="antitone"`` mirrors every vector end to end, which gives the
    subspace used for non-increasing vectors.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > n:
        raise ValueError(f"N must not exceed n (N={N}, n={n})")
    if direction not in ("isotone", "antitone"):
        raise ValueError(f"unknown direction {direction!r}")
    i = np.arange(1, n + 1)
    zeros_up_to = (np.arange(N) * n) // N
    vectors = (i[None, :] > zeros_up_to[:, None]).astype(np.float64)
    if direction == "antitone":
        vectors = vectors[:, ::-1].copy()
    vectors.setflags(write=False)
    return StepBasis(n, N, vectors, direction)


def subspace_distance(f, basis: StepBasis) -> float:
    """Empirical-norm distance from ``f`` to the span of ``basis``."""
    f = np.asarray(f, dtype=np.float64).ravel()
    if f.size != basis.n:
        raise ValueError(f"f has length {f.size}, basis lives in R^{basis.n}")
    q, _ = np.linalg.qr(basis.vectors.T)
    resid = f - q @ (q.T @ f)
    return float(np.sqrt(np.mean(resid**2)))


def delta(C: float, N: int) -> float:
    return float(2.0 * np.sqrt(2.0) * C / np.sqrt(N))


def random_monotone(rng: np.random.Generator, n: int, C: float) -> np.ndarray:
    """Random non-decreasing vector spanning ``[-C, C]``.

    Cumulative sums of non-negative increments, rescaled. Some draws use
    dense increments and others sparse ones, down to a single jump, so that
    both smooth and abrupt shapes are exercised.
    """
    style = rng.integers(3)
    if style == 0:
        inc = rng.exponential(size=n)
    elif style == 1:
        inc = rng.exponential(size=n) * (rng.random(n) < rng.uniform(0.01, 0.2))
    else:
        inc = np.zeros(n)
        inc[rng.integers(n)] = 1.0
    s = np.cumsum(inc)
    span = s[-1] - s[0]
    if span == 0:
        return np.full(n, rng.uniform(-C, C))
    return -C + 2.0 * C * (s - s[0]) / span


def lemma_bound_audit(C: float, n: int, N: int, trials: int, seed: int = 0, direction: str = "isotone") -> float:
    """Largest observed ``distance / delta`` over random bounded monotone vectors.

    The bound guarantees a value of at most 1.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    basis = build_basis(n, N, direction)
    rng = np.random.default_rng(seed)
    d = delta(C, N)
    worst = 0.0
    for _ in range(trials):
        f = random_monotone(rng, n, C)
        if direction == "antitone":
            f = f[::-1]
        worst = max(worst, subspace_distance(f, basis) / d)
    return worst
