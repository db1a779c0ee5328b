"""Right-continuous piecewise-constant functions on [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .isotonic import SortedSample

__all__ = ["StepFunction", "extend", "l2_distance", "grid_l2_distance", "jump_count"]

JUMP_TOL = 1e-9


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function with one value per piece.

    Piece ``i`` covers ``[breakpoints[i], breakpoints[i + 1])`` except that
    the first piece starts at 0 whatever ``breakpoints[0]`` is, and the last
    piece is closed at 1.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=np.float64).ravel()
        vals = np.array(self.values, dtype=np.float64).ravel()
        if bp.shape != vals.shape:
            raise ValueError(
                f"breakpoints and values lengths differ ({bp.size} != {vals.size})"
            )
        if bp.size == 0:
            raise ValueError("a step function needs at least one piece")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if bp[0] < 0 or bp[-1] > 1:
            raise ValueError("breakpoints must lie in [0, 1]")
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def __call__(self, x):
        if np.ndim(x) == 0:
            return evaluate(self, x)
        return evaluate_batch(self, x)

    @property
    def edges(self) -> np.ndarray:
        """Piece boundaries ``0 = e_0 < e_1 < ... < e_n = 1``."""
        return np.concatenate(([0.0], self.breakpoints[1:], [1.0]))

    @property
    def total_variation(self) -> float:
        return float(np.abs(np.diff(self.values)).sum())

    def piece_index(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        bad = (xs < 0) | (xs > 1) | np.isnan(xs)
        if np.any(bad):
            raise ValueError(f"out of domain: {xs[bad][:5].tolist()} not in [0, 1]")
        idx = np.searchsorted(self.breakpoints, xs, side="right") - 1
        return np.clip(idx, 0, self.values.size - 1)


def extend(sample: SortedSample, fitted) -> StepFunction:
    """Extend fitted values at the sample abscissae to all of [0, 1].

    >>> f = extend(SortedSample([0.2, 0.5, 0.9], [0, 0, 0]), [1.0, 2.0, 3.0])
    >>> f(0.0), f(0.49), f(0.5), f(1.0)
    (1.0, 1.0, 2.0, 3.0)
    """
    fitted = np.asarray(fitted, dtype=np.float64).ravel()
    if fitted.size != sample.n:
        raise ValueError(f"length mismatch: {fitted.size} values for {sample.n} points")
    return StepFunction(sample.xs, fitted)


def evaluate(f: StepFunction, x: float) -> float:
    return float(f.values[f.piece_index(x)])


def evaluate_batch(f: StepFunction, xs) -> np.ndarray:
    return f.values[f.piece_index(xs)]


def _merged(f: StepFunction, g: StepFunction):
    edges = np.union1d(f.edges, g.edges)
    left = edges[:-1]
    return np.diff(edges), evaluate_batch(f, left), evaluate_batch(g, left)


def l2_distance(f: StepFunction, g: StepFunction) -> float:
    """Exact L2 distance under the uniform law on [0, 1].

    Both functions are constant between consecutive points of the merged
    edge set, so the integral of the squared difference is a finite sum.
    """
    widths, fv, gv = _merged(f, g)
    return float(np.sqrt(np.dot(widths, (fv - gv) ** 2)))


def grid_l2_distance(f, g, grid_size: int = 10_000, density=None) -> tuple[float, int]:
    """Midpoint-rule L2 distance between two callables on [0, 1].

    ``density`` (a callable) weights the integrand for a non-uniform design
    law. Returns the distance and the grid size used.
    """
    grid = (np.arange(grid_size) + 0.5) / grid_size
    sq = (np.asarray(f(grid), dtype=np.float64) - np.asarray(g(grid), dtype=np.float64)) ** 2
    if density is not None:
        sq = sq * density(grid)
    return float(np.sqrt(sq.mean())), grid_size


def jump_count(f) -> int:
    """Number of adjacent pieces whose values differ by more than 1e-9."""
    values = f.values if isinstance(f, StepFunction) else np.asarray(f, dtype=np.float64)
    return int(np.count_nonzero(np.abs(np.diff(values)) > JUMP_TOL))
