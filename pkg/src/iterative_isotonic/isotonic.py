"""Least-squares projections onto the isotone and antitone cones.

The workhorse is a weighted, stack-based pool-adjacent-violators kernel
compiled with numba so that the backfitting loop can call it tens of
thousands of times per sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numba
import numpy as np

__all__ = [
    "SortedSample",
    "MonotoneFit",
    "collapse_ties",
    "iso",
    "anti",
    "iso_minmax_oracle",
    "iso_bruteforce",
    "projection_residual_check",
    "weighted_mean",
]

ISOTONE = "isotone"
ANTITONE = "antitone"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SortedSample:
    """Ordered regression sample with strictly increasing abscissae.

    Weights count how many raw observations were merged into each point.
    """

    xs: np.ndarray
    ys: np.ndarray
    ws: np.ndarray

    def __init__(self, xs, ys, ws=None):
        xs = _frozen(xs).ravel()
        ys = _frozen(ys).ravel()
        ws = _frozen(np.ones_like(xs) if ws is None else ws).ravel()
        if xs.size == 0:
            raise ValueError("empty sample")
        if not (xs.shape == ys.shape == ws.shape):
            raise ValueError(
                f"xs, ys, ws must share one length, got {xs.size}, {ys.size}, {ws.size}"
            )
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("sample contains non-finite values")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing (collapse ties first)")
        if np.any(ws <= 0) or not np.all(np.isfinite(ws)):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "ws", ws)

    def __len__(self) -> int:
        return self.xs.size

    @property
    def n(self) -> int:
        return self.xs.size

    @property
    def total_weight(self) -> float:
        return float(self.ws.sum())


@dataclass(frozen=True)
class MonotoneFit:
    """A fitted monotone vector together with its level sets.

    ``blocks`` holds ``(start, end, level)`` triples with ``end`` exclusive.
    Adjacent blocks always have distinct levels, so ``jumps`` is
    ``len(blocks) - 1``.
    """

    values: np.ndarray
    direction: str
    blocks: tuple

    @property
    def jumps(self) -> int:
        return len(self.blocks) - 1

    def __len__(self) -> int:
        return self.values.size


def collapse_ties(xs: Sequence[float], ys: Sequence[float], ws=None) -> SortedSample:
    """Sort the sample and merge duplicated abscissae.

    A merged point carries the (weighted) mean response of its group and the
    group's total weight, which is the group size for unit weights. The
    weighted projection of the collapsed sample solves the least-squares
    problem of the raw sample.
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    ws = np.ones_like(xs) if ws is None else np.asarray(ws, dtype=np.float64).ravel()
    if xs.size == 0:
        raise ValueError("empty sample")
    if not (xs.shape == ys.shape == ws.shape):
        raise ValueError(f"xs and ys lengths differ ({xs.size} != {ys.size})")
    if np.any(xs < 0) or np.any(xs > 1):
        raise ValueError("xs must lie in [0, 1]")
    order = np.argsort(xs, kind="stable")
    xs, ys, ws = xs[order], ys[order], ws[order]
    ux, start = np.unique(xs, return_index=True)
    wsum = np.add.reduceat(ws, start)
    ysum = np.add.reduceat(ws * ys, start)
    return SortedSample(ux, ysum / wsum, wsum)


def weighted_mean(values, ws=None) -> float:
    values = np.asarray(values, dtype=np.float64)
    if ws is None:
        return float(values.mean())
    ws = np.asarray(ws, dtype=np.float64)
    return float(np.dot(values, ws) / ws.sum())


@numba.njit(cache=True, nogil=True)
def _pava_kernel(y, w, out, level, weight, start):
    """Weighted PAVA onto the isotone cone, writing the fit into ``out``.

    ``level``, ``weight`` and ``start`` are scratch buffers of length n.
    Returns the number of blocks on the stack.
    """
    n = y.shape[0]
    m = 0
    for i in range(n):
        level[m] = y[i]
        weight[m] = w[i]
        start[m] = i
        m += 1
        # pool only on a strict violation
        while m > 1 and level[m - 2] > level[m - 1]:
            total = weight[m - 2] + weight[m - 1]
            level[m - 2] += (level[m - 1] - level[m - 2]) * (weight[m - 1] / total)
            weight[m - 2] = total
            m -= 1
    for j in range(m):
        stop = start[j + 1] if j + 1 < m else n
        for i in range(start[j], stop):
            out[i] = level[j]
    return m


def _check_inputs(ys, ws):
    ys = np.ascontiguousarray(ys, dtype=np.float64).ravel()
    if ws is None:
        ws = np.ones_like(ys)
    else:
        ws = np.ascontiguousarray(ws, dtype=np.float64).ravel()
    if ys.size == 0:
        raise ValueError("empty input")
    if ys.shape != ws.shape:
        raise ValueError(f"ys and ws lengths differ ({ys.size} != {ws.size})")
    if np.any(ws <= 0):
        raise ValueError("weights must be strictly positive")
    return ys, ws


def _blocks_from_values(values: np.ndarray) -> tuple:
    # Adjacent pooled blocks can carry bit-identical levels; report them as
    # one level set so that levels are strictly monotone.
    change = np.flatnonzero(values[1:] != values[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [values.size]))
    return tuple((int(s), int(e), float(values[s])) for s, e in zip(starts, ends))


def _isotone_values(ys: np.ndarray, ws: np.ndarray) -> np.ndarray:
    n = ys.size
    out = np.empty(n)
    _pava_kernel(ys, ws, out, np.empty(n), np.empty(n), np.empty(n, dtype=np.int64))
    return out


def iso(ys, ws=None) -> MonotoneFit:
    """Weighted least-squares projection of ``ys`` onto non-decreasing vectors.

    Examples
    --------
    >>> iso([1.0, 3.0, 2.0]).values
    array([1. , 2.5, 2.5])
    """
    ys, ws = _check_inputs(ys, ws)
    values = _frozen(_isotone_values(ys, ws))
    return MonotoneFit(values, ISOTONE, _blocks_from_values(values))


def anti(ys, ws=None) -> MonotoneFit:
    """Projection onto non-increasing vectors, computed as ``-iso(-ys)``."""
    ys, ws = _check_inputs(ys, ws)
    values = _frozen(-_isotone_values(-ys, ws))
    return MonotoneFit(values, ANTITONE, _blocks_from_values(values))


def iso_minmax_oracle(ys, ws=None) -> np.ndarray:
    """Isotonic fit from the max-min and min-max formulas.

    Computes both ``max_{l<=i} min_{j>=i} M(l, j)`` and
    ``min_{j>=i} max_{l<=i} M(l, j)`` where ``M(l, j)`` is the weighted mean
    of ``ys[l:j+1]``, and raises if the two disagree. O(n^3); reference use
    only.
    """
    ys, ws = _check_inputs(ys, ws)
    n = ys.size
    means = np.full((n, n), np.nan)
    for l in range(n):
        cw = np.cumsum(ws[l:])
        cs = np.cumsum(ws[l:] * ys[l:])
        means[l, l:] = cs / cw
    maxmin = np.empty(n)
    minmax = np.empty(n)
    for i in range(n):
        block = means[: i + 1, i:]
        maxmin[i] = block.min(axis=1).max()
        minmax[i] = block.max(axis=0).min()
    scale = max(1.0, float(np.abs(ys).max()))
    if not np.allclose(maxmin, minmax, rtol=0.0, atol=1e-12 * scale):
        raise ArithmeticError("max-min and min-max formulas disagree")
    return maxmin


def _in_cone(u: np.ndarray, direction: str) -> bool:
    d = np.diff(u)
    return bool(np.all(d >= 0)) if direction == ISOTONE else bool(np.all(d <= 0))


def projection_residual_check(ys, fit: MonotoneFit, trial_points: Iterable, ws=None) -> float:
    """Largest value of ``<y - fit, u - fit>_n`` over the trial vectors.

    For an exact projection every trial vector ``u`` of the cone gives a
    non-positive inner product. The inner product is the weighted empirical
    one, normalised by the total weight.
    """
    ys, ws = _check_inputs(ys, ws)
    fitted = np.asarray(fit.values)
    if fitted.shape != ys.shape:
        raise ValueError("fit and ys lengths differ")
    resid = ys - fitted
    worst = -np.inf
    for u in trial_points:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != ys.shape:
            raise ValueError("trial point has the wrong length")
        if not _in_cone(u, fit.direction):
            raise ValueError(f"trial point is not in the {fit.direction} cone")
        worst = max(worst, float(np.dot(ws, resid * (u - fitted)) / ws.sum()))
    return worst


def iso_bruteforce(ys, ws=None, increasing: bool = True) -> np.ndarray:
    """Exhaustive search over all contiguous level-set partitions.

    Every partition of ``0..n-1`` into runs is scored with each run set to
    its weighted mean; the admissible (monotone) candidate with the smallest
    weighted SSE wins. Exponential in n, so limited to n <= 12.
    """
    ys, ws = _check_inputs(ys, ws)
    n = ys.size
    if n > 12:
        raise ValueError("brute force limited to n <= 12")
    best, best_sse = None, np.inf
    for mask in range(1 << (n - 1)):
        cuts = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1] + [n]
        cand = np.empty(n)
        for s, e in zip(cuts[:-1], cuts[1:]):
            cand[s:e] = np.dot(ws[s:e], ys[s:e]) / ws[s:e].sum()
        d = np.diff(cand)
        if (increasing and np.any(d < 0)) or (not increasing and np.any(d > 0)):
            continue
        sse = float(np.dot(ws, (ys - cand) ** 2))
        if sse < best_sse:
            best, best_sse = cand, sse
    return best
