"""Backfitting of an isotone and an antitone component.

Each cycle projects the partial residual ``y - b`` onto the isotone cone,
then ``y - u`` onto the antitone cone. Starting from ``b = 0`` keeps the data
mean in ``u`` and ``b`` centred at every iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .isotonic import ANTITONE, ISOTONE, MonotoneFit, SortedSample, _blocks_from_values, _pava_kernel
from .stepfn import JUMP_TOL, StepFunction, extend

__all__ = [
    "IirModel",
    "IterationTrace",
    "initial_model",
    "iir_step",
    "fit",
    "residual_sup_norm",
    "decomposition_report",
]

logger = logging.getLogger(__name__)

STALL_WINDOW = 50
STALL_TOL = 1e-14


@numba.njit(cache=True, nogil=True)
def _cycle(y, w, b_prev, u, b, tmp, level, weight, start, val_idx, val_y, val_w):
    """One isotone/antitone cycle, in place, plus per-iteration statistics.

    Returns ``(rss, jumps, b_mean, sup_resid, val_mse)``; ``val_mse`` is NaN
    when no validation points are given. ``val_idx[j]`` is the training
    piece that validation point j falls in.
    """
    n = y.shape[0]
    for i in range(n):
        tmp[i] = y[i] - b_prev[i]
    _pava_kernel(tmp, w, u, level, weight, start)
    for i in range(n):
        tmp[i] = u[i] - y[i]
    _pava_kernel(tmp, w, b, level, weight, start)
    rss = 0.0
    sup = 0.0
    wsum = 0.0
    bsum = 0.0
    jumps = 0
    for i in range(n):
        b[i] = -b[i]
        r = y[i] - (u[i] + b[i])
        rss += w[i] * r * r
        if abs(r) > sup:
            sup = abs(r)
        wsum += w[i]
        bsum += w[i] * b[i]
        if i > 0 and abs((u[i] + b[i]) - (u[i - 1] + b[i - 1])) > 1e-9:
            jumps += 1
    m = val_idx.shape[0]
    if m == 0:
        return rss, jumps, bsum / wsum, sup, np.nan
    se = 0.0
    vw = 0.0
    for j in range(m):
        r = val_y[j] - (u[val_idx[j]] + b[val_idx[j]])
        se += val_w[j] * r * r
        vw += val_w[j]
    return rss, jumps, bsum / wsum, sup, se / vw


_NO_IDX = np.empty(0, dtype=np.int64)
_NO_VAL = np.empty(0, dtype=np.float64)


class _Runner:
    """Mutable state for running cycles on one sample."""

    def __init__(self, sample: SortedSample, validation=None):
        self.y = np.ascontiguousarray(sample.ys)
        self.w = np.ascontiguousarray(sample.ws)
        n = sample.n
        self.u = np.empty(n)
        self.b = np.zeros(n)
        self._b_prev = np.zeros(n)
        self._scratch = (np.empty(n), np.empty(n), np.empty(n), np.empty(n, dtype=np.int64))
        if validation is None:
            self._val = (_NO_IDX, _NO_VAL, _NO_VAL)
        else:
            idx, vy, vw = validation
            self._val = (
                np.ascontiguousarray(idx, dtype=np.int64),
                np.ascontiguousarray(vy, dtype=np.float64),
                np.ascontiguousarray(vw, dtype=np.float64),
            )

    def step(self):
        self._b_prev, self.b = self.b, self._b_prev
        tmp, level, weight, start = self._scratch
        return _cycle(
            self.y, self.w, self._b_prev, self.u, self.b, tmp, level, weight, start, *self._val
        )


@dataclass(frozen=True)
class IterationTrace:
    """Per-iteration scalars; row ``j`` describes iteration ``j + 1``."""

    rss: tuple = ()
    jumps: tuple = ()
    b_mean: tuple = ()
    sup_resid: tuple = ()

    def __len__(self) -> int:
        return len(self.rss)

    def append(self, rss, jumps, b_mean, sup_resid) -> "IterationTrace":
        return IterationTrace(
            self.rss + (float(rss),),
            self.jumps + (int(jumps),),
            self.b_mean + (float(b_mean),),
            self.sup_resid + (float(sup_resid),),
        )

    def as_arrays(self) -> dict:
        return {
            "k": np.arange(1, len(self) + 1),
            "rss": np.array(self.rss),
            "jumps": np.array(self.jumps, dtype=int),
            "b_mean": np.array(self.b_mean),
            "sup_resid": np.array(self.sup_resid),
        }


def _trace_from_lists(rows) -> IterationTrace:
    if not rows:
        return IterationTrace()
    rss, jumps, b_mean, sup = zip(*rows)
    return IterationTrace(
        tuple(map(float, rss)), tuple(map(int, jumps)), tuple(map(float, b_mean)), tuple(map(float, sup))
    )


@dataclass(frozen=True)
class IirModel:
    """State of the estimator after ``k`` cycles.

    ``status`` names what ended the run: ``"k_max"``, ``"perfect_fit"``,
    ``"stalled"``, ``"residual_tol"``, ``"selected"`` or ``"step"``.
    """

    sample: SortedSample
    k: int
    u: MonotoneFit
    b: MonotoneFit
    fitted: np.ndarray
    trace: IterationTrace = field(default_factory=IterationTrace)
    status: str = "step"
    history: tuple | None = None
    selection: object = None

    @property
    def rss(self) -> float:
        if self.k == 0:
            return float(np.dot(self.sample.ws, self.sample.ys**2))
        return self.trace.rss[-1]

    @property
    def jumps(self) -> int:
        return int(np.count_nonzero(np.abs(np.diff(self.fitted)) > JUMP_TOL))

    def step_function(self, part: str = "fitted") -> StepFunction:
        vec = {"fitted": self.fitted, "u": self.u.values, "b": self.b.values}[part]
        return extend(self.sample, vec)

    def predict(self, x):
        return self.step_function()(x)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _fit_of(values: np.ndarray, direction: str) -> MonotoneFit:
    values = _freeze(values)
    return MonotoneFit(values, direction, _blocks_from_values(values))


def initial_model(sample: SortedSample) -> IirModel:
    """The k = 0 state: ``b = 0`` and ``u`` not yet computed (zeros)."""
    zeros = np.zeros(sample.n)
    return IirModel(
        sample=sample,
        k=0,
        u=_fit_of(zeros, ISOTONE),
        b=_fit_of(zeros, ANTITONE),
        fitted=_freeze(zeros),
    )


def iir_step(model: IirModel) -> IirModel:
    """Advance the model by exactly one cycle."""
    runner = _Runner(model.sample)
    runner.b[:] = model.b.values
    stats = runner.step()
    u, b = runner.u.copy(), runner.b.copy()
    return replace(
        model,
        k=model.k + 1,
        u=_fit_of(u, ISOTONE),
        b=_fit_of(b, ANTITONE),
        fitted=_freeze(u + b),
        trace=model.trace.append(*stats[:4]),
        status="step",
        history=None if model.history is None else model.history + (_freeze(u + b),),
        selection=None,
    )


def _model_from_runner(sample, k, u, b, rows, status, history=None, selection=None) -> IirModel:
    return IirModel(
        sample=sample,
        k=k,
        u=_fit_of(u, ISOTONE),
        b=_fit_of(b, ANTITONE),
        fitted=_freeze(u + b),
        trace=_trace_from_lists(rows),
        status=status,
        history=None if history is None else tuple(history),
        selection=selection,
    )


def run_cycles(
    sample: SortedSample,
    k_max: int,
    *,
    residual_tol: float | None = None,
    keep_history: bool = False,
    stall_guard: bool = True,
) -> IirModel:
    """Run up to ``k_max`` cycles with only the built-in termination checks.

    The run ends early on a perfect fit (zero RSS is a fixed point), when the
    sup-norm residual has moved less than 1e-14 over 50 iterations, or when
    it drops to ``residual_tol``.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    runner = _Runner(sample)
    rows = []
    history = [] if keep_history else None
    status = "k_max"
    for k in range(1, k_max + 1):
        stats = runner.step()
        rows.append(stats[:4])
        if keep_history:
            history.append(_freeze(runner.u + runner.b))
        rss, sup = stats[0], stats[3]
        if rss == 0.0:
            status = "perfect_fit"
            break
        if residual_tol is not None and sup <= residual_tol:
            status = "residual_tol"
            break
        if stall_guard and k > STALL_WINDOW and abs(rows[-1 - STALL_WINDOW][3] - sup) < STALL_TOL:
            status = "stalled"
            break
    return _model_from_runner(sample, len(rows), runner.u.copy(), runner.b.copy(), rows, status, history)


def fit(sample: SortedSample, stop=None, k_max: int = 1000, *, keep_history: bool = False, residual_tol=None) -> IirModel:
    """Fit the backfitted decomposition, stopping according to ``stop``.

    ``stop`` is a :class:`~iterative_isotonic.select.StopRule` or ``None``
    (run to ``k_max``). Penalized rules scan the criterion along the
    iterations and return the minimising iterate; the holdout rule selects k
    on a validation split and refits on the full sample.
    """
    from .select import StopRule, fit_holdout, fit_penalized

    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if stop is None:
        stop = StopRule("none")
    if stop.kind == "none":
        return run_cycles(sample, k_max, residual_tol=residual_tol, keep_history=keep_history)
    if stop.kind == "penalized":
        return fit_penalized(sample, stop, k_max)
    if stop.kind == "holdout":
        return fit_holdout(sample, stop, k_max)
    raise ValueError(f"unknown stop rule kind {stop.kind!r}")


def residual_sup_norm(model: IirModel) -> float:
    """``max_i |fitted[i] - y[i]|``."""
    return float(np.max(np.abs(model.fitted - model.sample.ys)))


def joint_jumps(u, b, tol: float = JUMP_TOL) -> int:
    du = np.abs(np.diff(np.asarray(u))) > tol
    db = np.abs(np.diff(np.asarray(b))) > tol
    return int(np.count_nonzero(du & db))


def decomposition_report(model: IirModel) -> dict:
    """Weighted means of both parts and the number of shared jump indices."""
    ws = model.sample.ws
    return {
        "u_mean": float(np.dot(ws, model.u.values) / ws.sum()),
        "b_mean": float(np.dot(ws, model.b.values) / ws.sum()),
        "y_mean": float(np.dot(ws, model.sample.ys) / ws.sum()),
        "joint_jumps": joint_jumps(model.u.values, model.b.values),
    }
