"""Choosing the number of backfitting cycles.

Two families of rules are offered: penalized criteria of the form
``log(RSS / n) + phi(p)`` with ``p`` the jump count of the fit, and a single
seeded holdout split scored by prediction error of the step function.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .backfit import IirModel, _model_from_runner, _Runner, run_cycles
from .isotonic import SortedSample

__all__ = [
    "PENALTIES",
    "StopRule",
    "CriterionTrace",
    "criterion_value",
    "select_k_penalized",
    "holdout_split",
    "select_k_holdout",
    "fit_penalized",
    "fit_holdout",
]

PENALTIES = ("aic", "bic", "gcv")
KINDS = ("none", "penalized", "holdout")


@dataclass(frozen=True)
class StopRule:
    """How to stop the iterations.

    ``patience=None`` scans every k up to ``k_max``.
    """

    kind: str = "none"
    phi: str | None = None
    holdout_fraction: float = 0.25
    patience: int | None = 20
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "penalized" and self.phi not in PENALTIES:
            raise ValueError(f"penalized rule needs phi in {PENALTIES}, got {self.phi!r}")
        if self.kind == "holdout" and not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if self.patience is not None and self.patience < 0:
            raise ValueError("patience must be >= 0")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "StopRule":
        """Build a rule from a CLI-style name: none, aic, bic, gcv or holdout."""
        if name in PENALTIES:
            return cls("penalized", phi=name, **kwargs)
        return cls(name, **kwargs)

    @property
    def name(self) -> str:
        return self.phi if self.kind == "penalized" else self.kind

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "phi": self.phi,
            "holdout_fraction": self.holdout_fraction,
            "patience": self.patience,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CriterionTrace:
    ks: tuple
    rss: tuple
    p: tuple
    criterion: tuple
    validation_mse: tuple
    selected_k: int
    rule: str = ""
    perfect_fit: bool = False

    def rows(self):
        return list(zip(self.ks, self.rss, self.p, self.criterion, self.validation_mse))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "rss", "p", "criterion", "validation_mse"])
        for k, rss, p, crit, val in self.rows():
            writer.writerow([k, repr(rss), p, repr(crit), repr(val)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "k": list(self.ks),
            "rss": list(self.rss),
            "p": list(self.p),
            "criterion": [_json_float(c) for c in self.criterion],
            "validation_mse": [_json_float(v) for v in self.validation_mse],
            "selected_k": self.selected_k,
            "rule": self.rule,
            "perfect_fit": self.perfect_fit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriterionTrace":
        return cls(
            tuple(d["k"]),
            tuple(d["rss"]),
            tuple(d["p"]),
            tuple(_from_json_float(c) for c in d["criterion"]),
            tuple(_from_json_float(v) for v in d["validation_mse"]),
            d["selected_k"],
            d.get("rule", ""),
            d.get("perfect_fit", False),
        )


def _json_float(x):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def _from_json_float(x):
    return float(x) if isinstance(x, str) else x


def _penalty(p: int, n: float, phi: str) -> float:
    if phi == "aic":
        return 2.0 * p / n
    if phi == "bic":
        return p * math.log(n) / n
    if phi == "gcv":
        if p >= n:
            raise ValueError(f"gcv undefined for p >= n (p={p}, n={n})")
        return -2.0 * math.log1p(-p / n)
    raise ValueError(f"unknown penalty {phi!r}")


def criterion_value(rss: float, n: float, p: int, phi: str) -> float:
    """``log(rss / n) + phi(p)``.

    A zero RSS returns ``-inf``: the data are interpolated and the criterion
    cannot be beaten.

    >>> round(criterion_value(4.0, 100, 3, "aic"), 6)
    -3.158876
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if p < 0:
        raise ValueError("p must be >= 0")
    if rss < 0:
        raise ValueError("rss must be >= 0")
    penalty = _penalty(p, n, phi)
    if rss == 0.0:
        return -math.inf
    return math.log(rss / n) + penalty


def _scan(values, patience):
    """Index of the first minimum of ``values`` honouring ``patience``.

    Returns ``(best_index, last_index_scanned)``.
    """
    best, since = 0, 0
    last = 0
    for i, v in enumerate(values):
        last = i
        if v < values[best]:
            best, since = i, 0
        elif i > 0:
            since += 1
        if patience is not None and since > 0 and since >= patience:
            break
    return best, last


def select_k_penalized(trace, n: float, phi: str, patience: int | None = None) -> int:
    """Pick k minimising the penalized criterion over ``(k, rss, p)`` rows.

    Ties go to the smaller k. With ``patience`` set the scan stops once the
    criterion has failed to improve for that many consecutive rows.
    """
    trace = list(trace)
    if not trace:
        raise ValueError("empty trace")
    crit = [_criterion_or_inf(rss, n, p, phi) for _, rss, p in trace]
    best, _ = _scan(crit, patience)
    return int(trace[best][0])


def _criterion_or_inf(rss, n, p, phi):
    # gcv is undefined once p reaches n; such iterates are never selected
    if phi == "gcv" and p >= n:
        return math.inf
    return criterion_value(rss, n, p, phi)


def fit_penalized(sample: SortedSample, rule: StopRule, k_max: int) -> IirModel:
    """Run cycles while tracking the criterion; return the minimising iterate."""
    n = sample.total_weight
    runner = _Runner(sample)
    rows, crit = [], []
    best_k, best_crit, since = 1, math.inf, 0
    best_u = best_b = None
    perfect = False
    for k in range(1, k_max + 1):
        stats = runner.step()
        rows.append(stats[:4])
        rss, jumps = stats[0], stats[1]
        c = _criterion_or_inf(rss, n, jumps, rule.phi)
        crit.append(c)
        if k == 1 or c < best_crit:
            best_k, best_crit, since = k, c, 0
            best_u, best_b = runner.u.copy(), runner.b.copy()
        else:
            since += 1
        if rss == 0.0:
            perfect = True
            break
        if rule.patience is not None and since > 0 and since >= rule.patience:
            break
    selection = CriterionTrace(
        ks=tuple(range(1, len(rows) + 1)),
        rss=tuple(float(r[0]) for r in rows),
        p=tuple(int(r[1]) for r in rows),
        criterion=tuple(crit),
        validation_mse=tuple(math.nan for _ in rows),
        selected_k=best_k,
        rule=rule.name,
        perfect_fit=perfect,
    )
    return _model_from_runner(sample, best_k, best_u, best_b, rows[:best_k], "selected", selection=selection)


def holdout_split(sample: SortedSample, fraction: float, seed: int):
    """Seeded split into training and validation index arrays (both sorted)."""
    n = sample.n
    n_val = int(round(fraction * n))
    if n < 4 or n_val < 2 or n - n_val < 2:
        raise ValueError(
            f"sample too small for a holdout split (n={n}, fraction={fraction}); "
            "need at least 2 points on each side"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def select_k_holdout(
    sample: SortedSample,
    fraction: float,
    k_max: int,
    seed: int,
    patience: int | None = None,
):
    """Select k by validation error on a seeded split.

    Returns ``(selected_k, trace)`` where ``trace`` is a
    :class:`CriterionTrace` holding the training RSS and jump counts and the
    validation MSE for every scanned k.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    train_idx, val_idx = holdout_split(sample, fraction, seed)
    train = SortedSample(sample.xs[train_idx], sample.ys[train_idx], sample.ws[train_idx])
    pieces = np.clip(np.searchsorted(train.xs, sample.xs[val_idx], side="right") - 1, 0, train.n - 1)
    runner = _Runner(train, (pieces, sample.ys[val_idx], sample.ws[val_idx]))
    rows, val = [], []
    best, since = 0, 0
    for k in range(1, k_max + 1):
        rss, jumps, _, _, mse = runner.step()
        rows.append((float(rss), int(jumps)))
        val.append(float(mse))
        if mse < val[best]:
            best, since = k - 1, 0
        elif k > 1:
            since += 1
        if rss == 0.0:
            break
        if patience is not None and since > 0 and since >= patience:
            break
    selected = best + 1
    trace = CriterionTrace(
        ks=tuple(range(1, len(rows) + 1)),
        rss=tuple(r[0] for r in rows),
        p=tuple(r[1] for r in rows),
        criterion=tuple(math.nan for _ in rows),
        validation_mse=tuple(val),
        selected_k=selected,
        rule="holdout",
        perfect_fit=rows[-1][0] == 0.0,
    )
    return selected, trace


def fit_holdout(sample: SortedSample, rule: StopRule, k_max: int) -> IirModel:
    """Holdout selection of k followed by a refit on the whole sample."""
    selected, trace = select_k_holdout(sample, rule.holdout_fraction, k_max, rule.seed, rule.patience)
    model = run_cycles(sample, selected, stall_guard=False)
    return IirModel(
        sample=model.sample,
        k=model.k,
        u=model.u,
        b=model.b,
        fitted=model.fitted,
        trace=model.trace,
        status="selected",
        selection=trace,
    )
