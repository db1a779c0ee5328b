"""scikit-learn compatible front end."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .backfit import IirModel
from .backfit import fit as iir_fit
from .isotonic import collapse_ties
from .select import CriterionTrace, StopRule
from .stepfn import StepFunction

__all__ = ["IterativeIsotonicRegressor", "SCHEMA_VERSION"]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _as_1d(X) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        return X[:, 0]
    return X


class IterativeIsotonicRegressor(RegressorMixin, BaseEstimator):
    """Univariate regression by alternating isotonic and antitonic fits.

    The fitted function is piecewise constant and right-continuous. Inputs
    outside [0, 1] are mapped onto [0, 1] by the min-max transform of the
    training abscissae, and the same map is applied at prediction time.

    Parameters
    ----------
    stop : {"holdout", "aic", "bic", "gcv", "none"}
        Rule for the number of backfitting cycles.
    k_max : int
        Upper bound on the number of cycles.
    holdout_fraction : float
        Share of distinct abscissae held out by the ``"holdout"`` rule.
    patience : int or None
        Stop scanning once the selection score has not improved for this
        many cycles. ``None`` scans up to ``k_max``.
    random_state : int
        Seed of the holdout split.

    Attributes
    ----------
    model_ : IirModel
        Fitted decomposition on the rescaled, tie-collapsed sample.
    n_iter_ : int
        Number of cycles of the returned fit.
    x_offset_, x_scale_ : float
        Affine map ``x -> (x - x_offset_) / x_scale_`` onto [0, 1].
    n_merged_ : int
        Number of rows absorbed when collapsing tied abscissae.
    """

    def __init__(self, stop="holdout", k_max=1000, holdout_fraction=0.25, patience=20, random_state=0):
        self.stop = stop
        self.k_max = k_max
        self.holdout_fraction = holdout_fraction
        self.patience = patience
        self.random_state = random_state

    def _rule(self) -> StopRule:
        seed = 0 if self.random_state is None else int(self.random_state)
        return StopRule.from_name(
            self.stop, holdout_fraction=self.holdout_fraction, patience=self.patience, seed=seed
        )

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(np.reshape(X, (-1, 1)) if np.ndim(X) == 1 else X, y, ensure_2d=True, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        x = X[:, 0].astype(np.float64)
        if x.size < 2:
            raise ValueError("need at least 2 observations")
        if int(self.k_max) < 1:
            raise ValueError("k_max must be >= 1")
        lo, hi = float(x.min()), float(x.max())
        if lo >= 0.0 and hi <= 1.0:
            self.x_offset_, self.x_scale_ = 0.0, 1.0
        else:
            self.x_offset_, self.x_scale_ = lo, (hi - lo) if hi > lo else 1.0
        x01 = (x - self.x_offset_) / self.x_scale_
        sample = collapse_ties(x01, y, sample_weight)
        self.n_merged_ = int(x.size - sample.n)
        if self.n_merged_:
            logger.warning("merged %d rows with duplicated x", self.n_merged_)
        self.stop_rule_ = self._rule()
        self.model_ = iir_fit(sample, self.stop_rule_, int(self.k_max))
        self.n_iter_ = self.model_.k
        self.step_function_ = self.model_.step_function()
        self.u_function_ = self.model_.step_function("u")
        self.b_function_ = self.model_.step_function("b")
        return self

    def _to_unit(self, X) -> np.ndarray:
        x = _as_1d(check_array(np.reshape(X, (-1, 1)) if np.ndim(X) == 1 else X, ensure_2d=True,
                               ensure_min_samples=0)).astype(np.float64)
        x01 = (x - self.x_offset_) / self.x_scale_
        bad = np.flatnonzero((x01 < 0) | (x01 > 1))
        if bad.size:
            shown = ", ".join(f"row {i}: x={float(x[i])!r}" for i in bad[:10])
            more = f" (+{bad.size - 10} more)" if bad.size > 10 else ""
            raise ValueError(f"out of domain: {shown}{more}")
        return x01

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "step_function_")
        x01 = self._to_unit(X)
        if x01.size == 0:
            return np.empty(0)
        return self.step_function_(x01)

    def decompose(self, X):
        """Isotone and antitone parts evaluated at ``X``."""
        check_is_fitted(self, "step_function_")
        x01 = self._to_unit(X)
        return self.u_function_(x01), self.b_function_(x01)

    # --- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self, "step_function_")

        def sf(f: StepFunction):
            return {"breakpoints": f.breakpoints.tolist(), "values": f.values.tolist()}

        info = self._summary
        return {
            "schema_version": SCHEMA_VERSION,
            "params": self.get_params(),
            "sample": info["sample"],
            "x_transform": {"offset": self.x_offset_, "scale": self.x_scale_},
            "k": info["k"],
            "status": info["status"],
            "rss": info["rss"],
            "jumps": info["jumps"],
            "stop_rule": self.stop_rule_.to_dict(),
            "u": sf(self.u_function_),
            "b": sf(self.b_function_),
            "fitted": sf(self.step_function_),
            "trace": info["trace"],
            "selection": info["selection"],
        }

    @property
    def _summary(self) -> dict:
        if hasattr(self, "model_"):
            m: IirModel = self.model_
            s = m.sample
            return {
                "sample": {"n": int(s.n), "n_merged": self.n_merged_, "total_weight": s.total_weight,
                           "x_min": float(s.xs[0]), "x_max": float(s.xs[-1])},
                "k": m.k,
                "status": m.status,
                "rss": m.rss,
                "jumps": m.jumps,
                "trace": {"rss": list(m.trace.rss), "jumps": list(m.trace.jumps),
                          "b_mean": list(m.trace.b_mean), "sup_resid": list(m.trace.sup_resid)},
                "selection": None if m.selection is None else m.selection.to_dict(),
            }
        return self._loaded

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "IterativeIsotonicRegressor":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema version {version!r}")
        est = cls(**d["params"])
        est.x_offset_ = float(d["x_transform"]["offset"])
        est.x_scale_ = float(d["x_transform"]["scale"])
        est.stop_rule_ = StopRule(**d["stop_rule"])
        est.n_merged_ = d["sample"].get("n_merged", 0)
        est.n_iter_ = d["k"]
        est._loaded = {k: d[k] for k in ("sample", "k", "status", "rss", "jumps", "trace", "selection")}
        est.step_function_ = StepFunction(d["fitted"]["breakpoints"], d["fitted"]["values"])
        est.u_function_ = StepFunction(d["u"]["breakpoints"], d["u"]["values"])
        est.b_function_ = StepFunction(d["b"]["breakpoints"], d["b"]["values"])
        return est

    @classmethod
    def load(cls, path) -> "IterativeIsotonicRegressor":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def selection_(self) -> CriterionTrace | None:
        sel = self._summary["selection"]
        return None if sel is None else CriterionTrace.from_dict(sel)
