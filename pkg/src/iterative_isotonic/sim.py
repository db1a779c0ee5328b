"""Synthetic data and Monte Carlo experiments.

Bundled regression targets on [0, 1]:

``sine``
    ``sin(2 pi x) + x``, smooth and of bounded variation.
``steps``
    1 on [0, 0.3), 2 on [0.3, 0.6), 0 on [0.6, 1]; known Jordan parts.
``monotone``
    ``x ** 2``, strictly increasing.
``peak``
    tent ``1 - |2x - 1|`` with known Jordan parts.

The Jordan parts of ``steps`` and ``peak`` are normalised so that the
antitone part has zero mean under the uniform law.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from .backfit import run_cycles
from .backfit import fit as iir_fit
from .isotonic import SortedSample, collapse_ties
from .select import StopRule
from .stepfn import extend, grid_l2_distance, jump_count, l2_distance

__all__ = [
    "TargetFunction",
    "TARGETS",
    "get_target",
    "Noise",
    "Scenario",
    "ExperimentReport",
    "generate",
    "population_iir",
    "approximation_report",
    "true_l2_error",
    "run_consistency",
    "run_overfit_profile",
    "replicate_seed",
]


@dataclass(frozen=True)
class TargetFunction:
    name: str
    func: Callable
    monotone: bool = False
    bounded_variation: bool = True
    u: Callable | None = None
    b: Callable | None = None

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=np.float64))


def _steps(x):
    return np.where(x < 0.3, 1.0, np.where(x < 0.6, 2.0, 0.0))


TARGETS = {
    "sine": TargetFunction("sine", lambda x: np.sin(2 * np.pi * x) + x),
    "steps": TargetFunction(
        "steps",
        _steps,
        u=lambda x: 0.2 + (x >= 0.3),
        b=lambda x: 0.8 - 2.0 * (x >= 0.6),
    ),
    "monotone": TargetFunction("monotone", lambda x: x**2, monotone=True),
    "peak": TargetFunction(
        "peak",
        lambda x: 1.0 - np.abs(2 * x - 1),
        u=lambda x: np.minimum(2 * x, 1.0) - 0.25,
        b=lambda x: 0.25 - 2.0 * np.maximum(x - 0.5, 0.0),
    ),
}


def get_target(target) -> TargetFunction:
    if isinstance(target, TargetFunction):
        return target
    try:
        return TARGETS[target]
    except KeyError:
        raise ValueError(f"unknown target {target!r}; choose from {sorted(TARGETS)}") from None


@dataclass(frozen=True)
class Noise:
    """Bounded centred noise.

    ``kind`` is ``"uniform"`` (on ``[-bound, bound]``) or ``"truncnorm"``
    (Gaussian with scale ``sigma`` truncated at ``+-bound``; ``bound``
    defaults to ``3 * sigma``).
    """

    kind: str = "truncnorm"
    sigma: float = 0.3
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "truncnorm"):
            raise ValueError(f"noise must be bounded: kind {self.kind!r} not supported")
        if self.kind == "truncnorm" and self.bound is None:
            object.__setattr__(self, "bound", 3.0 * self.sigma)
        if self.bound is None or not np.isfinite(self.bound):
            raise ValueError("noise bound must be finite")
        if self.bound < 0 or self.sigma < 0:
            raise ValueError("noise scale and bound must be non-negative")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.bound == 0 or (self.kind == "truncnorm" and self.sigma == 0):
            return np.zeros(size)
        if self.kind == "uniform":
            return rng.uniform(-self.bound, self.bound, size)
        c = self.bound / self.sigma
        return stats.truncnorm.rvs(-c, c, scale=self.sigma, size=size, random_state=rng)


@dataclass(frozen=True)
class Scenario:
    """One data-generating setup. ``design`` is ``"uniform"`` or
    ``("beta", a, b)``."""

    target: str = "sine"
    n: int = 100
    noise: Noise = field(default_factory=Noise)
    design: object = "uniform"
    seed: int = 0

    def __post_init__(self):
        get_target(self.target)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        _design_law(self.design)

    def with_(self, **changes) -> "Scenario":
        d = {f: getattr(self, f) for f in ("target", "n", "noise", "design", "seed")}
        d.update(changes)
        return Scenario(**d)


def _design_law(design):
    if design == "uniform":
        return stats.uniform()
    if isinstance(design, (tuple, list)) and len(design) == 3 and design[0] == "beta":
        return stats.beta(design[1], design[2])
    raise ValueError(f"unknown design law {design!r}")


def design_density(design):
    if design == "uniform":
        return None
    return _design_law(design).pdf


def generate(scenario: Scenario) -> SortedSample:
    """Draw ``n`` points ``Y = r(X) + noise`` with sorted abscissae."""
    rng = np.random.default_rng(scenario.seed)
    x = _design_law(scenario.design).rvs(size=scenario.n, random_state=rng)
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    eps = scenario.noise.draw(rng, scenario.n)
    y = get_target(scenario.target)(x) + eps
    return collapse_ties(x, y)


def replicate_seed(base_seed: int, *keys: int) -> int:
    """Deterministic per-replicate seed derived from the base seed."""
    return int(np.random.SeedSequence([base_seed, *keys]).generate_state(1)[0])


def true_l2_error(fitted_fn, target, design="uniform", grid_size: int = 20_000) -> float:
    """``||fitted - r||`` in L2 of the design law, by the midpoint rule."""
    d, _ = grid_l2_distance(fitted_fn, get_target(target), grid_size, design_density(design))
    return d


@dataclass
class ExperimentReport:
    """Per-replicate rows, aggregates, config echo, seed ledger and contract
    outcomes of one experiment."""

    name: str
    config: dict
    rows: list
    aggregates: dict
    seeds: list
    contracts: dict
    series: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.contracts.values())

    @property
    def failed_contracts(self) -> list:
        return [k for k, ok in self.contracts.items() if not ok]

    def summary(self) -> dict:
        return {
            "experiment": self.name,
            "config": self.config,
            "aggregates": self.aggregates,
            "seeds": self.seeds,
            "contracts": self.contracts,
            "passed": self.passed,
        }

    def write(self, out_dir, include_runtime: bool = False) -> list:
        """Write ``<name>_replicates.csv``, one CSV per series and
        ``<name>_summary.json``. Runtimes are omitted unless asked for so
        that files are reproducible byte for byte."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if self.rows:
            cols = [c for c in self.rows[0] if include_runtime or c != "runtime"]
            path = out / f"{self.name}_replicates.csv"
            _write_csv(path, cols, [[r[c] for c in cols] for r in self.rows])
            written.append(path)
        for key, (cols, data) in self.series.items():
            path = out / f"{self.name}_{key}.csv"
            _write_csv(path, cols, data)
            written.append(path)
        path = out / f"{self.name}_summary.json"
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        written.append(path)
        return written


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_csv(path, cols, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _non_increasing(values, slack: float = 0.0) -> bool:
    values = np.asarray(values, dtype=np.float64)
    return bool(np.all(np.diff(values) <= slack))


def population_iir(target, grid_size: int = 2000, k: int = 200):
    """Approximation error ``||r^(k) - r||`` for ``k = 1..k``.

    The population iterates are emulated by running the cycles on the
    noiseless values of ``r`` at the equispaced grid ``i / grid_size``. Every
    grid piece then has width ``1 / grid_size`` and the error is the exact
    uniform-law L2 distance between the two step functions. Returns
    ``(ks, errors)``.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be >= 100")
    if k < 1:
        raise ValueError("k must be >= 1")
    target = get_target(target)
    grid = np.arange(grid_size) / grid_size
    sample = SortedSample(grid, target(grid))
    ref = extend(sample, sample.ys)
    model = run_cycles(sample, k, keep_history=True, stall_guard=False)
    errors = [l2_distance(extend(sample, h), ref) for h in model.history]
    # a perfect fit is a fixed point of the cycle
    errors += [errors[-1]] * (k - len(errors))
    return np.arange(1, k + 1), np.array(errors)


def approximation_report(targets=None, grid_size: int = 2000, k: int = 200) -> ExperimentReport:
    targets = list(targets or TARGETS)
    rows, series, contracts = [], {}, {}
    for name in targets:
        ks, err = population_iir(name, grid_size, k)
        tf = get_target(name)
        series[f"curve_{name}"] = (["k", "error"], list(zip(ks.tolist(), err.tolist())))
        rows.append({"target": name, "error_k1": float(err[0]), "error_kmax": float(err[-1]),
                     "ratio": float(err[-1] / err[0]) if err[0] > 0 else 0.0})
        contracts[f"{name}_non_increasing"] = _non_increasing(err)
        if not tf.monotone:
            contracts[f"{name}_halved"] = bool(err[-1] < 0.5 * err[0])
        else:
            contracts[f"{name}_exact_at_k1"] = bool(err[0] == 0.0)
    return ExperimentReport(
        name="approximation",
        config={"targets": targets, "grid_size": grid_size, "k": k},
        rows=rows,
        aggregates={r["target"]: {"error_k1": r["error_k1"], "error_kmax": r["error_kmax"]} for r in rows},
        seeds=[],
        contracts=contracts,
        series=series,
    )


def run_consistency(
    target="peak",
    ns=(50, 200, 800),
    rule: StopRule | None = None,
    replicates: int = 50,
    noise: Noise | None = None,
    design="uniform",
    seed: int = 0,
    k_max: int = 1000,
) -> ExperimentReport:
    """Median L2 error of the fitted step function across a grid of sample sizes.

    ``rule=None`` means the holdout rule. The squared error
    ``||r_hat - r||^2`` is measured against the closed-form target.
    """
    ns = [int(n) for n in ns]
    if len(ns) < 3:
        raise ValueError("need at least 3 sample sizes")
    if replicates < 20:
        raise ValueError("need at least 20 replicates")
    if rule is None:
        rule = StopRule("holdout")
    noise = noise or Noise()
    rows, seeds = [], []
    for n in ns:
        for rep in range(replicates):
            rs = replicate_seed(seed, n, rep)
            seeds.append({"n": n, "replicate": rep, "seed": rs})
            sample = generate(Scenario(target, n, noise, design, rs))
            rep_rule = StopRule(rule.kind, rule.phi, rule.holdout_fraction, rule.patience, rs)
            t0 = time.perf_counter()
            model = iir_fit(sample, rep_rule, k_max)
            runtime = time.perf_counter() - t0
            err = true_l2_error(model.step_function(), target, design)
            rows.append({
                "target": get_target(target).name, "n": n, "replicate": rep, "seed": rs,
                "l2_error_sq": err**2, "selected_k": model.k, "jumps": model.jumps,
                "runtime": runtime,
            })
    aggregates = {}
    for n in ns:
        e = np.array([r["l2_error_sq"] for r in rows if r["n"] == n])
        k = np.array([r["selected_k"] for r in rows if r["n"] == n])
        q1, med, q3 = np.percentile(e, [25, 50, 75])
        aggregates[str(n)] = {"median_l2_error_sq": float(med), "iqr": float(q3 - q1),
                              "median_k": float(np.median(k))}
    medians = [aggregates[str(n)]["median_l2_error_sq"] for n in ns]
    series = {"by_n": (["n", "median_l2_error_sq"], list(zip(ns, medians)))}
    return ExperimentReport(
        name="consistency",
        config={"target": get_target(target).name, "ns": ns, "rule": rule.to_dict(),
                "replicates": replicates, "noise": asdict(noise), "design": design,
                "seed": seed, "k_max": k_max},
        rows=rows,
        aggregates=aggregates,
        seeds=seeds,
        contracts={"median_error_decreasing_in_n": bool(np.all(np.diff(medians) < 0))},
        series=series,
    )


def run_overfit_profile(
    scenario: Scenario | None = None,
    ks=(1, 10, 1000),
    seeds=50,
) -> ExperimentReport:
    """RSS, jump count and true error of the fit at each k in ``ks``.

    ``seeds`` is a count (replicate seeds are derived from
    ``scenario.seed``) or an explicit list of seeds.
    """
    ks = sorted(int(k) for k in ks)
    if not ks or ks[0] < 1:
        raise ValueError("ks must be a non-empty list of positive integers")
    scenario = scenario or Scenario()
    seed_list = (
        [replicate_seed(scenario.seed, i) for i in range(seeds)] if isinstance(seeds, int) else list(seeds)
    )
    rows = []
    rss_ok = True
    for s in seed_list:
        sample = generate(scenario.with_(seed=s))
        model = run_cycles(sample, ks[-1], keep_history=True, stall_guard=False)
        hist = model.history
        prev_rss = np.inf
        for k in ks:
            r = hist[min(k, len(hist)) - 1]
            rss = float(np.dot(sample.ws, (sample.ys - r) ** 2))
            rss_ok &= rss <= prev_rss
            prev_rss = rss
            rows.append({
                "seed": s, "k": k, "rss": rss, "jumps": jump_count(r),
                "l2_error": true_l2_error(extend(sample, r), scenario.target, scenario.design),
            })
    med_jumps = [float(np.median([r["jumps"] for r in rows if r["k"] == k])) for k in ks]
    med_err = [float(np.median([r["l2_error"] for r in rows if r["k"] == k])) for k in ks]
    med_rss = [float(np.median([r["rss"] for r in rows if r["k"] == k])) for k in ks]
    best = int(np.argmin(med_err))
    return ExperimentReport(
        name="overfit",
        config={"target": get_target(scenario.target).name, "n": scenario.n,
                "noise": asdict(scenario.noise), "design": scenario.design,
                "seed": scenario.seed, "ks": ks, "n_seeds": len(seed_list)},
        rows=rows,
        aggregates={str(k): {"median_rss": a, "median_jumps": j, "median_l2_error": e}
                    for k, a, j, e in zip(ks, med_rss, med_jumps, med_err)},
        seeds=seed_list,
        contracts={
            "rss_non_increasing_every_seed": bool(rss_ok),
            "median_jumps_non_decreasing": bool(np.all(np.diff(med_jumps) >= 0)),
            "error_rises_after_minimum": bool(best < len(ks) - 1 and med_err[-1] > med_err[best]),
        },
        series={"profile": (["k", "median_rss", "median_jumps", "median_l2_error"],
                            list(zip(ks, med_rss, med_jumps, med_err)))},
    )
