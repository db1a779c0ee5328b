"""Acceptance criteria 1-10, each checked at its stated tolerance.

Every test records a single PASS or FAIL line; the lines are echoed in a
dedicated section at the end of the pytest report.
"""

import subprocess
import sys
import time

import numpy as np

from iterative_isotonic import IterativeIsotonicRegressor
from iterative_isotonic.backfit import fit, initial_model, iir_step, joint_jumps
from iterative_isotonic.isotonic import (
    SortedSample,
    iso,
    iso_bruteforce,
    iso_minmax_oracle,
    projection_residual_check,
    weighted_mean,
)
from iterative_isotonic.sim import (
    TARGETS,
    Noise,
    Scenario,
    approximation_report,
    run_consistency,
    run_overfit_profile,
)
from iterative_isotonic.verify import lemma_bound_audit


def _random_sample(rng, n):
    xs = np.sort(rng.uniform(size=n))
    ys = np.sin(2 * np.pi * xs) + xs + rng.normal(0, 0.5, size=n)
    return SortedSample(xs, ys, rng.uniform(0.2, 3.0, size=n))


def test_c01_bruteforce_oracle(acceptance):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 13))
        y = rng.normal(size=n) * rng.choice([0.01, 1.0, 100.0])
        w = rng.uniform(0.1, 5.0, size=n)
        worst = max(worst, float(np.max(np.abs(iso(y, w).values - iso_bruteforce(y, w)))))
    elapsed = time.perf_counter() - t0
    acceptance(1, worst <= 1e-12 and elapsed < 30,
               f"PAVA vs exhaustive partitions, 500 instances: max diff {worst:.2e}, {elapsed:.1f} s")


def test_c02_minmax_oracle(acceptance):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 51))
        y = rng.normal(size=n)
        w = rng.uniform(0.1, 5.0, size=n)
        worst = max(worst, float(np.max(np.abs(iso(y, w).values - iso_minmax_oracle(y, w)))))
    acceptance(2, worst <= 1e-12, f"PAVA vs min-max formula, 200 instances: max diff {worst:.2e}")


def _random_isotone(rng, n):
    kind = rng.integers(3)
    if kind == 0:
        return np.cumsum(rng.exponential(size=n)) + rng.normal()
    if kind == 1:
        return np.sort(rng.normal(size=n)) * 10
    # a single jump of either sign, sorted into the isotone cone
    return np.sort(np.where(np.arange(n) >= rng.integers(n + 1), 1.0, 0.0) * rng.uniform(-5, 5))


def test_c03_variational_inequality(acceptance):
    rng = np.random.default_rng(103)
    worst = -np.inf
    for _ in range(100):
        n = int(rng.integers(2, 80))
        y = rng.normal(size=n)
        w = rng.uniform(0.1, 5.0, size=n)
        f = iso(y, w)
        trials = [_random_isotone(rng, n) for _ in range(50)]
        worst = max(worst, projection_residual_check(y, f, trials, w))
    acceptance(3, worst <= 1e-10, f"max <y - u_hat, u - u_hat>_n over 100 fits x 50 trials: {worst:.2e}")


def test_c04_decomposition_invariants(acceptance):
    rng = np.random.default_rng(104)
    b_worst = u_worst = 0.0
    joint = 0
    for _ in range(100):
        s = _random_sample(rng, int(rng.integers(2, 60)))
        y_mean = weighted_mean(s.ys, s.ws)
        m = initial_model(s)
        for _ in range(100):
            m = iir_step(m)
            b_worst = max(b_worst, abs(weighted_mean(m.b.values, s.ws)))
            u_worst = max(u_worst, abs(weighted_mean(m.u.values, s.ws) - y_mean))
            joint = max(joint, joint_jumps(m.u.values, m.b.values))
    ok = b_worst <= 1e-10 and u_worst <= 1e-10 and joint == 0
    acceptance(4, ok, f"100 samples, k <= 100: |mean b| {b_worst:.1e}, |mean u - mean y| {u_worst:.1e}, "
                      f"joint jumps {joint}")


def test_c05_interpolation(acceptance):
    rng = np.random.default_rng(105)
    failures = []
    iters = []
    for i in range(20):
        xs = np.sort(rng.uniform(size=20))
        s = SortedSample(xs, np.sin(2 * np.pi * xs) + rng.normal(0, 0.5, size=20))
        m = fit(s, None, k_max=100_000, residual_tol=1e-3)
        sup = np.asarray(m.trace.sup_resid)
        # round-off in the residual is of order 1e-16; the guard's floor is 1e-14
        monotone = bool(np.all(np.diff(sup) <= 1e-14))
        reached = sup[-1] < 1e-3 or m.status == "stalled"
        iters.append(m.k)
        if not (monotone and reached):
            failures.append(i)
    acceptance(5, not failures, f"20 samples (n=20): sup residual < 1e-3 after {min(iters)}-{max(iters)} "
                                f"cycles, failures {failures}")


def test_c06_overfit_profile(acceptance):
    t0 = time.perf_counter()
    rep = run_overfit_profile(Scenario("sine", 100), (1, 10, 1000), 50)
    elapsed = time.perf_counter() - t0
    ok = (rep.contracts["rss_non_increasing_every_seed"] and rep.contracts["median_jumps_non_decreasing"]
          and elapsed < 120)
    jumps = [rep.aggregates[k]["median_jumps"] for k in ("1", "10", "1000")]
    acceptance(6, ok, f"RSS ordered on every seed: {rep.contracts['rss_non_increasing_every_seed']}, "
                      f"median jumps {jumps}, {elapsed:.1f} s")


def test_c07_approximation_decay(acceptance):
    names = [n for n, t in TARGETS.items() if not t.monotone]
    rep = approximation_report(names, 2000, 200)
    parts = [f"{r['target']} {r['error_kmax'] / r['error_k1']:.1e}" for r in rep.rows]
    acceptance(7, rep.passed, f"grid 2000, error(200)/error(1): {', '.join(parts)}")


def test_c08_consistency(acceptance):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in TARGETS:
        rep = run_consistency(name, (50, 200, 800), None, 50, Noise("truncnorm", sigma=0.3))
        meds = [rep.aggregates[str(n)]["median_l2_error_sq"] for n in (50, 200, 800)]
        ok &= rep.contracts["median_error_decreasing_in_n"]
        parts.append(f"{name} " + "/".join(f"{m:.3g}" for m in meds))
    elapsed = time.perf_counter() - t0
    acceptance(8, ok and elapsed < 600, f"median sq. L2 error at n=50/200/800: {'; '.join(parts)}, "
                                        f"{elapsed:.1f} s")


def test_c09_lemma_audit(acceptance):
    ratios = {cfg: lemma_bound_audit(cfg[2], cfg[0], cfg[1], 1000, seed=109)
              for cfg in [(200, 10, 1.0), (500, 25, 3.0), (100, 100, 1.0)]}
    worst = max(ratios.values())
    acceptance(9, worst <= 1.0, "max distance/delta per (n, N, C): "
               + ", ".join(f"{k}: {v:.3f}" for k, v in ratios.items()))


def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "iterative_isotonic.cli", *args],
                          cwd=cwd, capture_output=True, check=True)


def test_c10_determinism_and_roundtrip(acceptance, tmp_path):
    rng = np.random.default_rng(110)
    x = np.sort(rng.uniform(size=200))
    y = np.sin(2 * np.pi * x) + x + rng.normal(0, 0.3, size=200)
    (tmp_path / "data.csv").write_text("x,y\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(x.tolist(), y.tolist())))
    probe = np.linspace(0, 1, 1000)
    (tmp_path / "probe.csv").write_text("x\n" + "".join(f"{v!r}\n" for v in probe.tolist()))

    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        _cli("fit", "../data.csv", "--stop", "holdout", "--seed", "3", "--out", "model.json",
             "--trace-csv", "trace.csv", cwd=d)
        _cli("predict", "model.json", "../probe.csv", "--out", "pred.csv", cwd=d)
        _cli("experiment", "overfit", "--n", "100", "--seeds", "5", "--out", "exp", cwd=d)
        _cli("experiment", "consistency", "--target", "peak", "--reps", "20", "--n", "50,100,200",
             "--out", "exp", cwd=d)
        files = sorted(p for p in d.rglob("*") if p.is_file())
        outputs.append({p.relative_to(d).as_posix(): p.read_bytes() for p in files})
    cli_same = outputs[0] == outputs[1]

    est = IterativeIsotonicRegressor(stop="holdout", random_state=3).fit(x, y)
    est.save(tmp_path / "m.json")
    back = IterativeIsotonicRegressor.load(tmp_path / "m.json")
    roundtrip = est.predict(probe).tobytes() == back.predict(probe).tobytes()
    cli_pred = np.loadtxt(tmp_path / "a" / "pred.csv", delimiter=",", skiprows=1)[:, 1]
    cli_matches = cli_pred.tobytes() == est.predict(probe).tobytes()
    acceptance(10, cli_same and roundtrip and cli_matches,
               f"{len(outputs[0])} CLI outputs identical across runs: {cli_same}, "
               f"save/load bitwise on 1000 probes: {roundtrip}, CLI predict matches: {cli_matches}")
