import numpy as np
import pytest
from numpy.testing import assert_array_equal

from iterative_isotonic.select import StopRule
from iterative_isotonic.sim import (
    TARGETS,
    Noise,
    Scenario,
    generate,
    get_target,
    population_iir,
    run_consistency,
    run_overfit_profile,
)

GRID = np.linspace(0, 1, 10_001)


def test_zero_noise_is_exact():
    s = generate(Scenario("peak", 50, Noise("uniform", bound=0.0), seed=1))
    assert_array_equal(s.ys, TARGETS["peak"](s.xs))


def test_uniform_noise_is_bounded():
    s = generate(Scenario("sine", 500, Noise("uniform", sigma=0.2, bound=0.2), seed=2))
    assert np.all(np.abs(s.ys - TARGETS["sine"](s.xs)) <= 0.2)


def test_truncnorm_noise_bounded_at_three_sigma():
    s = generate(Scenario("sine", 2000, Noise("truncnorm", sigma=0.5), seed=3))
    resid = s.ys - TARGETS["sine"](s.xs)
    assert np.all(np.abs(resid) <= 1.5)
    assert abs(resid.mean()) < 0.05


def test_generate_is_seeded():
    a = generate(Scenario("steps", 100, seed=7))
    b = generate(Scenario("steps", 100, seed=7))
    assert a.xs.tobytes() == b.xs.tobytes() and a.ys.tobytes() == b.ys.tobytes()
    assert np.all(np.diff(a.xs) > 0)


def test_beta_design():
    s = generate(Scenario("sine", 300, design=("beta", 2, 5), seed=1))
    assert np.median(s.xs) < 0.5


@pytest.mark.parametrize("kwargs", [dict(kind="gaussian"), dict(kind="truncnorm", bound=np.inf)])
def test_unbounded_noise_rejected(kwargs):
    with pytest.raises(ValueError, match="bound"):
        Noise(**kwargs)


@pytest.mark.parametrize("name", ["steps", "peak"])
def test_known_jordan_parts(name):
    t = TARGETS[name]
    u, b = t.u(GRID), t.b(GRID)
    np.testing.assert_allclose(u + b, t(GRID), atol=1e-12)
    assert np.all(np.diff(u) >= 0) and np.all(np.diff(b) <= 0)
    # centred antitone part under the uniform law (trapezoid on a fine grid)
    assert abs(np.trapezoid(b, GRID)) < 1e-3
    # singular measures: no grid cell where both parts move
    assert not np.any((np.abs(np.diff(u)) > 1e-12) & (np.abs(np.diff(b)) > 1e-12))


def test_unknown_target():
    with pytest.raises(ValueError, match="unknown target"):
        get_target("nope")


def test_population_monotone_exact():
    ks, err = population_iir("monotone", 500, 5)
    assert_array_equal(ks, [1, 2, 3, 4, 5])
    assert_array_equal(err, 0.0)


def test_population_peak_strictly_decreasing():
    _, err = population_iir("peak", 2000, 200)
    assert np.all(np.diff(err) < 0)


@pytest.mark.parametrize("name", [n for n, t in TARGETS.items() if not t.monotone])
def test_population_error_shrinks(name):
    _, err = population_iir(name, 1000, 200)
    assert np.all(np.diff(err) <= 0)
    assert err[-1] < err[0]


def test_population_grid_floor():
    with pytest.raises(ValueError):
        population_iir("peak", 50, 3)


def test_consistency_report_shape_and_reproducibility():
    kw = dict(target="steps", ns=(30, 60, 120), replicates=20, seed=11)
    a = run_consistency(**kw)
    b = run_consistency(**kw)
    assert len(a.rows) == 60
    assert [r["l2_error_sq"] for r in a.rows] == [r["l2_error_sq"] for r in b.rows]
    assert a.seeds == b.seeds
    for n in (30, 60, 120):
        errs = [r["l2_error_sq"] for r in a.rows if r["n"] == n]
        assert a.aggregates[str(n)]["median_l2_error_sq"] == float(np.median(errs))


def test_consistency_isotonic_only_monotone():
    rep = run_consistency("monotone", (50, 200, 800), StopRule("none"), 50, k_max=1)
    assert all(r["selected_k"] == 1 for r in rep.rows)
    assert rep.contracts["median_error_decreasing_in_n"]


def test_consistency_noiseless_large_k():
    rep = run_consistency("peak", (50, 200, 800), StopRule("none"), 20,
                          noise=Noise("uniform", bound=0.0), k_max=2000)
    meds = [rep.aggregates[str(n)]["median_l2_error_sq"] for n in (50, 200, 800)]
    assert meds[-1] < 1e-3
    assert rep.passed


def test_consistency_preconditions():
    with pytest.raises(ValueError):
        run_consistency("peak", (50, 100), replicates=20)
    with pytest.raises(ValueError):
        run_consistency("peak", (50, 100, 200), replicates=5)


def test_overfit_noiseless_monotone_identical_fits():
    rep = run_overfit_profile(Scenario("monotone", 100, Noise("uniform", bound=0.0)), (1, 10, 1000), 3)
    for seed in rep.seeds:
        rows = [r for r in rep.rows if r["seed"] == seed]
        assert len({r["rss"] for r in rows}) == 1 and rows[0]["rss"] == 0.0
        assert len({r["l2_error"] for r in rows}) == 1


def test_overfit_report_writes_files(tmp_path):
    rep = run_overfit_profile(Scenario("sine", 60), (1, 5, 50), 5)
    paths = rep.write(tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["overfit_profile.csv", "overfit_replicates.csv", "overfit_summary.json"]
    header = (tmp_path / "overfit_replicates.csv").read_text().splitlines()[0]
    assert header == "seed,k,rss,jumps,l2_error"
