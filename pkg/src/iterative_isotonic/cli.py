"""Command-line entry point: ``iir fit | predict | experiment``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import sim, verify
from .estimator import IterativeIsotonicRegressor
from .select import PENALTIES, StopRule, criterion_value

EXIT_CONTRACT = 1
EXIT_USAGE = 2


class CliError(Exception):
    pass


def _read_columns(path, columns):
    """Parse a comma-separated file with a header into float columns."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CliError(f"{path}: empty file, a header is required") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise CliError(f"{path}: header lacks column(s) {', '.join(missing)}")
        pos = [header.index(c) for c in columns]
        out = [[] for _ in columns]
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                vals = [float(row[p]) for p in pos]
            except (ValueError, IndexError):
                raise CliError(f"{path}: malformed row at line {reader.line_num}: {','.join(row)}") from None
            if not all(math.isfinite(v) for v in vals):
                raise CliError(f"{path}: non-finite value at line {reader.line_num}")
            for o, v in zip(out, vals):
                o.append(v)
    return [np.array(o, dtype=np.float64) for o in out]


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _noise(args):
    if args.noise == "uniform":
        return sim.Noise("uniform", sigma=args.sigma, bound=args.bound if args.bound is not None else args.sigma)
    return sim.Noise("truncnorm", sigma=args.sigma, bound=args.bound)


def _targets(name):
    return list(sim.TARGETS) if name == "all" else [name]


# --- fit / predict --------------------------------------------------------


def cmd_fit(args) -> int:
    x, y = _read_columns(args.input, ["x", "y"])
    if x.size < 2:
        raise CliError(f"{args.input}: need at least 2 data rows, got {x.size}")
    est = IterativeIsotonicRegressor(
        stop=args.stop,
        k_max=args.k_max,
        holdout_fraction=args.holdout_fraction,
        patience=None if args.patience < 0 else args.patience,
        random_state=args.seed,
    )
    est.fit(x, y)
    est.save(args.out)
    model = est.model_
    n = model.sample.total_weight
    lines = [
        f"stop rule:  {args.stop}",
        f"k:          {model.k} ({model.status})",
        f"RSS:        {model.rss!r}",
        f"jumps:      {model.jumps}",
    ]
    if args.stop in PENALTIES:
        try:
            crit = criterion_value(model.rss, n, model.jumps, args.stop)
        except ValueError:
            crit = math.nan
        lines.append(f"criterion:  {crit!r}")
    elif args.stop == "holdout":
        sel = model.selection
        lines.append(f"validation: {sel.validation_mse[sel.selected_k - 1]!r}")
    if est.x_scale_ != 1.0 or est.x_offset_ != 0.0:
        lines.append(f"x rescaled: (x - {est.x_offset_!r}) / {est.x_scale_!r}")
    print("\n".join(lines))
    if args.trace_csv:
        sel = model.selection
        if sel is not None:
            Path(args.trace_csv).write_text(sel.to_csv(), encoding="utf-8")
        else:
            _write_plain_trace(args.trace_csv, model, n)
    if args.svg:
        Path(args.svg).write_text(render_svg(est, x, y), encoding="utf-8")
    return 0


def _write_plain_trace(path, model, n):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "rss", "p", "criterion", "validation_mse"])
        for k, (rss, p) in enumerate(zip(model.trace.rss, model.trace.jumps), start=1):
            w.writerow([k, repr(rss), p, "nan", "nan"])


def cmd_predict(args) -> int:
    est = IterativeIsotonicRegressor.load(args.model)
    (x,) = _read_columns(args.input, ["x"])
    try:
        pred = est.predict(x)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y_hat"])
        for xi, pi in zip(x.tolist(), pred.tolist()):
            w.writerow([repr(xi), repr(pi)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


# --- experiments ------------------------------------------------------------


def _finish(reports, out, timings=False) -> int:
    failed = []
    for rep in reports:
        if out:
            rep.write(out, include_runtime=timings)
        failed += [f"{rep.config.get('target', rep.name)}:{c}" for c in rep.failed_contracts]
        print(f"{rep.name}: {'ok' if rep.passed else 'FAILED'}")
    if failed:
        for name in failed:
            print(f"contract failed: {name}", file=sys.stderr)
        return EXIT_CONTRACT
    return 0


def cmd_overfit(args) -> int:
    scenario = sim.Scenario(args.target, args.n, _noise(args), "uniform", args.seed)
    rep = sim.run_overfit_profile(scenario, _int_list(args.k), args.seeds)
    for k, agg in rep.aggregates.items():
        print(f"k={k}: median RSS {agg['median_rss']:.6g}, median jumps {agg['median_jumps']:g}, "
              f"median L2 error {agg['median_l2_error']:.6g}")
    return _finish([rep], args.out, args.timings)


def cmd_approximation(args) -> int:
    rep = sim.approximation_report(_targets(args.target), args.grid, args.k)
    for row in rep.rows:
        print(f"{row['target']}: error(k=1) {row['error_k1']:.6g}, error(k={args.k}) {row['error_kmax']:.6g}")
    return _finish([rep], args.out)


def cmd_consistency(args) -> int:
    rule = StopRule.from_name(args.stop, holdout_fraction=args.holdout_fraction,
                              patience=None if args.patience < 0 else args.patience)
    reports = []
    for target in _targets(args.target):
        rep = sim.run_consistency(target, _int_list(args.n), StopRule("none") if args.iso_only else rule,
                                  args.reps, _noise(args), "uniform", args.seed,
                                  1 if args.iso_only else args.k_max)
        meds = ", ".join(f"n={n}: {a['median_l2_error_sq']:.6g}" for n, a in rep.aggregates.items())
        print(f"{target}: median squared L2 error {meds}")
        if args.target == "all":
            rep.name = f"consistency_{target}"
        reports.append(rep)
    return _finish(reports, args.out, args.timings)


def cmd_verify_lemma(args) -> int:
    rows = []
    ok = True
    for direction in ("isotone", "antitone"):
        ratio = verify.lemma_bound_audit(args.C, args.n, args.N, args.trials, args.seed, direction)
        ok &= ratio <= 1.0
        rows.append([args.n, args.N, repr(float(args.C)), args.trials, args.seed, direction,
                     repr(float(verify.delta(args.C, args.N))), repr(float(ratio))])
        print(f"{direction}: max distance/delta = {ratio:.6f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "verification.csv"
        new = not path.exists()
        with open(path, "a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(["n", "N", "C", "trials", "seed", "direction", "delta", "max_ratio"])
            w.writerows(rows)
    if not ok:
        print("contract failed: lemma_bound", file=sys.stderr)
        return EXIT_CONTRACT
    return 0


# --- svg --------------------------------------------------------------------


def render_svg(est: IterativeIsotonicRegressor, x, y, width=640, height=400) -> str:
    """Data points and the fitted step function as a standalone SVG."""
    pad = 30
    f = est.step_function_
    x01 = (np.asarray(x) - est.x_offset_) / est.x_scale_
    lo = min(float(np.min(y)), float(f.values.min()))
    hi = max(float(np.max(y)), float(f.values.max()))
    span = hi - lo or 1.0

    def px(t):
        return pad + t * (width - 2 * pad)

    def py(v):
        return height - pad - (v - lo) / span * (height - 2 * pad)

    edges = f.edges
    path = []
    for i, v in enumerate(f.values):
        path.append(f"{'M' if i == 0 else 'L'}{px(edges[i]):.2f},{py(v):.2f}")
        path.append(f"L{px(edges[i + 1]):.2f},{py(v):.2f}")
    dots = "".join(
        f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2" fill="#555"/>' for a, b in zip(x01, y)
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        f'<rect width="100%" height="100%" fill="white"/>{dots}'
        f'<path d="{" ".join(path)}" fill="none" stroke="#c0392b" stroke-width="1.5"/></svg>\n'
    )


# --- parser -------------------------------------------------------------------


def _add_noise_flags(p):
    p.add_argument("--noise", choices=["truncnorm", "uniform"], default="truncnorm")
    p.add_argument("--sigma", type=float, default=0.3, help="noise scale (half-width for uniform)")
    p.add_argument("--bound", type=float, default=None, help="noise bound (default 3 sigma)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iir", description="Iterative isotonic regression.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to a CSV with columns x,y")
    p.add_argument("input")
    p.add_argument("--stop", choices=["none", *PENALTIES, "holdout"], default="holdout")
    p.add_argument("--k-max", type=int, default=1000)
    p.add_argument("--holdout-fraction", type=float, default=0.25)
    p.add_argument("--patience", type=int, default=20, help="negative for a full scan")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.json")
    p.add_argument("--trace-csv", default=None, help="write the per-k selection trace")
    p.add_argument("--svg", default=None, help="write a plot of data and fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="evaluate a saved model on a CSV with column x")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="Monte Carlo and verification runs")
    exp = p.add_subparsers(dest="experiment", required=True)
    target_choices = ["all", *sim.TARGETS]

    e = exp.add_parser("overfit", help="RSS, jumps and error at fixed k")
    e.add_argument("--target", choices=list(sim.TARGETS), default="sine")
    e.add_argument("--n", type=int, default=100)
    e.add_argument("--k", default="1,10,1000")
    e.add_argument("--seeds", type=int, default=50)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--timings", action="store_true")
    _add_noise_flags(e)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_overfit)

    e = exp.add_parser("approximation", help="noiseless dense-grid error curve")
    e.add_argument("--target", choices=target_choices, default="all")
    e.add_argument("--k", type=int, default=200)
    e.add_argument("--grid", type=int, default=2000)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_approximation)

    e = exp.add_parser("consistency", help="median error across sample sizes")
    e.add_argument("--target", choices=target_choices, default="all")
    e.add_argument("--n", default="50,200,800")
    e.add_argument("--reps", type=int, default=50)
    e.add_argument("--stop", choices=["none", *PENALTIES, "holdout"], default="holdout")
    e.add_argument("--holdout-fraction", type=float, default=0.25)
    e.add_argument("--patience", type=int, default=20)
    e.add_argument("--k-max", type=int, default=1000)
    e.add_argument("--iso-only", action="store_true", help="force k = 1")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--timings", action="store_true")
    _add_noise_flags(e)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_consistency)

    e = exp.add_parser("verify-lemma", help="audit the step-subspace approximation bound")
    e.add_argument("--n", type=int, default=200)
    e.add_argument("--N", type=int, default=10)
    e.add_argument("--C", type=float, default=1.0)
    e.add_argument("--trials", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_verify_lemma)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
