"""Command-line interface: fit, predict, simulate, bench.

Exit codes: 0 success, 2 input/schema problems, 3 numerical failures,
4 bad configuration.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import experiments
from .data_model import (
    Ordering,
    make_subset_schedule,
    ordering_from_lags,
    ordering_from_missingness,
    ordering_from_variance,
    standardize,
)
from .dataio import design_for_model, read_dataset, write_predictions_csv, write_rows_csv
from .errors import InvalidOrdering, InvalidSchedule, OrdseqError
from .lasso_engine import (
    LambdaGrid,
    SqrtLassoConfig,
    lambda_grid,
    lambda_grid_from_gamma,
)
from .missing_data import estimate_surrogate
from .model_io import FittedModel, build_metadata
from .selection import kfold_cv_select, make_kfold_plan, ridge_kfold_select


def _add_fit_parser(sub):
    q = sub.add_parser("fit", help="fit a model on a CSV and save it as JSON")
    q.add_argument("--data", required=True, help="training CSV (UTF-8, header row)")
    q.add_argument("--response", required=True, help="name of the response column")
    q.add_argument("--out", required=True, help="output model JSON path")
    q.add_argument("--ordering", default="asis",
                   help="variance | missingness | lags | file:PATH | asis")
    q.add_argument("--grid-size", default="10",
                   help="number of nested subsets K, or 'p' for all sizes")
    q.add_argument("--min-subset", type=int, default=1,
                   help="smallest subset size on the schedule")
    q.add_argument("--nlambda", type=int, default=100)
    q.add_argument("--lambda-ratio", type=float, default=None,
                   help="last/first tuning value (default 0.01 if p>n else 1e-4)")
    q.add_argument("--folds", type=int, default=5)
    q.add_argument("--mode", default="lasso", choices=("lasso", "ridge", "lasso-missing"))
    q.add_argument("--sqrt-stop", default="on", choices=("on", "off"))
    q.add_argument("--lambda-sq", type=float, default=None,
                   help="early-stop scale (default 0.55*sqrt(2 log(p)/n))")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threads", type=int, default=None)
    # lag-ordering geometry
    q.add_argument("--n-series", type=int, default=None)
    q.add_argument("--max-lag", type=int, default=None)
    q.add_argument("--target-series", type=int, default=None)
    q.add_argument("--partner-series", type=int, default=None)
    q.add_argument("--season-lag", type=int, default=None)
    q.set_defaults(func=cmd_fit)


def _resolve_ordering(args, data):
    spec = args.ordering
    if spec == "asis":
        return Ordering.identity(data.p)
    if spec == "variance":
        return ordering_from_variance(data)
    if spec == "missingness":
        if data.mask is None:
            raise InvalidOrdering("missingness ordering needs missing entries in the CSV")
        return ordering_from_missingness(data.mask)
    if spec == "lags":
        needed = (args.n_series, args.max_lag, args.target_series)
        if any(v is None for v in needed):
            raise InvalidSchedule("lags ordering needs --n-series, --max-lag, --target-series")
        if args.n_series * args.max_lag != data.p:
            raise InvalidSchedule(
                f"n_series*max_lag = {args.n_series * args.max_lag} != p = {data.p}")
        return ordering_from_lags(args.n_series, args.max_lag, args.target_series,
                                  args.partner_series, args.season_lag)
    if spec.startswith("file:"):
        path = spec[5:]
        try:
            with open(path, encoding="utf-8") as fh:
                raw = fh.read().replace(",", " ").split()
            perm = np.array([int(tok) for tok in raw], dtype=int)
        except (OSError, ValueError) as exc:
            raise InvalidOrdering(f"cannot read ordering file {path}: {exc}") from exc
        if perm.shape[0] != data.p:
            raise InvalidOrdering(f"ordering file has {perm.shape[0]} entries, need {data.p}")
        return Ordering(perm)
    raise InvalidSchedule(f"unknown ordering source {spec!r}")


def _ridge_lambda_grid(n: int, L: int) -> LambdaGrid:
    return LambdaGrid(n * 10.0 ** np.linspace(3, -3, L))


def cmd_fit(args) -> int:
    t_start = time.perf_counter()
    data = read_dataset(args.data, args.response)
    ordering = _resolve_ordering(args, data)
    if args.grid_size == "p":
        K = data.p
    else:
        K = int(args.grid_size)
    if args.lambda_sq is not None:
        stop_cfg = SqrtLassoConfig(args.lambda_sq)
    elif data.p >= 2:
        stop_cfg = SqrtLassoConfig.default(data.n, data.p)
    else:  # single predictor: the default scale formula needs log(p) > 0
        stop_cfg = SqrtLassoConfig.disabled()
    if args.sqrt_stop == "off":
        stop_cfg = SqrtLassoConfig.disabled()
    plan = make_kfold_plan(data.n, args.folds, seed=args.seed)
    schedule = make_subset_schedule(data.p, K, args.min_subset)

    if args.mode == "ridge":
        grid = _ridge_lambda_grid(data.n, args.nlambda)
        sel = ridge_kfold_select(data, ordering, grid, plan,
                                 cutoffs=schedule.cutoffs)
        subset_size = int(schedule.cutoffs[sel.k_star - 1])
    else:
        if args.mode == "lasso-missing":
            surr = estimate_surrogate(data)
            ratio = args.lambda_ratio
            if ratio is None:
                ratio = 0.01 if data.p > data.n else 1e-4
            grid = lambda_grid_from_gamma(surr.gamma, args.nlambda, ratio)
        else:
            std, _ = standardize(data)
            grid = lambda_grid(std, args.nlambda, args.lambda_ratio)
        sel = kfold_cv_select(data, ordering, schedule, grid, plan,
                              cfg=stop_cfg, mode=args.mode,
                              threads=args.threads or 1)
        subset_size = int(schedule.cutoffs[sel.k_star - 1])

    _, info = standardize(data)
    elapsed = time.perf_counter() - t_start
    model = FittedModel(
        coefficients=sel.chosen,
        std_info=info,
        ordering=ordering,
        schedule=schedule,
        lambdas=grid,
        k_star=sel.k_star,
        l_star=sel.l_star,
        mode=args.mode,
        column_names=data.column_names,
        response_name=args.response,
        metadata=build_metadata(args.seed, args.data,
                                {"fit_seconds": round(elapsed, 3),
                                 "n": data.n, "p": data.p}),
    )
    model.save(args.out)
    score = float(sel.scores[sel.k_star - 1, sel.l_star - 1])
    print(f"selected (k={sel.k_star}, l={sel.l_star}); subset size {subset_size}; "
          f"cv score {score:.6g}; nonzero {sel.chosen.n_nonzero}; "
          f"{elapsed:.2f}s; model -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    model = FittedModel.load(args.model)
    X = design_for_model(args.data, model)
    preds = model.predict(X)
    write_predictions_csv(args.out, preds)
    print(f"{preds.shape[0]} predictions -> {args.out}")
    return 0


def _parse_overrides(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise InvalidSchedule(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def cmd_simulate(args) -> int:
    rows = experiments.run_suite(args.suite, args.reps, seed=args.seed,
                                 threads=args.threads or 1,
                                 **_parse_overrides(args.set))
    write_rows_csv(args.out, rows, experiments.COLUMNS)
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def cmd_bench(args) -> int:
    sizes = []
    for token in args.sizes.split(","):
        n_str, p_str = token.lower().split("x")
        sizes.append((int(n_str), int(p_str)))
    k_list = [int(k) for k in args.k_list.split(",")]
    rows = experiments.bench_grid(sizes=sizes, k_list=k_list, L=args.nlambda,
                                  seed=args.seed)
    write_rows_csv(args.out, rows, experiments.BENCH_COLUMNS)
    base = {(r["n"], r["p"]): r["seconds"] for r in rows if r["K"] == 1}
    for r in rows:
        key = (r["n"], r["p"])
        if r["K"] != 1 and key in base and base[key] > 0:
            print(f"n={r['n']} p={r['p']} K={r['K']}: {r['seconds']:.3f}s "
                  f"({r['seconds'] / base[key]:.2f}x K=1)")
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordseq",
        description="Nested-subset Lasso/ridge model grids driven by prior "
                    "variable orderings",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_fit_parser(sub)

    q = sub.add_parser("predict", help="predict from a saved model")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("simulate", help="run a simulation suite to CSV")
    q.add_argument("--suite", required=True, choices=experiments.SUITES)
    q.add_argument("--reps", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threads", type=int, default=None)
    q.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a suite parameter (repeatable)")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("bench", help="time grid fits for several subset counts")
    q.add_argument("--sizes", default="71x1000", help="comma-separated NxP list")
    q.add_argument("--k-list", default="1,4,16,64")
    q.add_argument("--nlambda", type=int, default=100)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is None and "ORDSEQ_THREADS" in os.environ:
        try:
            args.threads = int(os.environ["ORDSEQ_THREADS"])
        except ValueError:
            pass
    try:
        return args.func(args)
    except OrdseqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
