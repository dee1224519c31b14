"""Command-line entry point: ``bundlechoice <command> ...``.

Exit codes: 0 success, 2 input or configuration error, 3 estimation error,
4 batch error.
"""

import argparse
import json
import logging
import sys

from .data import read_csv, write_csv
from .designs import DesignSpec, simulate_design
from .exceptions import (BatchError, ConfigurationError, EstimationError, InputError,
                         OptimizationError, TrainingError)
from .harness import (ReplicationPlan, emit_table, make_estimator, normalize_method,
                      run_bootstrap, run_replications, summarize_output)
from .mrc import eta_test_cross, eta_test_cross_fit
from .panel_ms import eta_test_panel, eta_test_panel_cross_fit

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_BATCH = 0, 2, 3, 4


def _design(value):
    return value if value == "custom" else int(value)


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    return cfg


def _load_data(path):
    try:
        return read_csv(path)
    except OSError as exc:
        raise InputError(f"cannot read data: {exc}") from None


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _check_panel(method, data):
    panel = data.__class__.__name__ == "PanelDataset"
    if method.startswith("panel") != panel:
        raise InputError(f"method {method} does not match the "
                         f"{'panel' if panel else 'cross-sectional'} data file")


def cmd_simulate(args):
    data = simulate_design(DesignSpec(_design(args.design)), args.n, args.seed)
    write_csv(data, args.out)


def cmd_estimate(args):
    method = normalize_method(args.method)
    data = _load_data(args.data)
    _check_panel(method, data)
    cfg = _load_config(args.config)
    res = make_estimator(method, cfg, cfg.get("seed", args.seed)).fit(data).result()
    _write(args.out, res.to_json() + "\n")


def cmd_bootstrap(args):
    method = normalize_method(args.method)
    data = _load_data(args.data)
    _check_panel(method, data)
    cfg = _load_config(args.config)
    est = make_estimator(method, cfg, args.seed)
    res = run_bootstrap(method, data, est, args.b, args.seed, cfg)
    _write(args.out, res.to_json() + "\n")


def cmd_montecarlo(args):
    cfg = _load_config(args.config)
    rows = []
    for n in args.n:
        plan = ReplicationPlan(_design(args.design), args.method, n, args.reps, args.b,
                               args.seed, cfg)
        rows.append(summarize_output(run_replications(plan), n=n))
    _write(args.out, emit_table(rows, args.format))


def cmd_test_eta(args):
    method = normalize_method(args.method)
    if method not in ("mrc", "panel-ms"):
        raise ConfigurationError("the interaction test is available for mrc and panel-ms")
    data = _load_data(args.data)
    _check_panel(method, data)
    cfg = _load_config(args.config)
    est = make_estimator(method, cfg, args.seed)
    if args.cross_fit:
        test = eta_test_cross_fit if method == "mrc" else eta_test_panel_cross_fit
        out = test(data, est, B=args.b, seed=args.seed).to_dict()
        out["cross_fit"] = True
    else:
        est.fit(data)
        if method == "mrc":
            res = eta_test_cross(data, est.beta_, est.gamma_, est.sigma_, B=args.b,
                                 seed=args.seed, kernel_order=est.stage2_order)
        else:
            res = eta_test_panel(data, est.gamma_, est.h_, B=args.b, seed=args.seed,
                                 kernel_order=est.kernel_order)
        out = res.to_dict()
        out["gamma_hat"] = est.gamma_.tolist()
    _write(args.out, json.dumps(out, indent=2) + "\n")


def build_parser():
    p = argparse.ArgumentParser(prog="bundlechoice",
                                description="Semiparametric bundle choice estimation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    methods = ["mrc", "lad", "panel-ms", "panel-lad"]

    s = sub.add_parser("simulate", help="draw a dataset from a reference design")
    s.add_argument("--design", required=True, choices=["1", "2", "3", "4"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="point estimates for a dataset")
    s.add_argument("--method", required=True, choices=methods)
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("bootstrap", help="estimates with bootstrap confidence intervals")
    s.add_argument("--method", required=True, choices=methods)
    s.add_argument("--data", required=True)
    s.add_argument("--b", type=int, default=99)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_bootstrap)

    s = sub.add_parser("montecarlo", help="replicate a design and tabulate the estimates")
    s.add_argument("--design", required=True, choices=["1", "2", "3", "4"])
    s.add_argument("--method", required=True, choices=methods)
    s.add_argument("--n", type=int, nargs="+", required=True)
    s.add_argument("--reps", type=int, default=50)
    s.add_argument("--b", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--format", choices=["csv", "text"], default="csv")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("test-eta", help="bootstrap test for a non-degenerate interaction")
    s.add_argument("--method", required=True, choices=["mrc", "panel-ms"])
    s.add_argument("--data", required=True)
    s.add_argument("--cross-fit", action="store_true",
                   help="estimate gamma on one half of the agents and test on the other")
    s.add_argument("--b", type=int, default=99)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_test_eta)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except BatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for rep, msg in exc.failures:
            print(f"  replication {rep}: {msg}", file=sys.stderr)
        return EXIT_BATCH
    except (EstimationError, OptimizationError, TrainingError) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (InputError, ConfigurationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
