"""Command-line entry point.

Every flag default can be overridden from the environment with
``UBOUNDARY_<FLAG>`` (upper case, dashes as underscores; list flags take
comma-separated values). Exit status: 0 success, 1 bad input, 2 when the
requested precision cannot be met.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import boundary as bd
from . import metrics, simulate, theory
from .binning import EQUI_WEIGHT, SCHEMES, BinningError, fit
from .dataset import DatasetError, atomic_write_text, format_csv, load_csv, save_csv, split

ENV_PREFIX = "UBOUNDARY_"
EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2
DEFAULT_K, DEFAULT_L = 3, 500

BIAS_COLUMNS = ("s", "gamma", "tau", "expected_positivity")
SWEEP_COLUMNS = ("sigma", "selected_n", "tp", "precision", "recall", "feasible", "thresholds")
CALIBRATION_COLUMNS = ("j", "ece_mist", "ece_ist", "cum_ece_mist", "cum_ece_ist", "count")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; that status is reserved for infeasible sigma
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved flags of one invocation (after env overrides)."""

    command: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        for key in ("sigma",):
            if p.get(key) is not None and not 0.0 < p[key] <= 1.0:
                raise UsageError(f"--sigma must lie in (0, 1], got {p[key]}")
        for s in p.get("sigmas") or ():
            if not 0.0 < s <= 1.0:
                raise UsageError(f"--sigmas values must lie in (0, 1], got {s}")
        for key in ("k", "l"):
            if p.get(key) is not None and p[key] < 1:
                raise UsageError(f"--{key} must be a positive integer")

    def to_dict(self) -> dict:
        return {"command": self.command, **self.params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_grid_flags(p: argparse.ArgumentParser, with_algo: bool = True) -> None:
    if with_algo:
        p.add_argument("--algo", default="ew-dpmt", help=f"one of {', '.join(bd.ALGORITHMS)}")
    p.add_argument("--binning", default=EQUI_WEIGHT, help=f"one of {', '.join(SCHEMES)}")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="uncertainty bins")
    p.add_argument("--l", type=int, default=DEFAULT_L, help="score bins")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uboundary", description=__doc__.splitlines()[0])
    parser.add_argument("--dump-config", action="store_true", help="print the resolved config as JSON and exit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write synthetic train/test/truth CSVs")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-regions", type=int, default=100_000)
    p.add_argument("--train-per-region", type=int, default=200)
    p.add_argument("--min-train-per-region", type=int, default=2,
                   help="log-uniform train size lower bound; equal to --train-per-region for a constant size")
    p.add_argument("--test-per-region", type=int, default=10)
    p.add_argument("--beta1-t", type=float, default=0.25)
    p.add_argument("--beta0-t", type=float, default=0.75)
    p.add_argument("--beta1-p", type=float, default=1.0)
    p.add_argument("--beta0-p", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("split", help="shuffle a dataset into hold-out and test CSVs")
    p.add_argument("--input", required=True)
    p.add_argument("--hold-fraction", type=float, default=0.5)
    p.add_argument("--out-hold", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bin", help="fit a partition and write the bin grid JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_grid_flags(p, with_algo=False)

    p = sub.add_parser("fit", help="fit a decision boundary at a precision bound")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="boundary JSON")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--prune", action="store_true", help="extend the boundary with pure top bins")
    _add_grid_flags(p)

    p = sub.add_parser("eval", help="apply a boundary JSON to a dataset")
    p.add_argument("--boundary", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="also write the metrics JSON here")

    p = sub.add_parser("sweep", help="precision-recall curve over several precision bounds")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="PR CSV")
    p.add_argument("--sigmas", type=_float_list, default=[0.5, 0.6, 0.7, 0.8, 0.9, 0.95])
    _add_grid_flags(p)

    p = sub.add_parser("bias", help="expected test positivity against model score")
    p.add_argument("--output", required=True)
    p.add_argument("--omega", type=float, default=0.5)
    p.add_argument("--xi", type=float, default=0.25)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--gammas", type=_float_list, default=[0.1, 0.5, 1.0, 2.0])
    p.add_argument("--n-evidence", type=float, default=50.0)
    p.add_argument("--points", type=int, default=101)

    p = sub.add_parser("calibrate", help="per-bin calibration error of MIST and IST")
    p.add_argument("--hold", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--output", required=True)
    _add_grid_flags(p, with_algo=False)
    p.set_defaults(l=10)
    return parser


def _apply_env(parser: argparse.ArgumentParser, env) -> None:
    """Replace flag defaults with ``UBOUNDARY_*`` environment values."""
    subparsers = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    targets = [parser] + [p for a in subparsers for p in a.choices.values()]
    for p in targets:
        for action in p._actions:
            if action.dest in ("help", "command", argparse.SUPPRESS):
                continue
            raw = env.get(ENV_PREFIX + action.dest.upper())
            if raw is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                try:
                    value = action.type(raw) if action.type else raw
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"{ENV_PREFIX}{action.dest.upper()}: {exc}") from None
            action.default = value
            action.required = False


def resolve(argv, env=None) -> tuple[RunConfig, bool]:
    """Parse ``argv`` into a config; the flag says whether to only dump it."""
    parser = build_parser()
    _apply_env(parser, os.environ if env is None else env)
    ns = parser.parse_args(argv)
    params = {k: v for k, v in sorted(vars(ns).items()) if k not in ("command", "dump_config")}
    return RunConfig(ns.command, params), ns.dump_config


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


class Infeasible(Exception):
    pass


def _write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _cmd_simulate(c: dict) -> None:
    lo = c["min_train_per_region"]
    gen = simulate.GeneratorConfig(
        n_regions=c["n_regions"],
        samples_per_region_train=c["train_per_region"],
        samples_per_region_test=c["test_per_region"],
        beta1_T=c["beta1_t"],
        beta0_T=c["beta0_t"],
        beta1_P=c["beta1_p"],
        beta0_P=c["beta0_p"],
        tau=c["tau"],
        seed=c["seed"],
        min_train_per_region=None if lo == c["train_per_region"] else lo,
    )
    out = c["out_dir"]
    os.makedirs(out, exist_ok=True)
    result = simulate.generate(gen)
    save_csv(result.train, os.path.join(out, "train.csv"))
    save_csv(result.test, os.path.join(out, "test.csv"))
    atomic_write_text(os.path.join(out, "truth.csv"), simulate.truth_csv(result.truth))
    print(f"wrote {result.train.n_total} train and {result.test.n_total} test samples to {out}")


def _cmd_split(c: dict) -> None:
    d = load_csv(c["input"])
    hold, test = split(d, (c["hold_fraction"], 1.0 - c["hold_fraction"]), c["seed"])
    save_csv(hold, c["out_hold"])
    save_csv(test, c["out_test"])
    print(f"hold-out {hold.n_total}, test {test.n_total}")


def _cmd_bin(c: dict) -> None:
    _, grid = fit(load_csv(c["input"]), c["binning"], c["k"], c["l"])
    _write_json(c["output"], grid.to_dict())


def _check_algo(c: dict) -> None:
    if c["algo"] not in bd.ALGORITHMS:
        raise bd.BoundaryError(f"unknown algorithm {c['algo']!r}; choose from {', '.join(bd.ALGORITHMS)}")
    if c["algo"] == "ew-dpmt" and c["binning"] != EQUI_WEIGHT:
        raise bd.BoundaryError("ew-dpmt needs an equi-weight grid; use vw-dpmt for equi-span binning")


def _cmd_fit(c: dict) -> None:
    _check_algo(c)
    d = load_csv(c["input"])
    _, grid = fit(d, c["binning"], c["k"], c["l"])
    sol = bd.solve(grid, c["algo"], c["sigma"], dataset=d)
    if not sol.feasible:
        raise Infeasible(f"no boundary reaches precision {c['sigma']} on {c['input']}")
    if c["prune"] and sol.partitioner is grid.partitioner:
        sol = bd.with_pruning(sol, grid)
    _write_json(c["output"], sol.to_dict())
    achieved = metrics.test_eval(sol, d)
    print(f"algorithm      {sol.algorithm}")
    print(f"sigma          {sol.sigma}")
    print(f"thresholds     {list(sol.thresholds)}")
    print(f"grid           precision {sol.precision_fit:.6f}  recall {sol.recall_fit:.6f}  tp {sol.tp}")
    print(f"hold-out       precision {achieved.precision:.6f}  recall {achieved.recall:.6f}  tp {achieved.tp}")


def _cmd_eval(c: dict) -> None:
    with open(c["boundary"], encoding="utf-8") as fh:
        sol = bd.BoundarySolution.from_dict(json.load(fh))
    r = metrics.test_eval(sol, load_csv(c["input"]))
    doc = {
        "precision": r.precision,
        "recall": r.recall,
        "tp": r.tp,
        "fp": r.fp,
        "fn": r.fn,
        "empty": r.empty,
    }
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if c.get("output"):
        atomic_write_text(c["output"], text)
    sys.stdout.write(text)


def _cmd_sweep(c: dict) -> None:
    _check_algo(c)
    d = load_csv(c["input"])
    _, grid = fit(d, c["binning"], c["k"], c["l"])
    rows = [
        (pt.sigma, pt.cut, pt.tp, pt.precision, pt.recall, int(pt.feasible), ";".join(map(str, pt.thresholds)))
        for pt in bd.pr_sweep(grid, c["algo"], c["sigmas"], dataset=d)
    ]
    atomic_write_text(c["output"], format_csv(SWEEP_COLUMNS, rows))


def _cmd_bias(c: dict) -> None:
    rows = []
    for gamma in c["gammas"]:
        params = theory.TheoryParams(c["omega"], c["xi"], c["nu"], c["tau"], gamma, c["n_evidence"])
        rows.extend(theory.bias_curve(params, theory.score_grid(c["omega"], gamma, c["points"])))
    atomic_write_text(c["output"], format_csv(BIAS_COLUMNS, rows))


def _cmd_calibrate(c: dict) -> None:
    hold = load_csv(c["hold"])
    test = load_csv(c["test"])
    part, _ = fit(hold, c["binning"], c["k"], c["l"])
    mist, ist = metrics.calibration_reports(part, hold, test)
    rows = [tuple(None if isinstance(v, float) and math.isnan(v) else v for v in row)
            for row in metrics.calibration_table(mist, ist)]
    atomic_write_text(c["output"], format_csv(CALIBRATION_COLUMNS, rows))


COMMANDS = {
    "simulate": _cmd_simulate,
    "split": _cmd_split,
    "bin": _cmd_bin,
    "fit": _cmd_fit,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "bias": _cmd_bias,
    "calibrate": _cmd_calibrate,
}

INPUT_ERRORS = (
    UsageError,
    DatasetError,
    BinningError,
    bd.BoundaryError,
    metrics.MetricsError,
    theory.QuadratureError,
    ValueError,
    KeyError,
    OSError,
)


def run(argv=None, env=None) -> int:
    try:
        cfg, dump_only = resolve(sys.argv[1:] if argv is None else argv, env)
        if dump_only:
            sys.stdout.write(cfg.to_json() + "\n")
            return EXIT_OK
        with np.errstate(all="ignore"):
            COMMANDS[cfg.command](cfg.params)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
