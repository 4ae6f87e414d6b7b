"""Command-line experiment harness.

Subcommands: synth, fit, predict, eval, run.  Configuration comes from a
flat key=value file plus flag overrides (flag wins over file wins over
default).  Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
failure; failures print one machine-readable JSON object to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import classifier as clf
from . import dataset as ds
from . import experiment as exp
from . import figures, metrics
from .config import ExperimentConfig, parse_config_file, resolve_config
from .errors import NilmError, NumericError, UsageError


class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with code 2."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key=value config file")
    common.add_argument("--seed", type=int, metavar="U64", help="RNG seed for synthetic data")
    common.add_argument("--tau", type=float, metavar="REAL", help="distance ratio threshold")
    common.add_argument("--train-fraction", type=float, metavar="REAL", help="chronological train share")
    common.add_argument("--on-threshold", type=float, metavar="WATTS", help="appliance ON watt threshold")
    common.add_argument("--solver", choices=["omp", "ista", "fista"], help="sparse coding method")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--keep", action="store_true", default=None, help="keep intermediate artifacts")

    parser = _Parser(prog="nilmsrc", description="Appliance-state detection from aggregate smart-meter windows")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("synth", parents=[common], help="write a synthetic household CSV")
    p_fit = sub.add_parser("fit", parents=[common], help="build and save a training dictionary")
    p_fit.add_argument("--model", metavar="PATH", help="model file to write (default OUT/model.json)")
    p_pred = sub.add_parser("predict", parents=[common], help="predict labels for the test split")
    p_pred.add_argument("--model", metavar="PATH", help="model file to read (default OUT/model.json)")
    p_eval = sub.add_parser("eval", parents=[common], help="predict and score the test split")
    p_eval.add_argument("--model", metavar="PATH", help="model file to read (default OUT/model.json)")
    sub.add_parser("run", parents=[common], help="synth/ingest + fit + eval in one invocation")
    return parser


def _load_config(args) -> ExperimentConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {
        "seed": None if args.seed is None else str(args.seed),
        "tau": None if args.tau is None else str(args.tau),
        "train_fraction": None if args.train_fraction is None else str(args.train_fraction),
        "on_threshold": None if args.on_threshold is None else str(args.on_threshold),
        "solver.method": args.solver,
        "out": args.out,
        "keep": None if args.keep is None else "true",
    }
    return resolve_config(file_values, overrides)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_path(cfg: ExperimentConfig, args) -> Path:
    if getattr(args, "model", None):
        return Path(args.model)
    return _out_dir(cfg) / "model.json"


def cmd_synth(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    house = ds.synth_generate(cfg.synth)
    path = out / "synthetic.csv"
    with exp.stage("write"):
        ds.household_to_csv(house, path)
    print(f"wrote {path}")
    return 0


def _fit_pipeline(cfg: ExperimentConfig):
    house = exp.load_household(cfg)
    train, test = exp.prepare_windows(house, cfg)
    dictionary = exp.fit_dictionary(train, cfg)
    return house, train, test, dictionary


def cmd_fit(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    house, train, test, dictionary = _fit_pipeline(cfg)
    model_path = _model_path(cfg, args)
    with exp.stage("save-model"):
        clf.save_model(
            model_path,
            dictionary,
            appliance_names=house.appliance_names,
            config_echo=cfg.echo(),
            protocol=exp.model_protocol(cfg, train),
        )
    if cfg.keep:
        ds.save_windowed(train, out, prefix="train_")
        ds.save_windowed(test, out, prefix="test_")
    print(f"wrote {model_path} ({dictionary.num_columns} columns, {dictionary.num_classes} classes)")
    return 0


def _eval_pipeline(cfg: ExperimentConfig, dictionary, names):
    house = exp.load_household(cfg)
    train, test = exp.prepare_windows(house, cfg)
    if names and tuple(names) != tuple(test.appliance_names):
        raise UsageError(
            f"model appliances {tuple(names)} do not match data appliances {tuple(test.appliance_names)}"
        )
    pred = exp.predict_windows(dictionary, test, cfg)
    return test, pred


def _write_report(cfg: ExperimentConfig, test, pred, out: Path) -> metrics.EvaluationReport:
    report = exp.evaluate_predictions(pred, test, cfg)
    with exp.stage("report"):
        (out / "report.json").write_text(metrics.report_to_json(report), encoding="utf-8")
        (out / "report.txt").write_text(metrics.report_to_text(report), encoding="utf-8")
        exp.write_predictions_csv(out / "predictions.csv", test, pred)
        pred_matrix = metrics.as_label_matrix(pred, test.num_appliances)
        figures.render_report_figures(
            report, out / "figures", pred=pred_matrix, truth=test.labels, names=test.appliance_names
        )
    return report


def cmd_predict(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    with exp.stage("load-model"):
        dictionary, meta = clf.load_model(_model_path(cfg, args))
    test, pred = _eval_pipeline(cfg, dictionary, meta.get("appliance_names"))
    path = exp.write_predictions_csv(out / "predictions.csv", test, pred)
    print(f"wrote {path} ({test.num_windows} windows)")
    return 0


def cmd_eval(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    with exp.stage("load-model"):
        dictionary, meta = clf.load_model(_model_path(cfg, args))
    test, pred = _eval_pipeline(cfg, dictionary, meta.get("appliance_names"))
    report = _write_report(cfg, test, pred, out)
    print(metrics.report_to_text(report), end="")
    print(f"wrote {out / 'report.json'}")
    return 0


def cmd_run(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    house, train, test, dictionary = _fit_pipeline(cfg)
    if cfg.keep:
        if cfg.uses_synth:
            ds.household_to_csv(house, out / "synthetic.csv")
        clf.save_model(
            out / "model.json",
            dictionary,
            appliance_names=house.appliance_names,
            config_echo=cfg.echo(),
            protocol=exp.model_protocol(cfg, train),
        )
        ds.save_windowed(train, out, prefix="train_")
        ds.save_windowed(test, out, prefix="test_")
    pred = exp.predict_windows(dictionary, test, cfg)
    report = _write_report(cfg, test, pred, out)
    print(metrics.report_to_text(report), end="")
    print(f"wrote {out / 'report.json'}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "run": cmd_run,
}


def _exit_code(err: Exception) -> int:
    if isinstance(err, UsageError):
        return 1
    if isinstance(err, NumericError):
        return 3
    return 2  # DataError and any other package/IO failure


def _emit_error(err: Exception, code: int):
    doc = {
        "error": type(err).__name__,
        "stage": getattr(err, "stage", None),
        "message": str(err),
        "exit_code": code,
    }
    print(json.dumps(doc))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args)
        return _COMMANDS[args.command](cfg, args)
    except NilmError as err:
        code = _exit_code(err)
        _emit_error(err, code)
        return code
    except OSError as err:
        _emit_error(err, 2)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
