"""
Command-line entry point: ``dggan {prepare,train,generate,evaluate,tune}``.

Settings resolve as command-line flag > ``--config`` JSON file > built-in
default. Exit codes: 0 success, 2 bad usage / missing input / invalid
config, 1 any other failure. Outputs written before a failure are removed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import charts
from .errors import ConfigError, DgganError
from .gan import (
    GanConfig,
    load_checkpoint,
    sample,
    save_checkpoint,
    train_with_generation,
    tune_schedule,
    write_epoch_log,
)
from .metrics import DEFAULT_BINS, DEFAULT_SMALL_THRESHOLD, evaluate_all
from .schedule import MODES, build_schedule
from .table import (
    ADULT_COLUMNS,
    DEFAULT_MISSING_TOKENS,
    load_csv,
    load_schema,
    prepare_census,
    prepare_olympic,
    save_schema,
    write_csv,
)

RECIPES = ("olympic", "census", "generic")

GAN_DEFAULTS = {f.name: f.default for f in fields(GanConfig)}
SCHEDULE_DEFAULTS = {
    "schedule": "geometric",
    "first_item": 0.2,
    "total": 100.0,
    "ratio_override": None,
    "synthetic_count": None,
}
EVAL_DEFAULTS = {"small_threshold": DEFAULT_SMALL_THRESHOLD, "bins": DEFAULT_BINS}
RUN_KEYS = set(GAN_DEFAULTS) | set(SCHEDULE_DEFAULTS) | set(EVAL_DEFAULTS) | {"recipe"}


class UsageError(Exception):
    """Problems the user must fix on the command line (exit code 2)."""


def _require_file(path: str | None, flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: input file not found: {p}")
    return p


def load_run_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = _require_file(path, "--config")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    unknown = sorted(set(obj) - RUN_KEYS)
    if unknown:
        raise ConfigError(f"{p}: unknown config keys {unknown}")
    return obj


def resolve(args: argparse.Namespace, file_cfg: dict, defaults: dict) -> dict:
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else file_cfg.get(key, default)
    return out


class Outputs:
    """Tracks files written by a command so they can be removed on failure."""

    def __init__(self):
        self.paths: list[Path] = []

    def add(self, *paths):
        self.paths.extend(Path(p) for p in paths if p is not None)

    def cleanup(self):
        for p in self.paths:
            if p.is_file():
                p.unlink()
            elif p.is_dir() and not any(p.iterdir()):
                p.rmdir()


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def _load_table(data: str, schema: str | None, flag="--data"):
    p = _require_file(data, flag)
    sch = load_schema(_require_file(schema, "--schema")) if schema else None
    return load_csv(p, sch)


# ---------------------------------------------------------------------------
# Commands


def cmd_prepare(args, out: Outputs):
    inp = _require_file(args.input, "--input")
    tokens = DEFAULT_MISSING_TOKENS if args.missing_tokens is None else set(args.missing_tokens.split(","))
    schema = load_schema(_require_file(args.schema, "--schema")) if args.schema else None
    names = None
    if args.no_header:
        names = ADULT_COLUMNS if args.recipe == "census" else None
        if names is None:
            raise UsageError("--no-header is only supported with --recipe census")
    raw = load_csv(inp, schema, tokens, names=names)
    if args.recipe == "olympic":
        table = prepare_olympic(raw)
    elif args.recipe == "census":
        table = prepare_census(raw)
    else:
        table = raw
    out.add(args.output, args.schema_out)
    write_csv(table, args.output)
    if args.schema_out:
        save_schema(table.schema, args.schema_out)
    print(f"{table.n_rows} rows, {len(table.schema)} columns")


def _gan_config(args, file_cfg) -> GanConfig:
    return GanConfig(**resolve(args, file_cfg, GAN_DEFAULTS))


def cmd_train(args, out: Outputs):
    file_cfg = load_run_config(args.config)
    table = _load_table(args.data, args.schema)
    config = _gan_config(args, file_cfg)
    sched_cfg = resolve(args, file_cfg, SCHEDULE_DEFAULTS)
    n = sched_cfg["synthetic_count"]
    n = table.n_rows if n is None else int(n)
    schedule = build_schedule(sched_cfg["schedule"], n, config.epochs, sched_cfg["first_item"],
                              sched_cfg["total"], sched_cfg["ratio_override"])
    effective = {"gan": config.to_json(), "schedule": schedule.to_json()}
    print(json.dumps(effective, sort_keys=True))
    result = train_with_generation(table, config, schedule)
    out.add(args.out_model, args.out_synth, args.log)
    save_checkpoint(result.checkpoint, args.out_model)
    write_csv(result.synthetic, args.out_synth)
    if args.log:
        write_epoch_log(result.log, args.log)
    print(f"wrote {result.synthetic.n_rows} synthetic rows to {args.out_synth}")


def cmd_generate(args, out: Outputs):
    ck = load_checkpoint(_require_file(args.model, "--model"))
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    table = sample(ck, args.count, seed=args.seed, sample_categories=args.sample_categories)
    out.add(args.out)
    write_csv(table, args.out)
    print(f"wrote {table.n_rows} rows to {args.out}")


def cmd_evaluate(args, out: Outputs):
    file_cfg = load_run_config(args.config)
    ev = resolve(args, file_cfg, EVAL_DEFAULTS)
    schema = load_schema(_require_file(args.schema, "--schema"))
    real = load_csv(_require_file(args.real, "--real"), schema)
    synth = load_csv(_require_file(args.synth, "--synth"), schema)
    report = evaluate_all(real, synth, ev["small_threshold"], ev["bins"])
    out.add(args.report)
    report.save(args.report, extra={"config": ev})
    if args.charts:
        charts_dir = Path(args.charts)
        existed = charts_dir.exists()
        written = charts.write_charts(real, synth, report, charts_dir)
        out.add(*written)
        if not existed:
            out.add(charts_dir)
    a = report.averages
    print(f"shape {a['shape']:.4f}  pair trend {a['pair_trend']:.4f}  overall {a['overall']:.4f}")


def _parse_list(text: str, cast, flag):
    try:
        items = [cast(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from exc
    if not items:
        raise UsageError(f"{flag} must not be empty")
    return items


def cmd_tune(args, out: Outputs):
    file_cfg = load_run_config(args.config)
    table = _load_table(args.data, args.schema)
    config = _gan_config(args, file_cfg)
    sched_cfg = resolve(args, file_cfg, SCHEDULE_DEFAULTS)
    ev = resolve(args, file_cfg, EVAL_DEFAULTS)
    epochs = _parse_list(args.epoch_grid, int, "--epoch-grid")
    items = _parse_list(args.first_item_grid, float, "--first-item-grid")
    n = sched_cfg["synthetic_count"]

    def evaluator(real, synth):
        return evaluate_all(real, synth, ev["small_threshold"], ev["bins"]).overall

    result = tune_schedule(table, config, epochs, items, evaluator, sched_cfg["total"],
                           None if n is None else int(n))
    report = result.to_json()
    report["config"] = {"gan": config.to_json(), "total": sched_cfg["total"],
                        "synthetic_count": n, "evaluation": ev}
    out.add(args.report)
    _dump_json(report, args.report)
    print(f"best: epochs={result.best_epochs} first_item={result.best_first_item} "
          f"score={result.best_score:.4f}")


# ---------------------------------------------------------------------------
# Parser


def _help(text, default):
    return f"{text} (default: {default})"


def _add_gan_flags(p):
    g = p.add_argument_group("GAN settings")
    for name, default in GAN_DEFAULTS.items():
        kind = type(default)
        flag = "--" + name.replace("_", "-")
        g.add_argument(flag, dest=name, type=kind, default=None, help=_help(name, default))


def _add_eval_flags(p):
    p.add_argument("--small-threshold", type=int, default=None,
                   help=_help("max categories of a small categorical column", DEFAULT_SMALL_THRESHOLD))
    p.add_argument("--bins", type=int, default=None,
                   help=_help("bins for continuous members of mixed pairs", DEFAULT_BINS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dggan", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="clean a raw CSV with a dataset recipe")
    p.add_argument("--input", required=True, help="raw CSV file")
    p.add_argument("--recipe", choices=RECIPES, default="generic", help=_help("dataset recipe", "generic"))
    p.add_argument("--output", required=True, help="prepared CSV file")
    p.add_argument("--schema-out", default=None, help=_help("schema JSON sidecar to write", None))
    p.add_argument("--schema", default=None, help=_help("schema JSON for the raw input", "inferred"))
    p.add_argument("--missing-tokens", default=None,
                   help=_help("comma-separated missing-value tokens", "'',NA,?"))
    p.add_argument("--no-header", action="store_true",
                   help="input has no header row (census: use the standard adult column names)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train the GAN and write synthetic rows")
    p.add_argument("--data", required=True, help="prepared CSV file")
    p.add_argument("--schema", default=None, help=_help("schema JSON", "inferred"))
    p.add_argument("--config", default=None, help=_help("run config JSON", None))
    p.add_argument("--schedule", choices=MODES, default=None,
                   help=_help("generation schedule", SCHEDULE_DEFAULTS["schedule"]))
    p.add_argument("--first-item", type=float, default=None,
                   help=_help("first geometric percentage", SCHEDULE_DEFAULTS["first_item"]))
    p.add_argument("--total", type=float, default=None,
                   help=_help("total synthetic percentage", SCHEDULE_DEFAULTS["total"]))
    p.add_argument("--ratio-override", type=float, default=None,
                   help=_help("use this common ratio instead of solving for it", None))
    p.add_argument("--synthetic-count", type=int, default=None,
                   help=_help("synthetic rows to generate", "number of real rows"))
    p.add_argument("--out-model", required=True, help="checkpoint file to write")
    p.add_argument("--out-synth", required=True, help="synthetic CSV to write")
    p.add_argument("--log", default=None, help=_help("JSON-lines epoch log", None))
    _add_gan_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample rows from a checkpoint")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--count", type=int, required=True, help="rows to generate")
    p.add_argument("--out", required=True, help="CSV file to write")
    p.add_argument("--seed", type=int, default=None,
                   help=_help("sampling seed", "resume the checkpoint's RNG state"))
    p.add_argument("--sample-categories", action="store_true",
                   help=_help("sample categories from the softmax instead of argmax", False))
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score synthetic data against real data")
    p.add_argument("--real", required=True, help="real CSV file")
    p.add_argument("--synth", required=True, help="synthetic CSV file")
    p.add_argument("--schema", required=True, help="schema JSON shared by both files")
    p.add_argument("--report", required=True, help="report JSON to write")
    p.add_argument("--charts", default=None, help=_help("directory for chart CSV/SVG files", None))
    p.add_argument("--config", default=None, help=_help("run config JSON", None))
    _add_eval_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="grid-search geometric schedule parameters")
    p.add_argument("--data", required=True, help="prepared CSV file")
    p.add_argument("--schema", default=None, help=_help("schema JSON", "inferred"))
    p.add_argument("--config", default=None, help=_help("run config JSON", None))
    p.add_argument("--epoch-grid", default="50,100,200", help=_help("comma-separated epoch counts", "50,100,200"))
    p.add_argument("--first-item-grid", default="0.1,0.2,0.3,0.4",
                   help=_help("comma-separated first-item percentages", "0.1,0.2,0.3,0.4"))
    p.add_argument("--total", type=float, default=None,
                   help=_help("total synthetic percentage", SCHEDULE_DEFAULTS["total"]))
    p.add_argument("--synthetic-count", type=int, default=None,
                   help=_help("synthetic rows per cell", "number of real rows"))
    p.add_argument("--report", required=True, help="report JSON to write")
    _add_eval_flags(p)
    _add_gan_flags(p)
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Outputs()
    try:
        args.func(args, out)
    except (UsageError, ConfigError) as exc:
        out.cleanup()
        print(f"dggan {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DgganError, OSError, ValueError, KeyError) as exc:
        out.cleanup()
        print(f"dggan {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        out.cleanup()
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
