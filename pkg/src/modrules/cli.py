"""Command-line entry point.

Verbs: generate, noise, mine, score, evaluate, count-dags. Flags can be
preloaded from a TOML file via --config; explicit flags win. All output
files are JSON or CSV. Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .codec import UNIVERSAL_CODE_CONSTANT, CodecConfig
from .evaluate import metrics, per_rule_generalization
from .logs import EventLog, LogError, import_xes, parse_csv, parse_schema_sidecar, serialize_csv
from .rules import RuleError, count_dags, model_from_json, model_to_json, pretty_model
from .scoring import ScoringError, total_score
from .search import SearchConfig, mine
from .synth import SynthConfig, SynthError, add_swap_noise, generate_log, sample_ground_truth


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="modrules", description=__doc__)
    parser.add_argument("--version", action="store_true", help="print codec constants and exit")
    parser.add_argument("--config", help="TOML file with default flag values")
    sub = parser.add_subparsers(dest="verb")

    def add_io_flags(p, with_schema=True):
        p.add_argument("--bins", type=int, default=50, help="histogram bins for numericals")
        p.add_argument("--precision", type=int, default=3, help="significant digits for constants")
        p.add_argument("--epsilon", type=float, default=0.5, help="smoothing of the hit/miss code")
        if with_schema:
            p.add_argument("--schema", help="JSON sidecar declaring variable kinds")

    g = sub.add_parser("generate", help="sample a ground-truth model and a log from it")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rules", type=int, default=5)
    g.add_argument("--cat", type=int, default=2)
    g.add_argument("--num", type=int, default=2)
    g.add_argument("--events", type=int, default=2000)
    g.add_argument("--ops", default="=,<=,>=", help="comma-separated condition operators")
    g.add_argument("--noise", type=float, default=0.0, help="swap-noise fraction")
    g.add_argument("--trace-min", type=int, default=5)
    g.add_argument("--trace-max", type=int, default=15)
    g.add_argument("--target-kind", default="mixed", choices=["mixed", "categorical", "numerical"])
    g.add_argument("--out", required=True, help="output log CSV")
    g.add_argument("--out-gt", required=True, help="output ground-truth model JSON")

    n = sub.add_parser("noise", help="apply swap noise to a log")
    n.add_argument("--input", required=True)
    n.add_argument("--q", type=float, required=True)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out", required=True)
    add_io_flags(n)

    m = sub.add_parser("mine", help="search for the best-compressing rule model")
    m.add_argument("--input", required=True, help="log file (.csv or .xes)")
    m.add_argument("--nc", type=int, default=50, help="conditions kept per operator")
    m.add_argument("--nu", type=int, default=1, help="updates kept per kind and variable")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--max-iterations", type=int, default=None)
    m.add_argument("--no-pruning", action="store_true", help="score every candidate")
    m.add_argument("--output", required=True, help="model JSON path")
    m.add_argument("--trace-scores", help="CSV with the score after each accepted rule")
    add_io_flags(m)

    s = sub.add_parser("score", help="print the score breakdown of a model on a log")
    s.add_argument("--input", required=True)
    s.add_argument("--model", required=True)
    add_io_flags(s)

    e = sub.add_parser("evaluate", help="prediction metrics of a model on a test log")
    e.add_argument("--model", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--train", help="training log for statistics and per-rule comparison")
    e.add_argument("--report", required=True, help="output report JSON")
    add_io_flags(e)

    d = sub.add_parser("count-dags", help="count labeled DAGs with bounded edges")
    d.add_argument("--nodes", type=int, required=True)
    d.add_argument("--edges", type=int, required=True)
    return parser


def _apply_config_file(parser: _Parser, argv: list[str]) -> list[str]:
    """Install TOML values as parser defaults so explicit flags win."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    path = Path(argv[at + 1])
    try:
        doc = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    flat = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            for inner_key, inner in value.items():
                flat[inner_key.replace("-", "_")] = inner
        else:
            flat[key.replace("-", "_")] = value
    parser.set_defaults(**flat)
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sub in action.choices.values():
            recognized = {a.dest for a in sub._actions}  # noqa: SLF001
            sub.set_defaults(**{k: v for k, v in flat.items() if k in recognized})
    return argv


def _read_log(path: str, args) -> EventLog:
    text = Path(path).read_text()
    kinds = None
    if getattr(args, "schema", None):
        kinds = parse_schema_sidecar(Path(args.schema).read_text())
    if path.lower().endswith(".xes") or text.lstrip().startswith("<"):
        return import_xes(text, bins=args.bins)
    return parse_csv(text, kinds, bins=args.bins)


def _codec_config(args) -> CodecConfig:
    return CodecConfig(precision=args.precision, epsilon=args.epsilon)


def _cmd_generate(args) -> int:
    config = SynthConfig(
        seed=args.seed,
        n_rules=args.rules,
        n_cat=args.cat,
        n_num=args.num,
        n_events=args.events,
        condition_ops=tuple(op.strip() for op in args.ops.split(",") if op.strip()),
        trace_len=(args.trace_min, args.trace_max),
        target_kind=args.target_kind,
    )
    ground_truth = sample_ground_truth(config)
    log = generate_log(ground_truth, config)
    if args.noise > 0:
        log = add_swap_noise(log, args.noise, args.seed)
    Path(args.out).write_text(serialize_csv(log))
    Path(args.out_gt).write_text(model_to_json(ground_truth))
    print(
        json.dumps(
            {
                "traces": log.trace_count,
                "events": log.event_count,
                "rules": len(ground_truth),
                "out": args.out,
                "out_gt": args.out_gt,
            }
        )
    )
    return 0


def _cmd_noise(args) -> int:
    log = _read_log(args.input, args)
    noisy = add_swap_noise(log, args.q, args.seed)
    Path(args.out).write_text(serialize_csv(noisy))
    print(json.dumps({"events": noisy.event_count, "out": args.out}))
    return 0


def _cmd_mine(args) -> int:
    log = _read_log(args.input, args)
    config = SearchConfig(
        n_conditions=args.nc,
        n_updates=args.nu,
        max_iterations=args.max_iterations,
        seed=args.seed,
        workers=args.workers,
        use_estimate_pruning=not args.no_pruning,
        codec=_codec_config(args),
    )
    result = mine(log, config)
    Path(args.output).write_text(model_to_json(result.model))
    if args.trace_scores:
        with open(args.trace_scores, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["iteration", "variable", "rule", "total_bits"])
            for row in result.iterations:
                writer.writerow([row.iteration, row.variable, row.rule, repr(row.total_bits)])
    print(
        json.dumps(
            {
                "rules": len(result.model),
                "score": result.breakdown.as_dict(),
                "runtime_seconds": result.runtime_seconds,
                "output": args.output,
            }
        )
    )
    print(pretty_model(result.model), file=sys.stderr)
    return 0


def _cmd_score(args) -> int:
    log = _read_log(args.input, args)
    model = model_from_json(Path(args.model).read_text(), args.precision)
    breakdown = total_score(log, model, _codec_config(args))
    print(json.dumps(breakdown.as_dict()))
    return 0


def _cmd_evaluate(args) -> int:
    test = _read_log(args.test, args)
    model = model_from_json(Path(args.model).read_text(), args.precision)
    train = None
    if args.train:
        train = parse_csv(Path(args.train).read_text(), bins=args.bins)
    report = metrics(model, test, train).as_dict()
    if train is not None:
        report["per_rule"] = per_rule_generalization(model, train, test)
    Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report))
    return 0


def _cmd_count_dags(args) -> int:
    print(count_dags(args.nodes, args.edges))
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "noise": _cmd_noise,
    "mine": _cmd_mine,
    "score": _cmd_score,
    "evaluate": _cmd_evaluate,
    "count-dags": _cmd_count_dags,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if args.version:
            print(
                json.dumps(
                    {
                        "version": __version__,
                        "universal_code_constant": UNIVERSAL_CODE_CONSTANT,
                        "epsilon": 0.5,
                        "precision": 3,
                        "bins": 50,
                        "n_conditions": 50,
                        "n_updates": 1,
                    }
                )
            )
            return 0
        if args.verb is None:
            raise UsageError("missing verb (try --help)")
        return _COMMANDS[args.verb](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (LogError, RuleError, ScoringError, SynthError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
