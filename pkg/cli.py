"""
Command-line interface.

Subcommands: ingest, synth, stats, experiment, sweep-alpha, bench, serve.
Configuration precedence is model defaults < --config file < flags.
Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.benchmark import PROTOCOLS, bench_protocols
from core.config import load_model, settings
from core.errors import CollabError, ConfigurationError, DataError
from core.events import FormatDescriptor, ingest, parse_log, write_csv
from core.experiment import (
    STATISTICS,
    ExperimentConfig,
    export_stats,
    run_experiment,
    sweep_alpha,
    write_report,
    write_table,
)
from core.synth import SynthConfig, describe, generate

logger = logging.getLogger("cli")


def _csv_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _write_json(model, path: Path) -> None:
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")


def cmd_ingest(args: argparse.Namespace) -> int:
    overrides = {
        "columns": _csv_list(args.columns) if args.columns else None,
        "timestamp": args.timestamp,
        "delimiter": args.delimiter,
        "header": args.header,
    }
    descriptor = load_model(FormatDescriptor, args.format, overrides)
    dataset, parse_report, clean_report, filter_report = ingest(args.input, descriptor)

    output = Path(args.output_dir)
    output.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, output / "dataset.csv")
    _write_json(parse_report, output / "parse_report.json")
    _write_json(clean_report, output / "clean_report.json")
    _write_json(filter_report, output / "filter_report.json")
    logger.info(f"Ingested {len(dataset)} events from {len(dataset.victims)} contributors into {output}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    overrides = {
        "n_victims": args.n_victims,
        "n_attackers": args.n_attackers,
        "n_days": args.n_days,
        "rng_seed": args.seed,
    }
    config = load_model(SynthConfig, args.config, overrides)
    dataset = generate(config)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, output)
    if args.report:
        _write_json(describe(dataset), Path(args.report))
    logger.info(f"Wrote {len(dataset)} synthetic events to {output}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    dataset, _ = parse_log(args.dataset)
    export_stats(dataset, args.which or ["all"], args.output_dir)
    return 0


def _experiment_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "dataset_path": args.dataset,
        "sample_size": args.sample_size,
        "iterations": args.iterations,
        "alpha": args.alpha,
        "t_train": args.t_train,
        "t_test": args.t_test,
        "threshold": args.threshold,
        "budget": args.budget,
        "metrics": args.metrics,
        "strategies": args.strategies,
        "pair_fraction": args.pair_fraction,
        "first_day": args.first_day,
        "last_day": args.last_day,
        "mode": args.mode,
        "window_policy": args.window_policy,
        "repartner_every": args.repartner_every,
        "offender_list_size": args.offender_list_size,
        "rng_seed": args.seed,
        "output_dir": args.output_dir,
        "run_id": args.run_id,
    }


def cmd_experiment(args: argparse.Namespace) -> int:
    config = load_model(ExperimentConfig, args.config, _experiment_overrides(args))
    report = run_experiment(config)
    run_dir = write_report(report)
    print(run_dir)
    return 0


def cmd_sweep_alpha(args: argparse.Namespace) -> int:
    config = load_model(ExperimentConfig, args.config, _experiment_overrides(args))
    try:
        alphas = [float(a) for a in _csv_list(args.alphas)]
    except ValueError as e:
        raise ConfigurationError(f"Invalid alpha list {args.alphas!r}: {e}") from e
    frame = sweep_alpha(config, alphas)
    run_dir = Path(config.output_dir or settings.OUTPUT_DIR) / config.resolved_run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    write_table(frame, run_dir / "alpha_sweep.csv")
    print(run_dir / "alpha_sweep.csv")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        sizes = [int(s) for s in _csv_list(args.sizes)]
    except ValueError as e:
        raise ConfigurationError(f"Invalid size list {args.sizes!r}: {e}") from e
    frame = bench_protocols(sizes, args.repetitions, _csv_list(args.protocols), args.sample_size, args.seed)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        write_table(frame, args.output)
    else:
        print(frame.to_string(index=False))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("app:app", host=args.host or settings.HOST, port=args.port or settings.PORT, reload=False)
    return 0


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--dataset", help="raw log to ingest; a synthetic log is generated when omitted")
    parser.add_argument("--sample-size", type=int)
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--t-train", type=int)
    parser.add_argument("--t-test", type=int)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--budget", type=int)
    parser.add_argument("--metrics", help="comma-separated: intersection_size,jaccard,pearson,cosine")
    parser.add_argument("--strategies", help="comma-separated: intersection,intersection_with_data,union_with_data")
    parser.add_argument("--pair-fraction", type=float)
    parser.add_argument("--first-day", type=int)
    parser.add_argument("--last-day", type=int)
    parser.add_argument("--mode", choices=["plaintext", "private"])
    parser.add_argument("--window-policy", choices=["history_before", "train_window"])
    parser.add_argument("--repartner-every", type=int)
    parser.add_argument("--offender-list-size", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-dir")
    parser.add_argument("--run-id")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collab-blacklist", description="Collaborative predictive blacklisting simulator")
    parser.add_argument("--log-level", default=None, help="overrides COLLAB_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, clean and filter a raw log")
    p.add_argument("input")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--format", help="key=value format descriptor file")
    p.add_argument("--columns", help="column order, e.g. contributor_id,source_ip,target_port,timestamp")
    p.add_argument("--timestamp", choices=["datetime", "epoch"])
    p.add_argument("--delimiter")
    header = p.add_mutually_exclusive_group()
    header.add_argument("--header", dest="header", action="store_true", default=None)
    header.add_argument("--no-header", dest="header", action="store_false")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic attack log")
    p.add_argument("--config", help="key=value generator config file")
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="write a fidelity report as JSON")
    p.add_argument("--n-victims", type=int)
    p.add_argument("--n-attackers", type=int)
    p.add_argument("--n-days", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("stats", help="export dataset statistics as CSV")
    p.add_argument("dataset")
    p.add_argument("--which", nargs="+", choices=["all", *STATISTICS])
    p.add_argument("--output-dir", required=True)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("experiment", help="run the collaboration experiment")
    _add_experiment_flags(p)
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("sweep-alpha", help="baseline true positives per EWMA alpha")
    _add_experiment_flags(p)
    p.add_argument("--alphas", required=True, help="comma-separated, e.g. 0.1,0.5,0.9")
    p.set_defaults(handler=cmd_sweep_alpha)

    p = sub.add_parser("bench", help="time the private protocols")
    p.add_argument("--sizes", default="200")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--protocols", default=",".join(PROTOCOLS))
    p.add_argument("--sample-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return args.handler(args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return e.exit_code
    except DataError as e:
        logger.error(f"Data error: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return DataError.exit_code
    except CollabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Internal error: {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
