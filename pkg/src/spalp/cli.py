"""Command line entry point: ``spalp run | sweep | summarize``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    aggregate,
    emit_csv,
    load_config,
    read_metrics,
    run_all,
    sweep,
    write_outputs,
)

log = logging.getLogger("spalp")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spalp", description="Curriculum teachers on the hypercube toy environment.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every configured teacher on every seed")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, action="append", dest="seeds", help="override run.seeds (repeatable)")
    run.add_argument("--out", help="output directory (default: run.out_dir)")

    sw = sub.add_parser("sweep", help="one sub-run per value of a config key")
    sw.add_argument("--config", required=True)
    sw.add_argument("--param", required=True, help="dotted key, e.g. teacher.r_b")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--out", help="output directory (default: run.out_dir)")

    summ = sub.add_parser("summarize", help="aggregate every metrics.csv below a directory")
    summ.add_argument("--in", dest="in_dir", required=True)
    summ.add_argument("--out", required=True)
    return parser


def _glue_values(argv):
    # "--values -0.1,-0.2" would otherwise be read as an option
    out = list(argv)
    for i, arg in enumerate(out[:-1]):
        if arg == "--values":
            out[i:i + 2] = [f"--values={out[i + 1]}"]
            break
    return out


def _out_dir(args, config) -> Path:
    out = args.out or config.run.out_dir
    if not out:
        raise ConfigError("run.out_dir", "no output directory given (use --out)")
    return Path(out)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = _build_parser().parse_args(_glue_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            config = load_config(args.config)
            if args.seeds:
                config = dataclasses.replace(config, run=dataclasses.replace(config.run, seeds=tuple(args.seeds)))
            out = _out_dir(args, config)
            write_outputs(config, run_all(config), out)
            print(f"wrote {out}/metrics.csv, summary.csv, trace.csv, grid.csv")
        elif args.command == "sweep":
            config = load_config(args.config)
            out = _out_dir(args, config)
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            points = sweep(config, args.param, values, out)
            for teacher in sorted({p.teacher.split("[")[0] for p in points}):
                mine = [p for p in points if p.teacher.split("[")[0] == teacher]
                by_final = max(mine, key=lambda p: p.final_mean)
                by_best = max(mine, key=lambda p: p.best_mean)
                print(f"{teacher}: best final {by_final.final_mean:.4f} at {args.param}={by_final.value}; "
                      f"best ever {by_best.best_mean:.4f} at {args.param}={by_best.value}")
            print(f"wrote {out}/sweep.csv")
        else:
            files = sorted(Path(args.in_dir).rglob("metrics.csv"))
            if not files:
                raise FileNotFoundError(f"no metrics.csv below {args.in_dir}")
            rows = [row for f in files for row in read_metrics(f)]
            emit_csv(aggregate(rows), args.out, summary=True)
            print(f"wrote {args.out}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
