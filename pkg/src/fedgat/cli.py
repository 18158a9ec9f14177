"""Command-line entry point.

    fedgat run <config.json>
    fedgat sweep <spec.json> <config.json> [--jobs N]
    fedgat validate <config.json>
    fedgat import-raw <tree_dir> <label_file> <out.jsonl> [--source-text FILE] [--source NAME]

Exit status: 0 success, 1 runtime failure, 2 invalid configuration,
3 dataset error. ``FEDGAT_SEED`` and ``FEDGAT_OUTPUT_DIR`` override the
config's seed and output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback

from .data import DatasetError, load_raw_dataset, write_jsonl
from .data.split import PartitionError
from .harness.config import ConfigError, load_config, parse_json_text, validate_config
from .harness.runner import SweepSpec, run_experiment, run_sweep

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3

log = logging.getLogger("fedgat")


def _config_errors(errors: list[str]) -> int:
    print("invalid configuration:", file=sys.stderr)
    for e in errors:
        print(f"  {e}", file=sys.stderr)
    return EXIT_CONFIG


def _guard(fn):
    try:
        return fn()
    except ConfigError as exc:
        return _config_errors(exc.errors)
    except (DatasetError, PartitionError, FileNotFoundError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


def cmd_run(args) -> int:
    def go():
        cfg = load_config(args.config)
        result = run_experiment(cfg)
        print((result.out_dir / "metrics.txt").read_text(encoding="utf-8"), end="")
        print(f"artifacts written to {result.out_dir}")
        return EXIT_OK
    return _guard(go)


def cmd_sweep(args) -> int:
    def go():
        with open(args.spec, encoding="utf-8") as fh:
            spec = SweepSpec.from_dict(parse_json_text(fh.read(), args.spec))
        base = load_config(args.config)
        summary = run_sweep(spec, base, jobs=args.jobs)
        print(f"{summary['cells']} cells, {len(summary['failed'])} failed; results in {base.output_dir}")
        return EXIT_RUNTIME if summary["failed"] else EXIT_OK
    return _guard(go)


def cmd_validate(args) -> int:
    cfg, errors = validate_config(args.config)
    if errors:
        return _config_errors(errors)
    print(cfg.dumps(), end="")
    return EXIT_OK


def cmd_import_raw(args) -> int:
    def go():
        events = load_raw_dataset(args.tree_dir, args.label_file, args.source_text, source=args.source or "")
        n = write_jsonl(events, args.out)
        print(f"wrote {n} events to {args.out}")
        return EXIT_OK
    return _guard(go)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedgat", description="Federated Bi-GAT rumor detection simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("spec")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a config file and print it with defaults resolved")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("import-raw", help="convert the Twitter15/16 layout to JSONL")
    p.add_argument("tree_dir")
    p.add_argument("label_file")
    p.add_argument("out")
    p.add_argument("--source-text", default=None, help="source_tweets.txt (default: next to the label file)")
    p.add_argument("--source", default=None, help="source name stored on every event")
    p.set_defaults(func=cmd_import_raw)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
