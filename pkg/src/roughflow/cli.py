"""Command line entry point: ``roughflow run|validate|list-examples``.

Exit status: 0 on success, 2 for an invalid config, 3 when the computation
fails numerically (flow blow-up, covariance factorization).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

from . import config as cfgmod
from .errors import DomainTooSmallError, NumericalFailure
from .parallel import resolve_threads

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("roughflow")


def _examples_dir():
    return resources.files("roughflow") / "examples"


def example_names():
    return sorted(p.name for p in _examples_dir().iterdir() if p.name.endswith(".json"))


def resolve_config_path(arg) -> Path:
    """A path on disk, else a packaged example matched by file name (with or without .json)."""
    path = Path(arg)
    if path.exists():
        return path
    name = path.name if path.suffix == ".json" else path.name + ".json"
    packaged = _examples_dir() / name
    if packaged.is_file():
        return Path(str(packaged))
    return path


def _load_valid(arg):
    path = resolve_config_path(arg)
    return path, cfgmod.validate(cfgmod.load(path))


def _json_default(obj):
    # numpy scalars and arrays
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_report(out_dir: Path, report: dict):
    text = json.dumps(report, sort_keys=True, indent=2, default=_json_default, allow_nan=True)
    (out_dir / "report.json").write_text(text + "\n")


def cmd_run(args):
    from .experiments import run_experiment

    try:
        path, config = _load_valid(args.config)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out_dir = Path(args.output or config.get("output") or Path("roughflow_runs") / path.stem)
    try:
        threads = resolve_threads(args.threads)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    log.info("running %s (%s) with %d thread(s) into %s", path, config["kind"], threads, out_dir)
    start = time.perf_counter()
    try:
        results = run_experiment(config, out_dir, threads=threads)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainTooSmallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = {
        "config_hash": cfgmod.config_hash(config),
        "kind": config["kind"],
        "results": results,
        "wall_time": time.perf_counter() - start,
    }
    write_report(out_dir, report)
    print(out_dir / "report.json")
    return EXIT_OK


def cmd_validate(args):
    try:
        _, config = _load_valid(args.config)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"ok: {config['kind']} config, hash {cfgmod.config_hash(config)[:12]}")
    return EXIT_OK


def cmd_list_examples(args):
    for name in example_names():
        data = json.loads((_examples_dir() / name).read_text())
        print(f"{name:<28} {data['kind']:<20} {data.get('description', '')}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="roughflow", description="Rough transport experiment runner")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="config file, or the name of a packaged example")
    run.add_argument("--output", "-o", help="output directory (overrides the config)")
    run.add_argument("--threads", type=int, help="worker threads (default: ROUGHFLOW_THREADS or all cores)")
    run.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)

    lst = sub.add_parser("list-examples", help="list the packaged example configs")
    lst.set_defaults(func=cmd_list_examples)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
