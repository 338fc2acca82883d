"""``ptrlab`` command line: run named scenarios and emit verification reports.

Exit status is 0 when every check passes, 1 when any check fails and 2 for
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .scenarios import SCENARIOS, ConfigError, config_from_dict, emit_report, parse_config, run_scenario

SEED_ENV = "PTRLAB_SEED"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptrlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-scenarios", help="print the available scenario names")

    run = sub.add_parser("run", help="run a scenario from a JSON config or from flags")
    run.add_argument("config", nargs="?", help="path to a JSON scenario config")
    run.add_argument("--scenario", choices=sorted(SCENARIOS))
    run.add_argument("--d", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--shots", type=int)
    run.add_argument("--gamma", choices=["ones", "identity"], dest="gamma_spec")
    run.add_argument("--counter-dim", choices=["d", "d_plus_1"], dest="counter_dim")
    run.add_argument("--format", choices=["json", "table"], default="json")
    run.add_argument("--output", help="write the report here instead of stdout")
    run.add_argument("--timing", action="store_true", help="include wall time in the report")
    return parser


def _load_config(args):
    overrides = {k: getattr(args, k) for k in ("scenario", "d", "seed", "shots", "gamma_spec", "counter_dim")
                 if getattr(args, k) is not None}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        doc = {k: v for k, v in dataclasses.asdict(cfg).items() if v is not None}
        doc.update(overrides)
    else:
        if "scenario" not in overrides:
            raise ConfigError("scenario: give a config path or --scenario")
        doc = overrides
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            doc["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: not an integer: {env_seed!r}") from None
    return config_from_dict(doc)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        for name, (_, anchor, blurb) in SCENARIOS.items():
            print(f"{name:22s} {blurb}")
        return 0
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"ptrlab: {exc}", file=sys.stderr)
        return 2
    report = run_scenario(cfg)
    path = args.output or cfg.output_path
    try:
        data = emit_report(report, args.format, path, args.timing)
    except OSError as exc:
        print(f"ptrlab: cannot write report: {exc}", file=sys.stderr)
        return 2
    if path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
