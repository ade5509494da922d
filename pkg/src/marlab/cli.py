"""Command-line entry point: ``marlab <subcommand> --config FILE [--seed N] [--out DIR]``.

Exit status is 0 when every verdict passes, 1 when some verdict fails and
2 when the configuration is invalid.
"""

import argparse
import sys

from .harness import ConfigError, load_config, run

SUBCOMMANDS = {
    "verify-inequality": "inequality",
    "slln": "slln",
    "check-drift": "drift",
    "poisson": "poisson",
    "ergodicity": "ergodicity",
    "kernel-regression": "regression",
}


def _csv_floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _schedule(text):
    kind, _, val = text.partition(":")
    if kind == "power":
        return {"exponent": float(val), "values": None}
    if kind == "values":
        return {"exponent": None, "values": _csv_floats(val)}
    raise argparse.ArgumentTypeError("schedule must be 'power:<exponent>' or 'values:<c1,c2,...>'")


def build_parser():
    parser = argparse.ArgumentParser(prog="marlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML/JSON experiment file")
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--out", help="output directory (else $MARLAB_OUT, else config)")
        if name == "verify-inequality":
            sp.add_argument("--generator")
            sp.add_argument("--check", choices=("thm2", "cbm", "burkholder"))
            sp.add_argument("--p", type=float)
            sp.add_argument("--schedule", type=_schedule,
                            help="power:<exponent> or values:<c1,c2,...>")
            sp.add_argument("--n", type=int)
            sp.add_argument("--N", type=int)
            sp.add_argument("--lambda-grid", type=_csv_floats, dest="lambda_grid")
            sp.add_argument("--mode", choices=("exact", "mc"))
            sp.add_argument("--replicates", type=int)
            sp.add_argument("--output", help="CSV file name")
    return parser


_FLAG_KEYS = ("generator", "check", "p", "schedule", "n", "N", "lambda_grid", "mode",
              "replicates")


def main(argv=None):
    args = build_parser().parse_args(argv)
    kind = SUBCOMMANDS[args.command]
    try:
        raw = load_config(args.config) if args.config else {}
        raw = dict(raw or {})
        raw.setdefault("experiment", kind)
        block = dict(raw.get(kind) or {})
        for key in _FLAG_KEYS:
            val = getattr(args, key, None)
            if val is not None:
                block[key] = val
        raw[kind] = block
        if getattr(args, "output", None):
            raw["output"] = dict(raw.get("output") or {}, csv=args.output)
        report = run(raw, kind=kind, seed=args.seed, out=args.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"marlab: error: {exc}", file=sys.stderr)
        return 2
    status = "PASS" if report.passed else "FAIL"
    failed = [k for k, v in report.verdicts.items() if not v]
    print(f"{status} {args.command}: {report.csv_path}" + (f" (failed: {', '.join(failed)})"
                                                            if failed else ""))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
