"""Command-line entry point: ``nhevec [global flags] <kind> [overrides]``."""

import argparse
import json
import sys

from .ensemble import FAMILIES
from .errors import NhevecError
from .harness import KINDS, ExperimentConfig, default_config, emit_report, run_experiment


def _complex(s):
    return complex(s.replace(" ", "").replace("i", "j"))


def build_parser():
    p = argparse.ArgumentParser(prog="nhevec", description=__doc__)
    p.add_argument("--config", help="JSON experiment configuration (overrides the kind defaults)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="output directory")
    p.add_argument("--print-defaults", action="store_true",
                   help="print the resolved configuration and exit")
    sub = p.add_subparsers(dest="kind")
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--N", type=int, nargs="+", dest="N_list")
        s.add_argument("--n-samples", type=int)
        s.add_argument("--z", type=_complex, nargs="+", help="target points, e.g. 0.3+0.1j")
        s.add_argument("--side", choices=("right", "left"), nargs="+")
        s.add_argument("--weights", type=float, nargs="+")
        s.add_argument("--family", choices=FAMILIES)
        s.add_argument("--t", type=float, help="fixed Gaussian-divisible time")
        s.add_argument("--param", action="append", default=[], metavar="KEY=JSON",
                       help="set params[KEY] to a JSON value")
    return p


def resolve_config(args):
    if args.config:
        with open(args.config) as fh:
            d = json.load(fh)
        if args.kind:
            d["kind"] = args.kind
        base = default_config(d["kind"]).to_dict()
        base.update(d)
        d = base
    else:
        d = default_config(args.kind).to_dict()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        d["master_seed"] = args.seed
    if args.out:
        d["out_dir"] = args.out
    if getattr(args, "N_list", None):
        d["N_list"] = args.N_list
    if getattr(args, "n_samples", None) is not None:
        d["n_samples"] = args.n_samples
    if getattr(args, "family", None):
        d["ensemble"]["family"] = args.family
    if getattr(args, "t", None) is not None:
        d["t_rule"] = {"mode": "fixed", "value": args.t}
    if getattr(args, "z", None):
        old = d["targets"]
        d["targets"] = [dict(old[min(k, len(old) - 1)], z=[z.real, z.imag]) for k, z in enumerate(args.z)]
    if getattr(args, "side", None):
        for tg, s in zip(d["targets"], args.side):
            tg["side"] = s
    if getattr(args, "weights", None):
        for tg in d["targets"]:
            tg["weights"] = args.weights
    for kv in getattr(args, "param", []):
        key, _, val = kv.partition("=")
        d["params"][key] = json.loads(val)
    return ExperimentConfig.from_dict(d)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.kind is None and not args.config:
        if args.print_defaults:
            print(json.dumps({k: default_config(k).to_dict() for k in KINDS}, indent=1, sort_keys=True))
            return 0
        parser.print_help()
        return 2
    try:
        cfg = resolve_config(args)
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    if args.print_defaults:
        print(cfg.to_json())
        return 0
    try:
        rec = run_experiment(cfg, threads=max(1, args.threads),
                             write_samples=cfg.out_dir if cfg.kind == "sample" else None)
    except NhevecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    emit_report(rec, cfg.out_dir)
    verdict = rec.aggregates.get("pass")
    print(f"{cfg.kind}: {'PASS' if verdict else 'FAIL'}  ({rec.wall_clock:.1f} s, out={cfg.out_dir})")
    return 0 if verdict else 3


if __name__ == "__main__":
    sys.exit(main())
