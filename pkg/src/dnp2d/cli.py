"""Command-line entry point ``dnp2d``. Exit status is 0 iff every declared check passes."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import acceptance
from .config import load_config, make_config
from .errors import DNPError
from .runner import run


def _out_dir(args, cfg):
    return Path(args.out) if args.out else Path("dnp2d-out") / f"{cfg.kind}-{cfg.hash[:12]}"


def _execute(cfg, args):
    man = run(cfg, _out_dir(args, cfg))
    for name, ok in man.checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    print(json.dumps(man.results, sort_keys=True, default=str))
    print(f"manifest: {_out_dir(args, cfg) / man.artifacts[-1]}")
    return 0 if man.passed else 1


def cmd_profile(args):
    section = {"tol": args.tol, "y_max": args.ymax}
    section["mass" if args.mass is not None else "shoot"] = args.mass if args.mass is not None else args.shoot
    return _execute(make_config({"kind": "profile", "profile": section}), args)


def cmd_config_kind(kind):
    def handler(args):
        cfg = load_config(args.config)
        if cfg.kind != kind:
            raise DNPError(f"config kind is {cfg.kind!r}, expected {kind!r}")
        return _execute(cfg, args)

    return handler


def cmd_run(args):
    return _execute(load_config(args.config), args)


def cmd_diagnose(args):
    if args.config:
        cfg = load_config(args.config)
        data = cfg.to_dict()
        data["diagnose"] = {**data.get("diagnose", {}), "what": args.what}
        data["kind"] = "diagnose"
    else:
        data = {"kind": "diagnose", "diagnose": {"what": args.what}, "seed": args.seed}
    return _execute(make_config(data), args)


def cmd_moser(args):
    return _execute(make_config({"kind": "moser", "moser": {"C": args.C, "k_max": args.kmax}}), args)


def cmd_accept(args):
    if args.id == "all":
        ids = list(acceptance.CRITERIA)
    elif args.id.isdigit() and int(args.id) in acceptance.CRITERIA:
        ids = [int(args.id)]
    else:
        raise DNPError(f"unknown acceptance criterion {args.id!r}; known: {sorted(acceptance.CRITERIA)} or 'all'")
    if args.jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(acceptance.run_check, ids))
    else:
        results = [acceptance.run_check(cid) for cid in ids]
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="dnp2d", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_out(p):
        p.add_argument("--out", help="output directory (default: dnp2d-out/<kind>-<hash>)")
        return p

    p = with_out(sub.add_parser("profile", help="self-similar profile for a charge or a shooting slope"))
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mass", type=float, help="total charge M_phys")
    g.add_argument("--shoot", type=float, help="shooting slope a in [0, 1/2)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--ymax", type=float, default=200.0)
    p.set_defaults(func=cmd_profile)

    for kind in ("radial", "field2d"):
        p = with_out(sub.add_parser(kind, help=f"{kind} time integration from a TOML config"))
        p.add_argument("--config", required=True)
        p.set_defaults(func=cmd_config_kind(kind))

    p = with_out(sub.add_parser("run", help="run any TOML config"))
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = with_out(sub.add_parser("diagnose", help="decay fit, self-similar convergence, Besov proxy or Nash constant"))
    p.add_argument("what", choices=["decay", "converge", "besov", "nash"])
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_diagnose)

    p = with_out(sub.add_parser("moser", help="Moser iteration constants"))
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--kmax", type=int, default=30)
    p.set_defaults(func=cmd_moser)

    p = sub.add_parser("accept", help="run acceptance criteria")
    p.add_argument("id", help="criterion number or 'all'")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_accept)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DNPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
