"""Command line entry point: ``landau <scenario> --config file.json``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from .config import ConfigError, read_configs

SUBCOMMANDS = {
    "run": ("run", "conservation"),
    "poincare": ("poincare",),
    "degiorgi": ("degiorgi",),
    "rates": ("rates",),
    "moments": ("moments",),
    "lorentz-selftest": ("lorentz-selftest",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landau", description="Landau equation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "lorentz-selftest", help="JSON config (object or list of objects)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="rng seed (overrides the config)")
        if name == "poincare":
            p.add_argument("--gamma", type=float)
            p.add_argument("--eps-decades", type=float, nargs=2, metavar=("LO", "HI"))
            p.add_argument("--family-seed", type=int)
        if name == "degiorgi":
            p.add_argument("--gamma", type=float)
            p.add_argument("--s", type=float)
            p.add_argument("--p-gamma", type=float)
            p.add_argument("--alpha", type=float)
            p.add_argument("--t-star", type=float)
            p.add_argument("--T", type=float)
            p.add_argument("--mode", choices=("property", "ledger"))
    return parser


def overrides_from(args) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if args.out:
        out["output"] = args.out
    if args.seed is not None:
        out["seed"] = args.seed
    if args.command == "poincare":
        pc = {}
        if args.gamma is not None:
            pc["gamma"] = args.gamma
        if args.eps_decades:
            pc["eps_decades"] = list(args.eps_decades)
        if args.family_seed is not None:
            pc["family_seed"] = args.family_seed
        if pc:
            out["poincare"] = pc
    if args.command == "degiorgi":
        if args.gamma is not None:
            out["solver"] = {"gamma": args.gamma}
        dg = {k: v for k, v in (("s", args.s), ("p_gamma", args.p_gamma), ("alpha", args.alpha),
                                ("t_star", args.t_star), ("T", args.T), ("mode", args.mode)) if v is not None}
        if dg:
            out["degiorgi"] = dg
    return out


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .scenarios import ScenarioError, run_many

    try:
        if args.config:
            cfgs = read_configs(args.config, overrides_from(args))
        else:
            from .config import load_config

            cfgs = [load_config({"schema_version": 1, "scenario": "lorentz-selftest"}, overrides_from(args))]
        allowed = SUBCOMMANDS[args.command]
        for c in cfgs:
            if c.scenario not in allowed:
                raise ConfigError(f"scenario {c.scenario!r} cannot run under '{args.command}' (expected {', '.join(allowed)})")
        results = run_many(cfgs, args.out)
    except (ConfigError, ScenarioError, OSError, ValueError, RuntimeError) as exc:
        print(f"landau: error: {exc}", file=sys.stderr)
        return 1
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.scenario} -> {r.out_dir}")
    return 0 if all(r.passed for r in results) else 2


if __name__ == "__main__":
    sys.exit(main())
