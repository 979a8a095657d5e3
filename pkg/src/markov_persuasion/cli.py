"""Command-line entry point: ``markov-persuasion <verb> --scenario ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import commands
from .errors import PersuasionError, ScenarioParseError
from .scenario import PRESETS, resolve


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _seeds(text: str) -> tuple:
    """``"0,1,5"`` or ranges like ``"0-29"``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="markov-persuasion",
        description="Analyze dynamic persuasion with a Markov state: values, absorbing sets, simulations.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("analyze", "value", "simulate", "figures", "all"):
        p = sub.add_parser(verb)
        p.add_argument("--scenario", required=True,
                       help=f"scenario JSON path or preset ({', '.join(PRESETS)})")
        p.add_argument("--out", default="out", help="output root directory")
        p.add_argument("--grid", type=int, help="grid resolution override")
        p.add_argument("--seeds", type=_seeds, help="seed list, e.g. 0-29 or 1,2,3")
        p.add_argument("--lambda", dest="lambdas", type=_floats, help="discount factors, e.g. 0.5,0.9")
        p.add_argument("--tol-hull", type=float)
        p.add_argument("--tol-contact", type=float)
        p.add_argument("--tol-vi", type=float)
        p.add_argument("-v", "--verbose", action="store_true")
        if verb in ("simulate", "all"):
            p.add_argument("--mode", choices=commands.SIM_MODES, default="confined")
            p.add_argument("--steps", type=int, help="stages per seed")
            p.add_argument("--trace-steps", type=int, default=1000, help="stages exported per seed trace")
            p.add_argument("--eps", type=float, default=0.05, help="block strategy accuracy")
    return ap


def scenario_from_args(args):
    s = resolve(args.scenario)
    tols = {k: v for k, v in (("hull", args.tol_hull), ("contact", args.tol_contact), ("vi", args.tol_vi))
            if v is not None}
    return s.with_overrides(grid_resolution=args.grid, seeds=args.seeds, lambdas=args.lambdas,
                            tolerances=tols or None)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = scenario_from_args(args)
        if args.verb == "analyze":
            r = commands.run_analyze(scenario, args.out)
            result = {"verdict": r["verdict"]["answer"], "r_D": r["region_D"]["r_D"],
                      "cav_at_stationary": r["cav_at_stationary"]}
        elif args.verb == "value":
            r = commands.run_value(scenario, args.out)
            result = {"v_infinity": r["v_infinity"]["estimate"]}
        elif args.verb == "simulate":
            r = commands.run_simulate(scenario, args.out, args.mode, args.steps, args.trace_steps, args.eps)
            result = {"mode": r["mode"], "cesaro_mean": r["cesaro_mean"]}
        elif args.verb == "figures":
            result = commands.run_figures(scenario, args.out)
        else:
            result = commands.run_all(scenario, args.out, mode=args.mode, steps=args.steps,
                                      trace_steps=args.trace_steps, eps=args.eps)
    except ScenarioParseError as exc:
        print(f"error: scenario: {exc}", file=sys.stderr)
        return exc.exit_code
    except PersuasionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1
    print(json.dumps(commands._jsonable(result)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
