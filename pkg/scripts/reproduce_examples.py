"""Run every CLI verb on both example chains and print the headline numbers."""
import argparse
import json

from markov_persuasion import commands
from markov_persuasion.scenario import PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--steps", type=int, help="simulation stages per seed")
    args = ap.parse_args()
    for name, scenario in PRESETS.items():
        ctx = commands.Context(scenario)
        mode = "confined" if ctx.region.maximal else "greedy"
        res = commands.run_all(scenario, args.out, mode=mode, steps=args.steps)
        print(json.dumps({"scenario": name, "mode": mode, **commands._jsonable(res)}))


if __name__ == "__main__":
    main()
