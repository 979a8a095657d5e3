"""Verdict, contact set and r_D of each example chain across grid resolutions."""
import argparse
import json

from markov_persuasion.commands import Context, _jsonable, analysis
from markov_persuasion.scenario import PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=[50, 100, 250, 500, 1000, 2000, 4000])
    args = ap.parse_args()
    for name, base in PRESETS.items():
        for n in args.grids:
            rep = analysis(Context(base.with_overrides(grid_resolution=n)))
            hp = rep["hyperplanes"]
            print(json.dumps(_jsonable({
                "scenario": name, "grid": n, "verdict": rep["verdict"]["answer"],
                "r_D": rep["region_D"]["r_D"], "cav_at_stationary": rep["cav_at_stationary"],
                "contact_hull": [h["hull_vertices"] for h in hp],
                "absorbing_sizes": [len(h["absorbing_subset"]) for h in hp],
            })))


if __name__ == "__main__":
    main()
