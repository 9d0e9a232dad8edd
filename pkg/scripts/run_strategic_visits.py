#!/usr/bin/env python3
"""Train the meta learner on the default grid and dump visit heatmaps.

Runs the strategic_visits scenario (5 seeds) and emits per-seed heatmap
files; cells hosting demand should accumulate visibly more visits than
the rest of the grid if the learned policy seeks them out.
"""

import argparse
from pathlib import Path

from swarmcover.config import load_config
from swarmcover.harness import emit_plot_data, run_experiment

REPO = Path(__file__).resolve().parents[1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=REPO / "configs" / "strategic_visits.json")
    parser.add_argument("--episodes", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args()

    run_over = {}
    if args.episodes is not None:
        run_over["episodes"] = args.episodes
    if args.out is not None:
        run_over["out_dir"] = args.out
    cfg = load_config(args.config, overrides={"run": run_over} if run_over else None)

    for seed_dir in run_experiment(cfg):
        plot = emit_plot_data(seed_dir, "heatmap")
        print(f"{seed_dir.name}: heatmap data at {plot}")


if __name__ == "__main__":
    main()
