"""Frontier-driven exploration with a growing RRT, no pruning.

Runs one full episode with the `none` strategy: each timestep the global tree
grows in explored free space, nodes near unexplored area are classified as
frontiers, and the robot drives to the nearest one, revealing the map along
the way. Prints the coverage/tree-size trajectory and renders snapshots.

Run:  python3 demos/02_exploration.py [--out /tmp/explore_demo]
"""

import argparse
import os

from exploresparse.configs import make_run_config
from exploresparse.exploration import classify_nodes
from exploresparse.observation import composite_rgb, write_ppm
from exploresparse.trainer import EpisodeRunner


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="/tmp/explore_demo")
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    rc = make_run_config("desk")
    runner = EpisodeRunner(rc.env, rc.sim, "none", base_seed=args.seed,
                           auto_reset=False)
    print(f"Episode on a {rc.env.width}x{rc.env.height} map, "
          f"up to {rc.sim.rewards.max_moves} robot moves.\n")
    print(f"{'step':>4} {'coverage':>9} {'tree':>6} {'frontiers':>9} {'attempts':>8}")

    step = 0
    while True:
        res = runner.step()
        step += 1
        if step % 10 == 0 or res.done:
            classes = classify_nodes(runner.tree, runner.grid,
                                     runner.frontier_distance)
            n_frontier = sum(c.is_frontier for c in classes.values())
            print(f"{step:>4} {res.coverage:>9.4f} {res.tree_size:>6} "
                  f"{n_frontier:>9} {res.attempts:>8}")
            write_ppm(composite_rgb(runner.grid, runner.tree, runner.robot),
                      os.path.join(args.out, f"step_{step:03d}.ppm"))
        if res.done:
            print(f"\nEpisode ended ({res.cause}) after {step} steps: "
                  f"coverage {res.coverage:.4f}, final tree {res.tree_size} nodes.")
            break
    print(f"Snapshots in {args.out}/ — green nodes/edges are the exploration tree.")


if __name__ == "__main__":
    main()
