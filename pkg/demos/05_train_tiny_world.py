"""
Training on the tiny world
==========================

One UAV, one device, an open 8x8 map.  A few tens of thousands of steps are
usually enough for the greedy policy to fly over, empty the device and land.

    python3 demos/05_train_tiny_world.py --steps 30000
"""

import argparse

import numpy as np

from aerharvest.config import load_config
from aerharvest.evalharness import monte_carlo, render_trajectory
from aerharvest.scenario import GreedyPolicy, run_episode, sample_scenario
from aerharvest.training import train
from aerharvest.world import compute_los_table, load_map

parser = argparse.ArgumentParser()
parser.add_argument("--steps", type=int, default=30000)
parser.add_argument("--out", default="demo_output/tiny")
args = parser.parse_args()

cfg = load_config("tiny8")
city = load_map("tiny8")
los = compute_los_table(city)


def report(row):
    if row["episode"] % 500 == 0:
        print(f"step {row['step']:6d}  loss {row['loss'] or 0:.4f}  greedy product {row['eval_product']}")


run = train(cfg, city, los, steps=args.steps, out_dir=args.out, progress=report)
policy = GreedyPolicy(run.learner.q_values)
_, summary = monte_carlo(policy, run.sim, cfg.scenario, 100, seed=1)
print("greedy policy on 100 new scenarios:", summary)

rng = np.random.default_rng(7)
episode = run_episode(run.sim, sample_scenario(city, cfg.scenario, rng), policy, rng)
render_trajectory(episode, city, f"{args.out}/trajectory.png")
print(f"wrote {args.out}/trajectory.png")
