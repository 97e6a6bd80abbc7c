"""
Sweeping one scenario parameter
===============================

Performance as a function of the flying-time budget, with every other
scenario parameter still drawn at random.  Pass ``--model`` to sweep a
trained network instead of the random policy.
"""

import argparse

import torch

from aerharvest.config import load_config
from aerharvest.evalharness import make_bins, parameter_sweep
from aerharvest.learner import load_model
from aerharvest.learner.ddqn import obs_tensors
from aerharvest.scenario import GreedyPolicy, RandomPolicy
from aerharvest.training import build_simulator
from aerharvest.world import compute_los_table, load_map

parser = argparse.ArgumentParser()
parser.add_argument("--map", default="tiny8")
parser.add_argument("--model")
parser.add_argument("--episodes", type=int, default=100)
args = parser.parse_args()

cfg = load_config(args.map)
city = load_map(args.map)
sim = build_simulator(cfg, city, compute_los_table(city))

if args.model:
    net = load_model(args.model)

    def q_values(obs):
        with torch.no_grad():
            return net(*obs_tensors([obs], net.spec.torch_dtype))[0].numpy()

    policy = GreedyPolicy(q_values)
else:
    policy = RandomPolicy()

lo, hi = cfg.scenario.flying_time
bins = make_bins("flying_time", lo, hi, 4)
for row in parameter_sweep(policy, sim, cfg.scenario, "flying_time", bins, args.episodes, seed=0):
    print(f"flying time {row['axis_value_bin']:>6s}  product {row['mean_product']:.3f}  ({row['count']} episodes)")
