"""
Random policy on the 32x32 city
===============================

The safety controller keeps random agents legal, but they rarely land on
purpose or collect much.  This is the floor a trained policy has to beat.
"""

from aerharvest.channel import ChannelParams
from aerharvest.evalharness import monte_carlo
from aerharvest.scenario import SCENARIO_PRESETS, RandomPolicy, Simulator
from aerharvest.world import compute_los_table, load_map

city = load_map("manhattan32")
sim = Simulator(city, compute_los_table(city), ChannelParams().normalized(city))
rows, summary = monte_carlo(RandomPolicy(), sim, SCENARIO_PRESETS["manhattan32"], 200, seed=0)

for key, value in summary.items():
    print(f"{key:28s} {value:.3f}")
print("worst episode:", min(rows, key=lambda r: r["product"]))
