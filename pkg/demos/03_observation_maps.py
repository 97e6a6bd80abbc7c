"""
Egocentric observation maps
===========================

Each agent sees the city centered on itself: a full-resolution local crop and
an average-pooled global view of the whole map.
"""

import numpy as np

from aerharvest.comms import Devices
from aerharvest.dynamics import UavState
from aerharvest.obsmap import observe
from aerharvest.world import load_map

city = load_map("manhattan32")
uavs = [UavState(3, 0, 80), UavState(10, 14, 55)]
devices = Devices([(8, 20), (25, 4)], [12.0, 7.5], num_uavs=2)

obs = observe(city, uavs, devices, ego=1, local_size=17, pool=3)
print("local", obs.local.shape, "global", obs.global_.shape, "battery", obs.scalar_b)

names = ["landing", "blocked", "buildings", "data", "flying time", "operational"]
for ch, name in enumerate(names):
    print(f"{name:12s} local sum {obs.local[..., ch].sum():8.2f}   global mean {obs.global_[..., ch].mean():.4f}")

# the ego agent sits in the middle of its own local map
c = obs.local.shape[0] // 2
print("center of flying-time layer:", obs.local[c, c, 4])
print(np.flipud(obs.local[..., 2].T).astype(int))
