"""
Link budget and the slot scheduler
==================================

Transmit power is set so the map corner sees a fixed SNR from the center.
Each communication slot a UAV serves the strongest device that still has data.
"""

import numpy as np

from aerharvest.channel import ChannelParams, link_snr, max_rate
from aerharvest.comms import CommContext, Devices, mission_slot_comms
from aerharvest.world import compute_los_table, load_map

city = load_map("manhattan32")
params = ChannelParams().normalized(city)
print(f"P/noise = {params.power_ratio:.3g}")

# SNR along the street at 10 m altitude, LoS and NLoS
for d in (10, 50, 100, 200, 400):
    los_snr = link_snr([0, 0, city.altitude], [d, 0, 0], True, params)
    nlos_snr = link_snr([0, 0, city.altitude], [d, 0, 0], False, params)
    print(f"{d:4d} m  LoS {10 * np.log10(los_snr):6.1f} dB ({max_rate(los_snr):.2f} b/s/Hz)  NLoS {10 * np.log10(nlos_snr):6.1f} dB")

los = compute_los_table(city)
devices = Devices([(5, 5), (20, 12), (28, 28)], [4.0, 4.0, 0.5], num_uavs=2)
ctx = CommContext(los, params, city.cell_size, city.altitude, device_positions=devices.positions(city.cell_size))
rng = np.random.default_rng(0)

# two UAVs fly one cell each; four slots of scheduling happen along the way
entries = mission_slot_comms([(4, 4), (27, 27)], [(5, 4), (27, 28)], [True, True], devices, ctx, rng, mission_slot=0)
for e in entries:
    print(e)
print("left on devices:", devices.remaining)
