"""
City maps and line of sight
===========================

Load the bundled 32x32 city, draw it as text and look at how much of it a
device in the middle of the street grid can see.
"""

import numpy as np

from aerharvest.world import compute_los_table, load_map, supercover

city = load_map("manhattan32")
print(f"{city.name}: {city.size}x{city.size} cells of {city.cell_size} m, altitude {city.altitude} m")
print("\n".join(city.rows))

# which cells does a straight segment touch? corners count on both sides
print(supercover(0, 0, 3, 3))

# every ordered pair of cells, packed as bits
los = compute_los_table(city)
print("pairs in line of sight:", los.bits.mean())

device = (16, 16)
visible = los.from_cell(device).reshape(city.size, city.size)
print(f"cells visible from {device}: {visible.sum()} of {visible.size}")
for y in reversed(range(city.size)):
    print("".join("#" if city.buildings[x, y] else ("o" if visible[x, y] else ".") for x in range(city.size)))
