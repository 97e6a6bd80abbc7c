"""Episode metrics, Monte-Carlo evaluation, parameter sweeps and trajectory images."""

from __future__ import annotations

import csv
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .scenario import EpisodeResult, ScenarioRanges, Simulator, run_episode, sample_scenario
from .world import CellKind, CityMap

EVAL_COLUMNS = ["episode", "seed", "I", "K", "total_data", "b0", "landed", "collection_ratio", "product"]
SWEEP_COLUMNS = ["axis_value_bin", "mean_product", "count"]
SWEEP_AXES = {
    "num_uavs": "num_uavs",
    "num_devices": "num_devices",
    "data_per_device": "data",
    "flying_time": "flying_time",
}


@dataclass(frozen=True)
class EpisodeMetrics:
    successful_landing: bool
    collection_ratio: float
    collection_ratio_and_landed: float
    steps: int
    crashed: tuple[bool, ...]


def compute_metrics(result: EpisodeResult) -> EpisodeMetrics:
    total = result.scenario.total_data
    ratio = 1.0 if total <= 0 else min(1.0, max(0.0, result.total_collected / total))
    landed = all(result.landed) and not any(result.crashed)
    return EpisodeMetrics(
        successful_landing=landed,
        collection_ratio=ratio,
        collection_ratio_and_landed=ratio * float(landed),
        steps=result.steps,
        crashed=tuple(result.crashed),
    )


def thread_cap() -> int:
    return max(1, int(os.environ.get("AERHARVEST_THREADS", "1")))


def episode_seeds(seed: int, episodes: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(2**32, size=episodes)]


def _play(args) -> tuple[EpisodeResult, int]:
    sim, ranges, policy, episode_seed = args
    rng = np.random.default_rng(episode_seed)
    scenario = sample_scenario(sim.city, ranges, rng)
    return run_episode(sim, scenario, policy, rng), episode_seed


def play_episodes(sim: Simulator, ranges: ScenarioRanges, policy, seeds: list[int], threads: int | None = None):
    """Results for one episode per seed; identical regardless of ``threads``."""
    threads = thread_cap() if threads is None else threads
    jobs = [(sim, ranges, policy, s) for s in seeds]
    if threads <= 1 or len(jobs) <= 1:
        return [_play(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_play, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def eval_row(index: int, seed: int, result: EpisodeResult) -> dict:
    m = compute_metrics(result)
    return {
        "episode": index,
        "seed": seed,
        "I": result.scenario.num_uavs,
        "K": result.scenario.num_devices,
        "total_data": result.scenario.total_data,
        "b0": result.scenario.flying_time,
        "landed": int(m.successful_landing),
        "collection_ratio": m.collection_ratio,
        "product": m.collection_ratio_and_landed,
    }


def summarize(rows: list[dict]) -> dict | None:
    if not rows:
        return None
    n = len(rows)
    return {
        "episodes": n,
        "successful_landing": sum(r["landed"] for r in rows) / n,
        "collection_ratio": sum(r["collection_ratio"] for r in rows) / n,
        "collection_ratio_and_landed": sum(r["product"] for r in rows) / n,
    }


def monte_carlo(policy, sim: Simulator, ranges: ScenarioRanges, episodes: int, seed: int, threads: int | None = None):
    """Evaluate ``policy`` on fully random scenarios. Returns ``(rows, summary)``."""
    seeds = episode_seeds(seed, episodes)
    played = play_episodes(sim, ranges, policy, seeds, threads)
    rows = [eval_row(i, s, r) for i, (r, s) in enumerate(played)]
    return rows, summarize(rows)


def write_eval_csv(rows: list[dict], summary: dict | None, path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=EVAL_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        if summary is not None:
            writer.writerow(
                {
                    "episode": "mean",
                    "landed": repr(summary["successful_landing"]),
                    "collection_ratio": repr(summary["collection_ratio"]),
                    "product": repr(summary["collection_ratio_and_landed"]),
                }
            )


def make_bins(axis: str, lo: float, hi: float, count: int) -> list[tuple]:
    """Split ``[lo, hi]`` into ``count`` bins; integer axes get inclusive integer bins."""
    edges = np.linspace(lo, hi, count + 1)
    if axis in ("data_per_device",):
        return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]
    starts = [int(np.ceil(e)) for e in edges[:-1]]
    return [(a, (starts[k + 1] - 1) if k + 1 < len(starts) else int(hi)) for k, a in enumerate(starts)]


def parameter_sweep(
    policy,
    sim: Simulator,
    ranges: ScenarioRanges,
    axis: str,
    bins: list[tuple],
    episodes_per_point: int,
    seed: int,
    threads: int | None = None,
) -> list[dict]:
    """Mean success-weighted collection ratio per bin of one scenario parameter.

    Parameters other than ``axis`` stay randomized over ``ranges``; bin
    values may extend beyond the training ranges.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    field_name = SWEEP_AXES[axis]
    rows = []
    for k, (lo, hi) in enumerate(bins):
        binned = replace(ranges, **{field_name: (lo, hi)})
        seeds = episode_seeds(seed + 7919 * (k + 1), episodes_per_point)
        played = play_episodes(sim, binned, policy, seeds, threads)
        products = [compute_metrics(r).collection_ratio_and_landed for r, _ in played]
        label = f"{lo}" if lo == hi else f"{lo}-{hi}"
        rows.append(
            {
                "axis_value_bin": label,
                "mean_product": float(np.mean(products)) if products else float("nan"),
                "count": len(products),
            }
        )
    return rows


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "mean_product": repr(row["mean_product"])})


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

CELL_PX = 16
CELL_COLORS = {
    CellKind.FREE: (245, 245, 245),
    CellKind.LANDING: (150, 200, 255),
    CellKind.NFZ: (240, 150, 150),
    CellKind.TALL_BUILDING: (70, 70, 80),
    CellKind.SMALL_BUILDING: (170, 170, 180),
}
DEVICE_PALETTE = [
    (0, 170, 0),
    (0, 90, 230),
    (220, 0, 0),
    (150, 0, 200),
    (140, 80, 20),
    (0, 190, 190),
    (230, 130, 0),
    (230, 0, 160),
    (120, 120, 0),
    (0, 110, 110),
]
NO_COMM = (0, 0, 0)


def slot_devices(result: EpisodeResult, uav: int) -> list[int]:
    """Device each UAV mostly talked to in each mission slot, -1 if none.

    Ties go to the device scheduled first within the slot.
    """
    lam = result.comm_slots
    per_slot: dict[int, list[int]] = {}
    for e in result.comm_log:
        if e.uav == uav and e.device >= 0:
            per_slot.setdefault(e.slot // lam, []).append(e.device)
    out = []
    for t in range(result.steps):
        devices = per_slot.get(t)
        if not devices:
            out.append(-1)
            continue
        counts = Counter(devices)
        best = max(counts.values())
        out.append(next(d for d in devices if counts[d] == best))
    return out


def _device_color(k: int) -> tuple[int, int, int]:
    return DEVICE_PALETTE[k % len(DEVICE_PALETTE)] if k >= 0 else NO_COMM


def render_trajectory(result: EpisodeResult, city: CityMap, out_path: str | Path) -> None:
    """Write a PNG of the map, devices and each UAV's path colored by served device."""
    size = city.size
    px = CELL_PX

    def center(cell):
        return ((cell[0] + 0.5) * px, (size - 1 - cell[1] + 0.5) * px)

    raster = np.zeros((size * px, size * px, 3), dtype=np.uint8)
    for x in range(size):
        for y in range(size):
            r = (size - 1 - y) * px
            raster[r : r + px, x * px : (x + 1) * px] = CELL_COLORS[CellKind(city.kinds[x, y])]
    image = Image.fromarray(raster, "RGB")
    draw = ImageDraw.Draw(image)
    for x in range(size + 1):
        draw.line([(x * px, 0), (x * px, size * px)], fill=(220, 220, 220))
        draw.line([(0, x * px), (size * px, x * px)], fill=(220, 220, 220))

    for k, cell in enumerate(result.scenario.device_cells):
        cx, cy = center(cell)
        draw.ellipse([cx - 5, cy - 5, cx + 5, cy + 5], fill=_device_color(k), outline=(0, 0, 0))

    for i in range(result.scenario.num_uavs):
        colors = slot_devices(result, i)
        for t in range(result.steps):
            if result.actions[t][i] is None:
                continue
            color = _device_color(colors[t])
            p0, p1 = result.positions[t][i], result.positions[t + 1][i]
            (x0, y0), (x1, y1) = center(p0), center(p1)
            if p0 == p1:
                draw.rectangle([x0 - 2, y0 - 2, x0 + 2, y0 + 2], outline=color)
                continue
            draw.line([(x0, y0), (x1, y1)], fill=color, width=2)
            dx, dy = (x1 - x0) / px, (y1 - y0) / px
            hx, hy = x1 - 4 * dx, y1 - 4 * dy
            draw.polygon([(x1, y1), (hx - 3 * dy, hy + 3 * dx), (hx + 3 * dy, hy - 3 * dx)], fill=color)
        sx, sy = center(result.scenario.start_cells[i])
        draw.rectangle([sx - 6, sy - 6, sx + 6, sy + 6], outline=(0, 0, 255), width=2)
        ex, ey = center(result.positions[-1][i])
        if result.landed[i]:
            draw.line([(ex - 5, ey - 5), (ex + 5, ey + 5)], fill=(0, 0, 255), width=2)
            draw.line([(ex - 5, ey + 5), (ex + 5, ey - 5)], fill=(0, 0, 255), width=2)
        elif result.crashed[i]:
            draw.ellipse([ex - 6, ey - 6, ex + 6, ey + 6], outline=(255, 0, 0), width=2)
    image.save(out_path, format="PNG")
