"""Centralized DDQN training loop with periodic greedy evaluation."""

from __future__ import annotations

import csv
import json
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .config import RunConfig
from .evalharness import compute_metrics, thread_cap
from .learner import DDQNLearner, NonFiniteLossError, save_model
from .obsmap import check_dims
from .scenario import GreedyPolicy, Simulator, SoftmaxPolicy, run_episode, sample_scenario
from .world import CityMap, LosTable

LOG_COLUMNS = [
    "episode",
    "env_steps",
    "train_steps",
    "episode_reward",
    "mean_loss",
    "eval_landed",
    "eval_collection_ratio",
    "eval_product",
]


def build_simulator(cfg: RunConfig, city: CityMap, los: LosTable) -> Simulator:
    check_dims(city.size, cfg.learner.local_size, cfg.learner.pool)
    return Simulator(
        city=city,
        los_table=los,
        channel=cfg.channel.normalized(city),
        reward=cfg.reward,
        local_size=cfg.learner.local_size,
        pool=cfg.learner.pool,
        comm_slots=cfg.comm_slots,
        mission_slot_s=cfg.mission_slot_s,
    )


def manifest(cfg: RunConfig, steps: int) -> dict:
    return {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "steps": steps,
        "versions": {
            "aerharvest": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__,
        },
        "threads": thread_cap(),
        "argv": sys.argv,
    }


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


@dataclass
class TrainingRun:
    learner: DDQNLearner
    sim: Simulator
    log_rows: list[dict]
    env_steps: int
    episodes: int


def train(
    cfg: RunConfig,
    city: CityMap,
    los: LosTable,
    steps: int | None = None,
    out_dir: str | Path | None = None,
    progress=None,
) -> TrainingRun:
    """Train one network shared by all agents for ``steps`` agent-steps.

    Each acting agent's transition counts as one step and triggers one
    gradient step once the replay memory holds a full minibatch.  Training
    stops at the first episode boundary past the budget.  Every
    ``eval_interval_episodes`` a greedy episode on a fresh random scenario is
    logged.  With ``out_dir`` the run writes a manifest, ``training_log.csv``,
    periodic checkpoints and ``model_final.ahnet``; the last checkpoint is
    kept if a non-finite loss aborts the run.
    """
    torch.set_num_threads(thread_cap())
    budget = cfg.learner.max_steps if steps is None else int(steps)
    sim = build_simulator(cfg, city, los)
    learner = DDQNLearner(cfg.network_spec(city.size), cfg.learner, seed=cfg.seed)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    train_rng, eval_rng = np.random.default_rng(seeds[0]), np.random.default_rng(seeds[1])
    explore = SoftmaxPolicy(learner.q_values, cfg.learner.temperature)
    greedy = GreedyPolicy(learner.q_values)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(manifest(cfg, budget), indent=2) + "\n")

    rows: list[dict] = []
    env_steps = 0
    episode = 0
    next_checkpoint = cfg.checkpoint_interval
    while env_steps < budget:
        scenario = sample_scenario(city, cfg.scenario, train_rng)
        try:
            result = run_episode(sim, scenario, explore, train_rng, learner=learner, train=True)
        except NonFiniteLossError:
            if out is not None:
                _write_log(rows, out / "training_log.csv")
            raise
        episode += 1
        env_steps += sum(a is not None for row in result.actions for a in row)
        row = {
            "episode": episode,
            "env_steps": env_steps,
            "train_steps": learner.train_steps,
            "episode_reward": float(sum(r for row in result.rewards for r in row if r is not None)),
            "mean_loss": float(np.mean(result.losses)) if result.losses else None,
            "eval_landed": None,
            "eval_collection_ratio": None,
            "eval_product": None,
        }
        if episode % cfg.eval_interval_episodes == 0:
            eval_scenario = sample_scenario(city, cfg.scenario, eval_rng)
            m = compute_metrics(run_episode(sim, eval_scenario, greedy, eval_rng))
            row.update(
                eval_landed=int(m.successful_landing),
                eval_collection_ratio=m.collection_ratio,
                eval_product=m.collection_ratio_and_landed,
            )
            if progress is not None:
                progress(
                    {
                        "step": env_steps,
                        "episode": episode,
                        "loss": row["mean_loss"],
                        "eval_landed": row["eval_landed"],
                        "eval_product": row["eval_product"],
                    }
                )
        rows.append(row)
        if out is not None and env_steps >= next_checkpoint:
            save_model(learner.online, out / f"model_{env_steps:09d}.ahnet")
            next_checkpoint += cfg.checkpoint_interval

    if out is not None:
        _write_log(rows, out / "training_log.csv")
        save_model(learner.online, out / "model_final.ahnet")
    return TrainingRun(learner=learner, sim=sim, log_rows=rows, env_steps=env_steps, episodes=episode)


def _write_log(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in LOG_COLUMNS])
