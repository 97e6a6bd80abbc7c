"""``aerharvest`` command line: shadow, train, eval, sweep and render."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import torch

from .config import ConfigError, RunConfig, config_from_dict, load_config, map_defaults
from .evalharness import (
    SWEEP_AXES,
    make_bins,
    monte_carlo,
    parameter_sweep,
    render_trajectory,
    write_eval_csv,
    write_sweep_csv,
)
from .learner import ModelFormatError, NonFiniteLossError, load_model
from .learner.ddqn import obs_tensors
from .obsmap import ObservationConfigError
from .scenario import EpisodeResult, GreedyPolicy, RandomPolicy, ScenarioError, run_episode, sample_scenario
from .training import build_simulator, train
from .world import LosCacheError, MapFormatError, MapValidationError, load_map, load_or_compute_los


class UsageError(Exception):
    """Bad arguments or configuration; exit code 2."""


def _emit(record: dict) -> None:
    print(json.dumps(record), flush=True)


def _load_city(map_arg: str):
    try:
        return load_map(map_arg)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except (MapFormatError, MapValidationError) as exc:
        raise UsageError(f"invalid map {map_arg}: {exc}") from exc


def _default_cache(map_arg: str, city) -> Path:
    path = Path(map_arg)
    if path.exists():
        return path.with_suffix(".los")
    return Path(".aerharvest-cache") / f"{city.name}.los"


def _los(city, map_arg: str, cache: str | None):
    return load_or_compute_los(city, cache if cache else _default_cache(map_arg, city))


def _config(args, city) -> RunConfig:
    if getattr(args, "config", None):
        try:
            cfg = load_config(args.config)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from exc
    else:
        cfg = _defaults(city)
    return cfg


def _defaults(city) -> RunConfig:
    # a bundled config named after the map wins over the generic defaults
    try:
        return load_config(city.name)
    except FileNotFoundError:
        return map_defaults(city.name)


def _model_config(model_path: str, args, city) -> RunConfig:
    """Configuration matching a trained model: --config, else the run manifest, else map defaults."""
    if args.config:
        return _config(args, city)
    manifest = Path(model_path).parent / "manifest.json"
    if manifest.exists():
        return config_from_dict(json.loads(manifest.read_text())["config"])
    return _defaults(city)


def _policy(args, city, sim_cfg: RunConfig):
    if args.policy == "random":
        return RandomPolicy(), sim_cfg
    if not args.model:
        raise UsageError("--model is required unless --policy random")
    try:
        net = load_model(args.model)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    expected = sim_cfg.network_spec(city.size)
    if (net.spec.local_size, net.spec.global_size) != (expected.local_size, expected.global_size):
        raise UsageError(
            f"model expects local {net.spec.local_size} / global {net.spec.global_size} maps, "
            f"configuration gives {expected.local_size} / {expected.global_size}"
        )

    def q_values(obs):
        with torch.no_grad():
            return net(*obs_tensors([obs], net.spec.torch_dtype))[0].numpy().astype(float)

    return GreedyPolicy(q_values), sim_cfg


def cmd_shadow(args) -> int:
    city = _load_city(args.map)
    out = args.out or _default_cache(args.map, city)
    _, cached = load_or_compute_los(city, out)
    _emit({"command": "shadow", "map": city.name, "cache": str(out), "status": "cached" if cached else "computed"})
    return 0


def cmd_train(args) -> int:
    city = _load_city(args.map)
    cfg = _config(args, city)
    updates = {"map": args.map}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out:
        updates["output_dir"] = args.out
    cfg = config_from_dict({**cfg.to_dict(), **updates})
    los, _ = _los(city, args.map, args.los_cache)
    try:
        run = train(cfg, city, los, steps=args.steps, out_dir=cfg.output_dir, progress=_emit)
    except NonFiniteLossError as exc:
        print(f"aerharvest: training aborted: {exc}", file=sys.stderr)
        return 1
    _emit({"command": "train", "steps": run.env_steps, "episodes": run.episodes, "out": cfg.output_dir})
    return 0


def cmd_eval(args) -> int:
    city = _load_city(args.map)
    cfg = _model_config(args.model, args, city) if args.model else _config(args, city)
    policy, cfg = _policy(args, city, cfg)
    los, _ = _los(city, args.map, args.los_cache)
    sim = build_simulator(cfg, city, los)
    rows, summary = monte_carlo(policy, sim, cfg.scenario, args.episodes, args.seed)
    write_eval_csv(rows, summary, args.out)
    if args.trace:
        rng = np.random.default_rng(args.seed)
        result = run_episode(sim, sample_scenario(city, cfg.scenario, rng), policy, rng)
        Path(args.trace).write_text(result.to_json())
    _emit({"command": "eval", "out": args.out, "summary": summary})
    return 0


def _parse_values(axis: str, text: str) -> list[tuple]:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        v = float(part) if axis == "data_per_device" else int(part)
        values.append((v, v))
    if not values:
        raise UsageError("--values is empty")
    return values


def cmd_sweep(args) -> int:
    city = _load_city(args.map)
    cfg = _model_config(args.model, args, city) if args.model else _config(args, city)
    policy, cfg = _policy(args, city, cfg)
    if args.values:
        bins = _parse_values(args.axis, args.values)
    else:
        lo, hi = args.range if args.range else getattr(cfg.scenario, SWEEP_AXES[args.axis])
        bins = make_bins(args.axis, lo, hi, args.bins)
    los, _ = _los(city, args.map, args.los_cache)
    sim = build_simulator(cfg, city, los)
    rows = parameter_sweep(policy, sim, cfg.scenario, args.axis, bins, args.episodes_per_point, args.seed)
    write_sweep_csv(rows, args.out)
    _emit({"command": "sweep", "out": args.out, "rows": rows})
    return 0


def cmd_render(args) -> int:
    city = _load_city(args.map)
    if args.episode:
        try:
            result = EpisodeResult.from_dict(json.loads(Path(args.episode).read_text()))
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from exc
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"invalid episode file {args.episode}: {exc}") from exc
    else:
        cfg = _model_config(args.model, args, city) if args.model else _config(args, city)
        policy, cfg = _policy(args, city, cfg)
        los, _ = _los(city, args.map, args.los_cache)
        sim = build_simulator(cfg, city, los)
        rng = np.random.default_rng(args.seed)
        result = run_episode(sim, sample_scenario(city, cfg.scenario, rng), policy, rng)
    render_trajectory(result, city, args.out)
    _emit({"command": "render", "out": args.out, "steps": result.steps})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aerharvest", description="Multi-UAV IoT data harvesting with DDQN.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shadow", help="compute or reuse the line-of-sight cache for a map")
    p.add_argument("--map", required=True)
    p.add_argument("--out", help="cache file (default: next to the map, or .aerharvest-cache/)")
    p.set_defaults(func=cmd_shadow)

    def common(p, model=True):
        p.add_argument("--map", required=True)
        p.add_argument("--config")
        p.add_argument("--los-cache")
        p.add_argument("--seed", type=int, default=0)
        if model:
            p.add_argument("--model")
            p.add_argument("--policy", choices=["greedy", "random"], default="greedy")

    p = sub.add_parser("train", help="train a shared DDQN policy")
    common(p, model=False)
    p.set_defaults(seed=None)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Monte-Carlo evaluation on random scenarios")
    common(p)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="also write one episode result as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="performance versus one scenario parameter")
    common(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", help="comma-separated single-value bins")
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--episodes-per-point", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="draw an episode trajectory as PNG")
    common(p)
    p.add_argument("--episode", help="stored episode result JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ObservationConfigError, ScenarioError) as exc:
        print(f"aerharvest: {exc}", file=sys.stderr)
        return 2
    except (ModelFormatError, LosCacheError, OSError, ValueError, RuntimeError) as exc:
        print(f"aerharvest: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
