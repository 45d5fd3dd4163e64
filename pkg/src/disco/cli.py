"""Command-line entry point: ``disco {generate,train,infer,run,benchmark}``.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime or numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, inference
from .errors import ConfigError, DiscoError, InvalidInputError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("disco")


def _section(cfg: harness.ExperimentConfig, name: str) -> dict:
    section = cfg.raw.get(name)
    if not isinstance(section, dict):
        raise ConfigError(f"missing field '{name}'")
    return section


def _out_path(args, name: str) -> Path:
    path = Path(name)
    return path if path.is_absolute() else Path(args.out) / path


def _generation_policy(cfg, section: dict, args):
    env = cfg.env
    policy = section.get("policy", "reference")
    steps = int(section.get("simulation_steps", 200))
    if isinstance(policy, dict) and "replay" in policy:
        episode = harness.EpisodeLog.load(_out_path(args, policy["replay"]))
        n = min(int(section.get("simulation_steps", len(episode))), len(episode))
        return episode.controls[:n], n
    if policy == "reference" and env.name == "pendulum":
        return inference.pendulum_reference_policy, steps
    if policy == "circle" and env.name == "skidsteer":
        if cfg.point_estimate is None:
            raise ConfigError("missing field 'point_estimate' (needed by the circle policy)")
        speeds = harness.circle_cruise_wheel_speeds(
            cfg.point_estimate, cfg.cost.get("radius", 0.75), cfg.cost.get("reference_speed", 0.2))
        return np.tile(speeds, (steps, 1)), steps
    raise ConfigError(f"inference.policy {policy!r} is not available for {env.name}")


def cmd_generate(args, cfg) -> int:
    section = _section(cfg, "inference")
    if cfg.prior is None:
        raise ConfigError("missing field 'prior'")
    n = int(section.get("simulations", 1000))
    policy, steps = _generation_policy(cfg, section, args)
    seed = cfg.root_seed if args.seed is None else args.seed
    data = inference.generate_training_set(cfg.env, cfg.prior, policy, n, np.random.default_rng(seed),
                                           cfg.initial_state, steps)
    path = _out_path(args, section.get("dataset", "dataset.csv"))
    path.parent.mkdir(parents=True, exist_ok=True)
    inference.save_training_set(path, data)
    print(f"N={len(data)} rejected={data.skipped} -> {path}")
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    section = _section(cfg, "inference")
    dataset = _out_path(args, section.get("dataset", "dataset.csv"))
    if not dataset.exists():
        raise ConfigError(f"dataset {dataset} does not exist; run 'generate' first")
    t = section.get("train", {})
    config = inference.TrainConfig(
        epochs=int(t.get("epochs", 500)), batch_size=int(t.get("batch_size", 64)),
        learning_rate=float(t.get("learning_rate", 1e-3)),
        seed=int(t.get("seed", 0) if args.seed is None else args.seed),
        n_components=int(t.get("components", 5)), hidden=tuple(t.get("hidden", (32, 32))),
    )
    model, report = inference.train_mdn(inference.load_training_set(dataset), config)
    model_path = _out_path(args, section.get("model", "mdn.bin"))
    inference.save_model(model_path, model)
    report_path = model_path.with_suffix(".report.json")
    report_path.write_text(json.dumps({
        "train_loss": report.train_loss, "validation_loss": report.validation_loss,
        "best_epoch": report.best_epoch,
    }, indent=1) + "\n")
    print(f"best validation loss {report.validation_loss[report.best_epoch]:.6g} "
          f"at epoch {report.best_epoch} -> {model_path}")
    return EXIT_OK


def cmd_infer(args, cfg) -> int:
    section = _section(cfg, "inference")
    if cfg.prior is None:
        raise ConfigError("missing field 'prior'")
    model_path = Path(args.model) if args.model else _out_path(args, section.get("model", "mdn.bin"))
    if args.log:
        log_path = Path(args.log)
    elif "observed_log" in section:
        log_path = _out_path(args, section["observed_log"])
    else:
        raise ConfigError("no episode log given (--log or inference.observed_log)")
    try:
        model = inference.load_model(model_path)
    except OSError as exc:
        raise ConfigError(f"cannot read model {model_path}: {exc}") from None
    episode = harness.EpisodeLog.load(log_path)
    states, controls, final = episode.states, episode.controls, episode.final_state
    policy = section.get("policy")
    if isinstance(policy, dict) and "replay" in policy and "simulation_steps" in section:
        # condition on the same window the training set replayed
        n = min(int(section["simulation_steps"]), len(episode))
        final = states[n] if n < len(episode) else final
        states, controls = states[:n], controls[:n]
    stats = inference.summary_statistics(states, controls, episode.environment, final)
    threshold = float(section.get("dominance_threshold", 0.9))
    post = inference.posterior(model, stats, cfg.prior, dominance_threshold=threshold)
    mean, cov = inference.mixture_moments(post, threshold)
    top = int(np.argmax(post.weights))
    out = {
        "summary_statistics": stats.tolist(),
        "mixture": post.to_dict(),
        "selected_component": top if post.weights[top] >= threshold else None,
        "mean": mean.tolist(),
        "cov": cov.tolist(),
    }
    path = _out_path(args, section.get("posterior", "posterior.json"))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"posterior mean {np.round(mean, 4).tolist()} (component {out['selected_component']}) -> {path}")
    return EXIT_OK


def cmd_run(args, cfg) -> int:
    seed = 0 if args.seed is None else args.seed
    variant = cfg.variant(args.variant[0] if args.variant else None)
    episode = harness.run_episode(cfg, seed, variant)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"episode_{variant.name}_{seed}.json"
    episode.save(path)
    print(f"{variant.name} seed {seed}: accumulated cost {episode.accumulated_cost:.6g} -> {path}")
    return EXIT_OK


def cmd_benchmark(args, cfg) -> int:
    if args.seed is not None:
        cfg.root_seed = args.seed
    result = harness.run_benchmark(cfg, args.variant or None)
    formats = (args.format,) if args.format else ("csv", "json")
    for path in harness.export_results(result, args.out, formats):
        print(path)
    failed = [v for v in result.variants if len(result.series[v]) == 0]
    if failed:
        print(f"variants failed on every seed: {failed}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "infer": cmd_infer,
    "run": cmd_run,
    "benchmark": cmd_benchmark,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disco", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="results", help="output directory")
        if name in ("run", "benchmark"):
            p.add_argument("--variant", action="append", help="variant name (repeatable)")
        if name == "benchmark":
            p.add_argument("--format", choices=("csv", "json"))
        if name == "infer":
            p.add_argument("--model", help="model file (default: inference.model under --out)")
            p.add_argument("--log", help="observed episode log (JSON)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        if not Path(args.config).exists():
            raise ConfigError(f"config file {args.config} does not exist")
        cfg = harness.load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DiscoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
