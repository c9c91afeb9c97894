"""Command-line interface: train, evaluate, compare, replay.

Exit codes: 0 success, 2 usage, 3 config or checkpoint content, 4 environment,
5 I/O.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from dataclasses import fields, replace
from datetime import datetime, timezone
from importlib import resources

from . import __version__
from .analytics import compare_runs, evaluate_checkpoint, read_scores_csv
from .behaviour import PAD_SYMBOL, action_symbol, dump_archive
from .environments import (
    EnvironmentFactory,
    GridWorldEpisode,
    GridWorldFactory,
    LayoutError,
    builtin_gridworld,
    load_layout,
    stub_factory,
)
from .evolution import RunConfig, resolve_arch, run_method
from .genome import decode, load_genome
from .network import forward, format_architecture, parse_architecture, select_action
from .rng import seed_for

MANIFEST_HEADER = "seedevo-run v1"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_ENVIRONMENT = 4
EXIT_IO = 5


class ConfigError(ValueError):
    """A run configuration file that fails parsing or validation."""


_CONFIG_PARSERS = {
    "population_size": int,
    "generations": int,
    "truncation_size": int,
    "mutation_power": float,
    "archive_probability": float,
    "max_frames": int,
    "training_episodes": int,
    "validation_episodes": int,
    "improvement_generations": int,
    "novelty_k": int,
    "segment_length": int,
    "elite_candidate_count": int,
    "resample_count": int,
    "master_seed": int,
    "method": str,
    "arch": str,
}


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse a flat `key = value` config; `#` comments allowed, unknown or
    duplicate keys are hard errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate config key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](raw_value)
        except ValueError:
            raise ConfigError(
                f"{source}:{lineno}: invalid value {raw_value!r} for {key!r}"
            ) from None
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def format_config(config: RunConfig) -> str:
    """Canonical config text; parse(format(c)) == c."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def resolve_config_path(spec: str) -> str:
    """A config flag is either a file path or the bare name of a shipped config."""
    if os.path.exists(spec):
        return spec
    ref = resources.files("seedevo.data").joinpath(f"{spec}.cfg")
    if ref.is_file():
        return str(ref)
    raise ConfigError(f"config {spec!r} is neither a file nor a shipped config name")


def resolve_env(spec: str, max_frames: int | None = None) -> EnvironmentFactory:
    """Environment flag grammar: `stub:<name>`, a shipped layout name, or a
    layout file path."""
    if spec.startswith("stub:"):
        factory = stub_factory(spec[len("stub:") :])
    elif os.path.exists(spec):
        with open(spec, "r", encoding="ascii") as fh:
            grid = load_layout(fh.read(), source=spec)
        factory = GridWorldFactory(grid)
    else:
        try:
            factory = builtin_gridworld(spec)
        except LayoutError:
            raise LayoutError(
                f"environment {spec!r} is not a stub:<name>, a layout file, "
                "or a built-in layout name"
            ) from None
    if max_frames is not None:
        factory.max_frames = max_frames
    return factory


def _write_manifest(out_dir: str, method: str, seed: int) -> None:
    start = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(MANIFEST_HEADER + "\n")
        fh.write(f"version={__version__}\n")
        fh.write(f"method={method}\n")
        fh.write(f"seed={seed}\n")
        fh.write(f"start_time={start}\n")


def cmd_train(args) -> int:
    config_path = resolve_config_path(args.config)
    with open(config_path, "r", encoding="ascii") as fh:
        config_text = fh.read()
    config = parse_config_text(config_text, source=config_path)
    overrides: dict = {"method": args.method}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    try:
        config = replace(config, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    env = resolve_env(args.env, max_frames=config.max_frames)

    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args.out, config.method, config.master_seed)
    shutil.copyfile(config_path, os.path.join(args.out, "config.cfg"))

    # snapshot the fully-resolved configuration for auditability
    resolved = replace(config, arch=format_architecture(resolve_arch(config, env)))
    with open(os.path.join(args.out, "config.resolved.cfg"), "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_config(resolved))

    def progress(snapshot) -> None:
        if args.quiet:
            return
        print(
            f"gen {snapshot.generation}"
            f" mean {sum(r.game_score for r in snapshot.results) / len(snapshot.results):.3f}"
            f" high {max(r.game_score for r in snapshot.results):.3f}"
            f" val {snapshot.elite_validation:.3f}"
            + (" [resampled]" if snapshot.stagnant else ""),
            flush=True,
        )

    elite, logs, archive = run_method(
        config, env, out_dir=args.out, threads=args.threads, observer=progress
    )

    if args.dump_archive:
        dump_archive(archive, os.path.join(args.out, "archive.txt"))

    if not args.quiet:
        print(f"run complete: {len(logs)} generations, elite of {len(elite.seeds)} seeds")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    env = resolve_env(args.env, max_frames=args.frames)
    report = evaluate_checkpoint(
        args.checkpoint,
        arch=None,
        env=env,
        episodes=args.episodes,
        seed_namespace=args.namespace,
        master_seed=args.seed,
    )
    out_path = args.out if args.out else args.checkpoint + ".scores.csv"
    with open(out_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# per-episode scores: {args.checkpoint} on {args.env}\n")
        for score in report.scores:
            fh.write(f"{score!r}\n")

    print(f"{'episode':>8} {'score':>12} {'lifespan':>10}")
    for i, (score, lifespan) in enumerate(zip(report.scores, report.lifespans)):
        print(f"{i:>8} {score:>12.4f} {lifespan:>10}")
    print(f"{'mean':>8} {report.score_mean:>12.4f} {report.lifespan_mean:>10.2f}")
    print(f"{'std':>8} {report.score_std:>12.4f} {report.lifespan_std:>10.2f}")
    print(f"scores written to {out_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    scores_a = read_scores_csv(args.a)
    scores_b = read_scores_csv(args.b)
    result = compare_runs(scores_a, scores_b, alpha=args.alpha)
    print(result.line())
    return EXIT_OK


def cmd_replay(args) -> int:
    genome, arch_text = load_genome(args.checkpoint)
    arch = parse_architecture(arch_text)
    env = resolve_env(args.env, max_frames=args.frames)
    weights = decode(genome, arch)
    episode_seed = seed_for(args.seed, args.namespace, 0)

    episode = env.make(episode_seed)
    obs = episode.reset()
    is_grid = isinstance(episode, GridWorldEpisode)
    symbols = []
    score = 0.0
    for frame in range(env.max_frames):
        action = select_action(forward(weights, arch, obs))
        obs, reward, done = episode.step(action)
        score += reward
        symbols.append(action_symbol(action))
        if args.render == "ascii" and is_grid:
            print(episode.render())
        print(f"t={frame} action={symbols[-1]} reward={reward!r}")
        if done:
            break
    bc = "".join(symbols) + PAD_SYMBOL * (env.max_frames - len(symbols))
    print(f"score={score!r} lifespan={len(symbols)} bc={bc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seedevo",
        description="Evolve policy-network weights with seed-list genomes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run an evolution loop")
    train.add_argument("--method", required=True, choices=["base", "novelty", "resample"])
    train.add_argument("--config", required=True, help="config file path or shipped config name")
    train.add_argument("--env", required=True, help="stub:<name>, layout file, or built-in layout")
    train.add_argument("--out", required=True, help="run directory")
    train.add_argument("--threads", type=int, default=1)
    train.add_argument("--seed", type=int, default=None, help="override master_seed")
    train.add_argument("--dump-archive", action="store_true")
    train.add_argument("--quiet", action="store_true")
    train.set_defaults(fn=cmd_train)

    evaluate = sub.add_parser("evaluate", help="score a checkpoint on held-out episodes")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--env", required=True)
    evaluate.add_argument("--episodes", type=int, default=30)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--namespace", default="test")
    evaluate.add_argument("--frames", type=int, default=None)
    evaluate.add_argument("--out", default=None, help="per-episode score CSV path")
    evaluate.set_defaults(fn=cmd_evaluate)

    compare = sub.add_parser("compare", help="two-tailed Welch t-test between score CSVs")
    compare.add_argument("--a", required=True)
    compare.add_argument("--b", required=True)
    compare.add_argument("--alpha", type=float, default=0.05)
    compare.set_defaults(fn=cmd_compare)

    replay = sub.add_parser("replay", help="re-run one episode of a checkpoint")
    replay.add_argument("--checkpoint", required=True)
    replay.add_argument("--env", required=True)
    replay.add_argument("--seed", type=int, default=0)
    replay.add_argument("--namespace", default="test")
    replay.add_argument("--frames", type=int, default=None)
    replay.add_argument("--render", choices=["ascii", "none"], default="ascii")
    replay.set_defaults(fn=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except LayoutError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except ValueError as exc:
        # ConfigError, GenomeFormatError and shape mismatches all land here
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def cli_entry() -> None:
    sys.exit(main())
