"""The three evolution loops and their selection machinery.

All three share one generational skeleton: evaluate the population on the
training episodes, pick ten elite candidates, re-score them on fixed
validation episodes to choose the elite, truncate to T parents, then rebuild
the population as the unmutated elite plus N-1 mutated children of uniformly
sampled parents.

They differ in selection pressure:

* ``base``     ranks by training game score.
* ``novelty``  ranks by novelty of the action-string behaviour (game score
               only breaks in through the elite's validation episodes).
* ``resample`` ranks by game score, but when the elite validation score has
               been non-increasing across a window of generations, the
               parents are replaced by the archive entries whose behaviours
               are most novel relative to the current population.

Every run is a pure function of (config, environment); worker threads never
draw random numbers, so the thread count cannot change any output.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .behaviour import (
    Archive,
    SegmentationParams,
    maybe_archive,
    novelty_score,
    population_novelties,
)
from .environments import EnvironmentFactory, EvalResult, check_compatible, run_episode
from .genome import Genome, decode, mutate, noise_vector, save_genome
from .network import ArchitectureDescriptor, DenseSpec, parse_architecture
from .rng import MAX_SEED, DeterministicRng, seed_for

logger = logging.getLogger(__name__)

METHODS = ("base", "novelty", "resample")

GENERATION_CSV_HEADER = "gen,mean_score,high_score,elite_validation,mean_novelty,stagnant,wall_ms"


@dataclass(frozen=True)
class RunConfig:
    """All run hyperparameters plus the determinism seed.

    ``population_size`` includes the elite slot.  ``resample_count`` of None
    means twice the truncation size.  ``arch`` of None selects the default
    two-by-16-unit dense network sized to the environment.
    """

    population_size: int = 101
    generations: int = 500
    truncation_size: int = 20
    mutation_power: float = 0.002
    archive_probability: float = 0.1
    max_frames: int = 20000
    training_episodes: int = 1
    validation_episodes: int = 5
    improvement_generations: int = 10
    novelty_k: int = 25
    segment_length: int = 500
    elite_candidate_count: int = 10
    resample_count: int | None = None
    master_seed: int = 0
    method: str = "base"
    arch: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {self.population_size}")
        if not 1 <= self.truncation_size <= self.population_size:
            raise ValueError(
                f"truncation_size must lie in [1, {self.population_size}], "
                f"got {self.truncation_size}"
            )
        if not 1 <= self.elite_candidate_count <= self.population_size:
            raise ValueError(
                f"elite_candidate_count must lie in [1, {self.population_size}], "
                f"got {self.elite_candidate_count}"
            )
        if self.generations < 1:
            raise ValueError(f"generations must be >= 1, got {self.generations}")
        if self.max_frames < 1:
            raise ValueError(f"max_frames must be >= 1, got {self.max_frames}")
        if self.training_episodes < 1:
            raise ValueError(f"training_episodes must be >= 1, got {self.training_episodes}")
        if self.validation_episodes < 1:
            raise ValueError(f"validation_episodes must be >= 1, got {self.validation_episodes}")
        if self.improvement_generations < 1:
            raise ValueError(
                f"improvement_generations must be >= 1, got {self.improvement_generations}"
            )
        if self.novelty_k < 1:
            raise ValueError(f"novelty_k must be >= 1, got {self.novelty_k}")
        if self.segment_length < 1:
            raise ValueError(f"segment_length must be >= 1, got {self.segment_length}")
        if self.resample_count is not None and self.resample_count < 1:
            raise ValueError(f"resample_count must be >= 1, got {self.resample_count}")
        if not np.isfinite(self.mutation_power) or self.mutation_power < 0:
            raise ValueError(f"mutation_power must be finite and >= 0, got {self.mutation_power}")
        if not 0.0 <= self.archive_probability <= 1.0:
            raise ValueError(
                f"archive_probability must lie in [0, 1], got {self.archive_probability}"
            )
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed <= MAX_SEED:
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.arch is not None:
            parse_architecture(self.arch)

    @property
    def effective_resample_count(self) -> int:
        return self.resample_count if self.resample_count is not None else 2 * self.truncation_size


@dataclass(frozen=True)
class GenerationLog:
    """One row of the per-generation progress log."""

    generation: int
    mean_score: float
    high_score: float
    elite_validation: float
    mean_novelty: float | None
    stagnant: bool
    wall_ms: int

    def csv_row(self) -> str:
        novelty = "" if self.mean_novelty is None else repr(self.mean_novelty)
        return (
            f"{self.generation},{self.mean_score!r},{self.high_score!r},"
            f"{self.elite_validation!r},{novelty},{int(self.stagnant)},{self.wall_ms}"
        )


@dataclass(frozen=True)
class GenerationSnapshot:
    """Full per-generation state handed to an observer callback (test hook
    and progress reporting; not part of the run artifacts)."""

    generation: int
    population: list[Genome]
    results: list[EvalResult]
    ranked: list[EvalResult]
    candidates: list[EvalResult]
    candidate_validations: list[float]
    parents: list[Genome]
    elite: EvalResult
    elite_validation: float
    novelties: list[float] | None
    stagnant: bool


def truncation_select(results: list[EvalResult], truncation_size: int) -> list[Genome]:
    """Genomes of the first `truncation_size` entries of an already-ranked list."""
    if truncation_size > len(results):
        raise ValueError(
            f"truncation size {truncation_size} exceeds population of {len(results)}"
        )
    return [r.genome for r in results[:truncation_size]]


def stagnation_check(v_scores, improvement_generations: int) -> bool:
    """True when the last `improvement_generations` scores never rise above
    the first of them.

    Returns False until that many scores have accumulated since the last
    window reset.
    """
    ig = improvement_generations
    if ig < 1:
        raise ValueError(f"improvement_generations must be >= 1, got {ig}")
    if len(v_scores) < ig:
        return False
    window = list(v_scores[-ig:])
    baseline = window[0]
    return all(x - baseline <= 0 for x in window[1:])


def _scored_archive_entries(
    archive: Archive, current_bcs, novelty_k: int, params: SegmentationParams
) -> list[tuple[float, int]]:
    """(novelty, archive index) of each entry, measured against the current
    population only; archive entries are candidates here, not references."""
    cache: dict = {}
    return [
        (novelty_score(entry.bc, None, current_bcs, novelty_k, params, _cache=cache), idx)
        for idx, entry in enumerate(archive.entries)
    ]


def resample_parents(
    archive: Archive,
    current_bcs,
    count: int,
    novelty_k: int,
    params: SegmentationParams,
) -> list[Genome]:
    """Genomes of the `count` archive entries most novel w.r.t. the current
    population; ties break toward earlier archive entries, and `count` is
    clamped to the archive size."""
    if not archive.entries:
        raise ValueError("cannot resample parents from an empty archive")
    if count < 1:
        raise ValueError(f"resample count must be >= 1, got {count}")
    scored = _scored_archive_entries(archive, current_bcs, novelty_k, params)
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [archive.entries[idx].genome for _, idx in scored[:count]]


def resolve_arch(config: RunConfig, env: EnvironmentFactory) -> ArchitectureDescriptor:
    """Architecture from the config, or the small dense default sized to the
    environment; either way it must match the environment's shapes."""
    if config.arch is not None:
        arch = parse_architecture(config.arch)
    else:
        arch = ArchitectureDescriptor(
            input_shape=(env.observation_length,),
            hidden=(DenseSpec(16), DenseSpec(16)),
            output_units=env.action_space_size,
        )
    check_compatible(arch, env)
    return arch


def _map_indexed(fn, count: int, threads: int) -> list:
    """Apply `fn` to 0..count-1, in parallel when threads > 1, gathering by
    index so the result order never depends on scheduling."""
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


class _RunState:
    """Mutable bookkeeping shared by the three loop flavours."""

    def __init__(self, config: RunConfig, env: EnvironmentFactory, out_dir, threads: int):
        self.config = config
        self.env = env
        self.arch = resolve_arch(config, env)
        self.threads = max(1, threads)
        self.out_dir = out_dir
        self.csv_path = None
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            self.csv_path = os.path.join(out_dir, "generations.csv")
            with open(self.csv_path, "w", encoding="ascii", newline="\n") as fh:
                fh.write(GENERATION_CSV_HEADER + "\n")
        self.ga_rng = DeterministicRng(seed_for(config.master_seed, "ga"))
        self.archive_rng = DeterministicRng(seed_for(config.master_seed, "archive"))
        self.archive = Archive(config.archive_probability)
        self.params = SegmentationParams(config.segment_length)
        self.validation_seeds = [
            seed_for(config.master_seed, "valid", e) for e in range(config.validation_episodes)
        ]
        self._weights_cache: dict[tuple[int, ...], np.ndarray] = {}

    def decode_cached(self, genome: Genome) -> np.ndarray:
        """Bit-identical to `decode`, but a child genome reuses its cached
        parent's weights plus one noise step (decode is exactly that
        sequential accumulation)."""
        weights = self._weights_cache.get(genome.seeds)
        if weights is None:
            parent = self._weights_cache.get(genome.seeds[:-1]) if len(genome.seeds) > 1 else None
            if parent is not None:
                weights = parent + np.float32(genome.sigma) * noise_vector(
                    genome.seeds[-1], parent.size
                )
            else:
                weights = decode(genome, self.arch)
            self._weights_cache[genome.seeds] = weights
        return weights

    def prune_cache(self, population: list[Genome]) -> None:
        keep = {g.seeds for g in population}
        self._weights_cache = {k: v for k, v in self._weights_cache.items() if k in keep}

    def init_population(self) -> list[Genome]:
        return [
            Genome((self.ga_rng.integer(0, 2**32),), self.config.mutation_power)
            for _ in range(self.config.population_size)
        ]

    def evaluate_population(self, population: list[Genome], generation: int) -> list[EvalResult]:
        cfg = self.config
        train_seeds = [
            seed_for(cfg.master_seed, "train", generation, e) for e in range(cfg.training_episodes)
        ]

        def eval_one(i: int) -> EvalResult:
            weights = self.decode_cached(population[i])
            episodes = [
                run_episode(weights, self.arch, self.env, s, cfg.max_frames, genome=population[i])
                for s in train_seeds
            ]
            score = sum(e.game_score for e in episodes) / len(episodes)
            # the behaviour record always comes from the first training episode
            return EvalResult(
                genome=population[i],
                game_score=score,
                bc=episodes[0].bc,
                lifespan=episodes[0].lifespan,
            )

        return _map_indexed(eval_one, len(population), self.threads)

    def validate_candidates(self, candidates: list[EvalResult]) -> list[float]:
        cfg = self.config

        def validate_one(i: int) -> float:
            weights = self.decode_cached(candidates[i].genome)
            scores = [
                run_episode(weights, self.arch, self.env, s, cfg.max_frames).game_score
                for s in self.validation_seeds
            ]
            return sum(scores) / len(scores)

        return _map_indexed(validate_one, len(candidates), self.threads)

    def save_elite(self, generation: int, elite: EvalResult) -> None:
        if self.out_dir is not None:
            path = os.path.join(self.out_dir, f"elite_g{generation}.txt")
            save_genome(path, elite.genome, self.arch)

    def append_log(self, log: GenerationLog) -> None:
        if self.csv_path is not None:
            with open(self.csv_path, "a", encoding="ascii", newline="\n") as fh:
                fh.write(log.csv_row() + "\n")

    def next_population(self, elite: Genome, parents: list[Genome]) -> list[Genome]:
        population = [elite]
        for _ in range(self.config.population_size - 1):
            parent = parents[self.ga_rng.integer(0, len(parents))]
            population.append(mutate(parent, self.ga_rng.integer(0, 2**64)))
        return population


def _run(config: RunConfig, env: EnvironmentFactory, out_dir, threads, observer):
    state = _RunState(config, env, out_dir, threads)
    cfg = config
    population = state.init_population()
    v_scores: list[float] = []
    logs: list[GenerationLog] = []
    elite: EvalResult | None = None

    for generation in range(cfg.generations):
        t_start = time.perf_counter()
        results = state.evaluate_population(population, generation)
        state.prune_cache(population)  # children only ever extend current members

        novelties: list[float] | None = None
        if cfg.method in ("novelty", "resample"):
            for r in results:
                maybe_archive(state.archive, r.genome, r.bc, state.archive_rng)

        if cfg.method == "novelty":
            novelties = population_novelties(
                [r.bc for r in results], state.archive, cfg.novelty_k, state.params
            )
            order = sorted(range(len(results)), key=lambda i: (-novelties[i], i))
        else:
            order = sorted(range(len(results)), key=lambda i: (-results[i].game_score, i))
        ranked = [results[i] for i in order]

        candidates = ranked[: cfg.elite_candidate_count]
        validations = state.validate_candidates(candidates)
        elite_pos = min(range(len(candidates)), key=lambda i: (-validations[i], i))
        elite = candidates[elite_pos]
        elite_validation = validations[elite_pos]
        state.save_elite(generation, elite)

        parents = truncation_select(ranked, cfg.truncation_size)

        stagnant = False
        mean_novelty = None if novelties is None else sum(novelties) / len(novelties)
        if cfg.method == "resample":
            v_scores.append(elite_validation)
            if stagnation_check(v_scores, cfg.improvement_generations):
                stagnant = True
                if state.archive.entries:
                    bcs = [r.bc for r in results]
                    scored = _scored_archive_entries(
                        state.archive, bcs, cfg.novelty_k, state.params
                    )
                    scored.sort(key=lambda pair: (-pair[0], pair[1]))
                    chosen = scored[: cfg.effective_resample_count]
                    parents = [state.archive.entries[idx].genome for _, idx in chosen]
                    mean_novelty = sum(s for s, _ in chosen) / len(chosen)
                    v_scores = []
                else:
                    logger.warning(
                        "generation %d: stagnation detected but the archive is empty; "
                        "keeping score-based parents",
                        generation,
                    )

        wall_ms = int((time.perf_counter() - t_start) * 1000)
        log = GenerationLog(
            generation=generation,
            mean_score=sum(r.game_score for r in results) / len(results),
            high_score=max(r.game_score for r in results),
            elite_validation=elite_validation,
            mean_novelty=mean_novelty,
            stagnant=stagnant,
            wall_ms=wall_ms,
        )
        logs.append(log)
        state.append_log(log)

        if observer is not None:
            observer(
                GenerationSnapshot(
                    generation=generation,
                    population=list(population),
                    results=results,
                    ranked=ranked,
                    candidates=candidates,
                    candidate_validations=validations,
                    parents=list(parents),
                    elite=elite,
                    elite_validation=elite_validation,
                    novelties=novelties,
                    stagnant=stagnant,
                )
            )

        if generation < cfg.generations - 1:
            population = state.next_population(elite.genome, parents)

    return elite.genome, logs, state


def _require_method(config: RunConfig, method: str) -> None:
    if config.method != method:
        raise ValueError(f"config.method is {config.method!r}, expected {method!r}")


def run_base_ga(
    config: RunConfig,
    env: EnvironmentFactory,
    out_dir=None,
    threads: int = 1,
    observer=None,
) -> tuple[Genome, list[GenerationLog]]:
    """Reward-driven GA: truncation selection on training game score."""
    _require_method(config, "base")
    elite, logs, _ = _run(config, env, out_dir, threads, observer)
    return elite, logs


def run_novelty_ga(
    config: RunConfig,
    env: EnvironmentFactory,
    out_dir=None,
    threads: int = 1,
    observer=None,
) -> tuple[Genome, list[GenerationLog]]:
    """Novelty search: truncation selection on behavioural novelty, with the
    elite still chosen by validation game score."""
    _require_method(config, "novelty")
    elite, logs, _ = _run(config, env, out_dir, threads, observer)
    return elite, logs


def run_resample_ga(
    config: RunConfig,
    env: EnvironmentFactory,
    out_dir=None,
    threads: int = 1,
    observer=None,
) -> tuple[Genome, list[GenerationLog]]:
    """Reward-driven GA with stagnation-triggered archive resampling."""
    _require_method(config, "resample")
    elite, logs, _ = _run(config, env, out_dir, threads, observer)
    return elite, logs


def run_method(
    config: RunConfig,
    env: EnvironmentFactory,
    out_dir=None,
    threads: int = 1,
    observer=None,
) -> tuple[Genome, list[GenerationLog], Archive]:
    """Run the loop selected by `config.method`; also returns the archive."""
    elite, logs, state = _run(config, env, out_dir, threads, observer)
    return elite, logs, state.archive
