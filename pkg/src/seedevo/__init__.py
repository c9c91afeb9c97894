"""seedevo: neuroevolution of policy-network weights via seed-list genomes.

Three interchangeable evolution loops learn feed-forward policy networks:
a reward-driven GA, novelty search over action-string edit distance, and a
reward-driven GA with stagnation-triggered archive resampling.
"""

__version__ = "0.1.0"

from .analytics import (
    ComparisonResult,
    TestReport,
    compare_runs,
    evaluate_checkpoint,
    welch_t_test,
)
from .behaviour import (
    Archive,
    ArchiveEntry,
    SegmentationParams,
    hamming,
    kl_divergence,
    levenshtein,
    maybe_archive,
    novelty_score,
    segmented_distance,
)
from .environments import (
    ConstantRewardFactory,
    CountActionZeroFactory,
    EnvironmentFactory,
    EvalResult,
    GridWorld,
    GridWorldFactory,
    LayoutError,
    builtin_gridworld,
    load_layout,
    run_episode,
)
from .evolution import (
    GenerationLog,
    RunConfig,
    resample_parents,
    run_base_ga,
    run_novelty_ga,
    run_resample_ga,
    stagnation_check,
    truncation_select,
)
from .genome import (
    Genome,
    GenomeFormatError,
    decode,
    init_weights,
    load_genome,
    mutate,
    save_genome,
)
from .network import (
    ArchitectureDescriptor,
    ConvSpec,
    DenseSpec,
    format_architecture,
    forward,
    parse_architecture,
    select_action,
)
from .rng import DeterministicRng, seed_for

__all__ = [
    "ArchitectureDescriptor",
    "Archive",
    "ArchiveEntry",
    "ComparisonResult",
    "ConstantRewardFactory",
    "ConvSpec",
    "CountActionZeroFactory",
    "DenseSpec",
    "DeterministicRng",
    "EnvironmentFactory",
    "EvalResult",
    "GenerationLog",
    "Genome",
    "GenomeFormatError",
    "GridWorld",
    "GridWorldFactory",
    "LayoutError",
    "RunConfig",
    "SegmentationParams",
    "TestReport",
    "builtin_gridworld",
    "compare_runs",
    "decode",
    "evaluate_checkpoint",
    "format_architecture",
    "forward",
    "hamming",
    "init_weights",
    "kl_divergence",
    "levenshtein",
    "load_genome",
    "load_layout",
    "maybe_archive",
    "mutate",
    "novelty_score",
    "parse_architecture",
    "resample_parents",
    "run_base_ga",
    "run_episode",
    "run_novelty_ga",
    "run_resample_ga",
    "save_genome",
    "seed_for",
    "segmented_distance",
    "select_action",
    "stagnation_check",
    "truncation_select",
    "welch_t_test",
]
