"""Seed-list genomes: network weights unfold deterministically from a chain of seeds.

A genome is an ordered list of unsigned 64-bit seeds plus a mutation power
sigma.  The first seed fixes the Glorot-normal initial weights; every later
seed contributes one additive standard-normal noise vector scaled by sigma.
Storage therefore grows with the number of generations, not with the number
of network parameters.

All weights are float32.  Noise is applied seed by seed in list order, each
step as `w = w + float32(sigma) * noise32`, so appending a seed changes the
decoded vector by exactly that one float32 operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ArchitectureDescriptor, format_architecture, parse_architecture
from .rng import MAX_SEED, DeterministicRng

GENOME_HEADER = "seedevo-genome v1"


class GenomeFormatError(ValueError):
    """A genome checkpoint file that does not follow the documented format."""


@dataclass(frozen=True)
class Genome:
    """Immutable seed-list encoding of a weight vector."""

    seeds: tuple[int, ...]
    sigma: float

    def __post_init__(self) -> None:
        if len(self.seeds) == 0:
            raise ValueError("genome needs at least one seed")
        for s in self.seeds:
            if not isinstance(s, int) or not 0 <= s <= MAX_SEED:
                raise ValueError(f"genome seed out of unsigned 64-bit range: {s!r}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"mutation power must be finite and >= 0, got {self.sigma}")


def mutate(genome: Genome, new_seed: int) -> Genome:
    """Child genome: the parent's seed list with `new_seed` appended."""
    return Genome(genome.seeds + (int(new_seed),), genome.sigma)


def init_weights(seed: int, arch: ArchitectureDescriptor) -> np.ndarray:
    """Glorot-normal initial weights for `arch`, deterministic in `seed`.

    One normal stream seeded with `seed` is consumed layer by layer; each
    layer's weights are scaled by sqrt(2 / (fan_in + fan_out)) and its biases
    are zero (biases consume no stream values).
    """
    rng = DeterministicRng(seed)
    chunks: list[np.ndarray] = []
    for layer in arch.param_layout():
        w = rng.standard_normals(layer.weight_count) * layer.glorot_std
        chunks.append(w.astype(np.float32))
        chunks.append(np.zeros(layer.bias_count, dtype=np.float32))
    return np.concatenate(chunks)


def noise_vector(seed: int, length: int) -> np.ndarray:
    """Float32 standard-normal mutation noise for one seed."""
    return DeterministicRng(seed).standard_normals(length).astype(np.float32)


def decode(genome: Genome, arch: ArchitectureDescriptor) -> np.ndarray:
    """Reconstruct the full weight vector encoded by `genome`.

    Pure and reentrant; repeated calls (from any thread) return bit-identical
    arrays.
    """
    if len(genome.seeds) == 0:
        raise ValueError("cannot decode a genome with an empty seed list")
    weights = init_weights(genome.seeds[0], arch)
    sigma = np.float32(genome.sigma)
    for seed in genome.seeds[1:]:
        weights = weights + sigma * noise_vector(seed, weights.size)
    return weights


def format_genome(genome: Genome, arch: ArchitectureDescriptor | str) -> str:
    """Render the bit-exact checkpoint text for a genome."""
    arch_text = arch if isinstance(arch, str) else format_architecture(arch)
    lines = [GENOME_HEADER, f"sigma={genome.sigma!r}", f"arch={arch_text}"]
    lines.extend(str(s) for s in genome.seeds)
    return "\n".join(lines) + "\n"


def save_genome(path, genome: Genome, arch: ArchitectureDescriptor | str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_genome(genome, arch))


def parse_genome(text: str, source: str = "<genome>") -> tuple[Genome, str]:
    """Parse checkpoint text into (genome, architecture string).

    Raises GenomeFormatError with a line-numbered message on any deviation
    from the format written by `format_genome`.
    """

    def fail(lineno: int, message: str) -> GenomeFormatError:
        return GenomeFormatError(f"{source}:{lineno}: {message}")

    lines = text.splitlines()
    if len(lines) < 4:
        raise fail(len(lines) + 1, "truncated genome file (header, sigma, arch, seeds expected)")
    if lines[0] != GENOME_HEADER:
        raise fail(1, f"expected header {GENOME_HEADER!r}, got {lines[0]!r}")
    if not lines[1].startswith("sigma="):
        raise fail(2, f"expected sigma=<float>, got {lines[1]!r}")
    try:
        sigma = float(lines[1][len("sigma=") :])
    except ValueError:
        raise fail(2, f"invalid sigma value {lines[1][len('sigma='):]!r}") from None
    if not lines[2].startswith("arch="):
        raise fail(3, f"expected arch=<descriptor>, got {lines[2]!r}")
    arch_text = lines[2][len("arch=") :]
    try:
        parse_architecture(arch_text)
    except ValueError as exc:
        raise fail(3, str(exc)) from None
    seeds: list[int] = []
    for offset, line in enumerate(lines[3:], start=4):
        if not line.strip():
            raise fail(offset, "blank line inside seed list")
        try:
            value = int(line)
        except ValueError:
            raise fail(offset, f"invalid seed {line!r}") from None
        if not 0 <= value <= MAX_SEED:
            raise fail(offset, f"seed {value} out of unsigned 64-bit range")
        seeds.append(value)
    try:
        genome = Genome(tuple(seeds), sigma)
    except ValueError as exc:
        raise fail(2, str(exc)) from None
    return genome, arch_text


def load_genome(path) -> tuple[Genome, str]:
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    return parse_genome(text, source=str(path))
