"""Behaviour characteristics and the machinery that compares them.

An agent's behaviour characteristic is the string of action symbols it emitted
during one training episode, padded with the reserved symbol `x` to the
episode frame budget.  Behavioural distance is Levenshtein distance summed
over aligned fixed-length segments; novelty is the mean distance to the k
nearest neighbours among the archive and the current population.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .genome import Genome
from .rng import DeterministicRng

PAD_SYMBOL = "x"

# Action index i maps to ACTION_SYMBOLS[i]; `x` is reserved for padding, which
# caps the alphabet at 61 actions.
ACTION_SYMBOLS = "".join(
    c for c in string.digits + string.ascii_lowercase + string.ascii_uppercase if c != PAD_SYMBOL
)


def action_symbol(action: int) -> str:
    if not 0 <= action < len(ACTION_SYMBOLS):
        raise ValueError(f"action index {action} outside the {len(ACTION_SYMBOLS)}-symbol alphabet")
    return ACTION_SYMBOLS[action]


def symbol_action(symbol: str) -> int:
    idx = ACTION_SYMBOLS.find(symbol)
    if idx < 0:
        raise ValueError(f"{symbol!r} is not an action symbol")
    return idx


# Below this many DP cells the plain-Python rows beat numpy's call overhead.
_SMALL_DP_CELLS = 1024


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-symbol insertions, deletions and substitutions
    turning `a` into `b`."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a  # keep the DP row on the shorter string
    if len(a) * len(b) <= _SMALL_DP_CELLS:
        return _levenshtein_py(a, b)
    return _levenshtein_np(a, b)


def _levenshtein_py(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        best = i
        for j, cb in enumerate(b, start=1):
            val = min(prev[j] + 1, best + 1, prev[j - 1] + (ca != cb))
            cur.append(val)
            best = val
        prev = cur
    return prev[-1]


def _levenshtein_np(a: str, b: str) -> int:
    # Row update with the cumulative-minimum trick: after taking the cheaper of
    # substitution and deletion per cell, the left-to-right insertion scan
    # cur[j] = min(cur[j], cur[j-1] + 1) equals cummin(cur - j) + j.
    bv = _codes(b)
    av = _codes(a)
    idx = np.arange(len(b) + 1, dtype=np.int32)
    prev = idx.copy()
    cur = np.empty_like(prev)
    for ca in av:
        cur[0] = prev[0] + 1
        np.minimum(prev[:-1] + (bv != ca), prev[1:] + 1, out=cur[1:])
        np.minimum.accumulate(cur - idx, out=cur)
        cur += idx
        prev, cur = cur, prev
    return int(prev[-1])


def _codes(s: str) -> np.ndarray:
    try:
        return np.frombuffer(s.encode("latin-1"), dtype=np.uint8).astype(np.int32)
    except UnicodeEncodeError:
        return np.array([ord(c) for c in s], dtype=np.int32)


def hamming(a: str, b: str) -> int:
    """Number of positions at which two equal-length strings differ."""
    if len(a) != len(b):
        raise ValueError(f"hamming distance needs equal lengths, got {len(a)} and {len(b)}")
    return sum(ca != cb for ca, cb in zip(a, b))


def kl_divergence(a: str, b: str, alphabet) -> float:
    """Kullback-Leibler divergence between the add-one-smoothed symbol
    distributions of `a` and `b` over `alphabet` (natural log)."""
    if not a or not b:
        raise ValueError("kl_divergence needs non-empty strings")
    symbols = sorted(set(alphabet))
    if not symbols:
        raise ValueError("empty alphabet")
    ca, cb = Counter(a), Counter(b)
    known = set(symbols)
    for s, counts in (("first", ca), ("second", cb)):
        extra = set(counts) - known
        if extra:
            raise ValueError(f"{s} string uses symbols outside the alphabet: {sorted(extra)}")
    za = len(a) + len(symbols)
    zb = len(b) + len(symbols)
    total = 0.0
    for sym in symbols:
        p = (ca[sym] + 1) / za
        q = (cb[sym] + 1) / zb
        total += p * math.log(p / q)
    return total


@dataclass(frozen=True)
class SegmentationParams:
    """Fixed-length segmentation used by the behavioural distance."""

    segment_length: int

    def __post_init__(self) -> None:
        if self.segment_length < 1:
            raise ValueError(f"segment_length must be >= 1, got {self.segment_length}")

    def segment_count(self, total_length: int) -> int:
        return -(-total_length // self.segment_length)


def segmented_distance(a: str, b: str, params: SegmentationParams) -> int:
    """Sum of Levenshtein distances over aligned segments of the two strings.

    The final segment may be shorter when the length is not a multiple of the
    segment length; it is compared as-is.  With segment_length >= len(a) this
    is exactly the plain Levenshtein distance.
    """
    if len(a) != len(b):
        raise ValueError(f"segmented distance needs equal lengths, got {len(a)} and {len(b)}")
    n = params.segment_length
    if n >= len(a):
        return levenshtein(a, b)
    total = 0
    for start in range(0, len(a), n):
        total += levenshtein(a[start : start + n], b[start : start + n])
    return total


@dataclass(frozen=True)
class ArchiveEntry:
    genome: Genome
    bc: str


@dataclass
class Archive:
    """Append-only store of (genome, behaviour characteristic) pairs.

    Each evaluated individual is offered to the archive independently with
    `insertion_probability`.  Entries are never mutated or removed during a
    run.
    """

    insertion_probability: float
    entries: list[ArchiveEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0.0 <= self.insertion_probability <= 1.0:
            raise ValueError(
                f"insertion probability must lie in [0, 1], got {self.insertion_probability}"
            )

    def __len__(self) -> int:
        return len(self.entries)

    def bcs(self) -> list[str]:
        return [e.bc for e in self.entries]


def maybe_archive(archive: Archive, genome: Genome, bc: str, rng: DeterministicRng) -> Archive:
    """Append (genome, bc) with the archive's insertion probability.

    Always consumes exactly one uniform draw so the stream stays aligned
    regardless of the outcome.
    """
    if rng.uniform() < archive.insertion_probability:
        archive.entries.append(ArchiveEntry(genome, bc))
    return archive


def novelty_score(
    bc: str,
    archive: Archive | None,
    current_bcs,
    k: int,
    params: SegmentationParams,
    _cache: dict | None = None,
) -> float:
    """Mean segmented distance from `bc` to its k nearest neighbours.

    The neighbour pool is the archive's characteristics plus `current_bcs`,
    excluding `bc` itself by object identity (value-equal duplicates from
    other individuals still count).  With fewer than k neighbours the mean is
    over all of them.
    """
    if k < 1:
        raise ValueError(f"novelty k must be >= 1, got {k}")
    pool: list[str] = []
    if archive is not None:
        pool.extend(e.bc for e in archive.entries if e.bc is not bc)
    pool.extend(other for other in current_bcs if other is not bc)
    if not pool:
        raise ValueError("novelty score needs at least one neighbour")
    distances = sorted(_cached_distance(bc, other, params, _cache) for other in pool)
    nearest = distances[: min(k, len(distances))]
    return sum(nearest) / len(nearest)


def _cached_distance(a: str, b: str, params: SegmentationParams, cache: dict | None) -> int:
    if cache is None:
        return segmented_distance(a, b, params)
    key = (a, b) if a <= b else (b, a)
    hit = cache.get(key)
    if hit is None:
        hit = segmented_distance(a, b, params)
        cache[key] = hit
    return hit


def population_novelties(
    bcs: list[str], archive: Archive | None, k: int, params: SegmentationParams
) -> list[float]:
    """Novelty score of every population member, sharing one distance cache."""
    cache: dict = {}
    return [novelty_score(bc, archive, bcs, k, params, _cache=cache) for bc in bcs]


ARCHIVE_DUMP_HEADER = "seedevo-archive v1"


def dump_archive(archive: Archive, path) -> None:
    """Write `seed,seed,...|bc` lines under a versioned header."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(ARCHIVE_DUMP_HEADER + "\n")
        for entry in archive.entries:
            seeds = ",".join(str(s) for s in entry.genome.seeds)
            fh.write(f"{seeds}|{entry.bc}\n")
