"""Episode environments and the episode runner.

Environments follow a small gym-like contract: a factory builds one fresh
instance per episode from an episode seed, `reset()` returns the first
observation and `step(action)` returns (observation, reward, done).  Episodes
with equal seeds behave identically under identical action streams.

The built-in gridworld realizes a deceptive reward layout: a short rewarding
path to an exit competes with a long detour that collects more diamonds.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .behaviour import PAD_SYMBOL, action_symbol
from .genome import Genome
from .network import ArchitectureDescriptor, forward, select_action


class LayoutError(ValueError):
    """A gridworld layout file that fails validation."""


@dataclass(frozen=True)
class EvalResult:
    """Outcome of evaluating one individual: fitness plus its behaviour record.

    `bc` always has length equal to the frame budget; `lifespan` counts the
    frames actually consumed, so it equals the number of non-pad symbols.
    """

    genome: Genome | None
    game_score: float
    bc: str
    lifespan: int


class EnvironmentFactory:
    """Builds per-episode environment instances.

    Subclasses set `action_space_size`, `observation_length` and a default
    `max_frames`, and implement `make(episode_seed)`.
    """

    action_space_size: int
    observation_length: int
    max_frames: int

    def make(self, episode_seed: int):
        raise NotImplementedError


# Gridworld actions, in symbol order.
UP, DOWN, LEFT, RIGHT, NOOP = range(5)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1), NOOP: (0, 0)}

_TILE_WALL = "#"
_TILE_FLOOR = "."
_TILE_DIAMOND = "D"
_TILE_EXIT = "E"
_TILE_START = "P"
_LAYOUT_ALPHABET = _TILE_WALL + _TILE_FLOOR + _TILE_DIAMOND + _TILE_EXIT + _TILE_START


# Observation channels per cell, in order: the tile alphabet with the agent
# drawn on top of the tile it occupies.
_CH_WALL, _CH_FLOOR, _CH_DIAMOND, _CH_EXIT, _CH_AGENT = range(5)
_CHANNELS = 5

# Static scenery (walls, floor, exits) is scaled well below the dynamic
# channels (remaining diamonds, the agent marker) so that what CHANGES during
# an episode dominates a policy's responses at Glorot weight scales; with ~100
# active inputs, equal scaling would bury single-channel effects under the
# static background.
_STATIC_TILE_SCALE = 0.05
_DYNAMIC_TILE_SCALE = 1.0


@dataclass(frozen=True)
class GridWorld:
    """Parsed, validated gridworld layout (static; episode state lives in
    GridWorldEpisode)."""

    width: int
    height: int
    walls: frozenset
    diamonds: frozenset
    exits: frozenset
    start: tuple[int, int]

    @property
    def observation_length(self) -> int:
        # 5 one-hot tile channels per cell plus the normalized agent position.
        return _CHANNELS * self.width * self.height + 2


def load_layout(text: str, source: str = "<layout>") -> GridWorld:
    """Parse a layout grid over the `#.DEP` alphabet; `!` lines are comments.

    Raises LayoutError with line/column coordinates for non-rectangular grids,
    unknown characters, missing or duplicate start cells, missing exits, or
    non-wall borders.
    """

    def fail(message: str) -> LayoutError:
        return LayoutError(f"{source}: {message}")

    rows: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("!"):
            continue
        if not raw.strip():
            continue
        rows.append(raw)
        for col, ch in enumerate(raw, start=1):
            if ch not in _LAYOUT_ALPHABET:
                raise fail(f"line {lineno}, column {col}: unknown tile {ch!r}")
    if not rows:
        raise fail("no grid rows found")
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise fail(f"row {r + 1} has {len(row)} columns, expected {width}")
    height = len(rows)
    if width < 3 or height < 3:
        raise fail(f"grid {width}x{height} too small for a walled interior")

    walls, diamonds, exits, starts = set(), set(), set(), []
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == _TILE_WALL:
                walls.add((r, c))
            elif ch == _TILE_DIAMOND:
                diamonds.add((r, c))
            elif ch == _TILE_EXIT:
                exits.add((r, c))
            elif ch == _TILE_START:
                starts.append((r, c))
    for r in range(height):
        for c in (0, width - 1):
            if (r, c) not in walls:
                raise fail(f"row {r + 1}, column {c + 1}: border must be wall")
    for c in range(width):
        for r in (0, height - 1):
            if (r, c) not in walls:
                raise fail(f"row {r + 1}, column {c + 1}: border must be wall")
    if len(starts) != 1:
        raise fail(f"expected exactly one start cell, found {len(starts)}")
    if not exits:
        raise fail("layout has no exit cell")
    return GridWorld(
        width=width,
        height=height,
        walls=frozenset(walls),
        diamonds=frozenset(diamonds),
        exits=frozenset(exits),
        start=starts[0],
    )


@lru_cache(maxsize=64)
def _base_observation(grid: GridWorld) -> np.ndarray:
    """Agent-free one-hot tile template for a grid, position entries zeroed."""
    obs = np.zeros(grid.observation_length, dtype=np.float32)
    i = 0
    for r in range(grid.height):
        for c in range(grid.width):
            cell = (r, c)
            if cell in grid.walls:
                obs[i + _CH_WALL] = _STATIC_TILE_SCALE
            elif cell in grid.diamonds:
                obs[i + _CH_DIAMOND] = _DYNAMIC_TILE_SCALE
            elif cell in grid.exits:
                obs[i + _CH_EXIT] = _STATIC_TILE_SCALE
            else:
                obs[i + _CH_FLOOR] = _STATIC_TILE_SCALE
            i += _CHANNELS
    return obs


class GridWorldEpisode:
    """One gridworld episode: move, collect diamonds, reach an exit.

    Rewards: +1 per diamond on first entry, +1 on entering an exit (which
    ends the episode).  Moving into a wall keeps the position; noop just
    consumes a frame.  Dynamics are deterministic; the episode seed is
    accepted for contract uniformity and ignored.
    """

    def __init__(self, grid: GridWorld, episode_seed: int = 0) -> None:
        self.grid = grid
        self.pos = grid.start
        self.remaining = set(grid.diamonds)
        self.score = 0.0
        self.done = False
        self._obs = _base_observation(grid).copy()
        self._draw_agent()

    def reset(self) -> np.ndarray:
        self.pos = self.grid.start
        self.remaining = set(self.grid.diamonds)
        self.score = 0.0
        self.done = False
        self._obs = _base_observation(self.grid).copy()
        self._draw_agent()
        return self.observe()

    def _cell_base(self, cell: tuple[int, int]) -> int:
        return _CHANNELS * (cell[0] * self.grid.width + cell[1])

    def _draw_agent(self) -> None:
        base = self._cell_base(self.pos)
        self._obs[base : base + _CHANNELS] = 0.0
        self._obs[base + _CH_AGENT] = _DYNAMIC_TILE_SCALE
        self._obs[-2] = self.pos[0] / (self.grid.height - 1)
        self._obs[-1] = self.pos[1] / (self.grid.width - 1)

    def observe(self) -> np.ndarray:
        """Flattened one-hot tile map plus normalized agent position.

        Per cell, row-major, the channel order is (wall, floor, diamond,
        exit, agent); exactly one channel is set per cell.  The agent channel
        marks the occupied cell, whose tile beneath is always floor (diamonds
        are collected on entry); collected diamonds read as floor.  Static
        scenery channels carry 0.05, the diamond and agent channels 1.0 (see
        _STATIC_TILE_SCALE).  The final two entries are row/(height-1) and
        col/(width-1).  Returns the episode's live buffer; callers consume it
        before the next step.
        """
        return self._obs

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("episode already finished")
        if action not in _MOVES:
            raise ValueError(f"invalid gridworld action {action}")
        dr, dc = _MOVES[action]
        target = (self.pos[0] + dr, self.pos[1] + dc)
        reward = 0.0
        if target not in self.grid.walls:
            old = self._cell_base(self.pos)
            self._obs[old + _CH_AGENT] = 0.0
            self._obs[old + _CH_FLOOR] = _STATIC_TILE_SCALE  # vacated cells are floor
            self.pos = target
            if target in self.remaining:
                self.remaining.discard(target)
                reward += 1.0
            if target in self.grid.exits:
                reward += 1.0
                self.done = True
            self._draw_agent()
        self.score += reward
        return self.observe(), reward, self.done

    def render(self) -> str:
        """Ascii frame with `@` marking the agent."""
        rows = []
        for r in range(self.grid.height):
            row = []
            for c in range(self.grid.width):
                cell = (r, c)
                if cell == self.pos:
                    row.append("@")
                elif cell in self.grid.walls:
                    row.append(_TILE_WALL)
                elif cell in self.remaining:
                    row.append(_TILE_DIAMOND)
                elif cell in self.grid.exits:
                    row.append(_TILE_EXIT)
                else:
                    row.append(_TILE_FLOOR)
            rows.append("".join(row))
        return "\n".join(rows)


class GridWorldFactory(EnvironmentFactory):
    def __init__(self, grid: GridWorld, max_frames: int = 64) -> None:
        self.grid = grid
        self.action_space_size = len(_MOVES)
        self.observation_length = grid.observation_length
        self.max_frames = max_frames

    def make(self, episode_seed: int) -> GridWorldEpisode:
        return GridWorldEpisode(self.grid, episode_seed)


class _ConstantRewardEpisode:
    """Pays a fixed score on the first frame and never terminates early."""

    def __init__(self, obs: np.ndarray, score: float) -> None:
        self._obs = obs
        self._score = score
        self._frames = 0

    def reset(self) -> np.ndarray:
        self._frames = 0
        return self._obs

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        self._frames += 1
        reward = self._score if self._frames == 1 else 0.0
        return self._obs, reward, False


class ConstantRewardFactory(EnvironmentFactory):
    """Stub: every policy scores `score`, regardless of behaviour."""

    def __init__(self, score: float = 1.0, max_frames: int = 16) -> None:
        self.score = score
        self.action_space_size = 3
        self.observation_length = 4
        self.max_frames = max_frames
        self._obs = np.array([1.0, 0.5, -0.5, 0.25], dtype=np.float32)

    def make(self, episode_seed: int) -> _ConstantRewardEpisode:
        return _ConstantRewardEpisode(self._obs, self.score)


class _CountActionZeroEpisode:
    """Pays +1 for every frame on which the agent presses action 0."""

    def __init__(self, max_frames: int) -> None:
        self._max_frames = max_frames
        self._frames = 0

    def _observe(self) -> np.ndarray:
        return np.array([1.0, self._frames / self._max_frames], dtype=np.float32)

    def reset(self) -> np.ndarray:
        self._frames = 0
        return self._observe()

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        self._frames += 1
        reward = 1.0 if action == 0 else 0.0
        return self._observe(), reward, False


class CountActionZeroFactory(EnvironmentFactory):
    """Stub with a trivially learnable signal: score = frames spent on action 0."""

    def __init__(self, max_frames: int = 16) -> None:
        self.action_space_size = 3
        self.observation_length = 2
        self.max_frames = max_frames

    def make(self, episode_seed: int) -> _CountActionZeroEpisode:
        return _CountActionZeroEpisode(self.max_frames)


def builtin_layout_text(name: str = "deceptive") -> str:
    """Text of a layout shipped with the package."""
    ref = resources.files("seedevo.data").joinpath(f"{name}.txt")
    if not ref.is_file():
        raise LayoutError(f"no built-in layout named {name!r}")
    return ref.read_text(encoding="ascii")


def builtin_gridworld(name: str = "deceptive", max_frames: int = 64) -> GridWorldFactory:
    grid = load_layout(builtin_layout_text(name), source=f"builtin:{name}")
    return GridWorldFactory(grid, max_frames=max_frames)


def stub_factory(name: str) -> EnvironmentFactory:
    if name == "const":
        return ConstantRewardFactory()
    if name == "count0":
        return CountActionZeroFactory()
    raise LayoutError(f"unknown stub environment {name!r} (known: const, count0)")


def check_compatible(arch: ArchitectureDescriptor, factory: EnvironmentFactory) -> None:
    """Reject architecture/environment shape mismatches before stepping."""
    in_len = int(np.prod(arch.input_shape))
    if in_len != factory.observation_length:
        raise ValueError(
            f"architecture input length {in_len} does not match "
            f"environment observation length {factory.observation_length}"
        )
    if arch.output_units != factory.action_space_size:
        raise ValueError(
            f"architecture output units {arch.output_units} do not match "
            f"environment action space {factory.action_space_size}"
        )


def run_episode(
    weights: np.ndarray,
    arch: ArchitectureDescriptor,
    env_factory: EnvironmentFactory,
    episode_seed: int,
    max_frames: int,
    genome: Genome | None = None,
) -> EvalResult:
    """Run one episode of at most `max_frames` frames and record the behaviour.

    The behaviour characteristic is the emitted action symbols padded with
    `x` to exactly `max_frames`; lifespan is the number of frames consumed.
    """
    if max_frames < 1:
        raise ValueError(f"max_frames must be >= 1, got {max_frames}")
    check_compatible(arch, env_factory)
    env = env_factory.make(episode_seed)
    obs = env.reset()
    symbols: list[str] = []
    score = 0.0
    for _ in range(max_frames):
        action = select_action(forward(weights, arch, obs))
        obs, reward, done = env.step(action)
        score += reward
        symbols.append(action_symbol(action))
        if done:
            break
    lifespan = len(symbols)
    bc = "".join(symbols) + PAD_SYMBOL * (max_frames - lifespan)
    return EvalResult(genome=genome, game_score=score, bc=bc, lifespan=lifespan)
