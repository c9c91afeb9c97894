"""Feed-forward policy networks: architecture descriptors, forward pass, action choice.

Weight vectors are flat float32 arrays laid out layer by layer, weights first
then biases.  Dense weights are stored as a (fan_in, fan_out) matrix in row
major order; convolution filters as (kernel, kernel, channels_in, channels_out)
in row major order.  Hidden layers use ReLU, the output layer is linear.
Convolutions are valid (no padding) with the descriptor's stride.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class DenseSpec:
    units: int


@dataclass(frozen=True)
class LayerParams:
    """Parameter bookkeeping for one layer of a descriptor."""

    name: str
    weight_count: int
    bias_count: int
    fan_in: int
    fan_out: int

    @property
    def count(self) -> int:
        return self.weight_count + self.bias_count

    @property
    def glorot_std(self) -> float:
        return math.sqrt(2.0 / (self.fan_in + self.fan_out))


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """Shape of a feed-forward policy network.

    `input_shape` is either (length,) for flat observations or (h, w, c) for
    image-like ones.  Conv layers are only legal while the running shape is
    3-d; the first dense layer flattens.  The output layer is a linear dense
    layer with one unit per environment action.
    """

    input_shape: tuple[int, ...]
    hidden: tuple[ConvSpec | DenseSpec, ...]
    output_units: int

    def __post_init__(self) -> None:
        if len(self.input_shape) not in (1, 3):
            raise ValueError(
                f"input shape must have 1 or 3 dimensions, got {self.input_shape}"
            )
        if any(d < 1 for d in self.input_shape):
            raise ValueError(f"input dimensions must be >= 1, got {self.input_shape}")
        if self.output_units < 1:
            raise ValueError(f"output_units must be >= 1, got {self.output_units}")
        for i, spec in enumerate(self.hidden):
            if isinstance(spec, ConvSpec):
                if min(spec.filters, spec.kernel, spec.stride) < 1:
                    raise ValueError(f"layer {i}: conv parameters must be >= 1, got {spec}")
            elif isinstance(spec, DenseSpec):
                if spec.units < 1:
                    raise ValueError(f"layer {i}: dense units must be >= 1, got {spec}")
            else:
                raise ValueError(f"layer {i}: unknown layer spec {spec!r}")
        self.layer_shapes()  # raises if a conv underflows or follows a dense

    def layer_shapes(self) -> list[tuple[int, ...]]:
        """Output shape after each hidden layer and the output layer."""
        return list(_layer_shapes(self))

    def param_layout(self) -> list[LayerParams]:
        """Per-layer weight/bias counts and Glorot fans, in weight-vector order."""
        return list(_param_layout(self))

    def param_count(self) -> int:
        return sum(p.count for p in _param_layout(self))


@lru_cache(maxsize=256)
def _layer_shapes(arch: ArchitectureDescriptor) -> tuple[tuple[int, ...], ...]:
    shape = arch.input_shape
    shapes: list[tuple[int, ...]] = []
    for i, spec in enumerate(arch.hidden):
        if isinstance(spec, ConvSpec):
            if len(shape) != 3:
                raise ValueError(f"layer {i}: conv requires a 3-d running shape, have {shape}")
            h, w, _ = shape
            oh = (h - spec.kernel) // spec.stride + 1
            ow = (w - spec.kernel) // spec.stride + 1
            if oh < 1 or ow < 1:
                raise ValueError(
                    f"layer {i}: conv kernel {spec.kernel} does not fit input {h}x{w}"
                )
            shape = (oh, ow, spec.filters)
        else:
            shape = (spec.units,)
        shapes.append(shape)
    shapes.append((arch.output_units,))
    return tuple(shapes)


@lru_cache(maxsize=256)
def _param_layout(arch: ArchitectureDescriptor) -> tuple[LayerParams, ...]:
    shapes = _layer_shapes(arch)
    layout: list[LayerParams] = []
    shape = arch.input_shape
    for i, spec in enumerate(arch.hidden):
        if isinstance(spec, ConvSpec):
            _, _, c_in = shape
            area = spec.kernel * spec.kernel
            layout.append(
                LayerParams(
                    name=f"conv{i}",
                    weight_count=area * c_in * spec.filters,
                    bias_count=spec.filters,
                    fan_in=c_in * area,
                    fan_out=spec.filters * area,
                )
            )
        else:
            fan_in = int(np.prod(shape))
            layout.append(
                LayerParams(
                    name=f"dense{i}",
                    weight_count=fan_in * spec.units,
                    bias_count=spec.units,
                    fan_in=fan_in,
                    fan_out=spec.units,
                )
            )
        shape = shapes[i]
    fan_in = int(np.prod(shape))
    layout.append(
        LayerParams(
            name="output",
            weight_count=fan_in * arch.output_units,
            bias_count=arch.output_units,
            fan_in=fan_in,
            fan_out=arch.output_units,
        )
    )
    return tuple(layout)


@lru_cache(maxsize=256)
def _forward_plan(arch: ArchitectureDescriptor):
    """Precomputed slicing plan for `forward`: (input length, total params,
    per-layer (spec, fan_in, fan_out, weight_end, bias_end))."""
    steps = []
    offset = 0
    specs: list[ConvSpec | DenseSpec] = list(arch.hidden) + [DenseSpec(arch.output_units)]
    for spec, params in zip(specs, _param_layout(arch)):
        w_end = offset + params.weight_count
        b_end = offset + params.count
        steps.append((spec, offset, w_end, b_end, params.fan_in, params.fan_out))
        offset = b_end
    return int(np.prod(arch.input_shape)), offset, tuple(steps)


def format_architecture(arch: ArchitectureDescriptor) -> str:
    """Render the canonical descriptor string; inverse of `parse_architecture`."""
    parts = ["in:" + "x".join(str(d) for d in arch.input_shape)]
    for spec in arch.hidden:
        if isinstance(spec, ConvSpec):
            parts.append(f"conv:{spec.filters},{spec.kernel},{spec.stride}")
        else:
            parts.append(f"dense:{spec.units}")
    parts.append(f"out:{arch.output_units}")
    return ";".join(parts)


def parse_architecture(text: str) -> ArchitectureDescriptor:
    """Parse a descriptor string like `in:84x84x4;conv:32,8,4;dense:512;out:18`."""
    segments = text.strip().split(";")
    if len(segments) < 2:
        raise ValueError(f"architecture {text!r}: need at least in: and out: segments")

    def ints(raw: str, where: str) -> list[int]:
        try:
            return [int(tok) for tok in raw.split(",")]
        except ValueError:
            raise ValueError(f"architecture segment {where!r}: expected integers") from None

    head = segments[0]
    if not head.startswith("in:"):
        raise ValueError(f"architecture {text!r}: first segment must be in:<dims>")
    try:
        input_shape = tuple(int(tok) for tok in head[3:].split("x"))
    except ValueError:
        raise ValueError(f"architecture segment {head!r}: expected in:<d1>x<d2>...") from None

    tail = segments[-1]
    if not tail.startswith("out:"):
        raise ValueError(f"architecture {text!r}: last segment must be out:<actions>")
    (output_units,) = ints(tail[4:], tail)

    hidden: list[ConvSpec | DenseSpec] = []
    for seg in segments[1:-1]:
        if seg.startswith("conv:"):
            vals = ints(seg[5:], seg)
            if len(vals) != 3:
                raise ValueError(f"architecture segment {seg!r}: conv takes filters,kernel,stride")
            hidden.append(ConvSpec(*vals))
        elif seg.startswith("dense:"):
            vals = ints(seg[6:], seg)
            if len(vals) != 1:
                raise ValueError(f"architecture segment {seg!r}: dense takes a unit count")
            hidden.append(DenseSpec(vals[0]))
        else:
            raise ValueError(f"architecture segment {seg!r}: expected conv: or dense:")
    return ArchitectureDescriptor(input_shape, tuple(hidden), output_units)


def forward(weights: np.ndarray, arch: ArchitectureDescriptor, obs) -> np.ndarray:
    """Deterministic forward pass; returns one linear score per action."""
    in_len, total, steps = _forward_plan(arch)
    weights = np.asarray(weights, dtype=np.float32)
    if weights.ndim != 1 or weights.size != total:
        raise ValueError(
            f"weight vector has {weights.size} entries, architecture needs {total}"
        )
    x = np.asarray(obs, dtype=np.float32).reshape(-1)
    if x.size != in_len:
        raise ValueError(
            f"observation has {x.size} entries, input shape {arch.input_shape} needs {in_len}"
        )
    x = x.reshape(arch.input_shape)

    last = len(steps) - 1
    for i, (spec, w_start, w_end, b_end, fan_in, fan_out) in enumerate(steps):
        w = weights[w_start:w_end]
        b = weights[w_end:b_end]
        if isinstance(spec, ConvSpec):
            x = _conv2d_valid(x, w, b, spec)
        else:
            x = x.reshape(-1) @ w.reshape(fan_in, fan_out) + b
        if i < last:
            x = np.maximum(x, np.float32(0.0))
    return x


def _conv2d_valid(x: np.ndarray, w: np.ndarray, b: np.ndarray, spec: ConvSpec) -> np.ndarray:
    k, s = spec.kernel, spec.stride
    c_in = x.shape[2]
    win = sliding_window_view(x, (k, k), axis=(0, 1))[::s, ::s]  # (oh, ow, c, k, k)
    oh, ow = win.shape[0], win.shape[1]
    cols = win.transpose(0, 1, 3, 4, 2).reshape(oh * ow, k * k * c_in)
    out = cols @ w.reshape(k * k * c_in, spec.filters) + b
    return out.reshape(oh, ow, spec.filters)


def select_action(scores) -> int:
    """Index of the highest score; ties go to the lowest index."""
    arr = np.asarray(scores, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("empty action-score vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite action score in {arr!r}")
    return int(np.argmax(arr))
