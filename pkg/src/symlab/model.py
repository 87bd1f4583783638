"""Fully convolutional autoencoder and its unrolled iterated application.

Encoder: 16x3x3 s2 p1 -> 32x3x3 s2 p1 -> 64x7x7 s1 p1.
Decoder: the mirrored transposed convolutions, 64->32->16->1.  Every layer
(including the last) is followed by ReLU, so outputs are non-negative.

The stride-1 decoder layer cannot take output padding (the engine rejects
output_padding >= stride), so output padding is 1 only on the stride-2
layers; that is the unique assignment for which output dims equal input
dims at every legal grid size.

Because there are no dense layers, the same parameters accept any grid
with both sides divisible by 4 and at least 20 (the 7x7 bottleneck needs
the quarter-resolution map to be at least 5 wide).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (
    ConvSpec,
    conv2d_backward,
    conv2d_forward,
    conv_transpose2d_backward,
    conv_transpose2d_forward,
    relu_backward,
    relu_forward,
    xavier_uniform_init,
)


class SizeContractError(ValueError):
    """Input grid violates the fully convolutional size contract."""


@dataclass(frozen=True)
class LayerSpec:
    name: str
    transposed: bool
    conv: ConvSpec

    @property
    def weight_dims(self) -> tuple[int, int, int, int]:
        c = self.conv
        if self.transposed:
            return (c.in_channels, c.out_channels, *c.kernel)
        return (c.out_channels, c.in_channels, *c.kernel)


DEFAULT_ARCHITECTURE: tuple[LayerSpec, ...] = (
    LayerSpec("e1", False, ConvSpec(1, 16, (3, 3), stride=2, padding=1)),
    LayerSpec("e2", False, ConvSpec(16, 32, (3, 3), stride=2, padding=1)),
    LayerSpec("e3", False, ConvSpec(32, 64, (7, 7), stride=1, padding=1)),
    LayerSpec("d1", True, ConvSpec(64, 32, (7, 7), stride=1, padding=1)),
    LayerSpec("d2", True, ConvSpec(32, 16, (3, 3), stride=2, padding=1, output_padding=1)),
    LayerSpec("d3", True, ConvSpec(16, 1, (3, 3), stride=2, padding=1, output_padding=1)),
)


def reduced_architecture() -> tuple[LayerSpec, ...]:
    """Same geometry with tiny channel counts, for gradient-check tests."""
    return (
        LayerSpec("e1", False, ConvSpec(1, 2, (3, 3), stride=2, padding=1)),
        LayerSpec("e2", False, ConvSpec(2, 3, (3, 3), stride=2, padding=1)),
        LayerSpec("e3", False, ConvSpec(3, 4, (7, 7), stride=1, padding=1)),
        LayerSpec("d1", True, ConvSpec(4, 3, (7, 7), stride=1, padding=1)),
        LayerSpec("d2", True, ConvSpec(3, 2, (3, 3), stride=2, padding=1, output_padding=1)),
        LayerSpec("d3", True, ConvSpec(2, 1, (3, 3), stride=2, padding=1, output_padding=1)),
    )


@dataclass
class ModelParams:
    """Weights and biases for every layer, keyed by layer name."""

    architecture: tuple[LayerSpec, ...]
    weights: dict[str, np.ndarray]
    biases: dict[str, np.ndarray]

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.architecture,
            {k: v.astype(dtype) for k, v in self.weights.items()},
            {k: v.astype(dtype) for k, v in self.biases.items()},
        )

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.architecture,
            {k: v.copy() for k, v in self.weights.items()},
            {k: v.copy() for k, v in self.biases.items()},
        )


@dataclass
class ForwardTrace:
    """Per-layer input and pre-activation tensors for one forward pass."""

    inputs: list[np.ndarray]
    preacts: list[np.ndarray]


ParamGrads = dict[str, tuple[np.ndarray, np.ndarray]]   # name -> (grad_w, grad_b)


def check_size_contract(h: int, w: int) -> None:
    if h % 4 or w % 4 or h < 20 or w < 20:
        raise SizeContractError(
            f"grid {h}x{w} violates the size contract: both sides must be "
            f"divisible by 4 and at least 20"
        )


def init_params(
    rng: np.random.Generator,
    architecture: tuple[LayerSpec, ...] = DEFAULT_ARCHITECTURE,
    dtype=np.float32,
) -> ModelParams:
    """Xavier-uniform weights, zero biases."""
    weights, biases = {}, {}
    for layer in architecture:
        weights[layer.name] = xavier_uniform_init(rng, layer.weight_dims, dtype)
        out_c = layer.conv.out_channels
        biases[layer.name] = np.zeros(out_c, dtype=dtype)
    return ModelParams(architecture, weights, biases)


def forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """One pass through all layers; returns the output and its trace."""
    check_size_contract(x.shape[2], x.shape[3])
    trace = ForwardTrace([], [])
    cur = x
    for layer in params.architecture:
        w = params.weights[layer.name]
        b = params.biases[layer.name]
        if layer.transposed:
            pre = conv_transpose2d_forward(cur, w, b, layer.conv)
        else:
            pre = conv2d_forward(cur, w, b, layer.conv)
        trace.inputs.append(cur)
        trace.preacts.append(pre)
        cur = relu_forward(pre)
    return cur, trace


def backward(
    params: ModelParams, trace: ForwardTrace, grad_out: np.ndarray,
    grads: ParamGrads | None = None,
) -> tuple[np.ndarray, ParamGrads]:
    """Backprop one pass; returns grad wrt the pass input.

    Parameter gradients are accumulated into ``grads`` when given, which
    is how the unrolled chain sums contributions across applications.
    """
    if grads is None:
        grads = {}
    g = grad_out
    for layer, inp, pre in zip(
        reversed(params.architecture), reversed(trace.inputs), reversed(trace.preacts)
    ):
        g = relu_backward(g, pre)
        w = params.weights[layer.name]
        if layer.transposed:
            g, gw, gb = conv_transpose2d_backward(g, inp, w, layer.conv)
        else:
            g, gw, gb = conv2d_backward(g, inp, w, layer.conv)
        if layer.name in grads:
            ow, ob = grads[layer.name]
            grads[layer.name] = (ow + gw, ob + gb)
        else:
            grads[layer.name] = (gw, gb)
    return g, grads


def apply_iterated(
    params: ModelParams, x: np.ndarray, k: int
) -> tuple[list[np.ndarray], list[ForwardTrace]]:
    """Feed the raw output back as input k times; k=1 is a plain forward."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    outputs, traces = [], []
    cur = x
    for _ in range(k):
        cur, trace = forward(params, cur)
        outputs.append(cur)
        traces.append(trace)
    return outputs, traces


def backward_iterated(
    params: ModelParams, traces: list[ForwardTrace], grad_final: np.ndarray
) -> ParamGrads:
    """Full backpropagation through the unrolled chain.

    The loss is attached only to the final output; earlier applications
    receive gradient through the chain rule, and parameter gradients are
    summed across every application.
    """
    grads: ParamGrads = {}
    g = grad_final
    for trace in reversed(traces):
        g, grads = backward(params, trace, g, grads)
    return grads
