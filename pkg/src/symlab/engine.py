"""Minimal dense-tensor numerical core.

All tensors are numpy arrays of rank 4 with layout (batch, channel, row,
column).  Convolutions use the cross-correlation convention (no kernel
flip) with zero padding.  Gradients are hand-derived; everything reduces
to strided window extraction plus one einsum (BLAS) contraction, so the
same code runs in float32 for training and float64 for gradient checks.

Weight layouts:
  * conv2d:            (out_channels, in_channels, kh, kw)
  * conv_transpose2d:  (in_channels, out_channels, kh, kw)

The transposed convolution is exactly the adjoint of ``conv2d_forward``
with the same weights and spec, which is what the adjointness tests pin
down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ConfigurationError(ValueError):
    """Raised when tensor dims and a ConvSpec disagree."""


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one (possibly transposed) convolution layer."""

    in_channels: int
    out_channels: int
    kernel: tuple[int, int]
    stride: int = 1
    padding: int = 0
    output_padding: int = 0

    def __post_init__(self):
        kh, kw = self.kernel
        if self.stride < 1:
            raise ConfigurationError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ConfigurationError(f"padding must be >= 0, got {self.padding}")
        if self.output_padding < 0 or self.output_padding >= self.stride:
            raise ConfigurationError(
                f"output_padding must be in [0, stride), got "
                f"{self.output_padding} with stride {self.stride}"
            )
        if kh < 1 or kw < 1:
            raise ConfigurationError(f"kernel dims must be >= 1, got {self.kernel}")

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        """Output spatial dims of the forward (non-transposed) convolution."""
        kh, kw = self.kernel
        s, p = self.stride, self.padding
        if h + 2 * p < kh or w + 2 * p < kw:
            raise ConfigurationError(
                f"padded input {h + 2 * p}x{w + 2 * p} smaller than kernel {kh}x{kw}"
            )
        return (h + 2 * p - kh) // s + 1, (w + 2 * p - kw) // s + 1

    def transposed_out_size(self, h: int, w: int) -> tuple[int, int]:
        """Output spatial dims of the transposed convolution."""
        kh, kw = self.kernel
        s, p, op = self.stride, self.padding, self.output_padding
        oh = (h - 1) * s - 2 * p + kh + op
        ow = (w - 1) * s - 2 * p + kw + op
        if oh < 1 or ow < 1:
            raise ConfigurationError(
                f"transposed output would be {oh}x{ow} for input {h}x{w}"
            )
        return oh, ow


def _check_input(x: np.ndarray, channels: int, what: str) -> None:
    if x.ndim != 4:
        raise ConfigurationError(f"{what} must be rank 4, got shape {x.shape}")
    if x.shape[1] != channels:
        raise ConfigurationError(
            f"{what} has {x.shape[1]} channels, spec expects {channels}"
        )


def _check_weights(w: np.ndarray, c0: int, c1: int, kernel: tuple[int, int]) -> None:
    if w.shape != (c0, c1, *kernel):
        raise ConfigurationError(
            f"weights shape {w.shape} does not match expected {(c0, c1, *kernel)}"
        )


def _pad2d(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _windows(xp: np.ndarray, kernel: tuple[int, int], stride: int) -> np.ndarray:
    """Strided view (n, c, oh, ow, kh, kw) of all kernel-sized patches."""
    win = sliding_window_view(xp, kernel, axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, spec: ConvSpec
) -> np.ndarray:
    """Strided cross-correlation with zero padding; bias per output channel."""
    _check_input(x, spec.in_channels, "conv2d input")
    _check_weights(weights, spec.out_channels, spec.in_channels, spec.kernel)
    oh, ow = spec.out_size(x.shape[2], x.shape[3])
    win = _windows(_pad2d(x, spec.padding), spec.kernel, spec.stride)
    win = win[:, :, :oh, :ow]
    out = np.einsum("nchwij,ocij->nohw", win, weights, optimize=True)
    return out + bias.reshape(1, -1, 1, 1)


def _correlate_adjoint(
    g: np.ndarray, weights: np.ndarray, spec: ConvSpec, out_h: int, out_w: int
) -> np.ndarray:
    """Adjoint of the strided correlation: maps output-shaped g back to an
    (out_h, out_w) input-shaped tensor, summing over output channels.

    ``weights`` is in conv layout (oc, ic, kh, kw); g has oc channels.
    """
    kh, kw = spec.kernel
    s, p = spec.stride, spec.padding
    gh, gw = g.shape[2], g.shape[3]
    # Full correlation of the stride-dilated g with the flipped kernel.
    full_h = (gh - 1) * s + 1 + 2 * (kh - 1)
    full_w = (gw - 1) * s + 1 + 2 * (kw - 1)
    z = np.zeros((g.shape[0], g.shape[1], full_h, full_w), dtype=g.dtype)
    z[:, :, kh - 1 : kh - 1 + (gh - 1) * s + 1 : s,
         kw - 1 : kw - 1 + (gw - 1) * s + 1 : s] = g
    wf = weights[:, :, ::-1, ::-1]
    win = _windows(z, (kh, kw), 1)
    core = np.einsum("nohwij,ocij->nchw", win, wf, optimize=True)
    # core covers (gh-1)*s + kh rows; the target padded canvas has
    # out_h + 2p rows, any excess rows at the bottom/right carry zero
    # gradient (they were dropped by the floor in the forward size).
    canvas = np.zeros(
        (g.shape[0], weights.shape[1], out_h + 2 * p, out_w + 2 * p), dtype=g.dtype
    )
    ch = min(core.shape[2], out_h + 2 * p)
    cw = min(core.shape[3], out_w + 2 * p)
    canvas[:, :, :ch, :cw] = core[:, :, :ch, :cw]
    return canvas[:, :, p : p + out_h, p : p + out_w]


def _grad_weights(
    inp: np.ndarray, grad_out: np.ndarray, spec: ConvSpec
) -> np.ndarray:
    """d loss / d weights for out = correlate(inp, W): patch-gradient contraction."""
    oh, ow = grad_out.shape[2], grad_out.shape[3]
    win = _windows(_pad2d(inp, spec.padding), spec.kernel, spec.stride)
    win = win[:, :, :oh, :ow]
    return np.einsum("nohw,nchwij->ocij", grad_out, win, optimize=True)


def conv2d_backward(
    grad_out: np.ndarray, x: np.ndarray, weights: np.ndarray, spec: ConvSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact analytic gradients of conv2d_forward.

    Returns (grad_input, grad_weights, grad_bias).
    """
    _check_input(x, spec.in_channels, "conv2d input")
    _check_weights(weights, spec.out_channels, spec.in_channels, spec.kernel)
    oh, ow = spec.out_size(x.shape[2], x.shape[3])
    if grad_out.shape != (x.shape[0], spec.out_channels, oh, ow):
        raise ConfigurationError(
            f"grad_out shape {grad_out.shape} does not match forward output "
            f"{(x.shape[0], spec.out_channels, oh, ow)}"
        )
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    gw = _grad_weights(x, grad_out, spec)
    gx = _correlate_adjoint(grad_out, weights, spec, x.shape[2], x.shape[3])
    return gx, gw, grad_bias


def conv_transpose2d_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, spec: ConvSpec
) -> np.ndarray:
    """Transposed convolution: the adjoint of conv2d_forward plus bias.

    ``spec.in_channels``/``out_channels`` describe this op's own input and
    output; weights are (in_channels, out_channels, kh, kw).
    """
    _check_input(x, spec.in_channels, "conv_transpose2d input")
    _check_weights(weights, spec.in_channels, spec.out_channels, spec.kernel)
    oh, ow = spec.transposed_out_size(x.shape[2], x.shape[3])
    # The adjoint helper wants conv-layout weights where x plays the role of
    # the conv output; that is exactly the stored (in, out, kh, kw) layout.
    adj_spec = ConvSpec(
        in_channels=spec.out_channels,
        out_channels=spec.in_channels,
        kernel=spec.kernel,
        stride=spec.stride,
        padding=spec.padding,
    )
    out = _correlate_adjoint(x, weights, adj_spec, oh, ow)
    return out + bias.reshape(1, -1, 1, 1)


def conv_transpose2d_backward(
    grad_out: np.ndarray, x: np.ndarray, weights: np.ndarray, spec: ConvSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv_transpose2d_forward; mirror of conv2d_backward."""
    _check_input(x, spec.in_channels, "conv_transpose2d input")
    _check_weights(weights, spec.in_channels, spec.out_channels, spec.kernel)
    oh, ow = spec.transposed_out_size(x.shape[2], x.shape[3])
    if grad_out.shape != (x.shape[0], spec.out_channels, oh, ow):
        raise ConfigurationError(
            f"grad_out shape {grad_out.shape} does not match forward output "
            f"{(x.shape[0], spec.out_channels, oh, ow)}"
        )
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    # By adjointness <g, convT(x; W)> = <conv(g; W), x>, so the input
    # gradient is the plain strided correlation of grad_out and the weight
    # gradient is the conv weight gradient with the two roles swapped.
    adj_spec = ConvSpec(
        in_channels=spec.out_channels,
        out_channels=spec.in_channels,
        kernel=spec.kernel,
        stride=spec.stride,
        padding=spec.padding,
    )
    zero_bias = np.zeros(spec.in_channels, dtype=grad_out.dtype)
    gx = conv2d_forward(grad_out, weights, zero_bias, adj_spec)
    gx = gx[:, :, : x.shape[2], : x.shape[3]]
    gw = _grad_weights(grad_out, x, adj_spec)
    return gx, gw, grad_bias


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Passes gradient where x > 0; the kink at exactly 0 gets 0."""
    return np.where(x > 0, grad_out, 0)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of squared differences over every element, with its gradient."""
    if pred.shape != target.shape:
        raise ConfigurationError(
            f"pred shape {pred.shape} != target shape {target.shape}"
        )
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(pred.dtype, copy=False)


def xavier_uniform_init(
    rng: np.random.Generator,
    weights_dims: tuple[int, int, int, int],
    dtype=np.float32,
) -> np.ndarray:
    """Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).

    fan_in + fan_out = (c0 + c1) * kh * kw for either weight layout, since
    the two channel dims just swap roles between conv and transposed conv.
    """
    c0, c1, kh, kw = weights_dims
    bound = np.sqrt(6.0 / ((c0 + c1) * kh * kw))
    return rng.uniform(-bound, bound, size=weights_dims).astype(dtype)


def xavier_bound(weights_dims: tuple[int, int, int, int]) -> float:
    c0, c1, kh, kw = weights_dims
    return float(np.sqrt(6.0 / ((c0 + c1) * kh * kw)))
