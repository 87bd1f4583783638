"""Rollout of trained networks and the two evaluation metrics.

At test time the network is applied repeatedly, raw outputs fed back as
inputs, and the output at step t is scored against the ground truth shape
transformed t times (computed in one shot at the vector level, so targets
never compound raster error).

Accuracy = max(0, 1 - pixel_errors / target_area) with outputs binarized
at 0.5; a continuous-L1 error variant is available for sensitivity
analysis.  MSE is computed on raw outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, forward
from .oracle import TransformKind, target_image
from .shapes import Image, ShapeSpec, rasterize


class MetricError(ValueError):
    """Raised for ill-posed metric inputs (e.g. an empty target)."""


def accuracy(output: Image, target: Image, continuous: bool = False) -> float:
    """Fraction of the target area NOT covered by pixel errors, floored at 0."""
    if output.shape != target.shape:
        raise MetricError(f"shape mismatch {output.shape} vs {target.shape}")
    area = float(target.sum())
    if area <= 0:
        raise MetricError("target shape has zero area")
    if continuous:
        errors = float(np.abs(output - target).sum())
    else:
        errors = float(np.count_nonzero((output >= 0.5) != (target >= 0.5)))
    return max(0.0, 1.0 - errors / area)


def mse_metric(output: Image, target: Image) -> float:
    """Mean squared pixel difference on the raw (un-binarized) output."""
    if output.shape != target.shape:
        raise MetricError(f"shape mismatch {output.shape} vs {target.shape}")
    d = output.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(d * d))


@dataclass
class EvalConfig:
    task: str                            # "translate" | "rotate"
    horizon: int = 50
    height: int = 64
    width: int = 64
    metrics: tuple[str, ...] = ("accuracy", "mse")
    continuous_errors: bool = False
    batch: int = 32
    backend: str = "numpy"
    # ground-truth transforms per rollout step; 5 for a network trained to
    # rotate 5 minimal rotations in a single pass
    step_multiplier: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        bad = set(self.metrics) - {"accuracy", "mse"}
        if bad:
            raise ValueError(f"unknown metrics {sorted(bad)}")

    def kind(self) -> TransformKind:
        return (TransformKind.translate() if self.task == "translate"
                else TransformKind.rotate())


def make_forward_fn(params: ModelParams, backend: str = "numpy"):
    if backend == "torch":
        from .torch_backend import TorchExecutor

        return TorchExecutor(params).forward_numpy
    return lambda x: forward(params, x)[0]


def rollout(
    params: ModelParams, input_img: Image, horizon: int, backend: str = "numpy"
) -> list[Image]:
    """Feed outputs back as inputs for `horizon` steps; returns all outputs."""
    fn = make_forward_fn(params, backend)
    x = input_img[None, None].astype(np.float32)
    outs = []
    for _ in range(horizon):
        x = fn(x)
        outs.append(x[0, 0].copy())
    return outs


@dataclass
class EvalReport:
    """Metric values indexed (seed, shape, time); time step t is index t-1."""

    task: str
    horizon: int
    values: dict[str, np.ndarray] = field(default_factory=dict)

    def shape_mean(self, metric: str) -> np.ndarray:
        """(n_seeds, T) mean across shapes."""
        return self.values[metric].mean(axis=1)

    def shape_stderr(self, metric: str) -> np.ndarray:
        v = self.values[metric]
        return v.std(axis=1, ddof=1) / np.sqrt(v.shape[1]) if v.shape[1] > 1 \
            else np.zeros_like(v.mean(axis=1))

    def seed_mean(self, metric: str) -> np.ndarray:
        """(T,) mean of per-seed means."""
        return self.shape_mean(metric).mean(axis=0)

    def seed_stderr(self, metric: str) -> np.ndarray:
        m = self.shape_mean(metric)
        if m.shape[0] < 2:
            return np.zeros(m.shape[1])
        return m.std(axis=0, ddof=1) / np.sqrt(m.shape[0])


def evaluate(
    params_list: list[ModelParams],
    testset: list[ShapeSpec],
    config: EvalConfig,
) -> EvalReport:
    """Roll every shape out for the full horizon under every seed's params.

    Aggregation is ordering-invariant: values are stored per (seed, shape,
    time) and reduced only by the report accessors.
    """
    if not testset:
        raise ValueError("testset must be non-empty")
    kind = config.kind()
    T = config.horizon
    h, w = config.height, config.width
    report = EvalReport(config.task, T)
    for m in config.metrics:
        report.values[m] = np.zeros((len(params_list), len(testset), T))

    # targets are identical across seeds; rasterize lazily and cache per
    # (shape, t) only while that shape's batch is in flight
    for si, params in enumerate(params_list):
        fn = make_forward_fn(params, config.backend)
        for start in range(0, len(testset), config.batch):
            specs = testset[start : start + config.batch]
            x = np.stack([rasterize(s, h, w) for s in specs])[:, None]
            cur = x.astype(np.float32)
            for t in range(1, T + 1):
                cur = fn(cur)
                for bi, spec in enumerate(specs):
                    tgt = target_image(spec, kind, t * config.step_multiplier, h, w)
                    out = cur[bi, 0]
                    if "accuracy" in config.metrics:
                        report.values["accuracy"][si, start + bi, t - 1] = accuracy(
                            out, tgt, config.continuous_errors
                        )
                    if "mse" in config.metrics:
                        report.values["mse"][si, start + bi, t - 1] = mse_metric(out, tgt)
    return report
