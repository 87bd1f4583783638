"""Training loop: diversity-controlled data feeding, iterated-application
loss, and Adam with L2 weight decay.

Each batch draws 32 shapes from the diversity pool, samples one k uniform
in {1..M} shared by the whole batch, applies the network k times feeding
raw outputs back, and compares only the final output against the shape
transformed k times (times ``single_pass_steps`` in the single-pass
comparison variant, where the network itself still runs once).  One batch
always produces exactly one weight update.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .engine import mse_loss
from .model import (
    DEFAULT_ARCHITECTURE,
    ModelParams,
    apply_iterated,
    backward_iterated,
    init_params,
)
from .oracle import TransformKind, target_image
from .shapes import (
    ROTATION_TRAIN,
    TRANSLATION_TRAIN,
    ShapeDistribution,
    make_dataset,
    rasterize,
)


class NumericalError(RuntimeError):
    """Training hit a non-finite loss or gradient."""


@dataclass
class TrainConfig:
    task: str                           # "translate" | "rotate"
    diversity: int | str = "inf"
    max_iterations: int = 1             # M; k ~ Uniform{1..M} per batch
    single_pass_steps: int = 1          # >1 only for the single-pass variant
    steps: int = 20000
    batch: int = 32
    lr: float = 5e-4
    weight_decay: float = 1e-5
    seed: int = 0
    height: int = 64
    width: int = 64
    n_range: tuple[int, int] = (10, 20)
    backend: str = "numpy"              # "numpy" | "torch"
    log_every: int = 1

    def __post_init__(self):
        if self.task not in ("translate", "rotate"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.single_pass_steps > 1 and self.max_iterations != 1:
            raise ValueError(
                "single_pass_steps > 1 requires max_iterations == 1"
            )
        for name in ("max_iterations", "single_pass_steps", "steps", "batch",
                     "lr", "weight_decay", "height", "width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.diversity != "inf" and int(self.diversity) < 1:
            raise ValueError(f"diversity must be >= 1 or 'inf', got {self.diversity}")
        if self.backend not in ("numpy", "torch"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def distribution(self) -> ShapeDistribution:
        base = TRANSLATION_TRAIN if self.task == "translate" else ROTATION_TRAIN
        return dataclasses.replace(base, n_range=self.n_range)

    def kind(self) -> TransformKind:
        if self.task == "translate":
            return TransformKind.translate()
        return TransformKind.rotate()

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "n_range" in d:
            d["n_range"] = tuple(d["n_range"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["n_range"] = list(self.n_range)
        return d


@dataclass
class AdamState:
    """First/second moments per parameter tensor plus the step counter."""

    m: dict[str, tuple[np.ndarray, np.ndarray]]
    v: dict[str, tuple[np.ndarray, np.ndarray]]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init_like(cls, params: ModelParams) -> "AdamState":
        zeros = lambda a: np.zeros_like(a, dtype=np.float32)
        m = {n: (zeros(params.weights[n]), zeros(params.biases[n]))
             for n in params.weights}
        v = {n: (zeros(params.weights[n]), zeros(params.biases[n]))
             for n in params.weights}
        return cls(m=m, v=v)


def adam_step(
    params: ModelParams,
    grads: dict[str, tuple[np.ndarray, np.ndarray]],
    state: AdamState,
    lr: float,
    weight_decay: float,
) -> tuple[ModelParams, AdamState]:
    """One Adam update with bias correction; weight decay enters as an L2
    term added to the gradient before the moment updates.  Updates arrays
    in place and returns them for convenience.
    """
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name in params.weights:
        for theta, g, m, v in (
            (params.weights[name], grads[name][0], state.m[name][0], state.v[name][0]),
            (params.biases[name], grads[name][1], state.m[name][1], state.v[name][1]),
        ):
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient in layer {name!r}")
            g = g + weight_decay * theta
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * (g * g)
            theta -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class TrainLog:
    """Per-step records of the sampled k and the batch loss."""

    steps: list[int] = field(default_factory=list)
    ks: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)

    def record(self, step: int, k: int, loss: float) -> None:
        self.steps.append(step)
        self.ks.append(k)
        self.losses.append(loss)


def make_batch(specs, kind, k_targets, h, w):
    """Rasterize a batch of specs and their k-times-transformed targets."""
    inputs = np.stack([rasterize(s, h, w) for s in specs])[:, None]
    targets = np.stack([target_image(s, kind, k_targets, h, w) for s in specs])[:, None]
    return inputs, targets


def train(
    config: TrainConfig,
    callback=None,
) -> tuple[ModelParams, TrainLog]:
    """Run the full loop; deterministic given config.seed (numpy backend).

    ``callback(step, loss)`` fires every ``log_every`` steps when given.
    """
    rng = np.random.default_rng(config.seed)
    pool = make_dataset(rng, config.distribution(), config.diversity)
    params = init_params(rng, DEFAULT_ARCHITECTURE, dtype=np.float32)
    state = AdamState.init_like(params)
    kind = config.kind()
    log = TrainLog()

    executor = None
    if config.backend == "torch":
        from .torch_backend import TorchExecutor

        executor = TorchExecutor(params)

    for step in range(config.steps):
        specs = pool.draw(rng, config.batch)
        k = int(rng.integers(1, config.max_iterations + 1))
        inputs, targets = make_batch(
            specs, kind, k * config.single_pass_steps, config.height, config.width
        )
        if executor is not None:
            loss, grads = executor.loss_and_grads(inputs, targets, k)
        else:
            outputs, traces = apply_iterated(params, inputs, k)
            loss, grad_final = mse_loss(outputs[-1], targets)
            grads = backward_iterated(params, traces, grad_final)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss at step {step}")
        adam_step(params, grads, state, config.lr, config.weight_decay)
        if step % config.log_every == 0 or step == config.steps - 1:
            log.record(step, k, loss)
            if callback is not None:
                callback(step, loss)
    return params, log


def derived_seed(seed_base: int, diversity, max_iterations: int, seed_index: int) -> int:
    """Stable per-run seed for grid cells."""
    import zlib

    tag = f"{diversity}|{max_iterations}|{seed_index}".encode()
    return (seed_base + zlib.crc32(tag)) % (2**31)


@dataclass
class GridRun:
    config: TrainConfig
    params: ModelParams | None
    log: TrainLog | None
    error: str | None = None


def grid_configs(
    base_config: TrainConfig, diversity_list, iteration_list, seeds: int = 1
) -> list[TrainConfig]:
    """Configs for the diversity x iteration x seed cross product, in the
    deterministic merge order (diversity outermost, seed innermost)."""
    return [
        dataclasses.replace(
            base_config,
            diversity=d,
            max_iterations=m,
            seed=derived_seed(base_config.seed, d, m, si),
        )
        for d in diversity_list
        for m in iteration_list
        for si in range(seeds)
    ]


def _run_one(cfg: TrainConfig) -> GridRun:
    try:
        params, log = train(cfg)
        return GridRun(cfg, params, log)
    except Exception as e:  # noqa: BLE001 - grid must keep going
        return GridRun(cfg, None, None, error=str(e))


def train_grid(
    base_config: TrainConfig,
    diversity_list,
    iteration_list,
    seeds: int = 1,
    jobs: int = 1,
    runner=train,
) -> list[GridRun]:
    """Train the full grid; failures are recorded and the grid continues.

    With jobs > 1, runs execute in worker processes (each run stays
    deterministic via its derived seed) and results merge in config order.
    """
    configs = grid_configs(base_config, diversity_list, iteration_list, seeds)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, configs))
    runs = []
    for cfg in configs:
        try:
            params, log = runner(cfg)
            runs.append(GridRun(cfg, params, log))
        except Exception as e:  # noqa: BLE001 - grid must keep going
            runs.append(GridRun(cfg, None, None, error=str(e)))
    return runs
