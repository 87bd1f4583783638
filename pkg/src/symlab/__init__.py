"""symlab: from-scratch convolutional autoencoders that learn pixel-space
symmetry transforms (translation, rotation) by iterated application, with a
harness for diversity / iteration-depth extrapolation experiments."""

from .engine import (
    ConfigurationError,
    ConvSpec,
    conv2d_backward,
    conv2d_forward,
    conv_transpose2d_backward,
    conv_transpose2d_forward,
    mse_loss,
    relu_backward,
    relu_forward,
    xavier_uniform_init,
)
from .evaluation import EvalConfig, EvalReport, accuracy, evaluate, mse_metric, rollout
from .io import (
    CheckpointError,
    MetricRow,
    RunManifest,
    load_checkpoint,
    load_corpus,
    read_metrics,
    save_checkpoint,
    save_corpus,
    write_metrics,
)
from .model import (
    DEFAULT_ARCHITECTURE,
    ModelParams,
    apply_iterated,
    backward_iterated,
    forward,
    init_params,
    reduced_architecture,
)
from .oracle import TransformKind, target_image, transform_spec
from .render import metric_grid, render_montage
from .shapes import (
    OOD_TRANSLATION,
    ROTATION_TRAIN,
    TRANSLATION_TRAIN,
    GenerationError,
    ShapeDistribution,
    ShapePool,
    ShapeSpec,
    make_dataset,
    make_iid_testset,
    make_ood_translation_testset,
    rasterize,
    sample_shape,
)
from .training import (
    AdamState,
    NumericalError,
    TrainConfig,
    TrainLog,
    adam_step,
    derived_seed,
    train,
    train_grid,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "CheckpointError", "ConfigurationError", "ConvSpec",
    "DEFAULT_ARCHITECTURE", "EvalConfig", "EvalReport", "GenerationError",
    "MetricRow", "ModelParams", "NumericalError", "OOD_TRANSLATION",
    "ROTATION_TRAIN",
    "RunManifest", "ShapeDistribution", "ShapePool", "ShapeSpec",
    "TRANSLATION_TRAIN", "TrainConfig", "TrainLog", "TransformKind",
    "accuracy", "adam_step", "apply_iterated", "backward_iterated",
    "conv2d_backward", "conv2d_forward", "conv_transpose2d_backward",
    "conv_transpose2d_forward", "derived_seed", "evaluate", "forward",
    "init_params", "load_checkpoint", "load_corpus", "make_dataset",
    "make_iid_testset", "make_ood_translation_testset", "metric_grid",
    "mse_loss", "mse_metric", "rasterize", "read_metrics",
    "reduced_architecture", "relu_backward", "relu_forward", "render_montage",
    "rollout", "sample_shape", "save_checkpoint", "save_corpus",
    "target_image", "train", "train_grid", "transform_spec", "write_metrics",
    "xavier_uniform_init",
]
