"""Persistence: checkpoints, metrics CSV, shape corpora, PGM images.

Checkpoint layout (little-endian throughout):
    magic "SYML", version u32
    entry count u32
    per entry: name length u16, UTF-8 name, dtype tag u8 (1 = f32),
               ndim u8, dims as u32s, raw f32 values
    manifest byte length u32, manifest UTF-8 JSON

Metrics CSV schema (version 1), one row per scalar:
    run_id, task, diversity, max_iter, single_pass_steps, seed,
    phase (train|eval), step_or_time, metric (loss|accuracy|mse), value
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .model import DEFAULT_ARCHITECTURE, ModelParams
from .shapes import ShapeDistribution, ShapeSpec

CHECKPOINT_MAGIC = b"SYML"
CHECKPOINT_VERSION = 1
DTYPE_F32 = 1

METRICS_SCHEMA_VERSION = 1
METRICS_COLUMNS = (
    "run_id", "task", "diversity", "max_iter", "single_pass_steps",
    "seed", "phase", "step_or_time", "metric", "value",
)


class CheckpointError(IOError):
    """Malformed or truncated checkpoint file."""


@dataclass
class RunManifest:
    """Everything needed to reconstruct and locate one training run."""

    run_id: str
    config: dict                    # TrainConfig.to_dict()
    created: str = ""
    checkpoint_path: str = ""
    metrics_path: str = ""
    architecture: str = "default"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)


def output_dir(override: str | None = None) -> str:
    """Output directory: explicit > SYMLAB_OUT env var > ./runs."""
    return override or os.environ.get("SYMLAB_OUT") or "runs"


def _write_entry(f, name: str, arr: np.ndarray) -> None:
    nb = name.encode()
    f.write(struct.pack("<H", len(nb)))
    f.write(nb)
    a = np.ascontiguousarray(arr, dtype="<f4")
    f.write(struct.pack("<BB", DTYPE_F32, a.ndim))
    f.write(struct.pack(f"<{a.ndim}I", *a.shape))
    f.write(a.tobytes())


def save_checkpoint(
    params: ModelParams,
    manifest: RunManifest,
    path: str,
    adam_state=None,
) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    entries: list[tuple[str, np.ndarray]] = []
    for name in params.weights:
        entries.append((f"w:{name}", params.weights[name]))
        entries.append((f"b:{name}", params.biases[name]))
    if adam_state is not None:
        for name in adam_state.m:
            entries.append((f"adam_mw:{name}", adam_state.m[name][0]))
            entries.append((f"adam_mb:{name}", adam_state.m[name][1]))
            entries.append((f"adam_vw:{name}", adam_state.v[name][0]))
            entries.append((f"adam_vb:{name}", adam_state.v[name][1]))
    mdict = manifest.to_dict()
    if adam_state is not None:
        mdict["adam_t"] = adam_state.t
    blob = json.dumps(mdict).encode()
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            _write_entry(f, name, arr)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
    os.replace(tmp, path)


def _read_exact(f, n: int, what: str):
    b = f.read(n)
    if len(b) != n:
        raise CheckpointError(
            f"truncated checkpoint: wanted {n} bytes for {what} at offset "
            f"{f.tell() - len(b)}"
        )
    return b


def load_checkpoint(path: str):
    """Returns (params, manifest, extras) where extras holds Adam tensors."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad magic {magic!r} at offset 0")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported version {version} at offset 4")
        (count,) = struct.unpack("<I", _read_exact(f, 4, "entry count"))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, nlen, "name").decode()
            tag, ndim = struct.unpack("<BB", _read_exact(f, 2, "dtype/ndim"))
            if tag != DTYPE_F32:
                raise CheckpointError(f"unknown dtype tag {tag} in entry {name!r}")
            dims = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, "dims"))
            nbytes = 4 * int(np.prod(dims)) if ndim else 4
            raw = _read_exact(f, nbytes, f"data of {name!r}")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
        (mlen,) = struct.unpack("<I", _read_exact(f, 4, "manifest length"))
        manifest = RunManifest.from_dict(
            {k: v for k, v in json.loads(_read_exact(f, mlen, "manifest")).items()
             if k != "adam_t"}
        )
    if manifest.architecture != "default":
        raise CheckpointError(f"unknown architecture {manifest.architecture!r}")
    weights = {n[2:]: a for n, a in arrays.items() if n.startswith("w:")}
    biases = {n[2:]: a for n, a in arrays.items() if n.startswith("b:")}
    params = ModelParams(DEFAULT_ARCHITECTURE, weights, biases)
    extras = {n: a for n, a in arrays.items() if n.startswith("adam_")}
    return params, manifest, extras


@dataclass
class MetricRow:
    run_id: str
    task: str
    diversity: str
    max_iter: int
    single_pass_steps: int
    seed: int
    phase: str          # "train" | "eval"
    step_or_time: int
    metric: str         # "loss" | "accuracy" | "mse"
    value: float

    def as_list(self):
        return [self.run_id, self.task, self.diversity, self.max_iter,
                self.single_pass_steps, self.seed, self.phase,
                self.step_or_time, self.metric, repr(float(self.value))]


def write_metrics(rows, path: str, no_clobber: bool = False) -> None:
    """Write header plus rows; with no_clobber an existing file is kept as is."""
    if no_clobber and os.path.exists(path):
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(METRICS_COLUMNS)
        for row in rows:
            wr.writerow(row.as_list() if isinstance(row, MetricRow) else list(row))


def read_metrics(path: str) -> list[dict]:
    with open(path, newline="") as f:
        rd = csv.DictReader(f)
        if tuple(rd.fieldnames or ()) != METRICS_COLUMNS:
            raise IOError(f"unexpected metrics columns in {path}: {rd.fieldnames}")
        out = []
        for r in rd:
            r["value"] = float(r["value"])
            for k in ("max_iter", "single_pass_steps", "seed", "step_or_time"):
                r[k] = int(r[k])
            out.append(r)
        return out


def write_pgm(img, path: str) -> None:
    """8-bit binary PGM (P5); input values are clamped to [0, 1]."""
    a = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    b = np.round(a * 255.0).astype(np.uint8)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{b.shape[1]} {b.shape[0]}\n255\n".encode())
        f.write(b.tobytes())


def read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise IOError(f"not a binary PGM: {path}")
    w, h = map(int, parts[1].split())
    maxval = int(parts[2])
    img = np.frombuffer(parts[3][: w * h], dtype=np.uint8).reshape(h, w)
    return img.astype(np.float32) / maxval


def write_png(img, path: str) -> None:
    """Optional PNG output; needs Pillow."""
    from PIL import Image as PILImage

    a = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    PILImage.fromarray(np.round(a * 255.0).astype(np.uint8), mode="L").save(path)


CORPUS_SCHEMA_VERSION = 1


def save_corpus(specs: list[ShapeSpec], dist: ShapeDistribution | None, path: str) -> None:
    """Shape corpus as JSON; exact float round trip via repr."""
    doc = {
        "schema_version": CORPUS_SCHEMA_VERSION,
        "distribution": dataclasses.asdict(dist) if dist else None,
        "shapes": [
            {
                "angles": s.angles.tolist(),
                "radii": s.radii.tolist(),
                "centroid": list(s.centroid),
                "scale": s.scale,
                "hollow_fraction": s.hollow_fraction,
            }
            for s in specs
        ],
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(doc, f)


def load_corpus(path: str) -> list[ShapeSpec]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("schema_version") != CORPUS_SCHEMA_VERSION:
        raise IOError(f"unsupported corpus schema in {path}")
    return [
        ShapeSpec(
            np.array(s["angles"]), np.array(s["radii"]),
            tuple(s["centroid"]), s["scale"], s["hollow_fraction"],
        )
        for s in doc["shapes"]
    ]
