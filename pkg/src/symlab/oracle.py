"""Exact ground-truth transformations at the vector level.

The two hard-coded primitive actions are a 2-pixel rightward shift and a
pi/25-radian clockwise rotation about the image center.  Targets for k
applications are produced by one vector-level transform by the total
amount followed by one rasterization, so the ground-truth sequence never
accumulates raster error.

Clockwise is defined visually on screen (y axis pointing down).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .shapes import TWO_PI, Image, ShapeSpec, rasterize

TRANSLATE_DX = 2
ROTATE_THETA = np.pi / 25.0
DEFAULT_ROTATION_CENTER = (32.0, 32.0)


@dataclass(frozen=True)
class TransformKind:
    """One of the two primitive actions, with its fixed step size."""

    variant: str                        # "translate" | "rotate"
    dx: int = TRANSLATE_DX              # pixels per application (translate)
    theta: float = ROTATE_THETA         # radians per application (rotate)
    center: tuple[float, float] = DEFAULT_ROTATION_CENTER

    def __post_init__(self):
        if self.variant not in ("translate", "rotate"):
            raise ValueError(f"unknown transform variant {self.variant!r}")

    @staticmethod
    def translate() -> "TransformKind":
        return TransformKind("translate")

    @staticmethod
    def rotate(center: tuple[float, float] = DEFAULT_ROTATION_CENTER) -> "TransformKind":
        return TransformKind("rotate", center=center)


def transform_spec(spec: ShapeSpec, kind: TransformKind, k: int) -> ShapeSpec:
    """Apply the primitive action k times, exactly, on the vector form."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return spec
    if kind.variant == "translate":
        cx, cy = spec.centroid
        return replace(spec, centroid=(cx + kind.dx * k, cy))
    total = kind.theta * k
    qx, qy = kind.center
    c, s = np.cos(total), np.sin(total)
    # Rigid rotation about the center; with y down this matrix turns the
    # shape clockwise on screen.
    vx, vy = spec.centroid[0] - qx, spec.centroid[1] - qy
    new_centroid = (qx + vx * c - vy * s, qy + vx * s + vy * c)
    # Vertex offsets rotate by the same angle: add it to every polar angle
    # and re-sort so the angles-ascending invariant holds.
    angles = np.mod(spec.angles + total, TWO_PI)
    order = np.argsort(angles, kind="stable")
    return replace(
        spec,
        angles=angles[order],
        radii=spec.radii[order],
        centroid=new_centroid,
    )


def target_image(
    spec: ShapeSpec, kind: TransformKind, k: int, h: int, w: int
) -> Image:
    """Raster of the shape after k applications of the primitive action."""
    return rasterize(transform_spec(spec, kind, k), h, w)


def shift_raster(img: Image, dx: int) -> Image:
    """Move columns by dx with zero fill; pixels shifted off-grid are dropped."""
    if dx == 0:
        return img.copy()
    out = np.zeros_like(img)
    if dx > 0:
        if dx < img.shape[1]:
            out[:, dx:] = img[:, :-dx]
    else:
        if -dx < img.shape[1]:
            out[:, :dx] = img[:, -dx:]
    return out
