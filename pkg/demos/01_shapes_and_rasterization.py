#!/usr/bin/env python3
"""Shape sampling and rasterization.

Draws random convex polygons from the two training distributions and from
the hollow out-of-domain family, rasterizes them, and writes a montage so
you can eyeball the shape families side by side.

Run:  python3 demos/01_shapes_and_rasterization.py
Out:  demos/out/shape_families.pgm
"""

import os

import numpy as np

from symlab import (
    OOD_TRANSLATION,
    ROTATION_TRAIN,
    TRANSLATION_TRAIN,
    rasterize,
    render_montage,
    sample_shape,
)

OUT = os.path.join(os.path.dirname(__file__), "out")


def row(dist, rng, n=6, size=64, scale=1.0):
    """One montage row of n samples; OOD shapes are drawn at 512 and
    downscaled by slicing so everything shares a frame size."""
    frames = []
    for _ in range(n):
        spec = sample_shape(rng, dist)
        if scale != 1.0:
            big = rasterize(spec, 512, 512)
            frames.append(big[::8, ::8])          # quick-look decimation
        else:
            frames.append(rasterize(spec, size, size))
    return frames


def main():
    rng = np.random.default_rng(0)
    rows = [
        row(TRANSLATION_TRAIN, rng),    # small, left-of-center (translation)
        row(ROTATION_TRAIN, rng),       # centered at (32, 32) (rotation)
        row(OOD_TRANSLATION, rng, scale=8.0),  # large + hollow, never trained on
    ]
    path = os.path.join(OUT, "shape_families.pgm")
    img = render_montage(rows, path)
    print(f"wrote {path} ({img.shape[0]}x{img.shape[1]})")
    print("rows: translation-train, rotation-train, OOD (hollow, 8x decimated)")

    # a spec is a tiny exact vector object; the raster is derived from it
    spec = sample_shape(np.random.default_rng(1), ROTATION_TRAIN)
    print(f"\nexample spec: {len(spec.angles)} vertices, "
          f"centroid {spec.centroid}, scale {spec.scale:.2f}")
    print(f"raster area at 64x64: {int(rasterize(spec, 64, 64).sum())} px")


if __name__ == "__main__":
    main()
