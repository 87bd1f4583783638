#!/usr/bin/env python3
"""The exact transform oracle.

Ground-truth targets are never produced by warping pixels: the transform
acts on the vector form of the shape (angles, radii, centroid) and the
result is re-rasterized.  That makes k-step targets exact for any k and
gives the group laws the tests rely on:

  * translation by k steps == shifting the raster by 2k columns, bit-exact
  * 50 minimal rotations == identity (2*pi), raster-identical
  * 25 minimal rotations == point reflection through the rotation center

Run:  python3 demos/02_transform_oracle.py
Out:  demos/out/oracle_translation.pgm, demos/out/oracle_rotation.pgm
"""

import os

import numpy as np

from symlab import (
    ROTATION_TRAIN,
    TRANSLATION_TRAIN,
    TransformKind,
    rasterize,
    render_montage,
    sample_shape,
    target_image,
    transform_spec,
)
from symlab.oracle import shift_raster

OUT = os.path.join(os.path.dirname(__file__), "out")


def main():
    rng = np.random.default_rng(3)

    # translation: +2 px per step
    spec = sample_shape(rng, TRANSLATION_TRAIN)
    kind = TransformKind.translate()
    steps = [0, 1, 5, 10, 15, 19]
    frames = [target_image(spec, kind, k, 64, 64) for k in steps]
    path = os.path.join(OUT, "oracle_translation.pgm")
    render_montage([frames], path)
    print(f"wrote {path} (steps {steps})")

    base = rasterize(spec, 64, 64)
    same = all(
        np.array_equal(target_image(spec, kind, k, 64, 64), shift_raster(base, 2 * k))
        for k in steps
    )
    print(f"translate-then-rasterize == rasterize-then-shift, bit-exact: {same}")

    # rotation: pi/25 clockwise about (32, 32) per step
    spec = sample_shape(rng, ROTATION_TRAIN)
    kind = TransformKind.rotate()
    steps = [0, 5, 12, 25, 37, 50]
    frames = [target_image(spec, kind, k, 64, 64) for k in steps]
    path = os.path.join(OUT, "oracle_rotation.pgm")
    render_montage([frames], path)
    print(f"wrote {path} (steps {steps}; k=25 is the point reflection, "
          f"k=50 the identity)")

    identity = np.array_equal(
        rasterize(transform_spec(spec, kind, 50), 64, 64), rasterize(spec, 64, 64))
    print(f"50 minimal rotations raster-identical to the original: {identity}")


if __name__ == "__main__":
    main()
