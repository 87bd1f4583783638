"""Procedural generation and rasterization of irregular convex polygons.

A shape is described in vector form (ShapeSpec): N angles sorted around a
centroid, one radial distance per angle, plus an optional hollow fraction
that erases a scaled-down copy of the hull from the raster.  All rasters
derive from the vector form, never the other way around.

Coordinate convention: x is the column index increasing rightward, y is
the row index increasing downward; pixel centers sit at integer
coordinates.  Pixel centers on the hull boundary count as inside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# An image is a dense (h, w) float array; freshly rasterized ones hold
# only 0.0 and 1.0.  Row index = y (down), column index = x (right).
Image = np.ndarray

TWO_PI = 2.0 * np.pi

# Signed-distance slack (in pixels, normalized by edge length) for the
# inside test; absorbs float rounding so integer translations of a spec
# shift its raster bit-exactly.
BOUNDARY_TOL = 1e-7

MAX_RESAMPLE_ATTEMPTS = 100


class GenerationError(RuntimeError):
    """Raised when shape sampling keeps producing degenerate hulls."""


@dataclass
class ShapeSpec:
    """Vector description of one random polygon."""

    angles: np.ndarray          # sorted ascending, in [0, 2*pi)
    radii: np.ndarray           # non-negative, <= scale
    centroid: tuple[float, float]   # (x, y)
    scale: float
    hollow_fraction: float = 0.0

    def vertex_offsets(self) -> np.ndarray:
        """(N, 2) vertex positions relative to the centroid."""
        return np.stack(
            [self.radii * np.cos(self.angles), self.radii * np.sin(self.angles)],
            axis=1,
        )

    def vertices(self) -> np.ndarray:
        """(N, 2) absolute vertex positions (x, y)."""
        return self.vertex_offsets() + np.asarray(self.centroid)


@dataclass(frozen=True)
class ShapeDistribution:
    """Sampling ranges for sample_shape; all ranges inclusive."""

    r_range: tuple[float, float]
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    n_range: tuple[int, int] = (10, 20)
    hollow_fraction: float = 0.0

    def __post_init__(self):
        if self.n_range[0] < 3 or self.n_range[1] < self.n_range[0]:
            raise ValueError(f"bad vertex-count range {self.n_range}")
        if self.r_range[0] <= 1:
            raise ValueError(f"scale range lower bound must exceed 1, got {self.r_range}")
        if not 0.0 <= self.hollow_fraction < 1.0:
            raise ValueError(f"hollow_fraction must be in [0, 1), got {self.hollow_fraction}")


# Training distributions for the two tasks.
TRANSLATION_TRAIN = ShapeDistribution(r_range=(5, 7), x_range=(20, 25), y_range=(20, 40))
ROTATION_TRAIN = ShapeDistribution(r_range=(7, 10), x_range=(32, 32), y_range=(32, 32))

# Far-out-of-domain translation test distribution: much larger scale,
# hollow centers, roaming over a 512x512 grid with enough right margin
# that 50 two-pixel shifts never clip (350 + 50 + 100 = 500 < 512).
OOD_TRANSLATION = ShapeDistribution(
    r_range=(50, 50), x_range=(100, 350), y_range=(100, 412), hollow_fraction=0.5
)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise, no collinear points."""
    pts = np.unique(points, axis=0)
    if len(pts) < 3:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def sample_shape(rng: np.random.Generator, dist: ShapeDistribution) -> ShapeSpec:
    """Draw one shape; resamples everything when the hull is degenerate."""
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        n = int(rng.integers(dist.n_range[0], dist.n_range[1] + 1))
        r = float(rng.uniform(*dist.r_range))
        x = float(rng.uniform(*dist.x_range))
        y = float(rng.uniform(*dist.y_range))
        angles = np.sort(rng.uniform(0.0, TWO_PI, size=n))
        radii = rng.uniform(0.0, r, size=n)
        spec = ShapeSpec(angles, radii, (x, y), r, dist.hollow_fraction)
        if len(convex_hull(spec.vertex_offsets())) >= 3:
            return spec
    raise GenerationError(
        f"{MAX_RESAMPLE_ATTEMPTS} consecutive degenerate hulls for {dist}"
    )


def _inside_mask(px: np.ndarray, py: np.ndarray, hull: np.ndarray) -> np.ndarray:
    """Vectorized half-plane inclusion test against a CCW hull."""
    inside = np.ones(px.shape, dtype=bool)
    m = len(hull)
    for a in range(m):
        x0, y0 = hull[a]
        x1, y1 = hull[(a + 1) % m]
        ex, ey = x1 - x0, y1 - y0
        norm = max(float(np.hypot(ex, ey)), 1e-12)
        cross = ex * (py - y0) - ey * (px - x0)
        inside &= cross / norm >= -BOUNDARY_TOL
    return inside


def rasterize(spec: ShapeSpec, h: int, w: int) -> np.ndarray:
    """Binary (h, w) float32 raster of the spec's convex hull.

    All geometry is evaluated in centroid-relative coordinates, so the
    raster of an integer-translated spec is exactly the shifted raster.
    """
    if h < 1 or w < 1:
        raise ValueError(f"grid must be at least 1x1, got {h}x{w}")
    img = np.zeros((h, w), dtype=np.float32)
    hull = convex_hull(spec.vertex_offsets())
    if len(hull) < 3:
        return img
    cx, cy = spec.centroid
    # Pixels inside the hull lie inside its bounding box; clip to the grid.
    i0 = max(0, int(np.floor(hull[:, 0].min() + cx)))
    i1 = min(w - 1, int(np.ceil(hull[:, 0].max() + cx)))
    j0 = max(0, int(np.floor(hull[:, 1].min() + cy)))
    j1 = min(h - 1, int(np.ceil(hull[:, 1].max() + cy)))
    if i0 > i1 or j0 > j1:
        return img
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
    px = ii - cx
    py = jj - cy
    mask = _inside_mask(px, py, hull)
    if spec.hollow_fraction > 0.0:
        mask &= ~_inside_mask(px, py, hull * spec.hollow_fraction)
    img[j0 : j1 + 1, i0 : i1 + 1] = mask.astype(np.float32)
    return img


@dataclass
class ShapePool:
    """Training-time shape source with controlled diversity.

    A finite pool pre-generates its members once and draws uniformly with
    replacement; the unbounded pool samples a fresh spec on every draw.
    """

    dist: ShapeDistribution
    specs: list[ShapeSpec] | None = None   # None means unbounded ('inf')

    @property
    def diversity(self) -> int | str:
        return "inf" if self.specs is None else len(self.specs)

    def draw(self, rng: np.random.Generator, count: int) -> list[ShapeSpec]:
        if self.specs is None:
            return [sample_shape(rng, self.dist) for _ in range(count)]
        idx = rng.integers(0, len(self.specs), size=count)
        return [self.specs[i] for i in idx]


def make_dataset(
    rng: np.random.Generator, dist: ShapeDistribution, count: int | str
) -> ShapePool:
    """Build a diversity-D pool; count may be an int >= 1 or 'inf'."""
    if count == "inf" or count is None:
        return ShapePool(dist, None)
    count = int(count)
    if count < 1:
        raise ValueError(f"pool size must be >= 1, got {count}")
    return ShapePool(dist, [sample_shape(rng, dist) for _ in range(count)])


def make_ood_translation_testset(
    rng: np.random.Generator, count: int = 500
) -> list[ShapeSpec]:
    """Large hollow shapes for the 512x512 translation extrapolation test."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [sample_shape(rng, OOD_TRANSLATION) for _ in range(count)]


def make_iid_testset(
    rng: np.random.Generator, dist: ShapeDistribution, count: int = 500
) -> list[ShapeSpec]:
    """Fresh shapes from a training distribution (I.I.D. test set)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [sample_shape(rng, dist) for _ in range(count)]
