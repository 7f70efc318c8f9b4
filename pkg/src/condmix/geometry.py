"""Grid covers of attractors and slice images, and their Hausdorff distance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import EmptyError, EscapeError
from .lozi import LoziParams, SegmentConfig, float_orbit, segment_series, slice_sample
from .stats import RngStream, RateFit, fit_rate


@dataclass
class GridCover:
    """Occupied cells of a square grid with cell size ``h`` over ``box``."""

    box: tuple[float, float, float, float]
    h: float
    grid: np.ndarray

    @classmethod
    def empty(cls, h: float, box=(-1.5, 1.5, -1.5, 1.5)) -> "GridCover":
        nx = math.ceil((box[1] - box[0]) / h - 1e-9)
        ny = math.ceil((box[3] - box[2]) / h - 1e-9)
        return cls(tuple(box), h, np.zeros((nx, ny), dtype=bool))

    def cell_index(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x0, x1, y0, y1 = self.box
        if np.any((x < x0) | (x > x1) | (y < y0) | (y > y1)):
            raise EscapeError("point outside the grid box")
        i = np.minimum(np.floor((x - x0) / self.h).astype(np.int64), self.grid.shape[0] - 1)
        j = np.minimum(np.floor((y - y0) / self.h).astype(np.int64), self.grid.shape[1] - 1)
        return i, j

    def insert(self, x, y) -> "GridCover":
        i, j = self.cell_index(x, y)
        self.grid[i, j] = True
        return self

    def union(self, other: "GridCover") -> "GridCover":
        self._check_compatible(other)
        return GridCover(self.box, self.h, self.grid | other.grid)

    @property
    def occupied(self) -> int:
        return int(self.grid.sum())

    @property
    def cells(self) -> set[tuple[int, int]]:
        return set(zip(*(a.tolist() for a in np.nonzero(self.grid))))

    def centers(self) -> np.ndarray:
        i, j = np.nonzero(self.grid)
        return np.stack([self.box[0] + (i + 0.5) * self.h, self.box[2] + (j + 0.5) * self.h], axis=1)

    def _check_compatible(self, other: "GridCover"):
        if self.box != other.box or self.h != other.h:
            raise ValueError("grid covers must share box and cell size")


def hausdorff(a: GridCover, b: GridCover) -> float:
    """Symmetric Hausdorff distance between the cell centers of two covers.

    Each direction is the largest Euclidean distance transform value of one
    cover evaluated on the cells of the other.  Against the underlying point
    sets the result is accurate to ``h*sqrt(2)``.
    """
    a._check_compatible(b)
    if not a.grid.any() or not b.grid.any():
        raise EmptyError("Hausdorff distance of an empty cover")
    to_b = distance_transform_edt(~b.grid)
    to_a = distance_transform_edt(~a.grid)
    return float(max(to_b[a.grid].max(), to_a[b.grid].max()) * a.h)


def attractor_cloud(params: LoziParams, N: int, burn_in: int = 1000, h: float = 0.01,
                    seed: int = 0, box=(-1.5, 1.5, -1.5, 1.5)) -> GridCover:
    """Cells visited by ``N`` orbit points after ``burn_in`` steps.

    The start point is drawn from a small square around the origin.
    """
    cover = GridCover.empty(h, box)
    if N == 0:
        return cover
    g = RngStream(seed, "attractor-cloud").generator
    x, y = (float(v) for v in g.uniform(-0.1, 0.1, 2))
    half = max(abs(c) for c in box)
    xs, ys = float_orbit(x, y, burn_in + N, params, box=half)
    cover.insert(np.asarray(xs[burn_in:]), np.asarray(ys[burn_in:]))
    return cover


def slice_points(params: LoziParams, x0: float, M: int, seed: int,
                 cfg: SegmentConfig | None = None, max_steps_factor: int = 100) -> np.ndarray:
    """``M`` slice samples at ``x0`` (enclosure midpoints) as an ``(M, 2)`` array."""
    rng = RngStream(seed, "slice-image", 0)
    out = []
    if M > 0:
        for state, _ in segment_series(params, max_steps_factor * M, rng, cfg):
            s = slice_sample(state, x0)
            if s is not None:
                out.append((float(s.point.x.midpoint()), float(s.point.y.midpoint())))
                if len(out) == M:
                    break
    if len(out) < M:
        raise EmptyError(f"only {len(out)} of {M} slice samples at x0 = {x0}")
    return np.asarray(out, dtype=float).reshape(-1, 2)


def push_forward(pts: np.ndarray, n: int, params: LoziParams) -> np.ndarray:
    """Apply the Lozi map ``n`` times to every row (double precision)."""
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    a, b = params.a, params.b
    for _ in range(n):
        x, y = 1.0 + y - a * np.abs(x), b * x
    return np.stack([x, y], axis=1)


def slice_image_cloud(params: LoziParams, x0: float, n: int, M: int, h: float = 0.01,
                      seed: int = 0, box=(-1.5, 1.5, -1.5, 1.5), pts: np.ndarray | None = None,
                      cfg: SegmentConfig | None = None) -> GridCover:
    """Cells of ``f^n`` applied to ``M`` slice samples at ``x0``."""
    if pts is None:
        pts = slice_points(params, x0, M, seed, cfg)
    img = push_forward(pts, n, params)
    return GridCover.empty(h, box).insert(img[:, 0], img[:, 1])


@dataclass
class CoveringRow:
    n: int
    d_n: float
    h: float
    occupied_a: int
    occupied_b: int


def covering_curve(params: LoziParams, x0: float = 0.0, n_max: int = 20, M: int = 50_000,
                   h: float = 0.01, N: int = 1_000_000, burn_in: int = 1000, seed: int = 0,
                   cfg: SegmentConfig | None = None) -> list[CoveringRow]:
    """``d_n = hausdorff(slice image after n steps, attractor)`` for n = 0..n_max."""
    attractor = attractor_cloud(params, N, burn_in, h, seed)
    pts = slice_points(params, x0, M, seed, cfg)
    rows = []
    for n in range(n_max + 1):
        img = GridCover.empty(h, attractor.box).insert(pts[:, 0], pts[:, 1])
        rows.append(CoveringRow(n, hausdorff(img, attractor), h, img.occupied, attractor.occupied))
        pts = push_forward(pts, 1, params)
    return rows


def resolution(h: float) -> float:
    """Distance below which a grid Hausdorff value is indistinguishable from 0."""
    return 2.0 * h * math.sqrt(2.0)


def covering_rate(rows: list[CoveringRow]) -> RateFit:
    """Exponential fit of ``d_n`` down to the grid resolution."""
    return fit_rate([r.n for r in rows], [r.d_n for r in rows], floor=resolution(rows[0].h))
