"""Dimension-generic geometric primitives shared by every other module.

Points live in R^m with m in {2, 3} (pixels in 2D, meters in 3D). Lines are
(base, unit direction) pairs, planes are axis-aligned and stored as
(axis, offset). Distances are exact Euclidean, float64 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

AXIS_NAMES = ("x", "y", "z")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Point:
    """Single point view: id, coordinates, optional descriptor."""

    id: int
    coords: np.ndarray
    descriptor: np.ndarray | None = None


@dataclass
class PointCloud:
    """Struct-of-arrays point cloud.

    Attributes
    ----------
    dimension   : m, 2 or 3
    ids         : (n,) int64, unique
    coords      : (n, m) float64, finite
    descriptors : (n, D) float64 or None
    metadata    : free-form key/value (units, scene name, generator seed)
    """

    dimension: int
    ids: np.ndarray
    coords: np.ndarray
    descriptors: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.dimension not in (2, 3):
            raise GeometryError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.coords.ndim != 2 or self.coords.shape[1] != self.dimension:
            raise GeometryError(
                f"coords shape {self.coords.shape} does not match dimension {self.dimension}"
            )
        if len(self.ids) != len(self.coords):
            raise GeometryError("ids and coords length mismatch")
        if len(np.unique(self.ids)) != len(self.ids):
            raise GeometryError("point ids must be unique")
        if len(self.coords) and not np.all(np.isfinite(self.coords)):
            raise GeometryError("coords must be finite")
        if self.descriptors is not None:
            self.descriptors = np.asarray(self.descriptors, dtype=np.float64)
            if self.descriptors.ndim != 2 or len(self.descriptors) != len(self.ids):
                raise GeometryError("descriptors must be (n, D)")
        self._index_of = {int(pid): i for i, pid in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    def index_of(self, point_id: int) -> int:
        try:
            return self._index_of[int(point_id)]
        except KeyError:
            raise GeometryError(f"unknown point id {point_id}") from None

    def point(self, point_id: int) -> Point:
        i = self.index_of(point_id)
        desc = None if self.descriptors is None else self.descriptors[i]
        return Point(int(self.ids[i]), self.coords[i], desc)

    @property
    def descriptor_dim(self) -> int:
        return 0 if self.descriptors is None else self.descriptors.shape[1]


@dataclass(frozen=True)
class LineGeom:
    """Line through `base` with unit `direction`."""

    base: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=np.float64))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))
        if self.base.shape != self.direction.shape:
            raise GeometryError("base/direction dimension mismatch")
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > 1e-9:
            raise GeometryError(f"direction must be unit norm, got {norm}")

    def at(self, t: float) -> np.ndarray:
        return self.base + t * self.direction


@dataclass(frozen=True)
class AxisPlaneGeom:
    """Axis-aligned plane {p : p[axis] = offset}; 3D only."""

    axis: int
    offset: float

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise GeometryError(f"axis must be 0, 1 or 2, got {self.axis}")


def point_to_line_distance(p, line: LineGeom):
    """Euclidean distance from p to the line, plus the parameter of the foot.

    Returns (distance, t) with closest point = base + t * direction.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != line.base.shape:
        raise GeometryError("point/line dimension mismatch")
    w = p - line.base
    t = float(w @ line.direction)
    residual = w - t * line.direction
    return float(np.linalg.norm(residual)), t


def point_to_plane_distance(p, plane: AxisPlaneGeom) -> float:
    """|p[axis] - offset| for an axis-aligned plane (3D only)."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != 3:
        raise GeometryError("axis-aligned planes are 3D only")
    return float(abs(p[plane.axis] - plane.offset))


def points_to_lines_sq_coeffs(base, direction, nb_bases, nb_dirs):
    """Quadratic coefficients of squared distances along a subject line.

    For x(t) = base + t*direction, the squared distance to neighbor line i is
    a[i]*t^2 + b[i]*t + c[i]. Vectorized over neighbors.
    """
    w = base - nb_bases                                # (K, m)
    dd = nb_dirs @ direction                           # (K,)
    u = direction - dd[:, None] * nb_dirs
    wv = (w * nb_dirs).sum(axis=1)
    v = w - wv[:, None] * nb_dirs
    a = (u * u).sum(axis=1)
    b = 2.0 * (u * v).sum(axis=1)
    c = (v * v).sum(axis=1)
    return a, b, c


def intersect_lines_2d(b1, d1, b2, d2):
    """Intersection of two 2D lines, or None when near-parallel (|cross| < 1e-9)."""
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(cross) < 1e-9:
        return None
    dx, dy = b2[0] - b1[0], b2[1] - b1[1]
    t = (dx * d2[1] - dy * d2[0]) / cross
    return np.array([b1[0] + t * d1[0], b1[1] + t * d1[1]])


def scene_diameter(coords) -> float:
    """Bounding-box diagonal of a coordinate array; 0 for fewer than 2 points."""
    coords = np.asarray(coords, dtype=np.float64)
    if len(coords) < 2:
        return 0.0
    return float(np.linalg.norm(coords.max(axis=0) - coords.min(axis=0)))


def sample_unit_directions(rng: np.random.Generator, count: int, dimension: int):
    """Directions uniform on the unit sphere (m=3) or circle (m=2)."""
    v = rng.normal(size=(count, dimension))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    # resample the (measure-zero) degenerate draws
    while np.any(norms < 1e-12):
        bad = norms[:, 0] < 1e-12
        v[bad] = rng.normal(size=(int(bad.sum()), dimension))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
    return v / norms


class NeighborIndex:
    """Exact k-NN over a fixed coordinate array, ties broken by ascending id.

    Wraps a cKDTree; boundary ties are resolved with a ball re-query so the
    returned set is exact and deterministic regardless of tree traversal.
    """

    def __init__(self, coords, ids=None):
        self.coords = np.asarray(coords, dtype=np.float64)
        n = len(self.coords)
        self.ids = np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        self.tree = cKDTree(self.coords) if n else None

    def __len__(self):
        return len(self.coords)

    def query_row(self, row: int, k: int) -> np.ndarray:
        """Positional indices of the k nearest points to point `row` (self excluded)."""
        n = len(self.coords)
        if k >= n:
            raise GeometryError(f"k must be < n, got k={k}, n={n}")
        m = min(n, k + 2)
        dist, idx = self.tree.query(self.coords[row], m)
        dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
        keep = idx != row
        dist, idx = dist[keep], idx[keep]
        # boundary tie, or self not in the window: fall back to an exact ball query
        if len(dist) < k or (len(dist) > k and dist[k] - dist[k - 1] <= 1e-12 * max(1.0, dist[k - 1])):
            return self._ball_fallback(row, k)
        dist, idx = dist[:k], idx[:k]
        order = np.lexsort((self.ids[idx], dist))
        return idx[order]

    def _ball_fallback(self, row: int, k: int) -> np.ndarray:
        n = len(self.coords)
        m = min(n, k + 2)
        dist, _ = self.tree.query(self.coords[row], m)
        radius = float(np.atleast_1d(dist)[-1]) * (1 + 1e-9) + 1e-12
        while True:
            cand = np.array(self.tree.query_ball_point(self.coords[row], radius), dtype=np.int64)
            cand = cand[cand != row]
            if len(cand) > k:
                break
            radius *= 2.0
        d = np.linalg.norm(self.coords[cand] - self.coords[row], axis=1)
        order = np.lexsort((self.ids[cand], d))
        return cand[order][:k]

    def query_all(self, k: int) -> np.ndarray:
        """(n, k) positional indices for every point, same tie rules as query_row."""
        n = len(self.coords)
        if k >= n:
            raise GeometryError(f"k must be < n, got k={k}, n={n}")
        m = min(n, k + 2)
        dist, idx = self.tree.query(self.coords, m)
        out = np.empty((n, k), dtype=np.int64)
        for row in range(n):
            d_r, i_r = dist[row], idx[row]
            keep = i_r != row
            d_r, i_r = d_r[keep], i_r[keep]
            if len(d_r) < k or (len(d_r) > k and d_r[k] - d_r[k - 1] <= 1e-12 * max(1.0, d_r[k - 1])):
                out[row] = self._ball_fallback(row, k)
            else:
                d_r, i_r = d_r[:k], i_r[:k]
                order = np.lexsort((self.ids[i_r], d_r))
                out[row] = i_r[order]
        return out


def knn(cloud: PointCloud, query_id: int, k: int) -> list[int]:
    """Ids of the k nearest points to `query_id`, excluding it; ties -> smaller id."""
    index = NeighborIndex(cloud.coords, cloud.ids)
    rows = index.query_row(cloud.index_of(query_id), k)
    return [int(i) for i in cloud.ids[rows]]
