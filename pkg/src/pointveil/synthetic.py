"""Deterministic synthetic scenes: desk-scale stand-ins for real reconstructions.

Four scene kinds (uniform box, Gaussian blobs, planar rooms, integer grid) in
2D (pixels) or 3D (meters), each returning a PointCloud plus a label dict that
goes into the ground-truth sidecar. Descriptors, when requested, are either
i.i.d. random unit vectors or cluster-correlated unit vectors so that
descriptor similarity tracks spatial proximity.
"""

from __future__ import annotations

import numpy as np

from pointveil.geometry import GeometryError, PointCloud

# Default extents: a small room in meters, a VGA frame in pixels.
BOX_3D = (4.0, 3.0, 2.5)
BOX_2D = (640.0, 480.0)

SCENE_KINDS = ("uniform_box", "gaussian_blobs", "planar_rooms", "grid")


def _box(m, extents):
    if extents is not None:
        ext = tuple(float(e) for e in extents)
        if len(ext) != m:
            raise GeometryError(f"extents must have {m} entries")
        return ext
    return BOX_3D if m == 3 else BOX_2D


def _units(m):
    return "m" if m == 3 else "px"


def uniform_box(n, m, rng, extents=None):
    ext = _box(m, extents)
    coords = rng.uniform(0.0, 1.0, (n, m)) * np.asarray(ext)
    return coords, {}


def default_blob_centers(m, extents=None):
    """Two blobs at opposite ends of the box diagonal."""
    ext = np.asarray(_box(m, extents))
    return np.stack([0.2 * ext, 0.8 * ext])


def gaussian_blobs(n, m, rng, centers=None, sigma=None, extents=None):
    ext = _box(m, extents)
    if centers is None:
        centers = default_blob_centers(m, extents)
    centers = np.asarray(centers, dtype=np.float64)
    if sigma is None:
        sigma = 0.08 * float(np.linalg.norm(ext))
    labels = rng.integers(0, len(centers), n)
    coords = centers[labels] + rng.normal(scale=sigma, size=(n, m))
    return coords, {"blob_labels": labels.tolist(),
                    "blob_centers": centers.tolist(),
                    "blob_sigma": float(sigma)}


def planar_rooms(n, m, rng, plane_count=4, clutter_fraction=0.2, extents=None):
    """Points on 2-6 axis-aligned planes plus uniform clutter; labels kept.

    Plane points get a tiny jitter along the plane normal (well below any
    sensible plane-detection threshold) so scenes are not exactly degenerate.
    """
    if m != 3:
        raise GeometryError("planar_rooms scenes are 3D only")
    if not 2 <= plane_count <= 6:
        raise GeometryError("plane_count must be in [2, 6]")
    ext = np.asarray(_box(m, extents))
    # distinct (axis, offset) pairs: walls first, then interior planes
    candidates = [(0, 0.0), (1, 0.0), (2, 0.0), (0, ext[0]), (1, ext[1]), (2, ext[2])]
    order = rng.permutation(len(candidates))
    planes = [candidates[i] for i in order[:plane_count]]

    n_clutter = int(round(n * clutter_fraction))
    n_on_planes = n - n_clutter
    counts = np.full(plane_count, n_on_planes // plane_count)
    counts[: n_on_planes % plane_count] += 1

    jitter = 0.002 * min(ext)
    coords = np.empty((n, 3))
    labels = np.full(n, -1, dtype=np.int64)
    row = 0
    for pi, ((axis, offset), cnt) in enumerate(zip(planes, counts)):
        pts = rng.uniform(0.0, 1.0, (cnt, 3)) * ext
        pts[:, axis] = offset + rng.normal(scale=jitter, size=cnt)
        coords[row : row + cnt] = pts
        labels[row : row + cnt] = pi
        row += cnt
    coords[row:] = rng.uniform(0.0, 1.0, (n_clutter, 3)) * ext
    perm = rng.permutation(n)
    return coords[perm], {
        "plane_labels": labels[perm].tolist(),
        "planes": [{"axis": int(a), "offset": float(o)} for a, o in planes],
    }


def grid(n, m, rng):
    """First n points of the smallest integer lattice holding n, in raster order."""
    side = int(np.ceil(n ** (1.0 / m) - 1e-9))
    axes = [np.arange(side)] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([a.ravel() for a in mesh], axis=1).astype(np.float64)
    return coords[:n], {"grid_side": side}


def _cluster_descriptors(coords, rng, dim, cluster_count, noise):
    n = len(coords)
    cluster_count = min(cluster_count, n)
    center_rows = rng.choice(n, size=cluster_count, replace=False)
    centers = coords[center_rows]
    d2 = ((coords[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    protos = rng.normal(size=(cluster_count, dim))
    desc = protos[assign] + noise * rng.normal(size=(n, dim))
    desc /= np.linalg.norm(desc, axis=1, keepdims=True)
    return desc, assign


def attach_descriptors(coords, rng, mode, dim=8, cluster_count=8, noise=0.15):
    """Descriptor matrix for `coords`: 'random' or spatially 'clustered' unit vectors."""
    n = len(coords)
    if mode == "random":
        desc = rng.normal(size=(n, dim))
        desc /= np.linalg.norm(desc, axis=1, keepdims=True)
        return desc, {}
    if mode == "clustered":
        desc, assign = _cluster_descriptors(coords, rng, dim, cluster_count, noise)
        return desc, {"descriptor_clusters": assign.tolist()}
    raise GeometryError(f"unknown descriptor mode {mode!r}")


def generate_synthetic(
    kind,
    n,
    m,
    seed,
    descriptors="none",
    descriptor_dim=8,
    descriptor_clusters=8,
    descriptor_noise=0.15,
    extents=None,
    blob_centers=None,
    blob_sigma=None,
    plane_count=4,
    clutter_fraction=0.2,
):
    """Build a deterministic synthetic PointCloud plus its ground-truth labels.

    Parameters
    ----------
    kind        : one of uniform_box | gaussian_blobs | planar_rooms | grid
    n, m        : point count (>= 1) and dimension (2 or 3)
    seed        : RNG seed; identical inputs give identical clouds
    descriptors : "none", "random", or "clustered" (cluster-correlated)

    Returns (cloud, labels); labels belong in the sidecar, never in the
    obfuscated output.
    """
    if n < 1:
        raise GeometryError(f"n must be >= 1, got {n}")
    if m not in (2, 3):
        raise GeometryError(f"m must be 2 or 3, got {m}")
    rng = np.random.default_rng(seed)
    if kind == "uniform_box":
        coords, labels = uniform_box(n, m, rng, extents)
    elif kind == "gaussian_blobs":
        coords, labels = gaussian_blobs(n, m, rng, blob_centers, blob_sigma, extents)
    elif kind == "planar_rooms":
        coords, labels = planar_rooms(n, m, rng, plane_count, clutter_fraction, extents)
    elif kind == "grid":
        coords, labels = grid(n, m, rng)
    else:
        raise GeometryError(f"unknown scene kind {kind!r}")

    desc = None
    if descriptors != "none":
        desc, desc_labels = attach_descriptors(
            coords, rng, descriptors, descriptor_dim, descriptor_clusters, descriptor_noise
        )
        labels.update(desc_labels)

    cloud = PointCloud(
        dimension=m,
        ids=np.arange(n, dtype=np.int64),
        coords=coords,
        descriptors=desc,
        metadata={"kind": kind, "seed": int(seed), "units": _units(m)},
    )
    return cloud, labels
