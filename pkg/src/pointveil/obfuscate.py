"""Geometry obfuscation schemes: points become lines, planes, rays or swapped points.

Every scheme maps a PointCloud to an ObfuscatedCloud whose items reveal only a
geometric container of each original point (a line, plane, or axis-permuted
point), never the point itself. Ground truth (which item hides which point)
goes into a separate sidecar that attack code must never read.

Schemes
-------
Line2D / Line3D_OLC : one random line through each point
PPL / PPLplus       : one line through each random pair of points, two
                      descriptors per line in shuffled order; the plus variant
                      avoids pairing two points that lie on the same detected plane
Ray                 : lines through each point and one of two cluster centers
Plane               : each point lifted to an axis-aligned plane (one axis kept)
CP                  : random pairs swap one uniformly chosen coordinate
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointveil.geometry import (
    GeometryError,
    PointCloud,
    sample_unit_directions,
    scene_diameter,
)

SCHEMES = ("Line2D", "Line3D_OLC", "PPL", "PPLplus", "Ray", "Plane", "CP")

# geometry payload carried by each scheme's items
SCHEME_KIND = {
    "Line2D": "line",
    "Line3D_OLC": "line",
    "PPL": "line",
    "PPLplus": "line",
    "Ray": "ray",
    "Plane": "plane",
    "CP": "point",
}


@dataclass
class ObfuscatedCloud:
    """Struct-of-arrays obfuscated scene; unused payloads stay None.

    bases/directions : (N, m) for line and ray items
    center_ids       : (N,) in {0, 1} for ray items; the two centers live in
                       metadata["centers"]
    axes/offsets     : (N,) for plane items
    coords           : (N, m) for CP items
    descriptors      : (N, s, D) with s = 2 for PPL lines, 1 otherwise; or None
    """

    scheme: str
    dimension: int
    ids: np.ndarray
    metadata: dict = field(default_factory=dict)
    bases: np.ndarray | None = None
    directions: np.ndarray | None = None
    center_ids: np.ndarray | None = None
    axes: np.ndarray | None = None
    offsets: np.ndarray | None = None
    coords: np.ndarray | None = None
    descriptors: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise GeometryError(f"unknown scheme {self.scheme!r}")
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if len(np.unique(self.ids)) != len(self.ids):
            raise GeometryError("item ids must be unique")
        self._index_of = {int(i): k for k, i in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    @property
    def kind(self):
        return SCHEME_KIND[self.scheme]

    def index_of(self, item_id: int) -> int:
        try:
            return self._index_of[int(item_id)]
        except KeyError:
            raise GeometryError(f"unknown item id {item_id}") from None

    @property
    def descriptors_per_item(self) -> int:
        return 0 if self.descriptors is None else self.descriptors.shape[1]


@dataclass
class GroundTruthSidecar:
    """Everything the oracle and the scorer need; the attack never reads this.

    links          : item id -> source point ids (two for PPL, in slot order)
    ppl_desc_slots : item id -> slot index owning each stored descriptor
                     (desc j of item belongs to links[item][ppl_desc_slots[item][j]])
    cp_axes        : item id -> axis swapped within its pair (CP only)
    labels         : synthetic-scene labels (plane labels, blob labels, ...)
    """

    cloud: PointCloud
    links: dict
    ppl_desc_slots: dict | None = None
    cp_axes: dict | None = None
    labels: dict = field(default_factory=dict)

    def source_ids(self, item_id: int):
        return self.links[int(item_id)]


def _base_rerandomize(points, directions, diameter, rng):
    """Slide each line's stored base to a random spot along the line.

    Storing the source point as the base would hand it to the attacker; any
    other point on the line carries no extra information.
    """
    u = rng.uniform(-diameter, diameter, size=len(points))
    return points + u[:, None] * directions


def _single_descriptors(cloud, rows):
    if cloud.descriptors is None:
        return None
    return cloud.descriptors[rows][:, None, :]


def obfuscate_random_lines(cloud: PointCloud, seed: int):
    """One random line per point (uniform direction, base slid along the line)."""
    rng = np.random.default_rng(seed)
    n, m = len(cloud), cloud.dimension
    scheme = "Line3D_OLC" if m == 3 else "Line2D"
    diameter = scene_diameter(cloud.coords)
    dirs = sample_unit_directions(rng, n, m)
    bases = _base_rerandomize(cloud.coords, dirs, diameter, rng) if n else np.empty((0, m))
    obf = ObfuscatedCloud(
        scheme=scheme,
        dimension=m,
        ids=cloud.ids.copy(),
        metadata={"seed": int(seed), "base_range": diameter, "units": cloud.metadata.get("units")},
        bases=bases,
        directions=dirs,
        descriptors=_single_descriptors(cloud, np.arange(n)),
    )
    links = {int(i): (int(i),) for i in cloud.ids}
    return obf, GroundTruthSidecar(cloud=cloud, links=links)


def detect_planes_ransac(coords, threshold, min_inliers=50, iterations=1000, max_planes=8, seed=0):
    """Sequential RANSAC plane segmentation; returns a plane label per point (-1 none).

    Repeatedly fits the best-supported plane among still-unlabeled points
    (3-point samples, inliers within `threshold` of the plane), refines it on
    its inliers, and removes them; stops below `min_inliers` support.
    """
    rng = np.random.default_rng(seed)
    n = len(coords)
    labels = np.full(n, -1, dtype=np.int64)
    remaining = np.arange(n)
    for plane_idx in range(max_planes):
        if len(remaining) < max(min_inliers, 3):
            break
        pts = coords[remaining]
        best_count, best = 0, None
        for _ in range(iterations):
            i, j, k = rng.choice(len(pts), size=3, replace=False)
            normal = np.cross(pts[j] - pts[i], pts[k] - pts[i])
            norm = np.linalg.norm(normal)
            if norm < 1e-12:
                continue
            normal = normal / norm
            dist = np.abs((pts - pts[i]) @ normal)
            count = int((dist <= threshold).sum())
            if count > best_count:
                best_count, best = count, (pts[i], normal)
        if best_count < min_inliers:
            break
        # refine: centroid + smallest principal axis of the inlier set
        p0, normal = best
        inl = np.abs((pts - p0) @ normal) <= threshold
        centroid = pts[inl].mean(axis=0)
        cov = np.cov((pts[inl] - centroid).T)
        w, v = np.linalg.eigh(cov)
        normal = v[:, 0]
        inl = np.abs((pts - centroid) @ normal) <= threshold
        if int(inl.sum()) < min_inliers:
            break
        labels[remaining[inl]] = plane_idx
        remaining = remaining[~inl]
    return labels


def _draw_pairs(ids, rng, coords, plane_labels, max_retries):
    """Random pairing, redrawing partners that fall on the partner's plane.

    Pops anchors off a shuffled pool; each anchor takes the next acceptable
    partner, always skipping coincident candidates and skipping same-plane
    candidates while the per-pair retry budget lasts. A same-plane partner is
    accepted once the budget is spent (the plus variant discourages, not
    forbids) so pairing always terminates.
    """
    pool = list(rng.permutation(ids))
    pairs = []
    while len(pool) >= 2:
        ia = int(pool.pop())
        chosen_pos = None
        fallback_pos = None
        retries = max_retries
        for pos in range(len(pool) - 1, -1, -1):
            ib = int(pool[pos])
            if np.linalg.norm(coords[ia] - coords[ib]) < 1e-9:
                continue
            same_plane = (
                plane_labels is not None
                and plane_labels[ia] >= 0
                and plane_labels[ia] == plane_labels[ib]
            )
            if same_plane:
                if fallback_pos is None:
                    fallback_pos = pos
                if retries > 0:
                    retries -= 1
                    continue
            chosen_pos = pos
            break
        if chosen_pos is None:
            chosen_pos = fallback_pos
        if chosen_pos is None:
            raise GeometryError("cannot pair points: all remaining candidates coincident")
        pairs.append((ia, int(pool[chosen_pos])))
        del pool[chosen_pos]
    dropped = int(pool[0]) if pool else None
    return pairs, dropped


def obfuscate_ppl(
    cloud: PointCloud,
    seed: int,
    plus: bool = False,
    plane_inlier_threshold: float | None = None,
    max_retries: int = 20,
):
    """Paired-point lines: each random pair becomes the line through both points.

    Each line carries the pair's two descriptors in shuffled order. With
    plus=True (3D only), points are first segmented into planes and same-plane
    pairs are redrawn up to max_retries; the default detection threshold is 1%
    of the scene diameter. Odd point counts drop one point (sidecar records it).
    """
    n, m = len(cloud), cloud.dimension
    if n < 2:
        raise GeometryError("PPL needs at least 2 points")
    if plus and m != 3:
        raise GeometryError("PPL plus plane rejection is 3D only")
    rng = np.random.default_rng(seed)
    diameter = scene_diameter(cloud.coords)

    coords_by_id = {int(pid): cloud.coords[cloud.index_of(pid)] for pid in cloud.ids}
    plane_labels = None
    if plus:
        if plane_inlier_threshold is None:
            plane_inlier_threshold = 0.01 * diameter
        row_labels = detect_planes_ransac(
            cloud.coords, plane_inlier_threshold, seed=int(rng.integers(2**32))
        )
        plane_labels = {int(pid): int(row_labels[cloud.index_of(pid)]) for pid in cloud.ids}

    pairs, dropped = _draw_pairs(cloud.ids, rng, coords_by_id, plane_labels, max_retries)

    n_items = len(pairs)
    bases = np.empty((n_items, m))
    dirs = np.empty((n_items, m))
    desc = None
    if cloud.descriptors is not None:
        desc = np.empty((n_items, 2, cloud.descriptor_dim))
    links = {}
    desc_slots = {}
    for item_id, (ia, ib) in enumerate(pairs):
        pa, pb = coords_by_id[ia], coords_by_id[ib]
        d = pb - pa
        dirs[item_id] = d / np.linalg.norm(d)
        bases[item_id] = pa
        links[item_id] = (ia, ib)
        flip = bool(rng.integers(2))
        desc_slots[item_id] = (1, 0) if flip else (0, 1)
        if desc is not None:
            ra, rb = cloud.index_of(ia), cloud.index_of(ib)
            pair_desc = (
                [cloud.descriptors[rb], cloud.descriptors[ra]]
                if flip
                else [cloud.descriptors[ra], cloud.descriptors[rb]]
            )
            desc[item_id] = np.stack(pair_desc)
    bases = _base_rerandomize(bases, dirs, diameter, rng)

    scheme = "PPLplus" if plus else "PPL"
    metadata = {
        "seed": int(seed),
        "base_range": diameter,
        "units": cloud.metadata.get("units"),
        "dropped_count": 0 if dropped is None else 1,
    }
    if plus:
        metadata["plane_inlier_threshold"] = float(plane_inlier_threshold)
        metadata["max_retries"] = int(max_retries)
    obf = ObfuscatedCloud(
        scheme=scheme,
        dimension=m,
        ids=np.arange(n_items, dtype=np.int64),
        metadata=metadata,
        bases=bases,
        directions=dirs,
        descriptors=desc,
    )
    sidecar = GroundTruthSidecar(cloud=cloud, links=links, ppl_desc_slots=desc_slots)
    if dropped is not None:
        sidecar.labels["dropped_id"] = dropped
    return obf, sidecar


def kmeans2(coords, rng, iterations=50, restarts=5, max_reseeds=10):
    """Plain 2-means: random 2-point inits, Lloyd updates, keep lowest inertia.

    An empty cluster aborts the restart and draws fresh seeds; more than
    `max_reseeds` aborted restarts is an error.
    """
    n = len(coords)
    best = None
    successes = 0
    failures = 0
    while successes < restarts:
        if failures >= max_reseeds:
            raise GeometryError("k-means could not find two non-empty clusters")
        rows = rng.choice(n, size=2, replace=False)
        centers = coords[rows].copy()
        if np.linalg.norm(centers[0] - centers[1]) < 1e-12:
            failures += 1
            continue
        assign = None
        ok = True
        for _ in range(iterations):
            d0 = ((coords - centers[0]) ** 2).sum(axis=1)
            d1 = ((coords - centers[1]) ** 2).sum(axis=1)
            new_assign = (d1 < d0).astype(np.int8)
            if not (np.any(new_assign == 0) and np.any(new_assign == 1)):
                ok = False
                break
            if assign is not None and np.array_equal(new_assign, assign):
                assign = new_assign
                break
            assign = new_assign
            centers[0] = coords[assign == 0].mean(axis=0)
            centers[1] = coords[assign == 1].mean(axis=0)
        if not ok:
            failures += 1
            continue
        d0 = ((coords - centers[0]) ** 2).sum(axis=1)
        d1 = ((coords - centers[1]) ** 2).sum(axis=1)
        inertia = float(np.minimum(d0, d1).sum())
        if best is None or inertia < best[0]:
            best = (inertia, centers.copy(), np.where(d1 < d0, 1, 0).astype(np.int8))
        successes += 1
    return best[1], best[2]


def obfuscate_ray(cloud: PointCloud, seed: int, center_assignment: str = "random"):
    """Ray clouds: a line through each point and one of two k-means centers.

    center_assignment picks which center a point's line goes through:
    'random' (default), 'opposite' (the other cluster's center), or 'same'.
    """
    n, m = len(cloud), cloud.dimension
    if m != 3:
        raise GeometryError("ray clouds are 3D only")
    if n < 2:
        raise GeometryError("ray clouds need at least 2 points")
    if center_assignment not in ("random", "opposite", "same"):
        raise GeometryError(f"unknown center assignment {center_assignment!r}")
    rng = np.random.default_rng(seed)
    centers, assign = kmeans2(cloud.coords, rng)
    if center_assignment == "random":
        center_ids = rng.integers(0, 2, n).astype(np.int8)
    elif center_assignment == "opposite":
        center_ids = (1 - assign).astype(np.int8)
    else:
        center_ids = assign.astype(np.int8)

    diff = centers[center_ids] - cloud.coords
    norms = np.linalg.norm(diff, axis=1)
    # a point exactly on its center would give no direction; nudge to the other center
    coincident = norms < 1e-12
    if np.any(coincident):
        center_ids = np.where(coincident, 1 - center_ids, center_ids).astype(np.int8)
        diff = centers[center_ids] - cloud.coords
        norms = np.linalg.norm(diff, axis=1)
        if np.any(norms < 1e-12):
            raise GeometryError("point coincides with both cluster centers")
    dirs = diff / norms[:, None]
    diameter = scene_diameter(cloud.coords)
    bases = _base_rerandomize(cloud.coords, dirs, diameter, rng)
    obf = ObfuscatedCloud(
        scheme="Ray",
        dimension=m,
        ids=cloud.ids.copy(),
        metadata={
            "seed": int(seed),
            "base_range": diameter,
            "units": cloud.metadata.get("units"),
            "centers": centers.tolist(),
            "center_assignment": center_assignment,
        },
        bases=bases,
        directions=dirs,
        center_ids=center_ids,
        descriptors=_single_descriptors(cloud, np.arange(n)),
    )
    links = {int(i): (int(i),) for i in cloud.ids}
    return obf, GroundTruthSidecar(cloud=cloud, links=links)


def obfuscate_planes(cloud: PointCloud, seed: int):
    """Plane lifting: ids split three ways; each point keeps one coordinate.

    A point assigned to the Y set becomes the plane {p : p_y = point_y}; the
    output is the union of all three sets (attacker sees every server).
    """
    n, m = len(cloud), cloud.dimension
    if m != 3:
        raise GeometryError("plane lifting is 3D only")
    if n < 3:
        raise GeometryError("plane lifting needs at least 3 points")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    sizes = [n // 3 + (1 if i < n % 3 else 0) for i in range(3)]
    axes = np.empty(n, dtype=np.int8)
    start = 0
    for axis, size in enumerate(sizes):
        axes[perm[start : start + size]] = axis
        start += size
    offsets = cloud.coords[np.arange(n), axes.astype(int)]
    obf = ObfuscatedCloud(
        scheme="Plane",
        dimension=m,
        ids=cloud.ids.copy(),
        metadata={"seed": int(seed), "units": cloud.metadata.get("units")},
        axes=axes,
        offsets=offsets.astype(np.float64),
        descriptors=_single_descriptors(cloud, np.arange(n)),
    )
    links = {int(i): (int(i),) for i in cloud.ids}
    return obf, GroundTruthSidecar(cloud=cloud, links=links)


def obfuscate_cp(cloud: PointCloud, seed: int):
    """Coordinate permutation: random pairs swap one uniformly chosen axis.

    Odd point counts leave one point unchanged; its id is recorded in the
    metadata as required by the scheme definition.
    """
    n, m = len(cloud), cloud.dimension
    if n < 2:
        raise GeometryError("CP needs at least 2 points")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    coords = cloud.coords.copy()
    cp_axes = {}
    for k in range(n // 2):
        ra, rb = perm[2 * k], perm[2 * k + 1]
        axis = int(rng.integers(0, m))
        coords[ra, axis], coords[rb, axis] = coords[rb, axis], coords[ra, axis]
        cp_axes[int(cloud.ids[ra])] = axis
        cp_axes[int(cloud.ids[rb])] = axis
    passthrough = int(cloud.ids[perm[-1]]) if n % 2 else None
    obf = ObfuscatedCloud(
        scheme="CP",
        dimension=m,
        ids=cloud.ids.copy(),
        metadata={
            "seed": int(seed),
            "units": cloud.metadata.get("units"),
            "passthrough_id": passthrough,
        },
        coords=coords,
        descriptors=_single_descriptors(cloud, np.arange(n)),
    )
    links = {int(i): (int(i),) for i in cloud.ids}
    return obf, GroundTruthSidecar(cloud=cloud, links=links, cp_axes=cp_axes)


def obfuscate(cloud: PointCloud, scheme: str, seed: int, **params):
    """Dispatch by scheme name; returns (ObfuscatedCloud, GroundTruthSidecar)."""
    if scheme in ("Line2D", "Line3D_OLC"):
        want_m = 2 if scheme == "Line2D" else 3
        if cloud.dimension != want_m:
            raise GeometryError(f"{scheme} requires dimension {want_m}")
        return obfuscate_random_lines(cloud, seed, **params)
    if scheme == "PPL":
        return obfuscate_ppl(cloud, seed, plus=False, **params)
    if scheme == "PPLplus":
        return obfuscate_ppl(cloud, seed, plus=True, **params)
    if scheme == "Ray":
        return obfuscate_ray(cloud, seed, **params)
    if scheme == "Plane":
        return obfuscate_planes(cloud, seed, **params)
    if scheme == "CP":
        return obfuscate_cp(cloud, seed, **params)
    raise GeometryError(f"unknown scheme {scheme!r}")
