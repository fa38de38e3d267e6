"""Recovery attack: reconstruct original points from obfuscated geometry.

Each subject (an obfuscated item, or one slot of a paired-point line) is
recovered independently: RANSAC samples a few neighborhood members, solves the
subject's free coordinates in closed form (both subproblems are exactly
quadratic), keeps the hypothesis with the most members within the inlier
threshold, and re-solves once over that inlier set. Scheme-specific steps:
ray subjects first drop neighbors through their own center, coordinate-swapped
points first vote on each item's swapped axis, and paired-point lines finish
by assigning their two descriptors to the two recovered points.

Determinism holds under any thread count: every subject draws from its own
RNG stream keyed by (seed, subject id, slot).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from pointveil.geometry import (
    AxisPlaneGeom,
    GeometryError,
    LineGeom,
    intersect_lines_2d,
    scene_diameter,
)
from pointveil.neighborhoods import STREAM_RANSAC, NeighborhoodSet, subject_rng
from pointveil.obfuscate import ObfuscatedCloud

# deterministic chunk schedule: cheap first probes, then wide vectorized sweeps
_CHUNK_SIZES = (8, 32, 128, 512)

_ANCHOR_PAIR_SAMPLES = 10_000


@dataclass
class RecoveryConfig:
    """Attack parameters; unset fields resolve per cloud (dimension, scale)."""

    seed: int = 0
    ransac_max_iters: int = 10_000
    ransac_sample_size: int | None = None   # 3 in 3D, 2 in 2D
    inlier_threshold: float | None = None   # 0.02 x scene diameter
    assumed_inlier_ratio: float | None = None
    confidence: float = 0.99
    k_neighbors: int | None = None          # 50 in 3D, 20 in 2D (pipeline default)
    exhaustive: bool = False                # enumerate every sample subset
    refine_unsquared: bool = False          # golden-section polish of the unsquared cost
    threads: int = 1

    def __post_init__(self):
        if self.inlier_threshold is not None and not self.inlier_threshold > 0:
            raise GeometryError("inlier_threshold must be positive")
        if self.ransac_sample_size is not None and self.ransac_sample_size < 1:
            raise GeometryError("ransac_sample_size must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise GeometryError("confidence must be in (0, 1)")
        if self.ransac_max_iters < 1:
            raise GeometryError("ransac_max_iters must be >= 1")
        if self.threads < 1:
            raise GeometryError("threads must be >= 1")

    def sample_size_for(self, dimension: int) -> int:
        if self.ransac_sample_size is not None:
            return self.ransac_sample_size
        return 3 if dimension == 3 else 2

    def default_k_for(self, dimension: int) -> int:
        if self.k_neighbors is not None:
            return self.k_neighbors
        return 50 if dimension == 3 else 20


@dataclass
class RecoveredCloud:
    """Recovered points in canonical subject order, with per-subject diagnostics."""

    scheme: str
    dimension: int
    subjects: np.ndarray       # (S, 2) int64 (item id, slot)
    coords: np.ndarray         # (S, m)
    inlier_counts: np.ndarray  # (S,)
    costs: np.ndarray          # (S,) unsquared distance sum over the inlier set
    degenerate: np.ndarray     # (S,) bool
    metadata: dict = field(default_factory=dict)
    desc_assignment: np.ndarray | None = None  # PPL: descriptor index given to each slot
    assign_ties: np.ndarray | None = None      # PPL: tied descriptor assignment

    def __post_init__(self):
        self.subjects = np.asarray(self.subjects, dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((self.subjects[:, 1], self.subjects[:, 0]))
        self.subjects = self.subjects[order]
        self.coords = np.asarray(self.coords, dtype=np.float64)[order]
        self.inlier_counts = np.asarray(self.inlier_counts, dtype=np.int64)[order]
        self.costs = np.asarray(self.costs, dtype=np.float64)[order]
        self.degenerate = np.asarray(self.degenerate, dtype=bool)[order]
        if self.desc_assignment is None:
            self.desc_assignment = np.full(len(self.subjects), -1, dtype=np.int8)
        else:
            self.desc_assignment = np.asarray(self.desc_assignment, dtype=np.int8)[order]
        if self.assign_ties is None:
            self.assign_ties = np.zeros(len(self.subjects), dtype=bool)
        else:
            self.assign_ties = np.asarray(self.assign_ties, dtype=bool)[order]
        self._row_of = {(int(i), int(s)): r for r, (i, s) in enumerate(self.subjects)}

    def __len__(self):
        return len(self.subjects)

    def row_of(self, item_id: int, slot: int = 0) -> int:
        return self._row_of[(int(item_id), int(slot))]


# --------------------------------------------------------------- geometry prep


def _rows_of(obf: ObfuscatedCloud, id_array):
    """Vectorized item id -> row translation (sorter cached on the cloud)."""
    ids = np.asarray(id_array, dtype=np.int64)
    order = getattr(obf, "_rows_sorter", None)
    if order is None:
        order = np.argsort(obf.ids, kind="stable")
        obf._rows_sorter = order
    pos = np.searchsorted(obf.ids, ids, sorter=order)
    rows = order[np.minimum(pos, len(order) - 1)]
    if not np.array_equal(obf.ids[rows], ids):
        raise GeometryError("neighborhood references unknown item ids")
    return rows


def scene_scale(obf: ObfuscatedCloud) -> float:
    """Attacker-visible scale estimate used to resolve relative thresholds."""
    if obf.kind in ("line", "ray"):
        base_range = obf.metadata.get("base_range")
        if base_range:
            return float(base_range)
        return scene_diameter(obf.bases)
    if obf.kind == "plane":
        spans = np.zeros(3)
        for axis in range(3):
            offs = obf.offsets[obf.axes == axis]
            if len(offs) >= 2:
                spans[axis] = offs.max() - offs.min()
        return float(np.linalg.norm(spans))
    return scene_diameter(obf.coords)


def line_sq_coeffs_to_lines(base, direction, nb_bases, nb_dirs):
    """Squared distance from base + t*dir to each neighbor line, as a*t^2+b*t+c."""
    w = base - nb_bases
    dd = nb_dirs @ direction
    u = direction - dd[:, None] * nb_dirs
    wv = (w * nb_dirs).sum(axis=1)
    v = w - wv[:, None] * nb_dirs
    return (u * u).sum(1), 2.0 * (u * v).sum(1), (v * v).sum(1)


def line_sq_coeffs_to_planes(base, direction, nb_axes, nb_offsets):
    """Squared distance from base + t*dir to each axis plane, as a*t^2+b*t+c."""
    d_k = direction[nb_axes]
    r = base[nb_axes] - nb_offsets
    return d_k * d_k, 2.0 * d_k * r, r * r


# --------------------------------------------------------------- closed forms


def solve_on_line(subject: LineGeom, neighbor_geoms, init_t: float = 0.0):
    """Minimize the summed squared distances to the neighbors along the subject line.

    Neighbors may be lines or axis-aligned planes; each contributes a quadratic
    in the line parameter, so the optimum is -B/(2A) for the summed
    coefficients. Falls back to init_t when every neighbor is parallel to the
    subject (A ~ 0). Returns (t*, unsquared distance sum at t*).
    """
    if not neighbor_geoms:
        raise GeometryError("solve_on_line needs at least one neighbor")
    a_parts, b_parts, c_parts = [], [], []
    lines = [g for g in neighbor_geoms if isinstance(g, LineGeom)]
    planes = [g for g in neighbor_geoms if isinstance(g, AxisPlaneGeom)]
    if len(lines) + len(planes) != len(neighbor_geoms):
        raise GeometryError("neighbor geometries must be lines or axis planes")
    if lines:
        a, b, c = line_sq_coeffs_to_lines(
            subject.base,
            subject.direction,
            np.stack([g.base for g in lines]),
            np.stack([g.direction for g in lines]),
        )
        a_parts.append(a), b_parts.append(b), c_parts.append(c)
    if planes:
        a, b, c = line_sq_coeffs_to_planes(
            subject.base,
            subject.direction,
            np.asarray([g.axis for g in planes]),
            np.asarray([g.offset for g in planes]),
        )
        a_parts.append(a), b_parts.append(b), c_parts.append(c)
    a = np.concatenate(a_parts)
    b = np.concatenate(b_parts)
    c = np.concatenate(c_parts)
    A, B = a.sum(), b.sum()
    t = float(-B / (2.0 * A)) if A >= 1e-12 else float(init_t)
    cost = float(np.sqrt(np.clip(a * t * t + b * t + c, 0.0, None)).sum())
    return t, cost


def solve_on_plane(subject: AxisPlaneGeom, neighbor_geoms, init=(0.0, 0.0)):
    """Minimize summed squared distances to neighbor planes over the subject plane.

    The two free coordinates separate: each is the mean of the offsets of the
    neighbor planes on that axis, or the init value when no neighbor
    constrains it. Returns ((u, v) on the free axes, unsquared distance sum).
    """
    if not neighbor_geoms:
        raise GeometryError("solve_on_plane needs at least one neighbor")
    axes = np.asarray([g.axis for g in neighbor_geoms])
    offsets = np.asarray([g.offset for g in neighbor_geoms])
    free = [a for a in range(3) if a != subject.axis]
    uv = np.asarray(init, dtype=np.float64).copy()
    for j, axis in enumerate(free):
        mask = axes == axis
        if mask.any():
            uv[j] = offsets[mask].mean()
    point = np.empty(3)
    point[subject.axis] = subject.offset
    point[free[0]], point[free[1]] = uv[0], uv[1]
    cost = float(np.abs(point[axes] - offsets).sum())
    return uv, cost


def _golden_refine(fun, t0, width):
    """Golden-section polish of a 1-D cost around t0; width bounds the bracket."""
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(fun, bounds=(t0 - width, t0 + width), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x) if res.fun <= fun(t0) else t0


# --------------------------------------------------------------- RANSAC engine


def _sample_subsets(rng, k, s, count):
    """`count` uniform s-subsets of range(k), one per row."""
    keys = rng.random((count, k))
    return np.argpartition(keys, s - 1, axis=1)[:, :s]


def _exhaustive_subsets(k, s):
    return np.asarray(list(combinations(range(k), s)), dtype=np.int64)


def _adaptive_bound(confidence, inlier_ratio, s):
    w = min(max(inlier_ratio, 0.0), 1.0)
    if w >= 1.0:
        return 0
    wp = min(w**s, 1.0 - 1e-16)
    if wp <= 1e-12:
        return np.iinfo(np.int64).max
    return int(np.ceil(np.log(1.0 - confidence) / np.log1p(-wp)))


def _ransac_quadratic(a, b, c, delta, s, cfg, rng, init_t):
    """RANSAC over 1-DOF candidates t with per-neighbor squared distance a t^2+b t+c.

    Returns (t, inlier mask, inlier cost, degenerate flag). Hypotheses are
    evaluated in deterministic growing chunks; ties on inlier count break to
    the lower inlier cost, then to the earlier hypothesis. A candidate with
    zero inliers is still kept as best effort (ranked by full-set cost); the
    degenerate flag is reserved for subjects whose every hypothesis was
    algebraically degenerate.
    """
    k = len(a)
    s = min(s, k)
    delta2 = delta * delta
    best_count, best_cost, best_t, best_mask = -1, np.inf, None, None

    if cfg.exhaustive:
        subsets = _exhaustive_subsets(k, s)
        chunks = iter([subsets[i : i + 2048] for i in range(0, len(subsets), 2048)])
        target = len(subsets)
    else:
        target = cfg.ransac_max_iters
        if cfg.assumed_inlier_ratio is not None:
            target = min(
                target, max(1, _adaptive_bound(cfg.confidence, cfg.assumed_inlier_ratio, s))
            )

    done = 0
    schedule = 0
    while done < target:
        if cfg.exhaustive:
            idx = next(chunks, None)
            if idx is None:
                break
        else:
            size = min(_CHUNK_SIZES[min(schedule, len(_CHUNK_SIZES) - 1)], target - done)
            schedule += 1
            idx = _sample_subsets(rng, k, s, size)
        A = a[idx].sum(axis=1)
        B = b[idx].sum(axis=1)
        valid = A >= 1e-12
        t = np.where(valid, -B / np.where(valid, 2.0 * A, 1.0), 0.0)
        q = a[:, None] * t * t + b[:, None] * t + c[:, None]   # (k, chunk)
        counts = np.where(valid, (q <= delta2).sum(axis=0), -1)
        top = int(counts.max())
        if top >= best_count and top >= 0:
            tied = np.nonzero(counts == top)[0]
            d = np.sqrt(np.clip(q[:, tied], 0.0, None))
            if top > 0:
                costs = np.where(d <= delta, d, 0.0).sum(axis=0)  # inlier-only cost
            else:
                costs = d.sum(axis=0)  # no inliers anywhere: full-set cost
            j = int(np.argmin(costs))                             # earliest wins ties
            if top > best_count or float(costs[j]) < best_cost:
                pick = int(tied[j])
                best_count = top
                best_cost = float(costs[j])
                best_t = float(t[pick])
                best_mask = q[:, pick] <= delta2
        done += len(idx)
        if not cfg.exhaustive and cfg.assumed_inlier_ratio is None and best_count > 0:
            bound = _adaptive_bound(cfg.confidence, best_count / k, s)
            target = min(target, max(done, bound))

    if best_mask is None:
        return float(init_t), np.zeros(k, dtype=bool), np.inf, True

    A = a[best_mask].sum()
    B = b[best_mask].sum()
    t_final = float(-B / (2.0 * A)) if A >= 1e-12 else best_t

    if cfg.refine_unsquared:
        am, bm, cm = a[best_mask], b[best_mask], c[best_mask]

        def unsquared(t):
            return float(np.sqrt(np.clip(am * t * t + bm * t + cm, 0.0, None)).sum())

        t_final = _golden_refine(unsquared, t_final, max(delta * 10.0, 1e-6))

    q_final = a * t_final * t_final + b * t_final + c
    scope = best_mask if best_mask.any() else slice(None)
    cost = float(np.sqrt(np.clip(q_final[scope], 0.0, None)).sum())
    return t_final, best_mask, cost, False


def _ransac_axis_planes(nb_axes, nb_offsets, subject_axis, subject_offset, delta, s, cfg, rng, init_uv):
    """RANSAC for a 2-DOF subject on an axis plane with axis-plane neighbors.

    A hypothesis takes, per free axis, the mean offset of the sampled planes
    on that axis (init when unconstrained); samples constraining neither free
    axis are invalid. Returns (uv, inlier mask, inlier cost, degenerate flag).
    """
    k = len(nb_axes)
    s = min(s, k)
    free = [a for a in range(3) if a != subject_axis]
    const_dist = np.abs(subject_offset - nb_offsets)  # used where axis == subject's

    def distances(u, v):
        """(k, chunk) distances of candidate points (u_h, v_h) to every neighbor."""
        chunk = len(u)
        out = np.empty((k, chunk))
        for axis_value, coord in ((subject_axis, None), (free[0], u), (free[1], v)):
            mask = nb_axes == axis_value
            if not mask.any():
                continue
            if coord is None:
                out[mask] = const_dist[mask][:, None]
            else:
                out[mask] = np.abs(coord[None, :] - nb_offsets[mask][:, None])
        return out

    best_count, best_cost, best_uv, best_mask = -1, np.inf, None, None

    if cfg.exhaustive:
        subsets = _exhaustive_subsets(k, s)
        chunks = iter([subsets[i : i + 2048] for i in range(0, len(subsets), 2048)])
        target = len(subsets)
    else:
        target = cfg.ransac_max_iters
        if cfg.assumed_inlier_ratio is not None:
            target = min(
                target, max(1, _adaptive_bound(cfg.confidence, cfg.assumed_inlier_ratio, s))
            )

    done = 0
    schedule = 0
    while done < target:
        if cfg.exhaustive:
            idx = next(chunks, None)
            if idx is None:
                break
        else:
            size = min(_CHUNK_SIZES[min(schedule, len(_CHUNK_SIZES) - 1)], target - done)
            schedule += 1
            idx = _sample_subsets(rng, k, s, size)
        sampled_axes = nb_axes[idx]
        sampled_offs = nb_offsets[idx]
        uv = np.empty((2, len(idx)))
        counts_per_axis = np.zeros((2, len(idx)))
        for j, axis_value in enumerate(free):
            mask = sampled_axes == axis_value
            counts_per_axis[j] = mask.sum(axis=1)
            with np.errstate(invalid="ignore"):
                uv[j] = np.where(
                    counts_per_axis[j] > 0,
                    (sampled_offs * mask).sum(axis=1) / np.maximum(counts_per_axis[j], 1),
                    init_uv[j],
                )
        valid = counts_per_axis.sum(axis=0) > 0
        dist = distances(uv[0], uv[1])
        counts = np.where(valid, (dist <= delta).sum(axis=0), -1)
        top = int(counts.max())
        if top >= best_count and top >= 0:
            tied = np.nonzero(counts == top)[0]
            if top > 0:
                costs = np.where(dist[:, tied] <= delta, dist[:, tied], 0.0).sum(axis=0)
            else:
                costs = dist[:, tied].sum(axis=0)
            j = int(np.argmin(costs))
            if top > best_count or float(costs[j]) < best_cost:
                pick = int(tied[j])
                best_count = top
                best_cost = float(costs[j])
                best_uv = uv[:, pick].copy()
                best_mask = dist[:, pick] <= delta
        done += len(idx)
        if not cfg.exhaustive and cfg.assumed_inlier_ratio is None and best_count > 0:
            bound = _adaptive_bound(cfg.confidence, best_count / k, s)
            target = min(target, max(done, bound))

    if best_mask is None:
        return np.asarray(init_uv, dtype=np.float64), np.zeros(k, dtype=bool), np.inf, True

    uv_final = np.asarray(init_uv, dtype=np.float64).copy()
    for j, axis_value in enumerate(free):
        mask = best_mask & (nb_axes == axis_value)
        if mask.any():
            uv_final[j] = nb_offsets[mask].mean()
        elif best_uv is not None:
            uv_final[j] = best_uv[j]
    final_dist = distances(uv_final[0:1], uv_final[1:2])[:, 0]
    cost = float(final_dist[best_mask].sum()) if best_mask.any() else float(final_dist.sum())
    return uv_final, best_mask, cost, False


# --------------------------------------------------------------- CP axis voting


def estimate_swap_axes(obf: ObfuscatedCloud, nbrs: NeighborhoodSet):
    """Vote each CP item's swapped axis from its appearances in neighborhoods.

    Whenever an item appears as a neighborhood member, it casts one vote for
    the axis with the largest cumulative absolute coordinate difference to the
    other members (a swapped coordinate sticks out). Single-member
    neighborhoods abstain. Final per-item axis is the vote argmax; ties go to
    the lower axis and are flagged, as are items that never received a vote.
    """
    if obf.scheme != "CP":
        raise GeometryError("swap-axis estimation applies to CP clouds only")
    m = obf.dimension
    votes = np.zeros((len(obf), m), dtype=np.int64)
    for row in range(len(nbrs)):
        rows = _rows_of(obf, nbrs.neighbor_ids[row])
        pts = obf.coords[rows]
        if len(pts) < 2:
            continue
        cum = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=1)  # (K, m)
        np.add.at(votes, (rows, cum.argmax(axis=1)), 1)
    axes = votes.argmax(axis=1).astype(np.int8)
    top = votes.max(axis=1)
    flags = ((votes == top[:, None]).sum(axis=1) > 1) | (top == 0)
    return axes, flags


# --------------------------------------------------------------- PPL descriptors


def assign_ppl_descriptors(obf: ObfuscatedCloud, item_id: int, nbrs: NeighborhoodSet):
    """Match a paired-point line's two descriptors to its two recovered slots.

    Scores descriptor j against slot s as the sum, over the slot's neighbor
    lines, of the smallest Euclidean distance from j to any descriptor carried
    by that line; picks the cheaper of the two bijective assignments. Returns
    (slot_to_descriptor, tie_flag); ties keep identity order.
    """
    if obf.descriptors is None or obf.descriptors_per_item != 2:
        raise GeometryError("descriptor assignment needs lines carrying 2 descriptors")
    d = obf.descriptors[obf.index_of(item_id)]  # (2, D)
    totals = np.zeros((2, 2))
    for s in (0, 1):
        nb_rows = _rows_of(obf, nbrs.neighbors_of(item_id, s))
        nb_desc = obf.descriptors[nb_rows]  # (K, per_item, D)
        for j in (0, 1):
            dist = np.linalg.norm(nb_desc - d[j][None, None, :], axis=2).min(axis=1)
            totals[j, s] = dist.sum()
    identity = totals[0, 0] + totals[1, 1]
    swapped = totals[1, 0] + totals[0, 1]
    if identity <= swapped:
        return (0, 1), bool(identity == swapped)
    return (1, 0), False


# --------------------------------------------------------------- initialization


def init_anchor(obf: ObfuscatedCloud, seed: int):
    """Coarse scene anchor for degenerate/unconstrained coordinates.

    Lines and rays: intersect random pairs after flattening to the first two
    axes and average the crossings (third coordinate 0). Planes: per-axis mean
    of that axis's offsets. CP: centroid of the stored points.
    """
    if len(obf) == 0:
        raise GeometryError("cannot anchor an empty cloud")
    if obf.kind in ("line", "ray"):
        rng = np.random.default_rng(seed)
        m = obf.dimension
        n = len(obf)
        crossings = None
        if n >= 2:
            i = rng.integers(0, n, _ANCHOR_PAIR_SAMPLES)
            j = rng.integers(0, n, _ANCHOR_PAIR_SAMPLES)
            d1, d2 = obf.directions[i, :2], obf.directions[j, :2]
            b1, b2 = obf.bases[i, :2], obf.bases[j, :2]
            cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
            ok = (i != j) & (np.abs(cross) >= 1e-9)
            safe = np.where(ok, cross, 1.0)
            t = ((b2[:, 0] - b1[:, 0]) * d2[:, 1] - (b2[:, 1] - b1[:, 1]) * d2[:, 0]) / safe
            pts = b1 + t[:, None] * d1
            if int(ok.sum()) >= 2:
                crossings = pts[ok]
        if crossings is None:
            return obf.bases.mean(axis=0)
        xy = crossings.mean(axis=0)
        return np.array([xy[0], xy[1], 0.0]) if m == 3 else xy
    if obf.kind == "plane":
        anchor = np.empty(3)
        overall = float(obf.offsets.mean())
        for axis in range(3):
            offs = obf.offsets[obf.axes == axis]
            anchor[axis] = offs.mean() if len(offs) else overall
        return anchor
    return obf.coords.mean(axis=0)


# --------------------------------------------------------------- per-subject core


def _build_context(obf: ObfuscatedCloud, nbrs: NeighborhoodSet, cfg: RecoveryConfig):
    """Precompute everything per-subject recovery reads (shared read-only)."""
    delta = cfg.inlier_threshold
    if delta is None:
        scale = scene_scale(obf)
        if scale <= 0:
            raise GeometryError("cannot resolve inlier threshold on a degenerate cloud")
        delta = 0.02 * scale
    ctx = {
        "obf": obf,
        "nbrs": nbrs,
        "cfg": cfg,
        "delta": float(delta),
        "sample_size": cfg.sample_size_for(obf.dimension),
        "anchor": init_anchor(obf, cfg.seed),
        "cp_axes": None,
        "cp_flags": None,
    }
    if obf.scheme == "CP":
        ctx["cp_axes"], ctx["cp_flags"] = estimate_swap_axes(obf, nbrs)
    return ctx


def _subject_line(ctx, row):
    """The 1-DOF container of a subject: its stored line, or its voted CP axis line."""
    obf = ctx["obf"]
    if obf.scheme == "CP":
        direction = np.zeros(obf.dimension)
        direction[int(ctx["cp_axes"][row])] = 1.0
        return obf.coords[row], direction
    return obf.bases[row], obf.directions[row]


def _recover_one(ctx, item_id, slot, neighbor_ids):
    """Recover one subject; returns (coords, inlier_count, cost, degenerate)."""
    obf = ctx["obf"]
    cfg = ctx["cfg"]
    delta = ctx["delta"]
    anchor = ctx["anchor"]
    rng = subject_rng(cfg.seed, STREAM_RANSAC, item_id, slot)
    nb_rows = _rows_of(obf, neighbor_ids)

    if obf.kind == "plane":
        row = obf.index_of(item_id)
        s_axis = int(obf.axes[row])
        s_off = float(obf.offsets[row])
        free = [a for a in range(3) if a != s_axis]
        init_uv = np.array([anchor[free[0]], anchor[free[1]]])
        uv, mask, cost, deg = _ransac_axis_planes(
            obf.axes[nb_rows].astype(int),
            obf.offsets[nb_rows],
            s_axis,
            s_off,
            delta,
            ctx["sample_size"],
            cfg,
            rng,
            init_uv,
        )
        point = np.empty(3)
        point[s_axis] = s_off
        point[free[0]], point[free[1]] = uv
        return point, int(mask.sum()), cost, deg

    row = obf.index_of(item_id)
    base, direction = _subject_line(ctx, row)

    if obf.scheme == "Ray":
        keep = obf.center_ids[nb_rows] != obf.center_ids[row]
        nb_rows = nb_rows[keep]

    init_t = float((anchor - base) @ direction)
    if len(nb_rows) == 0:
        return base + init_t * direction, 0, np.inf, True

    if obf.scheme == "CP":
        nb_bases = obf.coords[nb_rows]
        nb_dirs = np.zeros((len(nb_rows), obf.dimension))
        nb_dirs[np.arange(len(nb_rows)), ctx["cp_axes"][nb_rows].astype(int)] = 1.0
    else:
        nb_bases = obf.bases[nb_rows]
        nb_dirs = obf.directions[nb_rows]

    a, b, c = line_sq_coeffs_to_lines(base, direction, nb_bases, nb_dirs)
    t, mask, cost, deg = _ransac_quadratic(
        a, b, c, delta, ctx["sample_size"], cfg, rng, init_t
    )
    return base + t * direction, int(mask.sum()), cost, deg


def ransac_recover_subject(
    obf: ObfuscatedCloud,
    item_id: int,
    neighbor_ids,
    cfg: RecoveryConfig,
    slot: int = 0,
    context=None,
):
    """Recover a single subject (one obfuscated item, one slot) from its neighborhood.

    Returns (coords, inlier_count, cost, degenerate). Shares the exact code
    path recover_cloud uses for every subject.
    """
    neighbor_ids = np.asarray(neighbor_ids, dtype=np.int64)
    if len(neighbor_ids) == 0:
        raise GeometryError("neighborhood is empty")
    if context is None:
        stub = NeighborhoodSet(
            k=len(neighbor_ids),
            subjects=[(item_id, slot)],
            neighbor_ids=neighbor_ids[None, :],
            provenance="OracleExact",
        )
        context = _build_context(obf, stub, cfg)
    return _recover_one(context, int(item_id), int(slot), neighbor_ids)


# --------------------------------------------------------------- whole clouds

_SHARD_CTX = None


def _run_shard(bounds):
    start, end = bounds
    ctx = _SHARD_CTX
    nbrs = ctx["nbrs"]
    m = ctx["obf"].dimension
    coords = np.empty((end - start, m))
    counts = np.empty(end - start, dtype=np.int64)
    costs = np.empty(end - start)
    degenerate = np.empty(end - start, dtype=bool)
    for r in range(start, end):
        item_id, slot = (int(v) for v in nbrs.subjects[r])
        out = _recover_one(ctx, item_id, slot, nbrs.neighbor_ids[r])
        coords[r - start], counts[r - start], costs[r - start], degenerate[r - start] = out
    return start, coords, counts, costs, degenerate


def recover_cloud(obf: ObfuscatedCloud, nbrs: NeighborhoodSet, cfg: RecoveryConfig):
    """Run the attack over every subject in the neighborhood set.

    Scheme dispatch: line and ray subjects solve along their stored line (rays
    first drop same-center neighbors), planes solve their two free
    coordinates, CP items are first assigned a voted swap axis and then solved
    as axis lines. Paired-point lines additionally get a descriptor-to-slot
    assignment per line. Per-subject failures are flagged, never fatal.
    """
    global _SHARD_CTX
    t0 = time.perf_counter()
    ctx = _build_context(obf, nbrs, cfg)
    total = len(nbrs)
    m = obf.dimension

    coords = np.empty((total, m))
    counts = np.empty(total, dtype=np.int64)
    costs = np.empty(total)
    degenerate = np.empty(total, dtype=bool)

    threads = max(1, min(cfg.threads, total or 1))
    if threads == 1 or total < 4:
        for r in range(total):
            item_id, slot = (int(v) for v in nbrs.subjects[r])
            coords[r], counts[r], costs[r], degenerate[r] = _recover_one(
                ctx, item_id, slot, nbrs.neighbor_ids[r]
            )
    else:
        import multiprocessing as mp

        shard_count = threads * 4
        edges = np.linspace(0, total, shard_count + 1).astype(int)
        bounds = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        _SHARD_CTX = ctx
        try:
            with ProcessPoolExecutor(
                max_workers=threads, mp_context=mp.get_context("fork")
            ) as pool:
                for start, sh_coords, sh_counts, sh_costs, sh_deg in pool.map(
                    _run_shard, bounds
                ):
                    end = start + len(sh_counts)
                    coords[start:end] = sh_coords
                    counts[start:end] = sh_counts
                    costs[start:end] = sh_costs
                    degenerate[start:end] = sh_deg
        finally:
            _SHARD_CTX = None

    desc_assignment = np.full(total, -1, dtype=np.int8)
    assign_ties = np.zeros(total, dtype=bool)
    if obf.scheme in ("PPL", "PPLplus") and obf.descriptors is not None and obf.descriptors_per_item == 2:
        for item_id in obf.ids:
            try:
                rows = [nbrs.row_of(int(item_id), 0), nbrs.row_of(int(item_id), 1)]
            except GeometryError:
                continue
            slot_to_desc, tie = assign_ppl_descriptors(obf, int(item_id), nbrs)
            for s, r in enumerate(rows):
                desc_assignment[r] = slot_to_desc[s]
                assign_ties[r] = tie

    metadata = {
        "scheme": obf.scheme,
        "k": nbrs.k,
        "provenance": nbrs.provenance,
        "inlier_ratio": float(nbrs.metadata.get("inlier_ratio", 1.0)),
        "inlier_threshold": ctx["delta"],
        "sample_size": ctx["sample_size"],
        "seed": cfg.seed,
        "confidence": cfg.confidence,
        "ransac_max_iters": cfg.ransac_max_iters,
        "degenerate_count": int(degenerate.sum()),
        "wall_time_s": time.perf_counter() - t0,
    }
    if obf.scheme == "CP":
        metadata["axis_flag_count"] = int(ctx["cp_flags"].sum())
    return RecoveredCloud(
        scheme=obf.scheme,
        dimension=m,
        subjects=nbrs.subjects.copy(),
        coords=coords,
        inlier_counts=counts,
        costs=costs,
        degenerate=degenerate,
        metadata=metadata,
        desc_assignment=desc_assignment,
        assign_ties=assign_ties,
    )
