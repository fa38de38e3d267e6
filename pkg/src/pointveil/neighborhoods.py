"""Neighborhood sets over obfuscated items: oracle, corrupted, and estimated.

A neighborhood ties a subject (an obfuscated item, plus a slot index for
paired-point lines that hide two points each) to the K obfuscated items hiding
the subject point's K nearest original neighbors. The oracle variant uses
ground truth; the corrupted variant replaces a controlled fraction with random
non-neighbors; estimated variants arrive from external predictors via the
neighborhood file format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointveil.geometry import GeometryError, NeighborIndex, PointCloud
from pointveil.obfuscate import GroundTruthSidecar, ObfuscatedCloud

PROVENANCES = ("OracleExact", "OracleCorrupted", "Estimated")

# stream tags keep every stochastic stage on its own per-subject RNG stream
STREAM_CORRUPT = 101
STREAM_RANSAC = 201


def subject_rng(seed: int, stream_tag: int, item_id: int, slot: int = 0):
    """Deterministic per-subject RNG, independent of thread schedule."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(stream_tag), int(item_id), int(slot)])
    )


@dataclass
class NeighborhoodSet:
    """All neighborhoods of one scene, in canonical (item id, slot) order.

    subjects     : (S, 2) int64 rows of (item id, slot); slot is 0 except for
                   PPL lines, whose two hidden points get slots 0 and 1
    neighbor_ids : (S, K) int64 obfuscated item ids, distinct per row,
                   never containing the row's own item id
    """

    k: int
    subjects: np.ndarray
    neighbor_ids: np.ndarray
    provenance: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.subjects = np.asarray(self.subjects, dtype=np.int64).reshape(-1, 2)
        self.neighbor_ids = np.asarray(self.neighbor_ids, dtype=np.int64)
        if self.provenance not in PROVENANCES:
            raise GeometryError(f"unknown provenance {self.provenance!r}")
        if self.neighbor_ids.shape != (len(self.subjects), self.k):
            raise GeometryError(
                f"neighbor_ids shape {self.neighbor_ids.shape} does not match "
                f"{len(self.subjects)} subjects at K={self.k}"
            )
        order = np.lexsort((self.subjects[:, 1], self.subjects[:, 0]))
        self.subjects = self.subjects[order]
        self.neighbor_ids = self.neighbor_ids[order]
        keys = [tuple(s) for s in self.subjects]
        if len(set(keys)) != len(keys):
            raise GeometryError("duplicate subjects")
        for s, row in zip(self.subjects, self.neighbor_ids):
            if len(set(row.tolist())) != self.k:
                raise GeometryError(f"neighbors of subject {tuple(s)} not distinct")
            if s[0] in row:
                raise GeometryError(f"subject {tuple(s)} contained in its own neighbors")
        self._row_of = {key: i for i, key in enumerate(keys)}

    def __len__(self):
        return len(self.subjects)

    def row_of(self, item_id: int, slot: int = 0) -> int:
        try:
            return self._row_of[(int(item_id), int(slot))]
        except KeyError:
            raise GeometryError(f"unknown subject ({item_id}, {slot})") from None

    def neighbors_of(self, item_id: int, slot: int = 0) -> np.ndarray:
        return self.neighbor_ids[self.row_of(item_id, slot)]


def _point_to_subject_maps(obf: ObfuscatedCloud, sidecar: GroundTruthSidecar | None):
    """source point id -> (item id, slot), from the sidecar links when present."""
    if obf.scheme in ("PPL", "PPLplus", "CP") and sidecar is None:
        raise GeometryError(f"{obf.scheme} oracle neighborhoods need the ground-truth sidecar")
    mapping = {}
    if sidecar is not None:
        for item_id, sources in sidecar.links.items():
            for slot, src in enumerate(sources):
                mapping[int(src)] = (int(item_id), slot)
    else:
        for i in obf.ids:
            mapping[int(i)] = (int(i), 0)
    return mapping


def oracle_neighborhoods(
    cloud: PointCloud, obf: ObfuscatedCloud, k: int, sidecar: GroundTruthSidecar | None = None
) -> NeighborhoodSet:
    """Exact ground-truth neighborhoods: the items of each point's K nearest points.

    Subjects cover every obfuscated item once (twice, with slots, for PPL
    lines). Neighbor items are distinct and never the subject's own item, so a
    PPL point may need to walk past nearest neighbors hidden by already-used
    lines; points dropped at obfuscation time are skipped entirely.
    """
    if k < 1:
        raise GeometryError("k must be >= 1")
    to_subject = _point_to_subject_maps(obf, sidecar)
    n = len(cloud)
    max_distinct = len(obf) - 1  # a subject may never list its own item
    if k > max_distinct:
        raise GeometryError(f"k={k} too large: only {max_distinct} other items exist")

    index = NeighborIndex(cloud.coords, cloud.ids)
    one_to_one = all(
        to_subject.get(int(pid), (None, 1))[1] == 0 for pid in cloud.ids
    ) and len(set(to_subject.values())) == len(to_subject)

    subjects, rows = [], []
    if one_to_one and len(to_subject) == n:
        # every point has its own item: the point-level K-NN list maps directly
        nn = index.query_all(k)
        for row_i, pid in enumerate(cloud.ids):
            item_id, slot = to_subject[int(pid)]
            subjects.append((item_id, slot))
            rows.append([to_subject[int(cloud.ids[j])][0] for j in nn[row_i]])
    else:
        for row_i, pid in enumerate(cloud.ids):
            key = to_subject.get(int(pid))
            if key is None:  # dropped at obfuscation time
                continue
            item_id, slot = key
            query = min(n - 1, 2 * k + 4)
            while True:
                nn = index.query_row(row_i, query)
                picked, seen = [], {item_id}
                for j in nn:
                    nb_pid = int(cloud.ids[j])
                    nb_key = to_subject.get(nb_pid)
                    if nb_key is None or nb_key[0] in seen:
                        continue
                    seen.add(nb_key[0])
                    picked.append(nb_key[0])
                    if len(picked) == k:
                        break
                if len(picked) == k:
                    break
                if query >= n - 1:
                    raise GeometryError(f"k={k} too large for subject ({item_id}, {slot})")
                query = min(n - 1, 2 * query + 8)
            subjects.append((item_id, slot))
            rows.append(picked)

    return NeighborhoodSet(
        k=k,
        subjects=np.asarray(subjects, dtype=np.int64),
        neighbor_ids=np.asarray(rows, dtype=np.int64),
        provenance="OracleExact",
        metadata={"scheme": obf.scheme},
    )


def replaced_count(k: int, inlier_ratio: float) -> int:
    """Members to replace so that exactly floor(inlier_ratio * K) survive.

    The small epsilon keeps products like 0.7 * 20 from flooring one short of
    their exact rational value.
    """
    kept = int(np.floor(inlier_ratio * k + 1e-9))
    return k - kept


def corrupt_neighborhoods(
    nbrs: NeighborhoodSet, inlier_ratio: float, seed: int, all_item_ids=None
) -> NeighborhoodSet:
    """Replace all but floor(In * K) members of each neighborhood with random
    non-neighbors (never the subject, never a true member).

    Per-subject RNG streams keyed by (seed, subject) make the result
    deterministic under any iteration or thread order.
    """
    if not 0.0 < inlier_ratio <= 1.0:
        raise GeometryError(f"inlier_ratio must be in (0, 1], got {inlier_ratio}")
    if all_item_ids is None:
        all_item_ids = np.union1d(nbrs.neighbor_ids.ravel(), nbrs.subjects[:, 0])
    all_item_ids = np.asarray(sorted(int(i) for i in set(np.asarray(all_item_ids).tolist())))
    replace = replaced_count(nbrs.k, inlier_ratio)

    if len(all_item_ids) - nbrs.k - 1 < replace:
        raise GeometryError("not enough non-neighbors to corrupt at this inlier ratio")

    out = nbrs.neighbor_ids.copy()
    for row in range(len(nbrs)):
        if replace == 0:
            break
        item_id, slot = nbrs.subjects[row]
        rng = subject_rng(seed, STREAM_CORRUPT, item_id, slot)
        banned = set(nbrs.neighbor_ids[row].tolist()) | {int(item_id)}
        positions = rng.choice(nbrs.k, size=replace, replace=False)
        # rejection-sample distinct non-neighbors; the pool dwarfs the banned set
        replacements = []
        while len(replacements) < replace:
            cand = int(all_item_ids[rng.integers(len(all_item_ids))])
            if cand not in banned:
                banned.add(cand)
                replacements.append(cand)
        out[row, positions] = np.asarray(replacements, dtype=np.int64)

    metadata = dict(nbrs.metadata)
    metadata.update({"inlier_ratio": float(inlier_ratio), "seed": int(seed)})
    return NeighborhoodSet(
        k=nbrs.k,
        subjects=nbrs.subjects.copy(),
        neighbor_ids=out,
        provenance="OracleCorrupted",
        metadata=metadata,
    )


def measure_inlier_ratio(nbrs: NeighborhoodSet, truth: NeighborhoodSet):
    """Per-subject overlap fraction with the true neighborhoods, plus the mean."""
    if nbrs.k != truth.k:
        raise GeometryError(f"K mismatch: {nbrs.k} vs {truth.k}")
    if len(nbrs) != len(truth) or not np.array_equal(nbrs.subjects, truth.subjects):
        raise GeometryError("subject sets differ")
    hits = np.empty(len(nbrs), dtype=np.int64)
    for row in range(len(nbrs)):
        true_set = set(truth.neighbor_ids[row].tolist())
        hits[row] = sum(1 for i in nbrs.neighbor_ids[row].tolist() if i in true_set)
    # integer totals with a single division keep the mean exact
    return hits / nbrs.k, float(int(hits.sum()) / (len(nbrs) * nbrs.k))
