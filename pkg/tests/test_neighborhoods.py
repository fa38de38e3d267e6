"""Neighborhood generation: oracle exactness, corruption arithmetic, measurement."""

from fractions import Fraction

import numpy as np
import pytest

from pointveil.geometry import GeometryError, PointCloud
from pointveil.neighborhoods import (
    NeighborhoodSet,
    corrupt_neighborhoods,
    measure_inlier_ratio,
    oracle_neighborhoods,
    replaced_count,
)
from pointveil.obfuscate import obfuscate, obfuscate_cp, obfuscate_ppl, obfuscate_random_lines
from pointveil.synthetic import generate_synthetic


def brute_force_knn_ids(coords, ids, row, k):
    d = np.linalg.norm(coords - coords[row], axis=1)
    order = np.lexsort((ids, d))
    order = order[order != row]
    return [int(ids[j]) for j in order[:k]]


def line_cloud(n=60, seed=0, m=3):
    cloud, _ = generate_synthetic("uniform_box", n, m, seed=seed)
    obf, sidecar = obfuscate_random_lines(cloud, seed=seed + 1)
    return cloud, obf, sidecar


# ------------------------------------------------------------ oracle


def test_oracle_collinear_example():
    coords = np.array([[0, 0], [1, 0], [2, 0], [10, 0]], dtype=float)
    cloud = PointCloud(2, [0, 1, 2, 3], coords)
    obf, sidecar = obfuscate_random_lines(cloud, seed=1)
    nbrs = oracle_neighborhoods(cloud, obf, 2, sidecar)
    assert list(nbrs.neighbors_of(0)) == [1, 2]


def test_oracle_k_n_minus_1_gives_all_other_items():
    cloud, obf, sidecar = line_cloud(n=12)
    nbrs = oracle_neighborhoods(cloud, obf, 11, sidecar)
    for item_id in obf.ids:
        got = set(nbrs.neighbors_of(int(item_id)).tolist())
        assert got == {int(i) for i in obf.ids if i != item_id}


def test_oracle_matches_brute_force_through_identity_links():
    cloud, obf, sidecar = line_cloud(n=500, seed=3)
    nbrs = oracle_neighborhoods(cloud, obf, 20, sidecar)
    for row in range(0, 500, 31):
        pid = int(cloud.ids[row])
        want = brute_force_knn_ids(cloud.coords, cloud.ids, row, 20)
        assert list(nbrs.neighbors_of(pid)) == want


def test_oracle_is_scheme_independent():
    cloud, _ = generate_synthetic("uniform_box", 200, 3, seed=5)
    sets = []
    for scheme in ("Line3D_OLC", "Ray", "Plane", "CP"):
        obf, sidecar = obfuscate(cloud, scheme, seed=6)
        nbrs = oracle_neighborhoods(cloud, obf, 10, sidecar)
        sets.append(nbrs.neighbor_ids)
    for other in sets[1:]:
        assert np.array_equal(sets[0], other)


def test_oracle_ppl_slots_cover_each_line_twice():
    cloud, _ = generate_synthetic("uniform_box", 101, 3, seed=7, descriptors="random")
    obf, sidecar = obfuscate_ppl(cloud, seed=8)
    nbrs = oracle_neighborhoods(cloud, obf, 9, sidecar)
    assert len(nbrs) == 2 * len(obf)  # one subject per hidden point
    subj = {tuple(s) for s in nbrs.subjects}
    assert subj == {(int(i), s) for i in obf.ids for s in (0, 1)}


def test_oracle_ppl_neighbors_are_lines_of_nearest_points():
    cloud, _ = generate_synthetic("uniform_box", 80, 3, seed=9)
    obf, sidecar = obfuscate_ppl(cloud, seed=10)
    line_of = {}
    for item_id, (a, b) in sidecar.links.items():
        line_of[a] = item_id
        line_of[b] = item_id
    nbrs = oracle_neighborhoods(cloud, obf, 7, sidecar)
    for item_id, (a, b) in sidecar.links.items():
        for slot, src in enumerate(sidecar.links[item_id]):
            got = list(nbrs.neighbors_of(item_id, slot))
            # reference: walk the full point-level NN ordering, dedupe lines
            row = cloud.index_of(src)
            want, seen = [], {item_id}
            for nb in brute_force_knn_ids(cloud.coords, cloud.ids, row, len(cloud) - 1):
                if nb not in line_of or line_of[nb] in seen:
                    continue
                seen.add(line_of[nb])
                want.append(line_of[nb])
                if len(want) == 7:
                    break
            assert got == want
            assert item_id not in got


def test_oracle_requires_sidecar_for_paired_schemes():
    cloud, _ = generate_synthetic("uniform_box", 40, 3, seed=11)
    for scheme in ("PPL", "CP"):
        obf, sidecar = obfuscate(cloud, scheme, seed=12)
        with pytest.raises(GeometryError):
            oracle_neighborhoods(cloud, obf, 5, None)
        oracle_neighborhoods(cloud, obf, 5, sidecar)


def test_oracle_k_too_large_errors():
    cloud, obf, sidecar = line_cloud(n=10)
    with pytest.raises(GeometryError):
        oracle_neighborhoods(cloud, obf, 10, sidecar)


# ------------------------------------------------------------ corruption


def exact_kept_oracle(k, ratio_str):
    """Independent exact-arithmetic reference for the survivor count."""
    return int(Fraction(ratio_str) * k) if Fraction(ratio_str) * k == int(
        Fraction(ratio_str) * k
    ) else int(np.floor(Fraction(ratio_str) * k))


def test_replaced_count_matches_exact_fraction_arithmetic():
    for ratio_str in ("0.1", "0.2", "0.25", "0.3", "0.5", "0.7", "0.75", "0.9", "1.0"):
        for k in (1, 3, 4, 10, 20, 50):
            kept = int(Fraction(ratio_str) * k)  # Fraction floors toward zero via int()
            assert replaced_count(k, float(ratio_str)) == k - kept, (ratio_str, k)


def test_corrupt_examples_k4_k20():
    cloud, obf, sidecar = line_cloud(n=80, seed=13)
    truth4 = oracle_neighborhoods(cloud, obf, 4, sidecar)
    got = corrupt_neighborhoods(truth4, 0.5, seed=1)
    per, _ = measure_inlier_ratio(got, truth4)
    assert np.all(per == 0.5)  # exactly 2 of 4 replaced

    truth20 = oracle_neighborhoods(cloud, obf, 20, sidecar)
    got = corrupt_neighborhoods(truth20, 0.3, seed=2)
    per, mean = measure_inlier_ratio(got, truth20)
    assert np.all(per == 6 / 20)  # exactly 14 of 20 replaced
    assert mean == 6 / 20


def test_corrupt_identity_at_full_inlier_ratio():
    cloud, obf, sidecar = line_cloud(n=50, seed=14)
    truth = oracle_neighborhoods(cloud, obf, 8, sidecar)
    got = corrupt_neighborhoods(truth, 1.0, seed=3)
    assert np.array_equal(got.neighbor_ids, truth.neighbor_ids)
    assert got.provenance == "OracleCorrupted"
    assert got.metadata["inlier_ratio"] == 1.0


def test_corrupt_round_trip_invariant_all_ratios():
    cloud, obf, sidecar = line_cloud(n=90, seed=15)
    for k in (4, 7, 20):
        truth = oracle_neighborhoods(cloud, obf, k, sidecar)
        for ratio in (0.1, 0.2, 1 / 3, 0.5, 0.6, 0.75, 0.9, 1.0):
            got = corrupt_neighborhoods(truth, ratio, seed=4)
            _, mean = measure_inlier_ratio(got, truth)
            assert mean == np.floor(ratio * k + 1e-9) / k, (k, ratio)


def test_corrupt_replacements_are_distinct_non_neighbors():
    cloud, obf, sidecar = line_cloud(n=60, seed=16)
    truth = oracle_neighborhoods(cloud, obf, 10, sidecar)
    got = corrupt_neighborhoods(truth, 0.2, seed=5)
    for row in range(len(got)):
        item_id = int(got.subjects[row, 0])
        members = got.neighbor_ids[row].tolist()
        assert len(set(members)) == 10
        assert item_id not in members
        true_set = set(truth.neighbor_ids[row].tolist())
        injected = [m for m in members if m not in true_set]
        assert len(injected) == 8  # floor(0.2 * 10) = 2 kept


def test_corrupt_deterministic_and_seed_sensitive():
    cloud, obf, sidecar = line_cloud(n=70, seed=17)
    truth = oracle_neighborhoods(cloud, obf, 12, sidecar)
    a = corrupt_neighborhoods(truth, 0.5, seed=6)
    b = corrupt_neighborhoods(truth, 0.5, seed=6)
    c = corrupt_neighborhoods(truth, 0.5, seed=7)
    assert np.array_equal(a.neighbor_ids, b.neighbor_ids)
    assert not np.array_equal(a.neighbor_ids, c.neighbor_ids)


def test_corrupt_rejects_bad_ratio():
    cloud, obf, sidecar = line_cloud(n=30, seed=18)
    truth = oracle_neighborhoods(cloud, obf, 5, sidecar)
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(GeometryError):
            corrupt_neighborhoods(truth, bad, seed=0)


# ------------------------------------------------------------ measurement


def test_measure_identical_and_disjoint():
    subjects = [(i, 0) for i in range(6)]
    rows = np.array([[(i + j + 1) % 10 + 10 for j in range(3)] for i in range(6)])
    a = NeighborhoodSet(3, subjects, rows, "OracleExact")
    per, mean = measure_inlier_ratio(a, a)
    assert mean == 1.0 and np.all(per == 1.0)
    b = NeighborhoodSet(3, subjects, rows + 100, "Estimated")
    per, mean = measure_inlier_ratio(b, a)
    assert mean == 0.0 and np.all(per == 0.0)


def test_measure_rejects_mismatched_subjects():
    rows = np.array([[5, 6, 7], [6, 7, 8]])
    a = NeighborhoodSet(3, [(0, 0), (1, 0)], rows, "OracleExact")
    b = NeighborhoodSet(3, [(0, 0), (2, 0)], rows, "OracleExact")
    with pytest.raises(GeometryError):
        measure_inlier_ratio(a, b)


def test_neighborhood_set_validation():
    with pytest.raises(GeometryError):  # subject inside its own row
        NeighborhoodSet(2, [(1, 0)], np.array([[1, 2]]), "OracleExact")
    with pytest.raises(GeometryError):  # duplicate member
        NeighborhoodSet(2, [(1, 0)], np.array([[2, 2]]), "OracleExact")
    with pytest.raises(GeometryError):  # duplicate subject
        NeighborhoodSet(1, [(1, 0), (1, 0)], np.array([[2], [3]]), "OracleExact")
