"""Obfuscation schemes: construction examples, invariants, determinism."""

import numpy as np
import pytest

from pointveil.geometry import (
    AxisPlaneGeom,
    GeometryError,
    LineGeom,
    PointCloud,
    point_to_line_distance,
    point_to_plane_distance,
    scene_diameter,
)
from pointveil.obfuscate import (
    detect_planes_ransac,
    kmeans2,
    obfuscate,
    obfuscate_cp,
    obfuscate_planes,
    obfuscate_ppl,
    obfuscate_random_lines,
    obfuscate_ray,
)
from pointveil.synthetic import generate_synthetic


def room_cloud(n=300, seed=0, descriptors="random", m=3):
    cloud, _ = generate_synthetic("uniform_box", n, m, seed=seed, descriptors=descriptors)
    return cloud


def payload_arrays(obf):
    return [
        a
        for a in (obf.bases, obf.directions, obf.center_ids, obf.axes, obf.offsets, obf.coords, obf.descriptors)
        if a is not None
    ]


# ------------------------------------------------------------ random lines


def test_random_lines_contain_their_source_points():
    cloud = room_cloud()
    obf, sidecar = obfuscate_random_lines(cloud, seed=4)
    assert obf.scheme == "Line3D_OLC"
    for k, item_id in enumerate(obf.ids):
        (src,) = sidecar.source_ids(item_id)
        p = cloud.coords[cloud.index_of(src)]
        dist, _ = point_to_line_distance(p, LineGeom(obf.bases[k], obf.directions[k]))
        assert dist <= 1e-9


def test_random_lines_2d_scheme_name():
    obf, _ = obfuscate_random_lines(room_cloud(m=2), seed=4)
    assert obf.scheme == "Line2D"
    assert obf.dimension == 2


def test_random_lines_bases_do_not_leak_source_points():
    cloud = room_cloud()
    obf, _ = obfuscate_random_lines(cloud, seed=4)
    assert np.linalg.norm(obf.bases - cloud.coords, axis=1).min() > 1e-6


def test_direction_uniformity_mean_norm():
    cloud = room_cloud(n=100_000, seed=1, descriptors="none")
    obf, _ = obfuscate_random_lines(cloud, seed=2)
    assert np.linalg.norm(obf.directions.mean(axis=0)) < 0.02


def test_empty_cloud_gives_empty_output():
    empty = PointCloud(3, np.empty(0, dtype=np.int64), np.empty((0, 3)))
    obf, _ = obfuscate_random_lines(empty, seed=0)
    assert len(obf) == 0


# ------------------------------------------------------------ PPL / PPL+


def test_ppl_pair_points_lie_on_their_line():
    cloud = room_cloud(n=201)
    obf, sidecar = obfuscate_ppl(cloud, seed=7)
    assert len(obf) == 201 // 2
    for k, item_id in enumerate(obf.ids):
        line = LineGeom(obf.bases[k], obf.directions[k])
        for src in sidecar.source_ids(item_id):
            dist, _ = point_to_line_distance(cloud.coords[cloud.index_of(src)], line)
            assert dist <= 1e-9
    assert sidecar.labels["dropped_id"] not in {
        s for item_id in obf.ids for s in sidecar.source_ids(item_id)
    }


def test_ppl_descriptors_two_per_line_slot_map_consistent():
    cloud = room_cloud(n=200)
    obf, sidecar = obfuscate_ppl(cloud, seed=8)
    assert obf.descriptors.shape == (100, 2, cloud.descriptor_dim)
    orders = set()
    for k, item_id in enumerate(obf.ids):
        slots = sidecar.ppl_desc_slots[int(item_id)]
        orders.add(slots)
        for j in (0, 1):
            owner = sidecar.source_ids(item_id)[slots[j]]
            want = cloud.descriptors[cloud.index_of(owner)]
            assert np.array_equal(obf.descriptors[k, j], want)
    assert orders == {(0, 1), (1, 0)}  # both descriptor orders occur


def test_ppl_descriptor_multiset_preserved_even_n():
    cloud = room_cloud(n=200)
    obf, _ = obfuscate_ppl(cloud, seed=9)
    got = obf.descriptors.reshape(-1, cloud.descriptor_dim)
    want = cloud.descriptors
    assert np.array_equal(np.sort(got.round(12), axis=0), np.sort(want.round(12), axis=0))


def test_ppl_coincident_only_cloud_errors():
    coords = np.zeros((4, 3))
    cloud = PointCloud(3, np.arange(4), coords)
    with pytest.raises(GeometryError):
        obfuscate_ppl(cloud, seed=0)


def test_ppl_plus_avoids_same_plane_pairs():
    cloud, labels = generate_synthetic(
        "planar_rooms", 600, 3, seed=11, plane_count=2, clutter_fraction=0.0
    )
    truth = np.asarray(labels["plane_labels"])

    def same_plane_fraction(sidecar, obf):
        same = 0
        for item_id in obf.ids:
            a, b = sidecar.source_ids(item_id)
            same += truth[a] >= 0 and truth[a] == truth[b]
        return same / len(obf)

    plain, plain_sc = obfuscate_ppl(cloud, seed=12, plus=False)
    plus, plus_sc = obfuscate_ppl(cloud, seed=12, plus=True)
    assert 0.35 < same_plane_fraction(plain_sc, plain) < 0.65
    assert same_plane_fraction(plus_sc, plus) < 0.05


def test_ppl_plus_rejects_2d():
    with pytest.raises(GeometryError):
        obfuscate_ppl(room_cloud(m=2), seed=0, plus=True)


# ------------------------------------------------------------ ray clouds


def test_ray_lines_pass_through_point_and_assigned_center():
    cloud = room_cloud(n=400)
    obf, sidecar = obfuscate_ray(cloud, seed=13)
    centers = np.asarray(obf.metadata["centers"])
    assert set(np.unique(obf.center_ids)) == {0, 1}
    for k, item_id in enumerate(obf.ids):
        line = LineGeom(obf.bases[k], obf.directions[k])
        (src,) = sidecar.source_ids(item_id)
        d_pt, _ = point_to_line_distance(cloud.coords[cloud.index_of(src)], line)
        d_ct, _ = point_to_line_distance(centers[obf.center_ids[k]], line)
        assert d_pt <= 1e-9 and d_ct <= 1e-9


def test_ray_kmeans_centers_near_blob_centroids():
    cloud, labels = generate_synthetic("gaussian_blobs", 10_000, 3, seed=14, blob_sigma=0.15)
    obf, _ = obfuscate_ray(cloud, seed=15)
    got = np.asarray(obf.metadata["centers"])
    assign = np.asarray(labels["blob_labels"])
    want = np.stack([cloud.coords[assign == b].mean(axis=0) for b in (0, 1)])
    tol = 0.05 * scene_diameter(cloud.coords)
    direct = np.linalg.norm(got - want, axis=1).max()
    swapped = np.linalg.norm(got[::-1] - want, axis=1).max()
    assert min(direct, swapped) < tol


def test_ray_center_assignment_variants():
    cloud, _ = generate_synthetic("gaussian_blobs", 500, 3, seed=16, blob_sigma=0.1)
    centers_of = {}
    for mode in ("same", "opposite", "random"):
        obf, sidecar = obfuscate_ray(cloud, seed=17, center_assignment=mode)
        centers = np.asarray(obf.metadata["centers"])
        src_rows = np.array([cloud.index_of(sidecar.source_ids(i)[0]) for i in obf.ids])
        pts = cloud.coords[src_rows]
        d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
        nearest = d.argmin(axis=1)
        frac_near = (obf.center_ids == nearest).mean()
        centers_of[mode] = frac_near
    assert centers_of["same"] > 0.95       # well-separated blobs: cluster == nearest
    assert centers_of["opposite"] < 0.05
    assert 0.3 < centers_of["random"] < 0.7


def test_ray_rejects_2d():
    with pytest.raises(GeometryError):
        obfuscate_ray(room_cloud(m=2), seed=0)


def test_kmeans_identical_points_error():
    with pytest.raises(GeometryError):
        kmeans2(np.zeros((20, 3)), np.random.default_rng(0))


# ------------------------------------------------------------ plane lifting


def test_planes_contain_source_points_and_partition_is_balanced():
    cloud = room_cloud(n=301)
    obf, sidecar = obfuscate_planes(cloud, seed=18)
    counts = np.bincount(obf.axes.astype(int), minlength=3)
    assert counts.max() - counts.min() <= 1
    assert counts.sum() == 301
    for k, item_id in enumerate(obf.ids):
        (src,) = sidecar.source_ids(item_id)
        p = cloud.coords[cloud.index_of(src)]
        plane = AxisPlaneGeom(int(obf.axes[k]), float(obf.offsets[k]))
        assert point_to_plane_distance(p, plane) == 0.0


def test_planes_rejects_2d():
    with pytest.raises(GeometryError):
        obfuscate_planes(room_cloud(m=2), seed=0)


# ------------------------------------------------------------ CP


def test_cp_pinned_swap_example():
    cloud = PointCloud(2, [0, 1], [[0.0, 0.0], [5.0, 7.0]])
    for seed in range(50):  # find a seed whose uniform axis draw lands on X
        obf, sidecar = obfuscate_cp(cloud, seed=seed)
        if sidecar.cp_axes[0] == 0:
            got = {tuple(row) for row in obf.coords}
            assert got == {(5.0, 0.0), (0.0, 7.0)}
            return
    raise AssertionError("no seed produced an X-axis swap in 50 tries")


def test_cp_coordinate_multisets_preserved():
    cloud = room_cloud(n=400)
    obf, _ = obfuscate_cp(cloud, seed=19)
    for axis in range(3):
        assert np.array_equal(
            np.sort(obf.coords[:, axis]), np.sort(cloud.coords[:, axis])
        )


def test_cp_output_differs_in_at_most_one_coordinate():
    cloud = room_cloud(n=401)
    obf, sidecar = obfuscate_cp(cloud, seed=20)
    diffs = (obf.coords != cloud.coords).sum(axis=1)
    assert diffs.max() <= 1
    passthrough = obf.metadata["passthrough_id"]
    row = cloud.index_of(passthrough)
    assert diffs[row] == 0
    assert passthrough not in sidecar.cp_axes
    # every paired item records the axis it swapped
    assert len(sidecar.cp_axes) == 400


def test_cp_swap_axis_record_matches_swap():
    cloud = room_cloud(n=100)
    obf, sidecar = obfuscate_cp(cloud, seed=21)
    for item_id, axis in sidecar.cp_axes.items():
        row = cloud.index_of(item_id)
        changed = np.nonzero(obf.coords[row] != cloud.coords[row])[0]
        assert set(changed) <= {axis}


# ------------------------------------------------------------ cross-scheme


ALL_SCHEMES = [
    ("Line3D_OLC", 3, {}),
    ("Line2D", 2, {}),
    ("PPL", 3, {}),
    ("PPLplus", 3, {}),
    ("Ray", 3, {}),
    ("Plane", 3, {}),
    ("CP", 3, {}),
]


@pytest.mark.parametrize("scheme,m,params", ALL_SCHEMES)
def test_determinism_bit_identical(scheme, m, params):
    cloud = room_cloud(n=120, m=m)
    a, _ = obfuscate(cloud, scheme, seed=33, **params)
    b, _ = obfuscate(cloud, scheme, seed=33, **params)
    assert a.metadata == b.metadata
    for pa, pb in zip(payload_arrays(a), payload_arrays(b)):
        assert np.array_equal(pa, pb)
    c, _ = obfuscate(cloud, scheme, seed=34, **params)
    assert any(
        not np.array_equal(pa, pc) for pa, pc in zip(payload_arrays(a), payload_arrays(c))
    )


@pytest.mark.parametrize("scheme,m,params", ALL_SCHEMES)
def test_descriptor_multiset_preserved(scheme, m, params):
    cloud = room_cloud(n=120, m=m)  # even n: nothing dropped
    obf, _ = obfuscate(cloud, scheme, seed=35, **params)
    got = obf.descriptors.reshape(-1, cloud.descriptor_dim)
    assert np.array_equal(np.sort(got, axis=0), np.sort(cloud.descriptors, axis=0))


def test_dispatch_rejects_unknown_and_mismatched():
    with pytest.raises(GeometryError):
        obfuscate(room_cloud(), "Spiral", seed=0)
    with pytest.raises(GeometryError):
        obfuscate(room_cloud(m=2), "Line3D_OLC", seed=0)
    with pytest.raises(GeometryError):
        obfuscate(room_cloud(m=3), "Line2D", seed=0)


# ------------------------------------------------------------ plane detector


def test_sequential_ransac_recovers_room_planes():
    cloud, labels = generate_synthetic(
        "planar_rooms", 800, 3, seed=22, plane_count=3, clutter_fraction=0.15
    )
    truth = np.asarray(labels["plane_labels"])
    got = detect_planes_ransac(cloud.coords, 0.01 * scene_diameter(cloud.coords), seed=1)
    for pi in range(3):
        members = got[truth == pi]
        labeled = members[members >= 0]
        assert len(labeled) / len(members) > 0.9
        # members of one true plane should agree on a single detected plane
        values, counts = np.unique(labeled, return_counts=True)
        assert counts.max() / counts.sum() > 0.95
