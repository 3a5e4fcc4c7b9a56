"""Volumetric change detection: grids, filters, clustering, matching, pipeline."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from missioneer.changedetect import (
    ChangeParams,
    ChangeReport,
    cluster_file_name,
    report_to_document,
    run_pipeline,
)
from missioneer.changedetect.clustering import (
    ADDED,
    REMOVED,
    ObjectCluster,
    cluster_descriptor,
    descriptor_distance,
    euclidean_cluster,
    kmeans_group,
    match_objects,
)
from missioneer.changedetect.filters import (
    GroundFilterParams,
    mls_smooth,
    ransac_ground_filter,
)
from missioneer.changedetect.voxel import VoxelGrid, diff_grids, morph_open, voxelize
from missioneer.errors import GridMismatch, InvalidInput, StageError
from missioneer.pointcloud import PointCloud

from oracles import union_find_clusters, voxel_cells


def box_points(center, extents, n, rng):
    half = np.asarray(extents) / 2.0
    return np.asarray(center) + rng.uniform(-half, half, size=(n, 3))


# -- voxelize -----------------------------------------------------------------


def test_empty_cloud_voxelizes_to_empty_grid():
    grid = voxelize(PointCloud.empty(), 0.5)
    assert grid.occupied == frozenset()


def test_cube_corners_occupy_eight_voxels():
    corners = np.array(
        [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
    )
    # nudge inward so corners sit strictly inside distinct 0.5 m cells
    nudged = corners + (0.5 - corners) * 0.02
    grid = voxelize(PointCloud(nudged), 0.5)
    assert len(grid.occupied) == 8


def test_two_points_in_one_voxel_merge():
    grid = voxelize(PointCloud(np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]])), 0.5)
    assert len(grid.occupied) == 1


def test_population_threshold_filters_sparse_voxels():
    pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2], [5.0, 5.0, 5.0]])
    grid = voxelize(PointCloud(pts), 0.5, min_points_per_voxel=2)
    assert grid.occupied == frozenset({(0, 0, 0)})
    # the lone point's cell is still tracked for back-projection
    assert (10, 10, 10) in grid.members


def test_voxelize_rejects_bad_parameters():
    cloud = PointCloud(np.zeros((1, 3)))
    with pytest.raises(InvalidInput):
        voxelize(cloud, 0.0)
    with pytest.raises(InvalidInput):
        voxelize(cloud, 0.5, min_points_per_voxel=0)


@settings(max_examples=50, deadline=None)
@given(
    pts=st.lists(st.tuples(*[st.floats(-4, 4, allow_nan=False, width=16)] * 3), max_size=60),
    resolution=st.sampled_from([0.1, 0.25, 0.5, 1.0]),
)
def test_voxelize_matches_floor_division_oracle(pts, resolution):
    arr = np.asarray(pts, dtype=float).reshape(len(pts), 3)
    grid = voxelize(PointCloud(arr), resolution)
    assert set(grid.occupied) == voxel_cells(arr, resolution)


def test_points_in_returns_the_cells_members():
    pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.1, 0.1], [3.0, 3.0, 3.0]])
    grid = voxelize(PointCloud(pts), 1.0)
    near = grid.points_in({(0, 0, 0)})
    assert sorted(near.tolist()) == [0, 1]


# -- diff_grids ---------------------------------------------------------------


def test_identical_grids_diff_to_nothing():
    pts = PointCloud(np.random.default_rng(0).uniform(0, 2, (40, 3)))
    grid = voxelize(pts, 0.5)
    diff = diff_grids(grid, grid)
    assert diff.added == frozenset() and diff.removed == frozenset()


def test_single_new_voxel_is_added():
    a = voxelize(PointCloud(np.array([[0.1, 0.1, 0.1]])), 0.5)
    b = voxelize(PointCloud(np.array([[0.1, 0.1, 0.1], [2.1, 0.1, 0.1]])), 0.5)
    diff = diff_grids(a, b)
    assert diff.added == frozenset({(4, 0, 0)})
    assert diff.removed == frozenset()


def test_mismatched_grids_are_rejected():
    a = voxelize(PointCloud(np.array([[0.1, 0.1, 0.1]])), 0.5)
    b = voxelize(PointCloud(np.array([[0.1, 0.1, 0.1]])), 0.25)
    with pytest.raises(GridMismatch):
        diff_grids(a, b)
    c = voxelize(PointCloud(np.array([[0.1, 0.1, 0.1]])), 0.5, origin=np.array([0.1, 0.0, 0.0]))
    with pytest.raises(GridMismatch):
        diff_grids(a, c)


@settings(max_examples=50, deadline=None)
@given(
    a_pts=st.lists(st.tuples(*[st.floats(-3, 3, allow_nan=False, width=16)] * 3), max_size=40),
    b_pts=st.lists(st.tuples(*[st.floats(-3, 3, allow_nan=False, width=16)] * 3), max_size=40),
)
def test_diff_matches_set_oracle_and_is_antisymmetric(a_pts, b_pts):
    a_arr = np.asarray(a_pts, dtype=float).reshape(len(a_pts), 3)
    b_arr = np.asarray(b_pts, dtype=float).reshape(len(b_pts), 3)
    a, b = voxelize(PointCloud(a_arr), 0.5), voxelize(PointCloud(b_arr), 0.5)
    fwd, back = diff_grids(a, b), diff_grids(b, a)
    cells_a, cells_b = voxel_cells(a_arr, 0.5), voxel_cells(b_arr, 0.5)
    assert set(fwd.added) == cells_b - cells_a
    assert set(fwd.removed) == cells_a - cells_b
    assert fwd.added == back.removed
    assert fwd.removed == back.added


# -- ransac ground filter -----------------------------------------------------


def test_ground_plane_recovered_from_cluttered_scene():
    rng = np.random.default_rng(3)
    ground = np.column_stack([rng.uniform(0, 10, 1000), rng.uniform(0, 10, 1000), np.zeros(1000)])
    box = box_points((5, 5, 1.0), (1, 1, 1), 100, rng)
    result = ransac_ground_filter(PointCloud(np.vstack([ground, box])), seed=1)
    assert result.found
    angle = np.degrees(np.arccos(np.clip(abs(result.normal @ [0, 0, 1]), -1, 1)))
    assert angle < 1.0
    assert len(result.nonground) == 100
    assert result.nonground.points[:, 2].min() > 0.4


def test_pure_plane_has_empty_nonground():
    rng = np.random.default_rng(4)
    pts = np.column_stack([rng.uniform(0, 5, 500), rng.uniform(0, 5, 500), np.zeros(500)])
    result = ransac_ground_filter(PointCloud(pts), seed=0)
    assert result.found
    assert result.nonground.is_empty
    assert len(result.ground_indices) == 500


def test_three_points_define_their_plane_exactly():
    pts = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    result = ransac_ground_filter(PointCloud(pts), seed=0)
    assert result.found
    assert np.allclose(result.normal, [0, 0, 1], atol=1e-12)
    assert result.offset == pytest.approx(-1.0, abs=1e-12)
    assert len(result.ground) == 3


def test_no_consensus_returns_cloud_as_nonground():
    rng = np.random.default_rng(5)
    scatter = rng.uniform(0, 10, (200, 3))
    params = GroundFilterParams(distance_threshold=0.001, min_inlier_fraction=0.5)
    result = ransac_ground_filter(PointCloud(scatter), params, seed=0)
    assert not result.found
    assert result.normal is None
    assert len(result.nonground) == 200
    assert result.ground.is_empty


def test_ransac_is_deterministic_given_seed():
    rng = np.random.default_rng(6)
    pts = np.vstack(
        [
            np.column_stack([rng.uniform(0, 5, 300), rng.uniform(0, 5, 300), np.zeros(300)]),
            rng.uniform(0, 5, (60, 3)),
        ]
    )
    cloud = PointCloud(pts)
    a = ransac_ground_filter(cloud, seed=9)
    b = ransac_ground_filter(cloud, seed=9)
    assert np.array_equal(a.ground_indices, b.ground_indices)
    assert np.allclose(a.normal, b.normal)


def test_ground_filter_params_are_validated():
    with pytest.raises(InvalidInput):
        GroundFilterParams(distance_threshold=0.0)
    with pytest.raises(InvalidInput):
        GroundFilterParams(max_iterations=0)
    with pytest.raises(InvalidInput):
        GroundFilterParams(min_inlier_fraction=1.5)


# -- MLS smoothing ------------------------------------------------------------


def test_planar_points_are_a_fixed_point():
    rng = np.random.default_rng(7)
    pts = np.column_stack([rng.uniform(0, 2, 300), rng.uniform(0, 2, 300), np.zeros(300)])
    out = mls_smooth(PointCloud(pts), 0.5)
    assert np.allclose(out.points, pts, atol=1e-9)


def test_gaussian_noise_is_at_least_halved():
    rng = np.random.default_rng(8)
    grid = np.stack(
        np.meshgrid(np.arange(0, 2, 0.05), np.arange(0, 2, 0.05), indexing="ij"), axis=-1
    ).reshape(-1, 2)
    noise = rng.normal(0, 0.01, len(grid))
    pts = np.column_stack([grid, noise])
    out = mls_smooth(PointCloud(pts), 0.3)
    assert len(out) == len(pts)
    assert np.abs(out.points[:, 2]).mean() <= 0.5 * np.abs(noise).mean()


def test_isolated_points_pass_through():
    pts = np.array([[0.0, 0.0, 0.3], [10.0, 0.0, -0.4], [20.0, 5.0, 1.0]])
    out = mls_smooth(PointCloud(pts), 0.5)
    assert np.array_equal(out.points, pts)
    with pytest.raises(InvalidInput):
        mls_smooth(PointCloud(pts), 0.0)


# -- morphological opening ----------------------------------------------------


def _grid_of(cells, resolution=0.1):
    return VoxelGrid(resolution, np.zeros(3), frozenset(cells), {})


def test_single_voxel_is_opened_away():
    assert morph_open(_grid_of({(5, 5, 5)}), 1).occupied == frozenset()


def test_solid_3x3x3_block_survives_opening():
    block = {(x, y, z) for x in range(3) for y in range(3) for z in range(3)}
    opened = morph_open(_grid_of(block), 1).occupied
    # only the centre survives 6-connected erosion; dilation restores its
    # face neighbours, so the block persists as a non-empty core
    assert (1, 1, 1) in opened
    assert opened == frozenset(
        {(1, 1, 1), (0, 1, 1), (2, 1, 1), (1, 0, 1), (1, 2, 1), (1, 1, 0), (1, 1, 2)}
    )
    assert opened <= frozenset(block)


def test_empty_grid_stays_empty():
    assert morph_open(_grid_of(set()), 1).occupied == frozenset()


def test_opening_never_adds_cells():
    block = {(x, y, z) for x in range(3) for y in range(3) for z in range(3)}
    speck = {(9, 9, 9)}
    grid = _grid_of(block | speck)
    assert morph_open(grid, 0).occupied == grid.occupied
    opened = morph_open(grid, 1)
    assert (9, 9, 9) not in opened.occupied
    assert opened.occupied <= frozenset(block)
    with pytest.raises(InvalidInput):
        morph_open(grid, -1)


# -- euclidean clustering -----------------------------------------------------


def test_two_separated_blobs_form_two_clusters():
    rng = np.random.default_rng(9)
    a = box_points((0, 0, 0), (0.2, 0.2, 0.2), 50, rng)
    b = box_points((1, 0, 0), (0.2, 0.2, 0.2), 50, rng)
    clusters = euclidean_cluster(PointCloud(np.vstack([a, b])), 0.3)
    assert [c.size for c in clusters] == [50, 50]
    # equal sizes: ordering falls back to lexicographic centroid
    assert clusters[0].centroid[0] < clusters[1].centroid[0]


def test_min_size_discards_small_components():
    assert euclidean_cluster(PointCloud(np.array([[0.0, 0.0, 0.0]])), 0.3, min_size=2) == []


def test_chained_points_are_one_cluster():
    pts = np.column_stack([np.arange(0, 2, 0.1), np.zeros(20), np.zeros(20)])
    clusters = euclidean_cluster(PointCloud(pts), 0.15)
    assert len(clusters) == 1 and clusters[0].size == 20


def test_clusters_ordered_by_size_then_centroid():
    rng = np.random.default_rng(10)
    big = box_points((5, 5, 0), (0.2, 0.2, 0.2), 80, rng)
    small = box_points((0, 0, 0), (0.2, 0.2, 0.2), 30, rng)
    clusters = euclidean_cluster(PointCloud(np.vstack([small, big])), 0.3)
    assert [c.size for c in clusters] == [80, 30]
    assert [c.id for c in clusters] == [0, 1]


@settings(max_examples=40, deadline=None)
@given(
    pts=st.lists(
        st.tuples(*[st.floats(0, 3, allow_nan=False, width=16)] * 3), min_size=1, max_size=40
    ),
    tolerance=st.sampled_from([0.2, 0.5, 1.0]),
)
def test_clustering_matches_union_find_oracle(pts, tolerance):
    arr = np.asarray(pts, dtype=float)
    clusters = euclidean_cluster(PointCloud(arr), tolerance)
    # compare as point multisets; duplicate coordinates make index maps ambiguous
    got = sorted(sorted(map(tuple, c.points.points.tolist())) for c in clusters)
    expected = sorted(
        sorted(map(tuple, arr[sorted(group)].tolist()))
        for group in union_find_clusters(arr, tolerance)
    )
    assert got == expected


def test_cluster_invariants():
    rng = np.random.default_rng(11)
    pts = box_points((1, 2, 3), (0.4, 0.4, 0.4), 60, rng)
    (cluster,) = euclidean_cluster(PointCloud(pts), 0.5, change_kind=REMOVED)
    assert cluster.change_kind == REMOVED
    assert np.allclose(cluster.centroid, cluster.points.points.mean(axis=0))
    assert (cluster.points.points >= cluster.bbox_min - 1e-12).all()
    assert (cluster.points.points <= cluster.bbox_max + 1e-12).all()
    with pytest.raises(InvalidInput):
        euclidean_cluster(PointCloud(pts), 0.0)


# -- descriptors and matching -------------------------------------------------


def _cluster_from(points, kind=ADDED, cid=0):
    return ObjectCluster.from_points(PointCloud(points), kind, cid)


def test_descriptor_eigenvalues_are_descending_and_nonnegative():
    rng = np.random.default_rng(12)
    d = cluster_descriptor(_cluster_from(rng.normal(size=(100, 3))))
    assert d[0] >= d[1] >= d[2] >= 0.0
    assert d[3] == 100


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_descriptor_is_rigid_invariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(50, 3)) * [2.0, 1.0, 0.2]
    rot = Rotation.random(rng=rng)
    moved = rot.apply(pts) + rng.uniform(-10, 10, 3)
    d0, d1 = cluster_descriptor(_cluster_from(pts)), cluster_descriptor(_cluster_from(moved))
    assert descriptor_distance(d0, d1) < 1e-6


def test_identical_lists_match_pairwise():
    rng = np.random.default_rng(13)
    blobs = [
        _cluster_from(box_points((i, 0, 0), (0.3 + 0.1 * i, 0.3, 0.3), 40 + 10 * i, rng), ADDED, i)
        for i in range(3)
    ]
    mirror = [ObjectCluster.from_points(c.points, REMOVED, 10 + c.id) for c in blobs]
    matches = match_objects(blobs, mirror)
    assert [(a, r) for a, r, _ in matches] == [(0, 10), (1, 11), (2, 12)]
    assert all(d == pytest.approx(0.0, abs=1e-12) for _, _, d in matches)


def test_rotated_cluster_still_matches():
    rng = np.random.default_rng(14)
    pts = box_points((0, 0, 0), (0.8, 0.4, 0.2), 120, rng)
    rot = Rotation.from_euler("z", 90, degrees=True)
    a = _cluster_from(pts, ADDED, 0)
    b = _cluster_from(rot.apply(pts) + [2.0, 0.0, 0.0], REMOVED, 0)
    ((ai, ri, d),) = match_objects([a], [b])
    assert (ai, ri) == (0, 0)
    assert d < 0.5


def test_wildly_different_sizes_stay_unmatched():
    rng = np.random.default_rng(15)
    small = _cluster_from(box_points((0, 0, 0), (0.3, 0.3, 0.3), 10, rng), ADDED, 0)
    huge = _cluster_from(box_points((0, 0, 0), (0.3, 0.3, 0.3), 10_000, rng), REMOVED, 0)
    matches = match_objects([small], [huge])
    assert matches == [(0, None, None), (None, 0, None)]


def test_every_cluster_appears_exactly_once_in_matches():
    rng = np.random.default_rng(16)
    added = [
        _cluster_from(box_points((i, 0, 0), (0.4, 0.4, 0.4), 50, rng), ADDED, i) for i in range(4)
    ]
    removed = [
        _cluster_from(box_points((i, 3, 0), (0.4, 0.4, 0.4), 50, rng), REMOVED, i)
        for i in range(2)
    ]
    matches = match_objects(added, removed)
    assert sorted(a for a, _, _ in matches if a is not None) == [0, 1, 2, 3]
    assert sorted(r for _, r, _ in matches if r is not None) == [0, 1]


def test_kmeans_groups_descriptor_families():
    rng = np.random.default_rng(17)
    slim = [
        _cluster_from(box_points((i, 0, 0), (1.5, 0.1, 0.1), 60, rng), ADDED, i) for i in range(3)
    ]
    fat = [
        _cluster_from(box_points((i, 5, 0), (0.8, 0.8, 0.8), 200, rng), ADDED, 3 + i)
        for i in range(3)
    ]
    labels = kmeans_group(slim + fat, 2, seed=0)
    assert len(set(labels[:3])) == 1
    assert len(set(labels[3:])) == 1
    assert labels[0] != labels[3]
    with pytest.raises(InvalidInput):
        kmeans_group(slim, 5)


# -- full pipeline ------------------------------------------------------------


def scene(rng, n_ground=6000):
    return np.column_stack(
        [rng.uniform(0, 10, n_ground), rng.uniform(0, 10, n_ground), rng.normal(0, 0.005, n_ground)]
    )


def test_self_difference_is_empty():
    rng = np.random.default_rng(18)
    base = scene(rng)
    cloud = PointCloud(np.vstack([base, box_points((3, 3, 0.4), (0.6, 0.6, 0.8), 1500, rng)]))
    report = run_pipeline(cloud, cloud, ChangeParams(seed=1))
    assert report.empty
    assert report.added == [] and report.removed == []
    assert report.correspondences == []


def test_added_cube_is_detected_near_its_true_centre():
    rng = np.random.default_rng(19)
    base = scene(rng)
    cube = box_points((3.0, 2.0, 0.25), (0.5, 0.5, 0.5), 500, rng)
    report = run_pipeline(
        PointCloud(base), PointCloud(np.vstack([base, cube])), ChangeParams(seed=1)
    )
    assert len(report.added) == 1 and len(report.removed) == 0
    assert np.linalg.norm(report.added[0].centroid - [3.0, 2.0, 0.25]) <= 0.1


def test_moved_object_reports_matched_add_remove_pair():
    rng = np.random.default_rng(20)
    base = scene(rng)
    obj = box_points((2.0, 2.0, 0.3), (0.6, 0.6, 0.6), 1200, rng)
    before = PointCloud(np.vstack([base, obj]))
    after = PointCloud(np.vstack([base, obj + [2.0, 0.0, 0.0]]))
    report = run_pipeline(before, after, ChangeParams(seed=1))
    assert len(report.added) == 1 and len(report.removed) == 1
    (pair,) = [c for c in report.correspondences if c[0] is not None and c[1] is not None]
    assert pair[2] < 0.5


def test_empty_inputs_yield_an_empty_report():
    report = run_pipeline(PointCloud.empty(), PointCloud.empty(), ChangeParams(seed=0))
    assert report.empty
    assert report.correspondences == []


def test_stage_errors_carry_the_stage_name():
    cloud = PointCloud(np.zeros((5, 3)))
    with pytest.raises(StageError) as err:
        run_pipeline(cloud, cloud, ChangeParams(cluster_tolerance=0.0))
    assert err.value.stage == "euclidean_cluster"
    with pytest.raises(InvalidInput):
        ChangeParams(resolution=0.0)


def test_report_document_and_cluster_file_names():
    rng = np.random.default_rng(21)
    added = [_cluster_from(box_points((0, 0, 0), (0.4, 0.4, 0.4), 30, rng), ADDED, 0)]
    report = ChangeReport(
        added=added, removed=[], correspondences=[(0, None, None)], params=ChangeParams()
    )
    doc = report_to_document(report)
    assert cluster_file_name(added[0]) == "added-000.pcd"
    assert doc["added"][0]["cloud_file"] == "added-000.pcd"
    assert doc["added"][0]["size"] == 30
    assert doc["removed"] == []
    assert doc["correspondences"] == [{"added": 0, "removed": None, "distance": None}]
    assert doc["params"]["resolution"] == 0.1
