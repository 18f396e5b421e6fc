import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from oracles import enumerate_iou, euler_characteristic, mesh_area, signed_volume, surface_distance_lower_bound
from vrnbody.errors import FormatError, ParseError, PreconditionError, UsageError
from vrnbody.geometry import (
    TriMesh,
    VoxelGrid,
    case_table,
    decode_grid,
    encode_grid,
    fit_transform,
    iou,
    load_grid,
    load_obj,
    marching_cubes,
    merge_meshes,
    parse_obj,
    point_in_mesh,
    points_in_mesh,
    save_grid,
    save_obj,
    scale_about,
    scale_augment,
    voxelize,
    z_align,
)
from vrnbody.geometry.marching import EDGES
from vrnbody.geometry.primitives import box, capsule, ellipsoid, sphere

CUBE_OBJ = """# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def rotation(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    return q * np.sign(np.linalg.det(q))


# ---------------------------------------------------------------- OBJ


def test_obj_cube_counts():
    mesh = parse_obj(CUBE_OBJ)
    assert len(mesh.vertices) == 8 and len(mesh.triangles) == 12
    assert mesh.is_closed()


def test_obj_quad_fan_triangulation():
    mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2], [0, 2, 3]])


def test_obj_ignores_other_records_and_accepts_slash_and_negative_indices():
    text = "o thing\nv 0 0 0\nvt 0 0\nv 1 0 0\nvn 0 0 1\nv 0 1 0\ns off\nf 1/1/1 2/1/1 -1/1/1\n"
    mesh = parse_obj(text)
    np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2]])


@pytest.mark.parametrize("text,line", [
    ("v 0 0 0\nv 1 0\n", 2),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n", 4),
    ("v 0 0 0\nv a 0 0\n", 2),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 9\n", 5),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n", 4),
])
def test_obj_parse_errors_carry_line_number(text, line):
    with pytest.raises(ParseError) as info:
        parse_obj(text, "bad.obj")
    assert info.value.line == line
    assert f":{line}" in str(info.value) or f"line {line}" in str(info.value)


def test_obj_round_trip_random_mesh(tmp_path, rng):
    verts = rng.standard_normal((100, 3)) * 50
    tris = np.array([rng.choice(100, 3, replace=False) for _ in range(150)])
    save_obj(TriMesh(verts, tris), tmp_path / "m.obj")
    back = load_obj(tmp_path / "m.obj")
    assert np.max(np.abs(back.vertices - verts)) < 1e-6
    np.testing.assert_array_equal(back.triangles, tris)


def test_mesh_rejects_bad_indices():
    with pytest.raises(UsageError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 3]])
    with pytest.raises(UsageError, match="degenerate"):
        TriMesh(np.zeros((3, 3)), [[0, 1, 1]])


# ---------------------------------------------------------------- transforms


def test_z_align_examples():
    mesh = TriMesh([[0, 0, 1], [1, 0, 3], [0, 1, 1], [1, 1, 3]], [[0, 1, 2], [1, 3, 2]])
    aligned = z_align(mesh)
    np.testing.assert_allclose(aligned.vertices[:, 2], [-1, 1, -1, 1])
    np.testing.assert_array_equal(aligned.vertices[:, :2], mesh.vertices[:, :2])
    np.testing.assert_array_equal(z_align(aligned).vertices, aligned.vertices)


@given(st.lists(st.tuples(*[st.floats(-100, 100)] * 3), min_size=3, max_size=20))
def test_z_align_mean_and_idempotence(points):
    mesh = TriMesh(np.array(points), np.zeros((0, 3), np.int64))
    once = z_align(mesh)
    assert abs(once.vertices[:, 2].mean()) < 1e-6
    np.testing.assert_allclose(z_align(once).vertices, once.vertices, atol=1e-9)


def test_z_align_empty_mesh_errors():
    with pytest.raises(UsageError):
        z_align(TriMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64)))


def test_scale_augment_identity_and_determinism(rng):
    cube = parse_obj(CUBE_OBJ)
    same, s = scale_augment(cube, (1.0, 1.0), rng)
    assert s == 1.0
    np.testing.assert_allclose(same.vertices, cube.vertices)
    a, sa = scale_augment(cube, (0.85, 1.0), np.random.default_rng(3))
    b, sb = scale_augment(cube, (0.85, 1.0), np.random.default_rng(3))
    assert sa == sb and 0.85 <= sa <= 1.0
    np.testing.assert_array_equal(a.vertices, b.vertices)
    with pytest.raises(UsageError):
        scale_augment(cube, (1.2, 1.0), rng)


def test_scale_two_doubles_edge_lengths():
    cube = parse_obj(CUBE_OBJ)
    big = scale_about(cube, 2.0, (0.5, 0.5, 0.5))
    e = cube.edges()
    ratio = (np.linalg.norm(big.vertices[e[:, 0]] - big.vertices[e[:, 1]], axis=1)
             / np.linalg.norm(cube.vertices[e[:, 0]] - cube.vertices[e[:, 1]], axis=1))
    np.testing.assert_allclose(ratio, 2.0)
    lo, hi = big.bounds()
    np.testing.assert_allclose(hi - lo, 2.0)


# ---------------------------------------------------------------- primitives


def test_capsule_vertex_count_and_closed():
    for segments, rings in [(8, 2), (16, 4), (12, 3)]:
        c = capsule([0, 0, 0], [0, 0, 2], 0.5, segments, rings)
        assert len(c.vertices) == 2 + 2 * segments * rings
        assert c.is_closed()
        assert signed_volume(c.vertices, c.triangles) > 0
        assert euler_characteristic(c.vertices, c.triangles) == 2


def test_primitives_outward_and_closed():
    for m in [box([0, 0, 0], [1, 2, 3]), ellipsoid([1, 2, 3], [1, 2, 0.5]), sphere([0, 0, 0], 2)]:
        assert m.is_closed() and m.signed_volume() > 0


# ---------------------------------------------------------------- point_in_mesh


def test_point_in_mesh_cube():
    cube = box([-0.5] * 3, [0.5] * 3)
    assert point_in_mesh(cube, [0, 0, 0])
    assert not point_in_mesh(cube, [10, 0, 0])
    assert not point_in_mesh(cube, [0, 0, 10])


def test_point_in_mesh_handles_grazing_rays():
    # points exactly in line with cube vertices and edges along many directions
    cube = box([-1] * 3, [1] * 3)
    pts = np.array([[0, 0, 0], [0.5, 0.5, 0.5], [-0.99, 0, 0.99], [0, 0, 0.999999]])
    assert points_in_mesh(cube, pts).all()
    assert not points_in_mesh(cube, pts + 3).any()


def test_point_in_mesh_matches_sphere_sdf(rng):
    s = sphere([0, 0, 0], 1.0, segments=64, rings=31)
    pts = rng.uniform(-1.5, 1.5, (1000, 3))
    r = np.linalg.norm(pts, axis=1)
    # the tessellation sits within 1 - cos(pi/32) of the unit sphere
    off_shell = np.abs(r - 1) > 0.01
    inside = points_in_mesh(s, pts)
    assert np.array_equal(inside[off_shell], r[off_shell] < 1)


def test_point_in_mesh_union_of_overlapping_components():
    a = capsule([0, 0, 0], [2, 0, 0], 0.5)
    b = capsule([1, -1, 0], [1, 1, 0], 0.5)
    both = merge_meshes([a, b])
    # the overlap would cancel under a single parity count
    assert point_in_mesh(both, [1, 0, 0])
    assert point_in_mesh(both, [1, 0.9, 0]) and point_in_mesh(both, [0.1, 0, 0])
    assert not point_in_mesh(both, [0.3, 0.8, 0])


def test_open_mesh_rejected_with_boundary_edges():
    cube = parse_obj(CUBE_OBJ)
    opened = TriMesh(cube.vertices, cube.triangles[:-1])
    with pytest.raises(PreconditionError, match=r"not closed: 3 edges.*\(3,4\), \(3,7\), \(4,7\)"):
        point_in_mesh(opened, [0.5, 0.5, 0.5])
    with pytest.raises(PreconditionError):
        voxelize(opened, (16, 16, 16))


# ---------------------------------------------------------------- voxelize


def grid_centers(dims):
    idx = np.indices(dims).reshape(3, -1).T
    return idx + 0.5


def test_voxelize_central_box_matches_oracle():
    cube = box([2, 2, 2], [6, 6, 6])
    grid = voxelize(cube, (8, 8, 8), transform=(1.0, np.zeros(3)))
    assert grid.values.sum() == 64
    oracle = points_in_mesh(cube, grid_centers((8, 8, 8))).reshape(8, 8, 8)
    np.testing.assert_array_equal(grid.values.astype(bool), oracle)


def test_voxelize_fit_rule():
    mesh = ellipsoid([3, -2, 5], [2, 4, 1])
    grid = voxelize(mesh, (32, 32, 32))
    scale, t = fit_transform(mesh, (32, 32, 32))
    g = mesh.vertices * scale + t
    # XY fills the grid inside a 4-voxel margin, mean Z at the middle depth
    assert g[:, 1].min() == pytest.approx(4) and g[:, 1].max() == pytest.approx(28)
    assert 4 <= g[:, 0].min() and g[:, 0].max() <= 28
    assert g[:, 2].mean() == pytest.approx(16)
    assert grid.scale == scale
    np.testing.assert_allclose(grid.world_to_grid(mesh.vertices), g)


def test_voxelize_never_empty_for_tiny_meshes():
    for mesh in [box([0, 0, 0], [1e-3, 1e-3, 1e-3]), sphere([5, 5, 5], 1e-4, 8, 3)]:
        assert voxelize(mesh, (16, 16, 16)).values.sum() >= 1


def test_sphere_occupancy_fraction():
    s = sphere([0, 0, 0], 1.0, segments=96, rings=47)
    grid = voxelize(s, (64, 64, 64))
    cube_voxels = (2 * grid.scale) ** 3
    assert abs(grid.values.sum() / cube_voxels - np.pi / 6) < 0.02 * np.pi / 6


def oracle_test_meshes():
    rng = np.random.default_rng(11)
    rot_box = box([-1, -0.5, -0.3], [1, 0.5, 0.3])
    rot_box = TriMesh(rot_box.vertices @ rotation(rng).T, rot_box.triangles)
    tetra = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    single = np.zeros((3, 3, 3))
    single[1, 1, 1] = 1
    blob_values = np.clip(rng.random((6, 6, 6)) * 1.5 - 0.2, 0, 1)
    return {
        "sphere": sphere([0, 0, 0], 1.0, 24, 11),
        "box": box([0, 0, 0], [1, 2, 0.7]),
        "rotated-box": rot_box,
        "ellipsoid": ellipsoid([0, 0, 0], [0.5, 1.5, 0.8], 20, 9),
        "capsule": capsule([0, 0, 0], [1, 2, 1], 0.4),
        "capsule-union": merge_meshes([capsule([0, 0, 0], [2, 0, 0], 0.5), capsule([1, -1, 0.2], [1, 1, 0.2], 0.4)]),
        "tetrahedron": tetra,
        "octahedron": marching_cubes(single),
        "cube-obj": parse_obj(CUBE_OBJ),
        "noisy-blob": marching_cubes(blob_values),
    }


@pytest.mark.parametrize("name", list(oracle_test_meshes()))
def test_voxelize_matches_point_oracle_off_surface(name):
    mesh = oracle_test_meshes()[name]
    dims = (32, 32, 32)
    grid = voxelize(mesh, dims)
    centers = grid_centers(dims)
    grid_mesh = mesh.transformed(grid.scale, grid.translation)
    far = surface_distance_lower_bound(grid_mesh.vertices, grid_mesh.triangles, centers, 0.4) > np.sqrt(3) / 2
    oracle = points_in_mesh(grid_mesh, centers[far])
    assert np.array_equal(grid.values.reshape(-1)[far].astype(bool), oracle)


def test_voxelize_boundary_centers_follow_fill_convention():
    # faces passing exactly through voxel centers: each center is claimed once
    cube = box([1.5, 1.5, 1.5], [5.5, 5.5, 5.5])
    grid = voxelize(cube, (8, 8, 8), transform=(1.0, np.zeros(3)))
    # x,y: one of the two boundary columns is in; z: centers equal to the lower face are out
    assert grid.values.sum() == 4 * 4 * 4


def resample(values, s):
    """Linear resample of an occupancy grid scaled by ``s`` about the volume center, re-thresholded."""
    c = np.array(values.shape) / 2
    offset = (0.5 - c) / s + c - 0.5
    moved = ndimage.affine_transform(values.astype(float), np.diag(np.full(3, 1 / s)), offset=offset, order=1)
    return moved >= 0.5


@pytest.mark.parametrize("s", [0.9, 0.95, 1.05, 1.1])
def test_scale_equivariance(s):
    mesh = merge_meshes([capsule([0, 0, 0], [0, 3, 0.5], 0.8), ellipsoid([0, -0.8, 0], [0.9, 0.9, 0.7])])
    dims = (64, 64, 64)
    base = voxelize(mesh, dims)
    center = np.array(dims) / 2
    scaled = scale_about(mesh.transformed(base.scale, base.translation), s, center)
    direct = voxelize(scaled, dims, transform=(1.0, np.zeros(3))).values.astype(bool)
    resampled = resample(base.values, s)
    assert iou(direct, resampled) >= 0.9
    # disagreements stay within one voxel of the surface
    shell = ndimage.binary_dilation(direct) & ~ndimage.binary_erosion(direct)
    assert np.all(shell[direct ^ resampled])


# ---------------------------------------------------------------- marching cubes


def test_table_hand_coded_cases():
    table = case_table()
    assert table[0] == () and table[255] == ()
    (loop,) = table[1]
    # corner 0 inside: one triangle on its three edges, normal away from the corner
    assert sorted(loop) == sorted(i for i, (a, b, _) in enumerate(EDGES) if a == 0)
    mids = [np.mean([np.array([c & 1, c >> 1 & 1, c >> 2 & 1]) for c in EDGES[e][:2]], axis=0) for e in loop]
    normal = np.cross(mids[1] - mids[0], mids[2] - mids[0])
    assert np.dot(normal, [1, 1, 1]) > 0
    assert len(table) == 256
    assert all(len(table[c]) >= 1 for c in range(1, 255))


def test_marching_cubes_empty_and_full():
    assert marching_cubes(np.zeros((4, 4, 4))).is_empty
    full = marching_cubes(np.ones((3, 3, 3)))
    assert full.is_closed()
    # padded shell puts the surface halfway between the border centers and the zero shell
    lo, hi = full.bounds()
    np.testing.assert_allclose(lo, 0.0)
    np.testing.assert_allclose(hi, 3.0)


def test_single_voxel_euler_characteristic():
    g = np.zeros((5, 5, 5))
    g[2, 2, 2] = 1
    m = marching_cubes(VoxelGrid(g.astype(np.uint8)))
    assert euler_characteristic(m.vertices, m.triangles) == 2
    assert m.is_closed()
    assert signed_volume(m.vertices, m.triangles) > 0


def test_vertex_interpolation_along_edge():
    g = np.zeros((2, 2, 2))
    g[0] = 0.8
    g[1] = 0.2
    m = marching_cubes(g, iso=0.5)
    # between centers x=0.5 (0.8) and x=1.5 (0.2): 0.5 + (0.5-0.8)/(0.2-0.8) = 1.0
    xs = m.vertices[:, 0]
    assert np.any(np.isclose(xs, 1.0))


def test_probability_ball_area():
    n, radius = 32, 10.0
    c = np.indices((n, n, n)).transpose(1, 2, 3, 0) + 0.5
    r = np.linalg.norm(c - n / 2, axis=-1)
    values = np.clip(0.5 + (radius - r) / 4, 0, 1)
    m = marching_cubes(values)
    assert m.is_closed()
    area = mesh_area(m.vertices, m.triangles)
    assert abs(area / (4 * np.pi * radius ** 2) - 1) < 0.10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.tuples(*[st.integers(2, 6)] * 3), st.floats(0.05, 0.95))
def test_marching_cubes_watertight(seed, dims, iso):
    values = np.random.default_rng(seed).random(dims)
    m = marching_cubes(values, iso=iso)
    if not m.is_empty:
        assert m.is_closed()
        assert signed_volume(m.vertices, m.triangles) > 0


def test_marching_cubes_world_coordinates():
    mesh = sphere([1, 2, 3], 2.0, 32, 15)
    grid = voxelize(mesh, (32, 32, 32))
    back = marching_cubes(grid, world=True)
    lo, hi = back.bounds()
    np.testing.assert_allclose((lo + hi) / 2, [1, 2, 3], atol=0.1)


def test_marching_cubes_rejects_bad_args():
    with pytest.raises(UsageError):
        marching_cubes(np.zeros((1, 4, 4)))
    with pytest.raises(UsageError):
        marching_cubes(np.zeros((4, 4, 4)), iso=1.0)


def test_voxelize_marching_cubes_round_trip():
    mesh = merge_meshes([ellipsoid([0, 0, 0], [1, 1.4, 0.8], 32, 15), capsule([0, 0, 0], [1.2, 1.2, 0], 0.5)])
    for dims in [(32, 32, 32), (48, 40, 32)]:
        grid = voxelize(mesh, dims)
        surface = marching_cubes(grid)
        again = voxelize(surface, dims, transform=(1.0, np.zeros(3)))
        assert iou(grid, again) >= 0.95


# ---------------------------------------------------------------- iou


def test_iou_examples():
    a = np.zeros((4, 4, 4), np.uint8)
    a[0:2, 0:2, 0:2] = 1
    b = np.roll(a, 1, axis=0)
    assert iou(a, a) == 1.0
    assert iou(a, b) == pytest.approx(4 / 12) == enumerate_iou(a, b)
    c = np.zeros_like(a)
    c[3, 3, 3] = 1
    assert iou(a, c) == 0.0
    assert iou(np.zeros_like(a), np.zeros_like(a)) == 1.0
    with pytest.raises(UsageError):
        iou(a, np.zeros((4, 4, 3)))


def test_iou_thresholds_real_grids():
    p = np.array([0.2, 0.5, 0.7, 0.9]).reshape(1, 2, 2)
    t = np.array([0, 1, 1, 0], np.uint8).reshape(1, 2, 2)
    assert iou(VoxelGrid(p), VoxelGrid(t)) == pytest.approx(2 / 3)
    assert iou(p, t, threshold=0.8) == pytest.approx(0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_iou_symmetric_and_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((3, 4, 5))
    b = rng.random((3, 4, 5))
    assert iou(a, b) == iou(b, a)
    assert iou(a, b) == pytest.approx(enumerate_iou(a >= 0.5, b >= 0.5))
    assert iou(a, a) == 1.0


# ---------------------------------------------------------------- VOXL


def test_voxl_binary_round_trip(tmp_path, rng):
    values = (rng.random((8, 8, 8)) > 0.5).astype(np.uint8)
    save_grid(VoxelGrid(values), tmp_path / "a.voxl")
    back = load_grid(tmp_path / "a.voxl")
    assert back.values.dtype == np.uint8
    np.testing.assert_array_equal(back.values, values)


def test_voxl_binary_file_size(tmp_path):
    save_grid(VoxelGrid.zeros((64, 64, 64)), tmp_path / "z.voxl")
    assert (tmp_path / "z.voxl").stat().st_size == 21 + 64 ** 3 // 8 == 21 + 32768


def test_voxl_real_round_trip(tmp_path, rng):
    values = rng.random((16, 16, 16)).astype(np.float32)
    save_grid(VoxelGrid(values), tmp_path / "r.voxl")
    back = load_grid(tmp_path / "r.voxl")
    assert back.values.tobytes() == values.tobytes()


def test_voxl_layout_is_x_fastest():
    values = np.zeros((9, 2, 1), np.uint8)
    values[1, 0, 0] = 1
    values[0, 1, 0] = 1
    data = encode_grid(VoxelGrid(values))
    assert data[:4] == b"VOXL"
    assert int.from_bytes(data[4:8], "little") == 1
    assert [int.from_bytes(data[8 + 4 * i:12 + 4 * i], "little") for i in range(3)] == [9, 2, 1]
    assert data[20] == 0
    # bit 1 (x=1) and bit 9 (y=1) in little-endian bit order
    assert data[21:] == bytes([0b10, 0b10, 0])


def test_voxl_errors(tmp_path):
    data = encode_grid(VoxelGrid.zeros((8, 8, 8)))
    with pytest.raises(FormatError, match="magic"):
        decode_grid(b"VOXX" + data[4:])
    with pytest.raises(FormatError, match="truncated"):
        decode_grid(data[:-1])
    with pytest.raises(FormatError, match="truncated"):
        decode_grid(data[:10])
    (tmp_path / "bad.voxl").write_bytes(b"nonsense")
    with pytest.raises(FormatError):
        load_grid(tmp_path / "bad.voxl")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.tuples(*[st.integers(1, 9)] * 3), st.booleans())
def test_voxl_round_trip_property(seed, dims, binary):
    rng = np.random.default_rng(seed)
    values = (rng.random(dims) > 0.5).astype(np.uint8) if binary else rng.random(dims).astype(np.float32)
    back = decode_grid(encode_grid(VoxelGrid(values)))
    assert back.values.dtype == values.dtype
    assert back.values.tobytes() == values.tobytes()
