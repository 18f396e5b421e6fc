import numpy as np
import pytest
from scipy.spatial import cKDTree

from vrnbody.encoding import alignment_iou, project_silhouette
from vrnbody.encoding.landmarks import JOINT_INDEX
from vrnbody.errors import ConfigurationError, ParseError, UsageError
from vrnbody.geometry import fit_transform, voxelize
from vrnbody.geometry.primitives import capsule
from vrnbody.synth import (
    ANGLE_NAMES,
    Manifest,
    dataset_digest,
    default_limits,
    default_shape,
    generate_dataset,
    generate_sample,
    render,
    sample_pose,
    sample_seed,
    skeleton_to_mesh,
    zero_limits,
)
from vrnbody.synth.dataset import scaled_transform
from vrnbody.synth.skeleton import expected_bone_lengths, sample_angles

# angles whose range is wide enough to demand real spread
VARIANCE_FLOOR = 0.005


def t_pose():
    return sample_pose(np.random.default_rng(0), zero_limits(), default_shape())


# -- skeletons

def test_zero_limits_give_t_pose():
    sk = t_pose()
    shape = default_shape()
    assert np.allclose(sk.joint("pelvis"), 0)
    wrist = sk.joint("l_wrist")
    reach = shape["shoulder_half_width"] + shape["upper_arm"] + shape["forearm"]
    # arms straight out along +x at thorax height
    assert np.allclose(wrist, [reach, -shape["torso_length"], 0])
    assert np.allclose(sk.joint("r_wrist"), [-reach, -shape["torso_length"], 0])
    assert np.allclose(sk.joint("l_ankle"), [shape["hip_half_width"], shape["thigh"] + shape["shin"], 0])


def test_sample_pose_deterministic():
    a = sample_pose(np.random.default_rng(42))
    b = sample_pose(np.random.default_rng(42))
    assert np.array_equal(a.joints, b.joints)
    assert a.angles == b.angles


def test_angles_within_limits_and_diverse():
    limits = default_limits()
    rng = np.random.default_rng(7)
    draws = [sample_angles(rng, limits) for _ in range(1000)]
    for name in ANGLE_NAMES:
        values = np.array([d[name] for d in draws])
        lo, hi = limits[name]
        assert values.min() >= lo and values.max() <= hi, name
        assert values.var() > VARIANCE_FLOOR, name


def test_bone_lengths_preserved_under_rotation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        sk = sample_pose(rng)
        for (parent, child), length in expected_bone_lengths(sk.shape).items():
            assert sk.bone_length(parent, child) == pytest.approx(length, abs=1e-12)


def test_empty_limit_interval_rejected():
    limits = default_limits()
    limits["l_elbow"] = (0.5, 0.1)
    with pytest.raises(ConfigurationError):
        sample_pose(np.random.default_rng(0), limits)
    del limits["l_elbow"]
    with pytest.raises(ConfigurationError):
        sample_pose(np.random.default_rng(0), limits)


# -- meshes

def test_single_bone_capsule_vertex_count():
    for segments, rings in ((8, 2), (16, 4), (12, 3)):
        m = capsule(np.zeros(3), np.array([0, 1.0, 0]), 0.2, segments, rings)
        assert len(m.vertices) == 2 + 2 * segments * rings


def test_body_components_closed():
    mesh = skeleton_to_mesh(sample_pose(np.random.default_rng(1)), 16)
    comps = mesh.components()
    assert len(comps) == 15  # 14 bones + head
    for tri in comps:
        mesh.submesh(tri).require_closed()


def test_t_pose_mirror_symmetric():
    mesh = skeleton_to_mesh(t_pose(), 16)
    mirrored = mesh.vertices * [-1, 1, 1]
    dist, _ = cKDTree(mesh.vertices).query(mirrored)
    assert dist.max() < 1e-6


def test_body_mesh_errors():
    sk = t_pose()
    with pytest.raises(ConfigurationError):
        skeleton_to_mesh(sk, 6)
    sk.joints[JOINT_INDEX["l_wrist"]] = sk.joint("l_elbow")
    with pytest.raises(ConfigurationError):
        skeleton_to_mesh(sk, 16)


# -- rendering

def body(seed, dims=(64, 64, 64)):
    rng = np.random.default_rng(seed)
    sk = sample_pose(rng)
    mesh, parts = skeleton_to_mesh(sk, 16, with_parts=True)
    transform = scaled_transform(fit_transform(mesh, dims), 0.9, dims)
    return rng, sk, mesh, parts, transform


def test_render_deterministic():
    _, sk, mesh, parts, tf = body(5)
    a = render(mesh, sk, 64, 64, rng=np.random.default_rng(9), transform=tf, parts=parts)
    b = render(mesh, sk, 64, 64, rng=np.random.default_rng(9), transform=tf, parts=parts)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1] and np.array_equal(a[2], b[2])


@pytest.mark.parametrize("dims", [(64, 64, 64), (32, 32, 32), (32, 64, 24)])
def test_mask_equals_projected_volume(dims):
    for seed in range(6):
        _, sk, mesh, parts, tf = body(seed, dims)
        volume = voxelize(mesh, dims, tf, keep_thin=True)
        _, _, mask = render(mesh, sk, dims[1], dims[0], transform=tf, parts=parts)
        assert np.array_equal(project_silhouette(volume), mask)


def test_unoccluded_wrist_inside_mask():
    # T-pose: both wrists stick out sideways, nothing can hide them
    sk = t_pose()
    mesh = skeleton_to_mesh(sk, 16)
    _, lm, mask = render(mesh, sk, 64, 64, transform=fit_transform(mesh, (64, 64, 64)))
    for name in ("l_wrist", "r_wrist"):
        (x, y), visible = lm[name]
        assert visible
        assert mask[int(round(y)), int(round(x))] == 1


def test_t_pose_left_wrist_on_image_right():
    sk = t_pose()
    mesh = skeleton_to_mesh(sk, 16)
    _, lm, _ = render(mesh, sk, 64, 64, transform=fit_transform(mesh, (64, 64, 64)))
    assert lm["l_wrist"][0][0] > lm["r_wrist"][0][0]
    assert lm["head"][0][1] < lm["l_ankle"][0][1]


def test_visible_landmarks_near_occupied_columns():
    for i in range(20):
        sample, _ = generate_sample(sample_seed(11, i), (64, 64, 64))
        cols = np.argwhere(project_silhouette(sample.target))[:, ::-1]  # (x, y)
        tree = cKDTree(cols)
        pts = sample.landmarks.points[sample.landmarks.visible]
        dist, _ = tree.query(np.round(pts))
        assert dist.max() <= 2, i


def test_generated_samples_aligned():
    for i in range(30):
        sample, _ = generate_sample(sample_seed(5, i), (32, 32, 32))
        assert alignment_iou(sample) == 1.0
        assert sample.image.shape == (32, 32, 3) and sample.image.dtype == np.float32
        assert 0 <= sample.image.min() and sample.image.max() <= 1


def test_scale_augmentation_spans_range():
    sizes = []
    for i in range(40):
        sample, _ = generate_sample(sample_seed(2, i), (32, 32, 32))
        sizes.append(sample.target.scale)
    assert np.ptp(sizes) > 0


# -- datasets

def test_dataset_counts_and_digest(tmp_path):
    m = generate_dataset(10, 3, (32, 32, 32), tmp_path / "a")
    assert len(m) == 10
    files = [p for p in (tmp_path / "a").rglob("*") if p.is_file() and p.name != "manifest.txt"]
    assert len(files) == 40
    again = generate_dataset(10, 3, (32, 32, 32), tmp_path / "b")
    assert dataset_digest(m) == dataset_digest(again)
    other = generate_dataset(10, 4, (32, 32, 32), tmp_path / "c")
    assert dataset_digest(m) != dataset_digest(other)


def test_parallel_generation_matches_sequential(tmp_path):
    a = generate_dataset(6, 8, (32, 32, 32), tmp_path / "seq")
    b = generate_dataset(6, 8, (32, 32, 32), tmp_path / "par", workers=2)
    assert dataset_digest(a) == dataset_digest(b)


def test_manifest_round_trip_and_samples(tmp_path):
    m = generate_dataset(4, 1, (32, 64, 24), tmp_path)
    loaded = Manifest.load(tmp_path)
    assert loaded.entries == m.entries
    for entry in loaded:
        s = loaded.load_sample(entry)
        assert s.target.dims == (32, 64, 24)
        assert s.image.shape == (64, 32, 3)
        assert alignment_iou(s) == 1.0
        assert entry.seed == sample_seed(1, entry.index)


def test_manifest_parse_errors():
    with pytest.raises(ParseError) as err:
        Manifest.parse("# header\n0 1 a b c\n")
    assert err.value.line == 2
    with pytest.raises(ParseError):
        Manifest.parse("x 1 a b c d\n")


def test_dataset_needs_samples(tmp_path):
    with pytest.raises(UsageError):
        generate_dataset(0, 0, (32, 32, 32), tmp_path)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        generate_dataset(1, 0, (32, 32, 32), blocker / "out")
