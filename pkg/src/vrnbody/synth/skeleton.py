"""Articulated stick-figure skeletons with joint limits and forward kinematics.

Coordinates follow the image convention: x to the right, y down, z away from
the camera. A person faces the camera, so their left side is at +x. Pose
angles are offsets from the T-pose (arms horizontal, legs straight down).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..encoding.landmarks import JOINT_INDEX, JOINTS
from ..errors import ConfigurationError

# (low, high) in model units (roughly metres)
SHAPE_RANGES = {
    "torso_length": (0.45, 0.55),
    "neck_length": (0.08, 0.12),
    "head_offset": (0.10, 0.13),
    "shoulder_half_width": (0.17, 0.22),
    "upper_arm": (0.27, 0.33),
    "forearm": (0.24, 0.30),
    "hip_half_width": (0.09, 0.12),
    "thigh": (0.40, 0.48),
    "shin": (0.38, 0.45),
    "torso_radius": (0.12, 0.16),
    "neck_radius": (0.045, 0.06),
    "head_radius": (0.09, 0.11),
    "upper_arm_radius": (0.045, 0.06),
    "forearm_radius": (0.035, 0.05),
    "thigh_radius": (0.07, 0.09),
    "shin_radius": (0.05, 0.065),
}

# per-side angles are listed once and applied to both sides independently
SIDE_ANGLES = ("shoulder_elevation", "shoulder_swing", "elbow", "hip_abduction", "hip_flexion", "knee")
BODY_ANGLES = ("yaw", "spine_pitch", "spine_roll", "head_pitch", "head_roll")
ANGLE_NAMES = BODY_ANGLES + tuple(f"{s}_{a}" for s in ("l", "r") for a in SIDE_ANGLES)

_DEFAULT_LIMITS = {
    "yaw": (-0.6, 0.6),
    "spine_pitch": (-0.2, 0.35),
    "spine_roll": (-0.2, 0.2),
    "head_pitch": (-0.3, 0.3),
    "head_roll": (-0.25, 0.25),
    "shoulder_elevation": (-0.9, 1.35),
    "shoulder_swing": (-0.4, 1.1),
    "elbow": (0.0, 2.0),
    "hip_abduction": (-0.1, 0.5),
    "hip_flexion": (-0.35, 1.2),
    "knee": (0.0, 1.6),
}

# (parent joint, child joint, radius key, body part)
BONES = (
    ("pelvis", "thorax", "torso_radius", "shirt"),
    ("thorax", "neck", "neck_radius", "skin"),
    ("thorax", "l_shoulder", "upper_arm_radius", "shirt"),
    ("thorax", "r_shoulder", "upper_arm_radius", "shirt"),
    ("l_shoulder", "l_elbow", "upper_arm_radius", "shirt"),
    ("r_shoulder", "r_elbow", "upper_arm_radius", "shirt"),
    ("l_elbow", "l_wrist", "forearm_radius", "skin"),
    ("r_elbow", "r_wrist", "forearm_radius", "skin"),
    ("pelvis", "l_hip", "thigh_radius", "trousers"),
    ("pelvis", "r_hip", "thigh_radius", "trousers"),
    ("l_hip", "l_knee", "thigh_radius", "trousers"),
    ("r_hip", "r_knee", "thigh_radius", "trousers"),
    ("l_knee", "l_ankle", "shin_radius", "trousers"),
    ("r_knee", "r_ankle", "shin_radius", "trousers"),
)
PARTS = ("skin", "shirt", "trousers")


def default_limits():
    return {name: _DEFAULT_LIMITS[name.split("_", 1)[1] if name[:2] in ("l_", "r_") else name]
            for name in ANGLE_NAMES}


def zero_limits():
    """Limits that only admit the T-pose."""
    return {name: (0.0, 0.0) for name in ANGLE_NAMES}


def validate_limits(limits):
    missing = [n for n in ANGLE_NAMES if n not in limits]
    if missing:
        raise ConfigurationError(f"joint limits missing {', '.join(missing)}")
    for name, (lo, hi) in limits.items():
        if not lo <= hi:
            raise ConfigurationError(f"empty angle interval for {name}: [{lo}, {hi}]")


def default_shape():
    return {k: (lo + hi) / 2 for k, (lo, hi) in SHAPE_RANGES.items()}


def sample_shape(rng):
    return {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in SHAPE_RANGES.items()}


def base_shapes(count=12, seed=2017):
    """A small fixed family of body shapes; samples vary pose, light and scale over these."""
    rng = np.random.default_rng(seed)
    return [sample_shape(rng) for _ in range(count)]


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


@dataclass
class Skeleton:
    joints: np.ndarray
    angles: dict
    shape: dict
    head_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def joint(self, name):
        return self.joints[JOINT_INDEX[name]]

    def bone_length(self, parent, child):
        return float(np.linalg.norm(self.joint(child) - self.joint(parent)))

    def joint_radii(self):
        """Largest radius of any body part containing each joint."""
        radii = np.zeros(len(JOINTS))
        for parent, child, key, _ in BONES:
            for name in (parent, child):
                i = JOINT_INDEX[name]
                radii[i] = max(radii[i], self.shape[key])
        radii[JOINT_INDEX["head"]] = self.shape["head_radius"] * 1.2
        return radii

    def transformed(self, scale, translation):
        return Skeleton(self.joints * scale + np.asarray(translation, np.float64), dict(self.angles),
                        {k: v * scale for k, v in self.shape.items()}, self.head_rotation.copy())


def expected_bone_lengths(shape):
    return {
        ("pelvis", "thorax"): shape["torso_length"],
        ("thorax", "neck"): shape["neck_length"],
        ("thorax", "l_shoulder"): shape["shoulder_half_width"],
        ("thorax", "r_shoulder"): shape["shoulder_half_width"],
        ("l_shoulder", "l_elbow"): shape["upper_arm"],
        ("r_shoulder", "r_elbow"): shape["upper_arm"],
        ("l_elbow", "l_wrist"): shape["forearm"],
        ("r_elbow", "r_wrist"): shape["forearm"],
        ("pelvis", "l_hip"): shape["hip_half_width"],
        ("pelvis", "r_hip"): shape["hip_half_width"],
        ("l_hip", "l_knee"): shape["thigh"],
        ("r_hip", "r_knee"): shape["thigh"],
        ("l_knee", "l_ankle"): shape["shin"],
        ("r_knee", "r_ankle"): shape["shin"],
    }


def pose_skeleton(angles, shape):
    """Forward kinematics from pose angles (radians, offsets from the T-pose)."""
    a = angles
    j = {"pelvis": np.zeros(3)}
    spine = rot_z(a["spine_roll"]) @ rot_x(a["spine_pitch"])
    up = np.array([0.0, -1.0, 0.0])
    j["thorax"] = j["pelvis"] + spine @ up * shape["torso_length"]
    j["neck"] = j["thorax"] + spine @ up * shape["neck_length"]
    head_rot = spine @ rot_z(a["head_roll"]) @ rot_x(a["head_pitch"])
    j["head"] = j["neck"] + head_rot @ up * shape["head_offset"]
    for side, sign in (("l", 1.0), ("r", -1.0)):
        out = np.array([sign, 0.0, 0.0])
        shoulder = j["thorax"] + spine @ out * shape["shoulder_half_width"]
        upper = spine @ rot_y(sign * a[f"{side}_shoulder_swing"]) @ rot_z(sign * a[f"{side}_shoulder_elevation"])
        elbow = shoulder + upper @ out * shape["upper_arm"]
        fore = upper @ rot_y(sign * a[f"{side}_elbow"])
        wrist = elbow + fore @ out * shape["forearm"]
        hip = j["pelvis"] + out * shape["hip_half_width"]
        thigh = rot_z(-sign * a[f"{side}_hip_abduction"]) @ rot_x(-a[f"{side}_hip_flexion"])
        down = np.array([0.0, 1.0, 0.0])
        knee = hip + thigh @ down * shape["thigh"]
        shin = thigh @ rot_x(a[f"{side}_knee"])
        ankle = knee + shin @ down * shape["shin"]
        j.update({f"{side}_shoulder": shoulder, f"{side}_elbow": elbow, f"{side}_wrist": wrist,
                  f"{side}_hip": hip, f"{side}_knee": knee, f"{side}_ankle": ankle})
    yaw = rot_y(a["yaw"])
    joints = np.array([yaw @ j[name] for name in JOINTS])
    return Skeleton(joints, dict(angles), dict(shape), yaw @ head_rot)


def sample_angles(rng, limits):
    validate_limits(limits)
    # one draw per angle in a fixed order keeps the stream stable
    return {name: float(rng.uniform(*limits[name])) for name in ANGLE_NAMES}


def sample_pose(rng, limits=None, shape=None):
    """Draw pose angles within ``limits`` and pose a skeleton of ``shape``."""
    limits = default_limits() if limits is None else limits
    shape = default_shape() if shape is None else shape
    return pose_skeleton(sample_angles(rng, limits), shape)
