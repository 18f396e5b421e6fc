"""Named 2-D body landmarks and their Gaussian heatmap encoding.

Pixel coordinates put pixel ``i`` at coordinate ``i`` (its center), so a grid
column ``x`` (center ``x + 0.5``) corresponds to pixel coordinate ``x``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ParseError, UsageError

JOINTS = (
    "head",
    "neck",
    "thorax",
    "pelvis",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hip",
    "r_hip",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
)
JOINT_INDEX = {name: i for i, name in enumerate(JOINTS)}


def _mirror_name(name):
    if name.startswith("l_"):
        return "r_" + name[2:]
    if name.startswith("r_"):
        return "l_" + name[2:]
    return name


# index permutation applied when the image is mirrored
FLIP_PERMUTATION = np.array([JOINT_INDEX[_mirror_name(n)] for n in JOINTS])

# full width at half maximum of about six pixels
HEATMAP_FWHM = 6.0
HEATMAP_SIGMA = HEATMAP_FWHM / (2 * np.sqrt(2 * np.log(2)))


class LandmarkSet:
    """Sixteen joints in ``JOINTS`` order: ``points`` ``(16, 2)`` as (x, y) pixels and ``visible`` flags."""

    def __init__(self, points, visible=None):
        points = np.asarray(points, np.float64)
        if points.shape != (len(JOINTS), 2):
            raise UsageError(f"landmark set needs shape ({len(JOINTS)}, 2), got {points.shape}")
        self.points = points
        if visible is None:
            visible = np.ones(len(JOINTS), bool)
        self.visible = np.asarray(visible, bool).reshape(len(JOINTS))

    def __getitem__(self, name):
        i = JOINT_INDEX[name]
        return self.points[i], bool(self.visible[i])

    def __eq__(self, other):
        return (isinstance(other, LandmarkSet) and np.array_equal(self.points, other.points)
                and np.array_equal(self.visible, other.visible))

    def copy(self):
        return LandmarkSet(self.points.copy(), self.visible.copy())

    def flipped(self, width):
        """Mirror horizontally in an image ``width`` pixels wide and swap left/right joints."""
        pts = self.points.copy()
        pts[:, 0] = width - 1 - pts[:, 0]
        return LandmarkSet(pts[FLIP_PERMUTATION], self.visible[FLIP_PERMUTATION])

    def translated(self, dx, dy, width, height):
        """Shift by whole pixels; joints leaving the frame become invisible."""
        pts = self.points + [dx, dy]
        inside = (pts[:, 0] > -0.5) & (pts[:, 0] < width - 0.5) & (pts[:, 1] > -0.5) & (pts[:, 1] < height - 0.5)
        return LandmarkSet(pts, self.visible & inside)

    def __repr__(self):
        return f"LandmarkSet(visible={int(self.visible.sum())}/{len(JOINTS)})"


def render_landmark_heatmaps(landmarks, height, width, sigma=HEATMAP_SIGMA):
    """One channel per joint: a unit-peak Gaussian at the joint's nearest pixel, zero if invisible."""
    if height <= 0 or width <= 0:
        raise UsageError(f"heatmap size must be positive, got {height}x{width}")
    out = np.zeros((len(JOINTS), height, width), np.float32)
    ys = np.arange(height)[:, None]
    xs = np.arange(width)[None, :]
    for i, ((x, y), vis) in enumerate(zip(landmarks.points, landmarks.visible)):
        if not vis:
            continue
        cx, cy = np.round(x), np.round(y)
        out[i] = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma ** 2))
    return out


def format_landmarks(landmarks):
    lines = [f"{name} {x!r} {y!r} {int(v)}"
             for name, (x, y), v in zip(JOINTS, landmarks.points.tolist(), landmarks.visible)]
    return "\n".join(lines) + "\n"


def parse_landmarks(text, path=None):
    """Parse 16 lines of ``name x y visible`` in the fixed joint order."""
    rows = [(n, line.strip()) for n, line in enumerate(text.splitlines(), start=1) if line.strip()]
    if len(rows) != len(JOINTS):
        raise ParseError(f"expected {len(JOINTS)} landmark lines, got {len(rows)}",
                         rows[-1][0] if rows else 1, path)
    points = np.zeros((len(JOINTS), 2))
    visible = np.zeros(len(JOINTS), bool)
    for i, (lineno, line) in enumerate(rows):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"landmark line needs 'name x y visible', got {line!r}", lineno, path)
        name, x, y, v = parts
        if name != JOINTS[i]:
            raise ParseError(f"expected joint {JOINTS[i]!r}, got {name!r}", lineno, path)
        try:
            points[i] = float(x), float(y)
        except ValueError:
            raise ParseError(f"bad landmark coordinate in {line!r}", lineno, path) from None
        if v not in ("0", "1"):
            raise ParseError(f"visibility must be 0 or 1, got {v!r}", lineno, path)
        visible[i] = v == "1"
    return LandmarkSet(points, visible)


def save_landmarks(landmarks, path):
    Path(path).write_text(format_landmarks(landmarks))


def load_landmarks(path):
    path = Path(path)
    return parse_landmarks(path.read_text(), str(path))
