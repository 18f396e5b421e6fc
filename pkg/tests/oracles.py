"""Independent reference implementations used as test oracles.

Everything here is deliberately slow and literal: plain nested loops, no
shared code with the package.
"""

import math

import numpy as np


def naive_conv2d(x, w, b, stride=1, pad=0):
    c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for y in range(ho):
            for xx in range(wo):
                acc = float(b[o]) if b is not None else 0.0
                for c in range(c_in):
                    for i in range(k):
                        for j in range(k):
                            sy = y * stride + i - pad
                            sx = xx * stride + j - pad
                            if 0 <= sy < h and 0 <= sx < wd:
                                acc += float(x[c, sy, sx]) * float(w[o, c, i, j])
                out[o, y, xx] = acc
    return out


def naive_conv3d(x, w, b):
    """Same-size 3-D cross-correlation with padding (k-1)//2 per axis."""
    c_in, d, h, wd = x.shape
    c_out, _, kd, kh, kw = w.shape
    pd, ph, pw = (kd - 1) // 2, (kh - 1) // 2, (kw - 1) // 2
    out = np.zeros((c_out, d, h, wd))
    for o in range(c_out):
        for z in range(d):
            for y in range(h):
                for xx in range(wd):
                    acc = float(b[o]) if b is not None else 0.0
                    for c in range(c_in):
                        for i in range(kd):
                            for j in range(kh):
                                for m in range(kw):
                                    sz, sy, sx = z + i - pd, y + j - ph, xx + m - pw
                                    if 0 <= sz < d and 0 <= sy < h and 0 <= sx < wd:
                                        acc += float(x[c, sz, sy, sx]) * float(w[o, c, i, j, m])
                    out[o, z, y, xx] = acc
    return out


def scalar_bce(pred, target, clamp=1e-7):
    total = 0.0
    for p, t in zip(np.ravel(pred), np.ravel(target)):
        p = min(max(float(p), clamp), 1.0 - clamp)
        total -= float(t) * math.log(p) + (1.0 - float(t)) * math.log(1.0 - p)
    return total


def enumerate_iou(a, b):
    inter = union = 0
    for va, vb in zip(np.ravel(a), np.ravel(b)):
        inter += int(va and vb)
        union += int(va or vb)
    return 1.0 if union == 0 else inter / union


def ray_triangle(origin, direction, tri):
    """Moller-Trumbore; returns t or None."""
    v0, v1, v2 = (np.asarray(p, float) for p in tri)
    e1, e2 = v1 - v0, v2 - v0
    p = np.cross(direction, e2)
    det = float(np.dot(e1, p))
    if abs(det) < 1e-14:
        return None
    inv = 1.0 / det
    s = origin - v0
    u = float(np.dot(s, p)) * inv
    if u < 0 or u > 1:
        return None
    q = np.cross(s, e1)
    v = float(np.dot(direction, q)) * inv
    if v < 0 or u + v > 1:
        return None
    t = float(np.dot(e2, q)) * inv
    return t if t > 0 else None


def edges_of(triangles):
    counts = {}
    for a, b, c in np.asarray(triangles).tolist():
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            counts[key] = counts.get(key, 0) + 1
    return counts


def euler_characteristic(vertices, triangles):
    used = np.unique(np.asarray(triangles).reshape(-1))
    return len(used) - len(edges_of(triangles)) + len(triangles)


def mesh_area(vertices, triangles):
    v = np.asarray(vertices, float)
    t = np.asarray(triangles)
    if len(t) == 0:
        return 0.0
    cr = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    return 0.5 * float(np.linalg.norm(cr, axis=1).sum())


def signed_volume(vertices, triangles):
    v = np.asarray(vertices, float)
    t = np.asarray(triangles)
    return float(np.einsum("ij,ij->i", v[t[:, 0]], np.cross(v[t[:, 1]], v[t[:, 2]])).sum() / 6.0)


def surface_distance_lower_bound(vertices, triangles, points, spacing=0.05):
    """Lower bound on point-to-surface distance from a dense barycentric sampling.

    Every surface point lies within ``cover`` of some sample, so
    ``dist(sample) - cover`` never exceeds the true distance.
    """
    from scipy.spatial import cKDTree

    v = np.asarray(vertices, float)
    samples = []
    cover = 0.0
    for a, b, c in np.asarray(triangles).tolist():
        pa, pb, pc = v[a], v[b], v[c]
        longest = max(np.linalg.norm(pb - pa), np.linalg.norm(pc - pb), np.linalg.norm(pa - pc))
        n = max(1, int(np.ceil(longest / spacing)))
        cover = max(cover, longest / n)
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        u, w = i[keep] / n, j[keep] / n
        samples.append(pa + u[:, None] * (pb - pa) + w[:, None] * (pc - pa))
    dist, _ = cKDTree(np.concatenate(samples)).query(np.asarray(points, float))
    return dist - cover
