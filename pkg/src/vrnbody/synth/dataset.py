"""Synthetic dataset generation and the manifest that indexes it.

Each sample index gets its own seed derived from ``(seed, index)``, so any
sample can be regenerated alone and parallel generation writes the same
bytes as sequential generation.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..encoding.landmarks import load_landmarks, save_landmarks
from ..encoding.rasterio import load_image, load_mask, save_image, save_mask
from ..encoding.sample import Sample
from ..errors import ParseError, UsageError
from ..geometry.grid import load_grid, save_grid
from ..geometry.voxelize import fit_transform, voxelize
from .body import skeleton_to_mesh
from .render import render
from .skeleton import base_shapes, default_limits, sample_pose

SCALE_RANGE = (0.85, 1.0)
SEGMENTS = 16
MANIFEST_NAME = "manifest.txt"
MANIFEST_HEADER = "# index seed image landmarks mask volume"


def sample_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def scaled_transform(transform, s, dims):
    """Compose a world-to-grid transform with scaling by ``s`` about the volume center."""
    scale, translation = transform
    center = np.asarray(dims, np.float64) / 2
    return scale * s, translation * s + (1 - s) * center


def generate_sample(seed, dims, scale_range=SCALE_RANGE, limits=None, segments=SEGMENTS):
    """Build one aligned sample from its own seed; returns ``(sample, skeleton)``."""
    rng = np.random.default_rng(seed)
    shapes = base_shapes()
    shape = shapes[int(rng.integers(len(shapes)))]
    skeleton = sample_pose(rng, limits if limits is not None else default_limits(), shape)
    mesh, parts = skeleton_to_mesh(skeleton, segments, with_parts=True)
    s = float(rng.uniform(*scale_range))
    transform = scaled_transform(fit_transform(mesh, dims), s, dims)
    target = voxelize(mesh, dims, transform, keep_thin=True)
    w, h, _ = dims
    image, landmarks, mask = render(mesh, skeleton, h, w, rng=rng, transform=transform, parts=parts)
    return Sample(image, landmarks, mask, target), skeleton


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    seed: int
    image: str
    landmarks: str
    mask: str
    volume: str

    def format(self):
        return f"{self.index} {self.seed} {self.image} {self.landmarks} {self.mask} {self.volume}"


class Manifest:
    def __init__(self, entries, root="."):
        self.entries = list(entries)
        self.root = Path(root)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def path(self, relative):
        return self.root / relative

    def load_sample(self, entry):
        return Sample(
            load_image(self.path(entry.image)),
            load_landmarks(self.path(entry.landmarks)),
            load_mask(self.path(entry.mask)),
            load_grid(self.path(entry.volume)),
        )

    def subset(self, indices):
        return Manifest([self.entries[i] for i in indices], self.root)

    def format(self):
        return "\n".join([MANIFEST_HEADER] + [e.format() for e in self.entries]) + "\n"

    def save(self, path):
        Path(path).write_text(self.format())

    @classmethod
    def parse(cls, text, root=".", path=None):
        entries = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"manifest line needs 6 fields, got {len(parts)}", lineno, path)
            try:
                index, seed = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError("manifest index and seed must be integers", lineno, path) from None
            entries.append(ManifestEntry(index, seed, *parts[2:]))
        return cls(entries, root)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        return cls.parse(path.read_text(), path.parent, str(path))


def _entry_paths(index):
    stem = f"{index:05d}"
    return (f"images/{stem}.ppm", f"landmarks/{stem}.txt", f"masks/{stem}.pgm", f"volumes/{stem}.voxl")


def _write_sample(job):
    out_dir, index, seed, dims, scale_range = job
    sample, _ = generate_sample(seed, dims, scale_range)
    image, landmarks, mask, volume = _entry_paths(index)
    save_image(sample.image, out_dir / image)
    save_landmarks(sample.landmarks, out_dir / landmarks)
    save_mask(sample.mask, out_dir / mask)
    save_grid(sample.target, out_dir / volume)
    return ManifestEntry(index, seed, image, landmarks, mask, volume)


def generate_dataset(n, seed, dims, out_dir, scale_range=SCALE_RANGE, workers=1):
    """Write ``n`` samples and ``manifest.txt`` under ``out_dir``; returns the Manifest."""
    if n < 1:
        raise UsageError(f"dataset needs at least one sample, got {n}")
    out_dir = Path(out_dir)
    for sub in ("images", "landmarks", "masks", "volumes"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    dims = tuple(int(d) for d in dims)
    jobs = [(out_dir, i, sample_seed(seed, i), dims, tuple(scale_range)) for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            entries = list(pool.map(_write_sample, jobs, chunksize=8))
    else:
        entries = [_write_sample(job) for job in jobs]
    manifest = Manifest(entries, out_dir)
    manifest.save(out_dir / MANIFEST_NAME)
    return manifest


def dataset_digest(manifest):
    """SHA-256 over the manifest text and every referenced file, in manifest order."""
    h = hashlib.sha256(manifest.format().encode())
    for entry in manifest:
        for rel in (entry.image, entry.landmarks, entry.mask, entry.volume):
            h.update(manifest.path(rel).read_bytes())
    return h.hexdigest()
