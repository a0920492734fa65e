"""Dataset construction: synthetic phantoms, normalization, augmentation,
and image to k-space pairing.

Items are 2D slices treated independently.  External data enters as PGM or
binary image files listed in a manifest; everything else is synthesized.
"""

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ComplexGrid, RealImage, load_image, load_pgm, save_image
from .fourier import forward_2d


@dataclass(frozen=True)
class AugmentSpec:
    do_center_translation: bool = True
    rotations_per_image: int = 8
    rotation_seed: int = 0

    def __post_init__(self):
        if self.rotations_per_image < 0:
            raise ValueError("rotations_per_image must be >= 0")


@dataclass
class Dataset:
    """Ordered image set with paired fully-sampled k-space."""

    name: str
    split: str
    images: list = field(default_factory=list)
    kspace: list = field(default_factory=list)
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        if self.split not in ("train", "val", "test"):
            raise ValueError(f"split must be train/val/test, got {self.split!r}")
        if not len(self.images) == len(self.kspace) == len(self.provenance):
            raise ValueError("images, kspace, and provenance must have equal length")

    def __len__(self):
        return len(self.images)

    def add(self, image: RealImage, origin: str):
        self.images.append(image)
        self.kspace.append(to_kspace(image))
        self.provenance.append(origin)


def normalize(raw) -> RealImage:
    """Affine map of the pixel range onto [0, 1]; constant images become zero."""
    arr = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite pixels")
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        return RealImage(np.zeros_like(arr))
    return RealImage((arr - lo) / (hi - lo))


_FOREGROUND_THRESHOLD = 0.05


def center_translate(image: RealImage) -> RealImage:
    """Integer shift placing the foreground intensity centroid at the grid
    center; vacated pixels are zero.  Empty foreground warns and returns the
    image unchanged."""
    px = image.pixels
    m, n = px.shape
    fg = px > _FOREGROUND_THRESHOLD
    total = px[fg].sum()
    if total <= 0.0:
        warnings.warn("center_translate: no foreground above threshold; returning input")
        return image
    yy, xx = np.nonzero(fg)
    cy = float((px[yy, xx] * yy).sum() / total)
    cx = float((px[yy, xx] * xx).sum() / total)
    dy = m // 2 - int(np.round(cy))
    dx = n // 2 - int(np.round(cx))
    out = np.zeros_like(px)
    src_y = slice(max(0, -dy), min(m, m - dy))
    src_x = slice(max(0, -dx), min(n, n - dx))
    dst_y = slice(max(0, dy), min(m, m + dy))
    dst_x = slice(max(0, dx), min(n, n + dx))
    out[dst_y, dst_x] = px[src_y, src_x]
    return RealImage(out)


def _bilinear_sample(px, sy, sx, fill=0.0):
    """Sample px at float coords (sy, sx) with bilinear weights; out-of-range
    source locations take the fill value."""
    m, n = px.shape
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = sy - y0
    fx = sx - x0
    out = np.zeros(sy.shape)
    for oy, wy in ((0, 1.0 - fy), (1, fy)):
        for ox, wx in ((0, 1.0 - fx), (1, fx)):
            yy = y0 + oy
            xx = x0 + ox
            valid = (yy >= 0) & (yy < m) & (xx >= 0) & (xx < n)
            vals = np.where(valid, px[np.clip(yy, 0, m - 1), np.clip(xx, 0, n - 1)], fill)
            out += wy * wx * vals
    return out


def rotate_image(image: RealImage, angle_deg: float) -> RealImage:
    """Bilinear rotation about the grid center (m//2, n//2), zero fill."""
    px = image.pixels
    m, n = px.shape
    cy, cx = m // 2, n // 2
    th = math.radians(angle_deg)
    c, s = math.cos(th), math.sin(th)
    yy, xx = np.mgrid[0:m, 0:n].astype(np.float64)
    dy = yy - cy
    dx = xx - cx
    sy = cy + c * dy - s * dx
    sx = cx + s * dy + c * dx
    return RealImage(np.clip(_bilinear_sample(px, sy, sx), 0.0, 1.0))


def rotate_random(image: RealImage, spec: AugmentSpec):
    """Seeded uniform rotations in [0, 360); returns rotations_per_image images."""
    rng = np.random.default_rng(spec.rotation_seed)
    angles = rng.uniform(0.0, 360.0, size=spec.rotations_per_image)
    return [rotate_image(image, a) for a in angles]


def to_kspace(image: RealImage) -> ComplexGrid:
    """Fully-sampled k-space of a real image (imaginary plane zero)."""
    px = image.pixels
    return forward_2d(ComplexGrid(px, np.zeros_like(px)))


def resize(image: RealImage, m_t: int, n_t: int) -> RealImage:
    """Bilinear resample to m_t x n_t under the half-pixel convention."""
    if m_t < 1 or n_t < 1:
        raise ValueError(f"target dims must be positive, got {m_t}x{n_t}")
    px = image.pixels
    m, n = px.shape
    if (m_t, n_t) == (m, n):
        return image
    ii, jj = np.mgrid[0:m_t, 0:n_t].astype(np.float64)
    sy = np.clip((ii + 0.5) * (m / m_t) - 0.5, 0.0, m - 1.0)
    sx = np.clip((jj + 0.5) * (n / n_t) - 0.5, 0.0, n - 1.0)
    return RealImage(np.clip(_bilinear_sample(px, sy, sx), 0.0, 1.0))


def _add_ellipse(px, cy, cx, a, b, phi, value):
    """Add `value` inside a rotated ellipse; mutates px."""
    m, n = px.shape
    yy, xx = np.mgrid[0:m, 0:n].astype(np.float64)
    dy = yy - cy
    dx = xx - cx
    c, s = math.cos(phi), math.sin(phi)
    u = (dx * c + dy * s) / a
    v = (-dx * s + dy * c) / b
    px[u * u + v * v <= 1.0] += value


def make_phantom(size: int, rng) -> RealImage:
    """One head-phantom-style image: bright elliptical rim, gray interior,
    and a handful of interior blobs.  Values clipped to [0, 1]; support kept
    away from the grid border."""
    px = np.zeros((size, size))
    cy = cx = size // 2
    a0 = size * rng.uniform(0.36, 0.44)
    b0 = size * rng.uniform(0.30, 0.40)
    phi0 = rng.uniform(0.0, math.pi)
    _add_ellipse(px, cy, cx, a0, b0, phi0, 0.85)
    _add_ellipse(px, cy, cx, 0.90 * a0, 0.90 * b0, phi0, -0.45)
    for _ in range(int(rng.integers(4, 10))):
        rad = rng.uniform(0.0, 0.55) * min(a0, b0)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        _add_ellipse(
            px,
            cy + rad * math.sin(ang),
            cx + rad * math.cos(ang),
            size * rng.uniform(0.04, 0.16),
            size * rng.uniform(0.04, 0.16),
            rng.uniform(0.0, math.pi),
            rng.uniform(-0.35, 0.5),
        )
    return RealImage(np.clip(px, 0.0, 1.0))


def make_phantom_set(count: int, size: int, seed: int, name="phantom", split="test") -> Dataset:
    """Deterministic synthetic dataset of `count` phantoms of side `size`."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    ds = Dataset(name=name, split=split)
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        ds.add(make_phantom(size, rng), f"phantom:{seed}:{i}")
    return ds


def augment_dataset(ds: Dataset, spec: AugmentSpec) -> Dataset:
    """Optionally center each item, then append seeded rotated copies.

    Output order: all (possibly centered) originals, then rotations grouped
    per item.  Image dimensions never change.
    """
    out = Dataset(name=ds.name, split=ds.split)
    base = []
    for img, origin in zip(ds.images, ds.provenance):
        img2 = center_translate(img) if spec.do_center_translation else img
        base.append((img2, origin))
        out.add(img2, origin)
    for i, (img2, origin) in enumerate(base):
        item_spec = AugmentSpec(
            do_center_translation=spec.do_center_translation,
            rotations_per_image=spec.rotations_per_image,
            rotation_seed=int(np.random.SeedSequence([spec.rotation_seed, i]).generate_state(1)[0]),
        )
        for k, rot in enumerate(rotate_random(img2, item_spec)):
            out.add(rot, f"{origin}|rot{k}")
    return out


def load_dataset(manifest_path: str, name="external", split="test") -> Dataset:
    """Read a dataset from a manifest of `split path` lines.

    Paths are relative to the manifest's directory; `.pgm` files load as
    8/16-bit grayscale, anything else as the binary image format.  Only
    lines matching `split` are loaded; pixel values are normalized to [0,1]
    when they stray outside.
    """
    root = os.path.dirname(os.path.abspath(manifest_path))
    ds = Dataset(name=name, split=split)
    with open(manifest_path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            if len(parts) != 2 or parts[0] not in ("train", "val", "test"):
                raise ValueError(f"{manifest_path}:{lineno}: expected '<split> <path>'")
            tag, rel = parts
            if tag != split:
                continue
            path = os.path.join(root, rel)
            if rel.lower().endswith(".pgm"):
                arr = load_pgm(path)
            else:
                arr = load_image(path).pixels
            if arr.min() < 0.0 or arr.max() > 1.0:
                img = normalize(arr)
            else:
                img = RealImage(arr)
            ds.add(img, rel)
    return ds


def save_dataset(ds: Dataset, out_dir: str) -> str:
    """Write items as binary images plus a manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        for i, img in enumerate(ds.images):
            rel = f"item_{i:04d}.img"
            save_image(os.path.join(out_dir, rel), img)
            fh.write(f"{ds.split} {rel}\n")
    return manifest
