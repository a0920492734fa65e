"""Core 2D grid types and their file formats.

All numeric data is float64.  Complex-valued k-space is stored as two real
planes (real/imaginary), never as a complex dtype, so every downstream
operation works on plain real arrays.  Instances are immutable after
construction: the wrapped arrays are defensive copies with the writeable
flag cleared, safe to share across threads.
"""

import struct
from dataclasses import dataclass

import numpy as np

_GRID_MAGIC = b"GRD1"  # single real plane
_CPLX_MAGIC = b"CPX1"  # real plane followed by imaginary plane


def _as_plane(a, name):
    """Validate and freeze one m-by-n float64 plane."""
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ComplexGrid:
    """An m-by-n complex grid stored as separate real and imaginary planes."""

    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        real = _as_plane(self.real, "real")
        imag = _as_plane(self.imag, "imag")
        if real.shape != imag.shape:
            raise ValueError(f"plane shapes differ: {real.shape} vs {imag.shape}")
        object.__setattr__(self, "real", real)
        object.__setattr__(self, "imag", imag)

    @property
    def m(self):
        return self.real.shape[0]

    @property
    def n(self):
        return self.real.shape[1]

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=np.complex128)
        return cls(z.real.copy(), z.imag.copy())

    def to_complex(self):
        """Complex128 view used internally for matrix arithmetic."""
        return self.real + 1j * self.imag


@dataclass(frozen=True)
class TwoChannelGrid:
    """An m-by-n grid with two real channels (channel0, channel1)."""

    channel0: np.ndarray
    channel1: np.ndarray

    def __post_init__(self):
        c0 = _as_plane(self.channel0, "channel0")
        c1 = _as_plane(self.channel1, "channel1")
        if c0.shape != c1.shape:
            raise ValueError(f"channel shapes differ: {c0.shape} vs {c1.shape}")
        object.__setattr__(self, "channel0", c0)
        object.__setattr__(self, "channel1", c1)

    @property
    def m(self):
        return self.channel0.shape[0]

    @property
    def n(self):
        return self.channel0.shape[1]


@dataclass(frozen=True)
class RealImage:
    """A real m-by-n image.

    Ingested data is normalized to [0, 1]; intermediate network outputs may
    leave that range, so only finiteness is enforced here.
    """

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_plane(self.pixels, "pixels"))

    @property
    def m(self):
        return self.pixels.shape[0]

    @property
    def n(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class SamplingMask:
    """A binary m-by-n undersampling mask; 1 marks an acquired point."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"bits must be a non-empty 2D array, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask entries must be exactly 0 or 1")
        arr = arr.astype(np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def m(self):
        return self.bits.shape[0]

    @property
    def n(self):
        return self.bits.shape[1]

    @property
    def rate(self):
        return rate_of(self)


@dataclass(frozen=True)
class ProbabilityMatrix:
    """Per-point Bernoulli acquisition probabilities in [0, 1]."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _as_plane(self.probs, "probs")
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", probs)

    @property
    def m(self):
        return self.probs.shape[0]

    @property
    def n(self):
        return self.probs.shape[1]

    @property
    def mean(self):
        return float(self.probs.mean())


def rate_of(mask: SamplingMask) -> float:
    """Fraction of acquired points: (number of ones) / (m * n)."""
    return float(np.count_nonzero(mask.bits)) / (mask.m * mask.n)


def log_magnitude_image(grid: ComplexGrid) -> RealImage:
    """Normalized log(1 + |grid|) image for writing k-space previews.

    The brightest pixel maps to exactly 1.0; an all-zero grid maps to an
    all-zero image.
    """
    mag = np.log1p(np.hypot(grid.real, grid.imag))
    peak = mag.max()
    if peak > 0.0:
        mag /= peak
    return RealImage(mag)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def save_mask(path, mask: SamplingMask):
    """Write the text mask format: header ``mask m n rate`` + '0'/'1' rows."""
    with open(path, "w") as fh:
        fh.write(f"mask {mask.m} {mask.n} {mask.rate:.6f}\n")
        for row in mask.bits:
            fh.write("".join("1" if b else "0" for b in row) + "\n")


def load_mask(path) -> SamplingMask:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "mask":
            raise ValueError(f"{path}: not a mask file")
        m, n, rate = int(header[1]), int(header[2]), float(header[3])
        rows = []
        for _ in range(m):
            line = fh.readline().strip()
            if len(line) != n or set(line) - {"0", "1"}:
                raise ValueError(f"{path}: malformed mask row {line!r}")
            rows.append([int(c) for c in line])
    mask = SamplingMask(np.array(rows, dtype=np.uint8))
    if abs(mask.rate - rate) > 5e-6:
        raise ValueError(f"{path}: header rate {rate} does not match bits ({mask.rate:.6f})")
    return mask


def save_probability(path, p: ProbabilityMatrix):
    """Write the text probability format with full float64 precision."""
    with open(path, "w") as fh:
        fh.write(f"prob {p.m} {p.n}\n")
        for row in p.probs:
            fh.write(" ".join(f"{v:.17e}" for v in row) + "\n")


def load_probability(path) -> ProbabilityMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "prob":
            raise ValueError(f"{path}: not a probability file")
        m, n = int(header[1]), int(header[2])
        rows = [[float(v) for v in fh.readline().split()] for _ in range(m)]
    arr = np.array(rows, dtype=np.float64)
    if arr.shape != (m, n):
        raise ValueError(f"{path}: expected {m}x{n} values, got {arr.shape}")
    return ProbabilityMatrix(arr)


def _write_planes(path, magic, planes):
    m, n = planes[0].shape
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<II", m, n))
        for plane in planes:
            fh.write(np.ascontiguousarray(plane, dtype="<f8").tobytes())


def _read_planes(path, magic, count):
    with open(path, "rb") as fh:
        tag = fh.read(4)
        if tag != magic:
            raise ValueError(f"{path}: bad magic {tag!r}, expected {magic!r}")
        m, n = struct.unpack("<II", fh.read(8))
        planes = []
        for _ in range(count):
            buf = fh.read(8 * m * n)
            if len(buf) != 8 * m * n:
                raise ValueError(f"{path}: truncated data")
            planes.append(np.frombuffer(buf, dtype="<f8").reshape(m, n).astype(np.float64))
    return planes


def save_image(path, image: RealImage):
    """Binary little-endian image: magic, m, n (uint32), float64 pixels."""
    _write_planes(path, _GRID_MAGIC, [image.pixels])


def load_image(path) -> RealImage:
    return RealImage(_read_planes(path, _GRID_MAGIC, 1)[0])


def save_complex(path, grid: ComplexGrid):
    """Binary little-endian complex grid: magic, m, n, then two planes."""
    _write_planes(path, _CPLX_MAGIC, [grid.real, grid.imag])


def load_complex(path) -> ComplexGrid:
    real, imag = _read_planes(path, _CPLX_MAGIC, 2)
    return ComplexGrid(real, imag)


def save_pgm(path, image):
    """8-bit binary PGM preview of a RealImage or plain 2D array; pixels are
    clipped to [0, 1] then scaled."""
    px = image.pixels if isinstance(image, RealImage) else np.asarray(image, dtype=np.float64)
    if px.ndim != 2:
        raise ValueError(f"expected a 2-d image, got shape {px.shape}")
    data = np.round(np.clip(px, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{px.shape[1]} {px.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())


def load_pgm(path) -> np.ndarray:
    """Read an 8-bit PGM (binary P5 or ASCII P2) as a [0, 1] float array."""
    with open(path, "rb") as fh:
        content = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(content) and content[pos : pos + 1].isspace():
            pos += 1
        if content[pos : pos + 1] == b"#":
            while pos < len(content) and content[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(content) and not content[pos : pos + 1].isspace():
            pos += 1
        fields.append(content[start:pos])
    magic, n, m, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1
    if magic == b"P5":
        data = np.frombuffer(content, dtype=np.uint8, count=m * n, offset=pos)
    elif magic == b"P2":
        data = np.array(content[pos:].split(), dtype=np.uint8)[: m * n]
    else:
        raise ValueError(f"{path}: unsupported PGM magic {magic!r}")
    return data.reshape(m, n).astype(np.float64) / float(maxval)
