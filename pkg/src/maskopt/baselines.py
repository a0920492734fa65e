"""Fixed, non-learned undersampling mask families used for comparison.

Five families: an isotropic Gaussian density, Poisson-disc placement with
an optional fully-sampled center, full phase-encoding lines (dense center
band plus random outer lines), a contiguous centered block of lines, and
an evenly spaced point lattice.  All masks are DC-centered and
deterministic under their seed; the point families hit the target count
exactly, the line families to within one line.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import SamplingMask
from .sampling import _run_placement, spacing_from_density

_FAMILIES = ("gaussian", "poisson", "line1d", "center_block", "uniform_grid")

# default fully-sampled center sizes, as fractions of the grid side
_POISSON_CENTER = 0.10   # radius of the central disc
_LINE_CENTER = 0.08      # width of the central column band

_RELAX_FACTOR = 0.9
_MAX_ROUNDS = 80


@dataclass(frozen=True)
class BaselineSpec:
    """Parameters for one baseline mask.

    sigma applies to the gaussian family (None: quarter of the grid side),
    min_dist to poisson (None: derived from the rate), center_fraction to
    poisson (disc radius fraction) and line1d (band width fraction).
    """

    family: str
    m: int
    n: int
    target_rate: float
    sigma: float | None = None
    min_dist: float | None = None
    center_fraction: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {_FAMILIES}")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"grid dims must be positive, got {self.m}x{self.n}")
        if not 0.0 < self.target_rate <= 1.0:
            raise ValueError(f"target_rate must be in (0, 1], got {self.target_rate}")
        for name in ("sigma", "min_dist", "center_fraction"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def _point_budget(spec):
    return int(round(spec.target_rate * spec.m * spec.n))


def _center_distances(m, n):
    yy, xx = np.mgrid[0:m, 0:n]
    return np.hypot(yy - m // 2, xx - n // 2)


def gaussian_mask(spec: BaselineSpec) -> SamplingMask:
    """Variable-density mask from a DC-centered isotropic Gaussian.

    Exactly round(rate * m * n) points are drawn without replacement with
    probability proportional to the density, so the realized rate matches
    the target as closely as the grid allows (a plain Bernoulli draw would
    miss the 0.1% rate bound at small grid sizes).
    """
    m, n = spec.m, spec.n
    sigma = spec.sigma if spec.sigma is not None else min(m, n) / 4.0
    count = _point_budget(spec)
    d = _center_distances(m, n)
    if math.isinf(sigma):
        weights = np.ones(m * n)
    else:
        weights = np.exp(-0.5 * (d / sigma) ** 2).ravel()
    support = int(np.count_nonzero(weights))
    if support < count:
        raise ValueError(
            f"rate {spec.target_rate} infeasible for sigma {sigma}: density has only "
            f"{support} nonzero cells for {count} points"
        )
    rng = np.random.default_rng(spec.seed)
    picks = rng.choice(m * n, size=count, replace=False, p=weights / weights.sum())
    bits = np.zeros(m * n, dtype=np.uint8)
    bits[picks] = 1
    return SamplingMask(bits.reshape(m, n))


def poisson_mask(spec: BaselineSpec) -> SamplingMask:
    """Poisson-disc mask: fully-sampled central disc, dart-thrown outside.

    The minimum distance, unless given, derives from the mean density of
    the outer region; it relaxes by 0.9 whenever placement jams, so the
    exact point budget is always met.  center_fraction 0 disables the disc.
    """
    m, n = spec.m, spec.n
    count = _point_budget(spec)
    frac = spec.center_fraction if spec.center_fraction is not None else _POISSON_CENTER
    radius = frac * min(m, n)
    occ = (_center_distances(m, n) <= radius).astype(np.uint8) if radius >= 1.0 \
        else np.zeros((m, n), dtype=np.uint8)
    center_count = int(occ.sum())
    if center_count > count:
        raise ValueError(
            f"rate {spec.target_rate} infeasible: fully-sampled center already holds "
            f"{center_count} of {count} points"
        )
    outer = count - center_count
    if spec.min_dist is not None:
        r = spec.min_dist
    else:
        free = m * n - center_count
        r = spacing_from_density(max(outer / max(free, 1), 1e-12))
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
    ys = xs = np.zeros(0, dtype=np.int64)
    for _ in range(_MAX_ROUNDS):
        ys, xs, ok = _run_placement(rng, m, n, outer, r, occupied=occ.copy())
        if ok:
            break
        r *= _RELAX_FACTOR
    else:
        raise RuntimeError("poisson placement failed to converge")
    bits = occ.copy()
    bits[ys, xs] = 1
    return SamplingMask(bits)


def line1d_mask(spec: BaselineSpec) -> SamplingMask:
    """Full phase-encoding columns: dense center band plus random outer lines."""
    m, n = spec.m, spec.n
    lines = int(round(spec.target_rate * n))
    frac = spec.center_fraction if spec.center_fraction is not None else _LINE_CENTER
    band = min(int(round(frac * n)), lines)
    start = n // 2 - band // 2
    cols = list(range(start, start + band))
    outer = [c for c in range(n) if c < start or c >= start + band]
    extra = lines - band
    if extra > 0:
        picks = np.random.default_rng(spec.seed).choice(len(outer), size=extra, replace=False)
        cols.extend(outer[i] for i in picks)
    bits = np.zeros((m, n), dtype=np.uint8)
    bits[:, cols] = 1
    return SamplingMask(bits)


def center_block_mask(spec: BaselineSpec) -> SamplingMask:
    """Contiguous centered block of full columns."""
    m, n = spec.m, spec.n
    lines = int(round(spec.target_rate * n))
    start = n // 2 - lines // 2
    bits = np.zeros((m, n), dtype=np.uint8)
    bits[:, max(start, 0):min(start + lines, n)] = 1
    return SamplingMask(bits)


def uniform_grid_mask(spec: BaselineSpec) -> SamplingMask:
    """Evenly spaced point lattice covering low and high frequencies alike.

    The lattice is anchored on the DC cell so the image mean always
    survives undersampling regardless of how the stride rounds."""
    m, n = spec.m, spec.n
    k_r = max(int(round(m * math.sqrt(spec.target_rate))), 1)
    k_c = max(int(round(n * math.sqrt(spec.target_rate))), 1)
    rows = (m // 2 + np.round((np.arange(k_r) - k_r // 2) * (m / k_r))
            .astype(np.int64)) % m
    cols = (n // 2 + np.round((np.arange(k_c) - k_c // 2) * (n / k_c))
            .astype(np.int64)) % n
    bits = np.zeros((m, n), dtype=np.uint8)
    bits[np.ix_(np.unique(rows), np.unique(cols))] = 1
    return SamplingMask(bits)


_GENERATORS = {
    "gaussian": gaussian_mask,
    "poisson": poisson_mask,
    "line1d": line1d_mask,
    "center_block": center_block_mask,
    "uniform_grid": uniform_grid_mask,
}


def baseline_mask(spec: BaselineSpec) -> SamplingMask:
    """Dispatch to the generator for spec.family."""
    return _GENERATORS[spec.family](spec)
