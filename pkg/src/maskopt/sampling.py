"""The probabilistic undersampling layer.

Covers the forward data path (channel split, Hadamard masking), Bernoulli
mask draws from a trainable probability matrix, projection of that matrix
onto its feasible set (entries in [p_min, 1], mean pinned to the target
rate), constrained mask synthesis with near-uniform point spacing, and the
straight-through gradient estimator used in backpropagation.

Masks and probability matrices use the DC-centered convention; see
`maskopt.fourier.center_shift_inverse` for moving to transform order.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import ComplexGrid, ProbabilityMatrix, SamplingMask, TwoChannelGrid

# Quadratic relating mean point density to the minimal spacing of a
# near-uniform layout: density(r) = (sqrt(2)/10) r^2 - (sqrt(2)/2) r + 1.
_QUAD_A = math.sqrt(2.0) / 10.0
_QUAD_B = -math.sqrt(2.0) / 2.0

#: Spacing at the vertex of the quadratic; densities below the vertex value
#: (~0.1161) have no real root and clamp here.
SPACING_MAX = 2.5

_PLACEMENT_ATTEMPTS = 10_000  # consecutive rejections before a run gives up
_RELAX_FACTOR = 0.9
_NN_RETRIES = 12    # fresh placements before relaxing on a spacing-band miss
_MAX_ROUNDS = 80
_DRAW_CHUNK = 1024


@dataclass(frozen=True)
class ConstraintConfig:
    """Settings for probability projection and constrained mask synthesis."""

    target_rate: float
    epsilon: float = 0.001
    region_size: int = 10
    p_min: float = 0.01
    p_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.target_rate <= 1.0:
            raise ValueError(f"target_rate must be in (0, 1], got {self.target_rate}")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.region_size < 1:
            raise ValueError("region_size must be >= 1")
        if not 0.0 < self.p_min < self.p_max:
            raise ValueError(f"need 0 < p_min < p_max, got {self.p_min}, {self.p_max}")
        if self.p_max != 1.0:
            raise ValueError("p_max is fixed at 1.0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class RegionReport:
    """Placement diagnostics for one region of a constrained mask."""

    row: int
    col: int
    p_mean: float
    count: int
    min_dist: float       # nan when count < 2
    max_nn_dist: float    # nan when count < 2
    r0: float             # spacing actually used, after any relaxation


def split_channels(k: ComplexGrid) -> TwoChannelGrid:
    """Real and imaginary planes of k as two channels."""
    return TwoChannelGrid(k.real, k.imag)


def merge_channels(x: TwoChannelGrid) -> ComplexGrid:
    return ComplexGrid(x.channel0, x.channel1)


def apply_mask(x_in: TwoChannelGrid, m_u: SamplingMask) -> TwoChannelGrid:
    """Hadamard product of both channels with the mask; dropped points become 0."""
    if (x_in.m, x_in.n) != (m_u.m, m_u.n):
        raise ValueError(
            f"mask shape {(m_u.m, m_u.n)} does not match data shape {(x_in.m, x_in.n)}"
        )
    mb = m_u.bits.astype(np.float64)
    return TwoChannelGrid(x_in.channel0 * mb, x_in.channel1 * mb)


def sample_bernoulli(p_u: ProbabilityMatrix, seed: int) -> SamplingMask:
    """Independent Bernoulli draw of each bit with its own probability."""
    rng = np.random.default_rng(seed)
    bits = rng.random(p_u.probs.shape) < p_u.probs
    return SamplingMask(bits.astype(np.uint8))


def project_probabilities(p_u, cfg: ConstraintConfig) -> ProbabilityMatrix:
    """Clamp entries to [p_min, 1] and pin the mean to the target rate.

    The mean is corrected by a uniform additive shift followed by
    re-clamping, iterated at most 50 times; this preserves the relative
    ordering of the probabilities.  Already-feasible inputs pass through
    unchanged.  Accepts a raw array or a ProbabilityMatrix.
    """
    if cfg.target_rate < cfg.p_min:
        raise ValueError(
            f"target rate {cfg.target_rate} is below the probability floor {cfg.p_min}"
        )
    arr = p_u.probs if isinstance(p_u, ProbabilityMatrix) else np.asarray(p_u, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("probabilities contain non-finite entries")
    arr = np.clip(arr, cfg.p_min, cfg.p_max)
    for _ in range(50):
        delta = cfg.target_rate - arr.mean()
        if abs(delta) < 1e-14:
            break
        arr = np.clip(arr + delta, cfg.p_min, cfg.p_max)
    return ProbabilityMatrix(arr)


def density_from_spacing(r0: float) -> float:
    """Mean point density of a near-uniform layout with minimal spacing r0."""
    return _QUAD_A * r0 * r0 + _QUAD_B * r0 + 1.0


def spacing_from_density(p_bar: float) -> float:
    """Minimal point spacing for mean density p_bar.

    Inverts `density_from_spacing` on its decreasing branch r0 in [0, 2.5];
    densities below the vertex value (~0.1161), where the quadratic has no
    real root, clamp to SPACING_MAX.
    """
    if p_bar <= 0.0:
        raise ValueError(f"density must be positive, got {p_bar}")
    if p_bar > 1.0:
        if p_bar > 1.0 + 1e-9:
            raise ValueError(f"density must be <= 1, got {p_bar}")
        p_bar = 1.0
    disc = _QUAD_B * _QUAD_B - 4.0 * _QUAD_A * (1.0 - p_bar)
    if disc <= 0.0:
        return SPACING_MAX
    r0 = (-_QUAD_B - math.sqrt(disc)) / (2.0 * _QUAD_A)
    return min(r0, SPACING_MAX)


def _cell_ranges(size, region):
    return [(s, min(s + region, size)) for s in range(0, size, region)]


def _run_placement(rng, h, w, count, min_dist, occupied=None):
    """One dart-throwing pass; draws are consumed in fixed-size chunks so the
    generator state evolves identically in both kernel backends.

    `occupied` optionally pre-marks cells that repel new points but do not
    count toward `count` (used for fully-sampled center regions).
    """
    ys = np.zeros(count, dtype=np.int64)
    xs = np.zeros(count, dtype=np.int64)
    if count == 0:
        return ys, xs, True
    occ = np.zeros((h, w), dtype=np.uint8) if occupied is None else occupied
    placed, since = 0, 0
    while True:
        draws = rng.integers(0, h * w, size=_DRAW_CHUNK, dtype=np.int64)
        placed, since, status = _kernels.place_points(
            h, w, ys, xs, placed, count, min_dist, occ, draws, since, _PLACEMENT_ATTEMPTS
        )
        if status == 1:
            return ys, xs, True
        if status == -1:
            return ys[:placed], xs[:placed], False


def _pair_stats(ys, xs):
    """(min pairwise distance, max nearest-neighbor distance) for >= 2 points."""
    pts = np.stack([ys, xs], axis=1).astype(np.float64)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    nn = d.min(axis=1)
    return float(nn.min()), float(nn.max())


def _place_cell(seed, h, w, count, r0):
    """Place `count` points with spacing >= r, nearest neighbors <= 2r + 1.

    Retries fresh placements on a spacing-band miss and relaxes r by 0.9
    when the cell jams; below r = 1 any set of distinct pixels is valid, so
    termination is guaranteed for count <= h*w.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    r = r0
    best = None
    nn_misses = 0
    for _ in range(_MAX_ROUNDS):
        ys, xs, ok = _run_placement(rng, h, w, count, r)
        if not ok:
            r *= _RELAX_FACTOR
            nn_misses = 0
            continue
        if count < 2:
            return ys, xs, r, (math.nan, math.nan)
        stats = _pair_stats(ys, xs)
        best = (ys, xs, r, stats)
        if stats[1] <= 2.0 * r + 1.0:
            return best
        nn_misses += 1
        if nn_misses >= _NN_RETRIES:
            r *= _RELAX_FACTOR
            nn_misses = 0
    return best  # spacing band unsatisfiable; caller reports the stats as-is


def generate_constrained_mask(p_u: ProbabilityMatrix, cfg: ConstraintConfig):
    """Synthesize a mask whose rate matches the target exactly and whose
    points are near-uniformly spaced within each region.

    The grid is tiled into region_size x region_size cells (edge cells
    truncated).  Each cell's point quota is round(mean probability * area),
    corrected globally by largest remainder so the total equals
    round(target_rate * m * n).  Points are placed per cell by seeded dart
    throwing with minimal spacing derived from the cell's mean probability.
    Deterministic given cfg.seed.

    Returns (SamplingMask, list of RegionReport).
    """
    m, n = p_u.m, p_u.n
    if cfg.region_size > min(m, n):
        raise ValueError(f"region_size {cfg.region_size} exceeds grid side {min(m, n)}")

    row_ranges = _cell_ranges(m, cfg.region_size)
    col_ranges = _cell_ranges(n, cfg.region_size)
    target_total = int(round(cfg.target_rate * m * n))

    cells = []
    for ci, (r0_, r1_) in enumerate(row_ranges):
        for cj, (c0_, c1_) in enumerate(col_ranges):
            block = p_u.probs[r0_:r1_, c0_:c1_]
            area = block.size
            p_mean = float(block.mean())
            raw = p_mean * area
            cells.append({
                "ci": ci, "cj": cj, "rows": (r0_, r1_), "cols": (c0_, c1_),
                "area": area, "p_mean": p_mean,
                "quota": int(math.floor(raw)), "rem": raw - math.floor(raw),
            })

    # largest-remainder correction so the total count is exact
    need = target_total - sum(c["quota"] for c in cells)
    by_rem = sorted(cells, key=lambda c: (-c["rem"], c["ci"], c["cj"]))
    i = 0
    while need > 0:
        c = by_rem[i % len(by_rem)]
        if c["quota"] < c["area"]:
            c["quota"] += 1
            need -= 1
        i += 1
    i = 0
    while need < 0:
        c = by_rem[-1 - (i % len(by_rem))]
        if c["quota"] > 0:
            c["quota"] -= 1
            need += 1
        i += 1

    bits = np.zeros((m, n), dtype=np.uint8)
    reports = []
    for c in cells:
        (r0_, r1_), (c0_, c1_) = c["rows"], c["cols"]
        h, w = r1_ - r0_, c1_ - c0_
        spacing = spacing_from_density(max(c["p_mean"], 1e-12))
        ys, xs, r_used, stats = _place_cell(
            [cfg.seed, c["ci"], c["cj"]], h, w, c["quota"], spacing
        )
        bits[ys + r0_, xs + c0_] = 1
        reports.append(RegionReport(
            row=c["ci"], col=c["cj"], p_mean=c["p_mean"], count=len(ys),
            min_dist=stats[0], max_nn_dist=stats[1], r0=r_used,
        ))
    return SamplingMask(bits), reports


def mask_backward(grad_out: TwoChannelGrid, x_in: TwoChannelGrid, m_u: SamplingMask):
    """Backward pass of the masking step.

    The data gradient is exact (masking is linear in the data); the
    probability gradient uses the straight-through estimator, treating the
    binary mask as its underlying probability matrix:
    grad_p(x, y) = sum over channels of grad_out(x, y, c) * x_in(x, y, c).

    Returns (grad_x_in: TwoChannelGrid, grad_p: ndarray).
    """
    if not (grad_out.m, grad_out.n) == (x_in.m, x_in.n) == (m_u.m, m_u.n):
        raise ValueError("grad_out, x_in, and mask shapes must all match")
    mb = m_u.bits.astype(np.float64)
    grad_x = TwoChannelGrid(grad_out.channel0 * mb, grad_out.channel1 * mb)
    grad_p = grad_out.channel0 * x_in.channel0 + grad_out.channel1 * x_in.channel1
    return grad_x, grad_p


def save_region_reports(path, reports):
    """Write placement diagnostics as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region_row", "region_col", "p_mean", "count",
                         "min_dist", "max_nn_dist", "r0"])
        for r in reports:
            writer.writerow([r.row, r.col, f"{r.p_mean:.9g}", r.count,
                             f"{r.min_dist:.9g}", f"{r.max_nn_dist:.9g}", f"{r.r0:.9g}"])
