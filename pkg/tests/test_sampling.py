import csv
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from maskopt.core import ComplexGrid, ProbabilityMatrix, SamplingMask, TwoChannelGrid
from maskopt.sampling import (ConstraintConfig, apply_mask, density_from_spacing,
                              generate_constrained_mask, mask_backward,
                              merge_channels, project_probabilities,
                              sample_bernoulli, save_region_reports,
                              spacing_from_density, split_channels)
from oracles import min_pairwise_dist


class TestChannels:
    def test_split_merge_round_trip(self):
        rng = np.random.default_rng(1)
        k = ComplexGrid(rng.standard_normal((4, 6)), rng.standard_normal((4, 6)))
        t = split_channels(k)
        assert_array_equal(t.channel0, k.real)
        assert_array_equal(t.channel1, k.imag)
        back = merge_channels(t)
        assert_array_equal(back.real, k.real)
        assert_array_equal(back.imag, k.imag)

    def test_apply_mask_zeroes_dropped_points(self):
        rng = np.random.default_rng(2)
        t = TwoChannelGrid(rng.standard_normal((5, 5)), rng.standard_normal((5, 5)))
        bits = (rng.random((5, 5)) < 0.5).astype(np.uint8)
        out = apply_mask(t, SamplingMask(bits))
        assert_array_equal(out.channel0[bits == 0], 0.0)
        assert_array_equal(out.channel0[bits == 1], t.channel0[bits == 1])
        assert_array_equal(out.channel1[bits == 0], 0.0)

    def test_apply_mask_shape_mismatch(self):
        t = TwoChannelGrid(np.zeros((4, 4)), np.zeros((4, 4)))
        with pytest.raises(ValueError):
            apply_mask(t, SamplingMask(np.zeros((4, 5), dtype=np.uint8)))


class TestBernoulli:
    def test_deterministic(self):
        p = ProbabilityMatrix(np.full((20, 20), 0.5))
        a = sample_bernoulli(p, seed=9)
        b = sample_bernoulli(p, seed=9)
        assert_array_equal(a.bits, b.bits)
        c = sample_bernoulli(p, seed=10)
        assert np.any(c.bits != a.bits)

    def test_extremes(self):
        ones = sample_bernoulli(ProbabilityMatrix(np.ones((8, 8))), seed=0)
        assert ones.rate == 1.0
        zeros = sample_bernoulli(ProbabilityMatrix(np.zeros((8, 8))), seed=0)
        assert zeros.rate == 0.0

    def test_rate_statistics(self):
        # 3-sigma band for p = 0.3 over 10,000 cells
        p = ProbabilityMatrix(np.full((100, 100), 0.3))
        mask = sample_bernoulli(p, seed=123)
        assert abs(mask.rate - 0.3) < 3.0 * np.sqrt(0.3 * 0.7 / 10_000)


class TestProjection:
    def _cfg(self, rate, **kw):
        return ConstraintConfig(target_rate=rate, **kw)

    def test_mean_pinned_and_bounds(self):
        rng = np.random.default_rng(3)
        raw = rng.random((30, 30)) * 2.0 - 0.5  # entries outside [0, 1]
        out = project_probabilities(raw, self._cfg(0.25))
        assert abs(out.mean - 0.25) < 1e-12
        assert out.probs.min() >= 0.01
        assert out.probs.max() <= 1.0

    def test_feasible_input_unchanged(self):
        arr = np.full((10, 10), 0.4)
        out = project_probabilities(arr, self._cfg(0.4))
        assert_array_equal(out.probs, arr)

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        raw = rng.random((16, 16))
        once = project_probabilities(raw, self._cfg(0.3))
        twice = project_probabilities(once, self._cfg(0.3))
        assert_array_equal(once.probs, twice.probs)

    def test_preserves_ordering(self):
        rng = np.random.default_rng(5)
        raw = rng.random((12, 12))
        out = project_probabilities(raw, self._cfg(0.35)).probs
        flat_in = raw.ravel()
        flat_out = out.ravel()
        i = np.argsort(flat_in, kind="stable")
        assert np.all(np.diff(flat_out[i]) >= -1e-12)

    def test_infeasible_rate_rejected(self):
        with pytest.raises(ValueError):
            project_probabilities(np.full((4, 4), 0.5), self._cfg(0.005))

    def test_high_rate_converges(self):
        out = project_probabilities(np.full((8, 8), 0.1), self._cfg(1.0))
        assert_allclose(out.probs, np.ones((8, 8)), atol=1e-12)


class TestSpacingDensity:
    def test_density_at_unit_spacing(self):
        # sqrt(2)/10 - sqrt(2)/2 + 1, evaluated independently
        assert density_from_spacing(1.0) == pytest.approx(0.434314575050762, abs=1e-12)

    def test_spacing_at_half_density(self):
        assert spacing_from_density(0.5) == pytest.approx(0.8524363156262326, abs=1e-10)

    def test_round_trips(self):
        for r0 in (1.0, 1.5, 2.0, 2.4):
            assert spacing_from_density(density_from_spacing(r0)) == pytest.approx(
                r0, abs=1e-6)

    def test_clamp_below_vertex(self):
        assert spacing_from_density(0.05) == 2.5
        assert spacing_from_density(0.116) == 2.5

    def test_monotone_decreasing(self):
        ps = np.linspace(0.15, 1.0, 40)
        rs = [spacing_from_density(p) for p in ps]
        assert np.all(np.diff(rs) < 0.0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            spacing_from_density(0.0)
        with pytest.raises(ValueError):
            spacing_from_density(1.1)
        assert spacing_from_density(1.0) == pytest.approx(0.0, abs=1e-12)


class TestConstrainedMask:
    def test_exact_count_and_determinism(self):
        cfg = ConstraintConfig(target_rate=0.3, seed=7)
        p = ProbabilityMatrix(np.full((40, 40), 0.3))
        mask_a, reports = generate_constrained_mask(p, cfg)
        assert int(mask_a.bits.sum()) == round(0.3 * 1600)
        mask_b, _ = generate_constrained_mask(p, cfg)
        assert_array_equal(mask_a.bits, mask_b.bits)
        mask_c, _ = generate_constrained_mask(
            p, ConstraintConfig(target_rate=0.3, seed=8))
        assert np.any(mask_c.bits != mask_a.bits)

    def test_region_reports_consistent(self):
        cfg = ConstraintConfig(target_rate=0.2, seed=3)
        rng = np.random.default_rng(30)
        p = project_probabilities(rng.random((30, 30)), cfg)
        mask, reports = generate_constrained_mask(p, cfg)
        assert len(reports) == 9
        assert sum(r.count for r in reports) == int(mask.bits.sum())
        for r in reports:
            block = p.probs[r.row * 10:(r.row + 1) * 10, r.col * 10:(r.col + 1) * 10]
            assert r.p_mean == pytest.approx(block.mean())

    def test_within_region_distances(self):
        """Reported spacing holds inside every region (oracle re-check)."""
        cfg = ConstraintConfig(target_rate=0.2, seed=5)
        p = ProbabilityMatrix(np.full((20, 20), 0.2))
        mask, reports = generate_constrained_mask(p, cfg)
        for r in reports:
            sub = mask.bits[r.row * 10:(r.row + 1) * 10, r.col * 10:(r.col + 1) * 10]
            ys, xs = np.nonzero(sub)
            if len(ys) >= 2:
                d = min_pairwise_dist(ys, xs)
                assert d >= r.r0 - 1e-9
                assert d == pytest.approx(r.min_dist)

    def test_region_size_larger_than_grid_rejected(self):
        cfg = ConstraintConfig(target_rate=0.3, region_size=10)
        with pytest.raises(ValueError):
            generate_constrained_mask(ProbabilityMatrix(np.full((8, 8), 0.3)), cfg)

    def test_report_csv(self, tmp_path):
        cfg = ConstraintConfig(target_rate=0.25, seed=1)
        p = ProbabilityMatrix(np.full((20, 20), 0.25))
        _, reports = generate_constrained_mask(p, cfg)
        path = tmp_path / "regions.csv"
        save_region_reports(path, reports)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(reports)
        assert rows[0]["region_row"] == "0"
        assert float(rows[0]["p_mean"]) == pytest.approx(0.25)

    def test_backends_produce_identical_masks(self):
        """The chunked draw-stream contract holds end to end."""
        code = (
            "import numpy as np\n"
            "from maskopt.core import ProbabilityMatrix\n"
            "from maskopt.sampling import ConstraintConfig, generate_constrained_mask\n"
            "cfg = ConstraintConfig(target_rate=0.3, seed=17)\n"
            "p = ProbabilityMatrix(np.full((64, 64), 0.3))\n"
            "mask, _ = generate_constrained_mask(p, cfg)\n"
            "print(mask.bits.tobytes().hex())\n"
        )
        outs = []
        for backend in ("numpy", "ext"):
            proc = subprocess.run([sys.executable, "-c", code],
                                  capture_output=True, text=True,
                                  env={"MASKOPT_BACKEND": backend, "PATH": "/usr/bin:/bin"})
            if proc.returncode != 0 and backend == "ext":
                pytest.skip("compiled extension not built")
            assert proc.returncode == 0, proc.stderr
            outs.append(proc.stdout.strip())
        assert outs[0] == outs[1]


class TestMaskBackward:
    def test_straight_through_values(self):
        g = TwoChannelGrid(np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]))
        x = TwoChannelGrid(np.array([[5.0, 6.0]]), np.array([[7.0, 8.0]]))
        mask = SamplingMask(np.array([[1, 0]], dtype=np.uint8))
        gx, gp = mask_backward(g, x, mask)
        assert_array_equal(gx.channel0, [[1.0, 0.0]])
        assert_array_equal(gx.channel1, [[3.0, 0.0]])
        # grad_p sums grad*input over channels, mask value ignored
        assert_array_equal(gp, [[1 * 5 + 3 * 7, 2 * 6 + 4 * 8]])

    def test_shape_mismatch(self):
        g = TwoChannelGrid(np.zeros((2, 2)), np.zeros((2, 2)))
        x = TwoChannelGrid(np.zeros((2, 3)), np.zeros((2, 3)))
        with pytest.raises(ValueError):
            mask_backward(g, x, SamplingMask(np.zeros((2, 2), dtype=np.uint8)))
