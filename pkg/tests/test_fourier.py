import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from maskopt.core import ComplexGrid, SamplingMask
from maskopt.fourier import (center_shift, center_shift_inverse, dft_matrix,
                             forward_2d, ift_backward, inverse_2d)
from oracles import dft2_bruteforce, fd_gradient


def _random_grid(rng, m, n):
    return ComplexGrid(rng.standard_normal((m, n)), rng.standard_normal((m, n)))


class TestDftMatrix:
    def test_first_row_and_column_are_ones(self):
        f = dft_matrix(8)
        assert_allclose(f.real[0], np.ones(8), atol=1e-15)
        assert_allclose(f.imag[0], np.zeros(8), atol=1e-15)
        assert_allclose(f.real[:, 0], np.ones(8), atol=1e-15)

    def test_entries_are_unit_roots(self):
        f = dft_matrix(12)
        assert_allclose(f.real ** 2 + f.imag ** 2, np.ones((12, 12)), atol=1e-14)

    def test_symmetric(self):
        f = dft_matrix(9)
        assert_allclose(f.real, f.real.T, atol=0)
        assert_allclose(f.imag, f.imag.T, atol=0)

    def test_n_one(self):
        f = dft_matrix(1)
        assert_array_equal(f.real, [[1.0]])
        assert_array_equal(f.imag, [[0.0]])

    def test_invalid_size_rejected(self):
        with pytest.raises(ValueError):
            dft_matrix(0)

    def test_cached(self):
        assert dft_matrix(16) is dft_matrix(16)


class TestForward:
    def test_matches_bruteforce_8x8(self):
        """Double-sum oracle agreement at tight relative tolerance."""
        rng = np.random.default_rng(42)
        x = _random_grid(rng, 8, 8)
        want = dft2_bruteforce(x.to_complex())
        got = forward_2d(x).to_complex()
        scale = np.max(np.abs(want))
        assert np.max(np.abs(got - want)) / scale < 1e-12

    def test_matches_numpy_fft(self):
        rng = np.random.default_rng(1)
        x = _random_grid(rng, 12, 20)
        got = forward_2d(x).to_complex()
        want = np.fft.fft2(x.to_complex())
        assert_allclose(got, want, atol=1e-10)

    def test_delta_input_gives_flat_spectrum(self):
        xr = np.zeros((6, 6))
        xr[0, 0] = 1.0
        k = forward_2d(ComplexGrid(xr, np.zeros((6, 6))))
        assert_allclose(k.real, np.ones((6, 6)), atol=1e-14)
        assert_allclose(k.imag, np.zeros((6, 6)), atol=1e-14)


class TestInverse:
    def test_round_trip_32x32(self):
        rng = np.random.default_rng(2)
        x = _random_grid(rng, 32, 32)
        back = inverse_2d(forward_2d(x))
        assert np.max(np.abs(back.real - x.real)) < 1e-10
        assert np.max(np.abs(back.imag - x.imag)) < 1e-10

    def test_round_trip_non_square(self):
        rng = np.random.default_rng(3)
        x = _random_grid(rng, 7, 11)
        back = inverse_2d(forward_2d(x))
        assert_allclose(back.to_complex(), x.to_complex(), atol=1e-11)

    def test_parseval(self):
        # energy in k-space is m*n times the image energy
        rng = np.random.default_rng(4)
        x = _random_grid(rng, 16, 16)
        k = forward_2d(x)
        e_img = np.sum(x.real ** 2 + x.imag ** 2)
        e_k = np.sum(k.real ** 2 + k.imag ** 2)
        assert abs(e_k / (16 * 16) - e_img) / e_img < 1e-9


class TestIftBackward:
    def test_matches_finite_differences(self):
        """Gradient through the inverse transform, both channels.

        The loss pairs independent weights with the real and imaginary
        output planes, so the test exercises the full two-channel coupling.
        """
        rng = np.random.default_rng(5)
        m, n = 6, 6
        kr0 = rng.standard_normal((m, n))
        ki0 = rng.standard_normal((m, n))
        wa = rng.standard_normal((m, n))
        wb = rng.standard_normal((m, n))

        def loss_parts(kr, ki):
            out = inverse_2d(ComplexGrid(kr, ki))
            return float(np.sum(wa * out.real) + np.sum(wb * out.imag))

        g = ift_backward(ComplexGrid(wa, wb))
        fd_r = fd_gradient(lambda a: loss_parts(a, ki0), kr0)
        fd_i = fd_gradient(lambda a: loss_parts(kr0, a), ki0)
        assert np.max(np.abs(g.real - fd_r)) < 1e-8
        assert np.max(np.abs(g.imag - fd_i)) < 1e-8

    def test_linear_in_grad(self):
        rng = np.random.default_rng(6)
        a = _random_grid(rng, 5, 4)
        b = _random_grid(rng, 5, 4)
        s = ift_backward(ComplexGrid(a.real + b.real, a.imag + b.imag))
        sa = ift_backward(a)
        sb = ift_backward(b)
        assert_allclose(s.real, sa.real + sb.real, atol=1e-12)
        assert_allclose(s.imag, sa.imag + sb.imag, atol=1e-12)


class TestCenterShift:
    def test_round_trip(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((6, 9))
        assert_array_equal(center_shift_inverse(center_shift(x)), x)

    def test_dc_moves_to_center(self):
        k = np.zeros((8, 8))
        k[0, 0] = 1.0
        assert center_shift(k)[4, 4] == 1.0

    def test_mask_type_preserved(self):
        mask = SamplingMask(np.eye(4, dtype=np.uint8))
        out = center_shift(mask)
        assert isinstance(out, SamplingMask)
        back = center_shift_inverse(out)
        assert_array_equal(back.bits, mask.bits)
