"""Matrix-form 2D DFT/IDFT and the backward pass of the inverse transform.

The transform matrix F_n has entries w^(j*k) with w = exp(-2i*pi/n), so the
2D transform of an m-by-n grid X is F_m @ X @ F_n and its inverse carries a
1/(m*n) factor.  Matrices are built once per size and cached; real and
imaginary parts are precomputed separately so the hot path runs on real
BLAS, never on complex dtypes.

Grids are unshifted (DC at index (0, 0)).  Masks and probability matrices
use the DC-centered convention instead; `center_shift` / `center_shift_inverse`
move between the two.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ComplexGrid, SamplingMask


@dataclass(frozen=True)
class FourierMatrix:
    """Precomputed n-by-n transform matrix, split into real/imag planes."""

    n: int
    real: np.ndarray
    imag: np.ndarray


@lru_cache(maxsize=None)
def dft_matrix(n: int) -> FourierMatrix:
    """The n-by-n transform matrix with entries w^(j*k), w = exp(-2i*pi/n)."""
    if n < 1:
        raise ValueError(f"matrix size must be >= 1, got {n}")
    jk = np.outer(np.arange(n), np.arange(n))
    angle = -2.0 * np.pi * (jk % n) / n
    real = np.cos(angle)
    imag = np.sin(angle)
    real.setflags(write=False)
    imag.setflags(write=False)
    return FourierMatrix(n, real, imag)


def _sandwich(ar, ai, xr, xi, br, bi):
    """Real/imag planes of (A X B) for complex A, X, B given as planes."""
    # T = A X
    tr = ar @ xr - ai @ xi
    ti = ar @ xi + ai @ xr
    # T B
    yr = tr @ br - ti @ bi
    yi = tr @ bi + ti @ br
    return yr, yi


def _forward_planes(xr, xi):
    m, n = xr.shape
    fm, fn = dft_matrix(m), dft_matrix(n)
    return _sandwich(fm.real, fm.imag, xr, xi, fn.real, fn.imag)


def _inverse_planes(kr, ki):
    m, n = kr.shape
    fm, fn = dft_matrix(m), dft_matrix(n)
    # F is symmetric, so the Hermitian transpose is the elementwise conjugate.
    yr, yi = _sandwich(fm.real, -fm.imag, kr, ki, fn.real, -fn.imag)
    scale = 1.0 / (m * n)
    return yr * scale, yi * scale


def forward_2d(x: ComplexGrid) -> ComplexGrid:
    """2D transform F_m @ X @ F_n (image domain to k-space)."""
    return ComplexGrid(*_forward_planes(x.real, x.imag))


def inverse_2d(k: ComplexGrid) -> ComplexGrid:
    """Inverse 2D transform (1/mn) F_m^H @ K @ F_n^H (k-space to image)."""
    return ComplexGrid(*_inverse_planes(k.real, k.imag))


def ift_backward(grad_out: ComplexGrid) -> ComplexGrid:
    """Gradient of a scalar loss w.r.t. the input of `inverse_2d`.

    `grad_out` carries (dL/d real, dL/d imag) of the inverse-transform
    output in its two planes.  The returned grid carries the same pair for
    the k-space input.  Treating real and imaginary parts as independent
    real variables, the adjoint of X -> (1/mn) F_m^H X F_n^H is
    X -> (1/mn) F_m X F_n, which is what finite differences measure.
    """
    return ComplexGrid(*_ift_backward_planes(grad_out.real, grad_out.imag))


def _ift_backward_planes(gr, gi):
    m, n = gr.shape
    fm, fn = dft_matrix(m), dft_matrix(n)
    yr, yi = _sandwich(fm.real, fm.imag, gr, gi, fn.real, fn.imag)
    scale = 1.0 / (m * n)
    return yr * scale, yi * scale


def center_shift(x):
    """Swap quadrants so DC lands at (m//2, n//2); self-inverse for even dims.

    Accepts a 2D array, ComplexGrid, or SamplingMask and returns the same
    kind.  For odd dimensions use `center_shift_inverse` to undo.
    """
    if isinstance(x, ComplexGrid):
        return ComplexGrid(np.fft.fftshift(x.real), np.fft.fftshift(x.imag))
    if isinstance(x, SamplingMask):
        return SamplingMask(np.fft.fftshift(x.bits))
    return np.fft.fftshift(np.asarray(x))


def center_shift_inverse(x):
    """Exact inverse of `center_shift` for any parity."""
    if isinstance(x, ComplexGrid):
        return ComplexGrid(np.fft.ifftshift(x.real), np.fft.ifftshift(x.imag))
    if isinstance(x, SamplingMask):
        return SamplingMask(np.fft.ifftshift(x.bits))
    return np.fft.ifftshift(np.asarray(x))
