"""Power-of-two 2-D Fourier transforms used by the correlation filter.

The real-input transforms pack pairs of real samples into one complex sample,
run a half-length complex FFT and split the result, so a real ``H x W`` image
costs one ``H x W/2`` complex transform plus the column pass.
"""

import numpy as np

from . import kernels


def _rows(x, inverse=False):
    return kernels.fft_rows(np.atleast_2d(x), inverse)


def fft2(x):
    x = np.asarray(x, dtype=np.complex128)
    return _rows(_rows(x).T).T


def ifft2(X):
    X = np.asarray(X, dtype=np.complex128)
    return _rows(_rows(X, inverse=True).T, inverse=True).T


def _split_twiddle(n):
    return np.exp(-2j * np.pi * np.arange(n // 2 + 1) / n)


def rfft_rows(x):
    """Real FFT of each row; returns the ``n//2 + 1`` non-negative bins."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[-1]
    if n < 2:
        raise ValueError("real FFT length must be at least 2")
    Z = _rows(x[:, 0::2] + 1j * x[:, 1::2])
    Zk = np.concatenate([Z, Z[:, :1]], axis=1)           # Z[k], k = 0..n/2
    Zc = np.conj(Zk[:, ::-1])                            # conj(Z[n/2 - k])
    even = 0.5 * (Zk + Zc)
    odd = -0.5j * (Zk - Zc)
    return even + _split_twiddle(n) * odd


def irfft_rows(X, n):
    X = np.atleast_2d(np.asarray(X, dtype=np.complex128))
    m = n // 2
    if X.shape[-1] != m + 1:
        raise ValueError(f"expected {m + 1} bins for length {n}, got {X.shape[-1]}")
    Xc = np.conj(X[:, ::-1])                             # conj(X[m - k])
    even = 0.5 * (X + Xc)
    odd = 0.5 * (X - Xc) * np.conj(_split_twiddle(n))
    Z = (even + 1j * odd)[:, :m]
    z = _rows(Z, inverse=True)
    out = np.empty((X.shape[0], n))
    out[:, 0::2] = z.real
    out[:, 1::2] = z.imag
    return out


def rfft2(x):
    """2-D FFT of a real array, last axis halved (``W//2 + 1`` columns)."""
    half = rfft_rows(x)
    return _rows(half.T).T


def irfft2(X, shape):
    h, w = shape
    cols = _rows(np.asarray(X, dtype=np.complex128).T, inverse=True).T
    if cols.shape[0] != h:
        raise ValueError("row count does not match requested shape")
    return irfft_rows(cols, w)
