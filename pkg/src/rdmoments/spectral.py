"""Truncated Fourier representation of periodic functions on [0, 1] and the
reaction-diffusion drift in spectral coordinates.

Conventions, fixed once:

* basis functions e_k(x) = exp(2*pi*i*k*x), coefficients
  c_k = int_0^1 z(x) e_k(x).conj() dx, so a real z has c_{-k} = conj(c_k);
* only modes 0..K are stored (Hermitian symmetry is structural);
* the real parametrization orders coordinates (u0, u1, v1, ..., uK, vK)
  with u_k = Re c_k, v_k = Im c_k;
* the drift is f(y) = y_xx + eps*y*(1-y), i.e. in mode k
  F_k = -(2*pi*k)^2 c_k + eps*c_k - eps*(z^2)_k with the quadratic
  convolution truncated to pairs |l| <= K, |k-l| <= K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .moments import MultiIndex, Polynomial, n_coords

__all__ = [
    "GridFunction",
    "FourierVector",
    "RealCoordinates",
    "dft",
    "idft",
    "to_real",
    "from_real",
    "quad_convolution",
    "drift",
    "drift_polynomials",
]


@dataclass(frozen=True)
class GridFunction:
    """Samples of a real periodic function at x_i = i/N, i = 0..N-1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("GridFunction needs a real vector of length >= 2")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.size

    @staticmethod
    def from_callable(f, N: int) -> "GridFunction":
        x = np.arange(N) / N
        return GridFunction(f(x))


@dataclass(frozen=True)
class FourierVector:
    """Modes 0..K of a real function; mode -k is implied by conjugation."""

    c0: float
    c: np.ndarray  # complex, modes 1..K

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=complex))
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def K(self) -> int:
        return self.c.size

    def full_spectrum(self) -> np.ndarray:
        """Modes -K..K as a dense complex vector (index k + K)."""
        neg = np.conj(self.c[::-1])
        return np.concatenate([neg, [self.c0 + 0j], self.c])

    @staticmethod
    def zeros(K: int) -> "FourierVector":
        return FourierVector(0.0, np.zeros(K, dtype=complex))


def to_real(f: FourierVector) -> np.ndarray:
    x = np.empty(n_coords(f.K))
    x[0] = f.c0
    x[1::2] = f.c.real
    x[2::2] = f.c.imag
    return x


def from_real(x: np.ndarray) -> FourierVector:
    x = np.asarray(x, dtype=float)
    return FourierVector(x[0], x[1::2] + 1j * x[2::2])


@dataclass(frozen=True)
class RealCoordinates:
    """Real state vector (u0, u1, v1, ..., uK, vK) of a FourierVector."""

    x: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.x, dtype=float)
        if v.ndim != 1 or v.size % 2 != 1:
            raise ValueError("RealCoordinates needs an odd-length real vector")
        object.__setattr__(self, "x", v)

    @property
    def K(self) -> int:
        return (self.x.size - 1) // 2

    @staticmethod
    def from_fourier(f: FourierVector) -> "RealCoordinates":
        return RealCoordinates(to_real(f))

    def to_fourier(self) -> FourierVector:
        return from_real(self.x)


def dft(g: GridFunction, K: int) -> FourierVector:
    """Retained Fourier coefficients c_k = (1/N) sum_i g(x_i) e^{-2 pi i k x_i}.

    Exact for trigonometric polynomials of harmonic degree <= K when
    N >= 2K + 1 (enforced: no aliasing of retained modes).
    """
    if g.N < 2 * K + 1:
        raise ValueError(f"grid size {g.N} too small for cutoff {K} (need N >= 2K+1)")
    spec = np.fft.rfft(g.values) / g.N
    return FourierVector(spec[0].real, spec[1 : K + 1])


def idft(f: FourierVector, N: int) -> GridFunction:
    """Real samples of z(x) = c0 + 2 Re sum_{k=1..K} c_k e^{2 pi i k x}."""
    if N < 2 * f.K + 1:
        raise ValueError(f"grid size {N} too small for cutoff {f.K} (need N >= 2K+1)")
    spec = np.zeros(N // 2 + 1, dtype=complex)
    spec[0] = f.c0
    spec[1 : f.K + 1] = f.c
    return GridFunction(np.fft.irfft(spec * N, n=N))


def quad_convolution(f: FourierVector) -> FourierVector:
    """Modes |k| <= K of z^2, keeping only pairs with |l| <= K and |k-l| <= K."""
    s = f.full_spectrum()
    full = np.convolve(s, s)  # modes -2K .. 2K at offset 2K
    K = f.K
    center = 2 * K
    return FourierVector(full[center].real, full[center + 1 : center + 1 + K])


def drift(f: FourierVector, eps: float) -> FourierVector:
    """Spectral drift F_k = -(2 pi k)^2 c_k + eps c_k - eps (z^2)_k."""
    if eps < 0:
        raise ValueError("reaction rate must be nonnegative")
    k = np.arange(1, f.K + 1)
    conv = quad_convolution(f)
    c0 = eps * f.c0 - eps * conv.c0
    c = (-((2 * np.pi * k) ** 2) + eps) * f.c - eps * conv.c
    return FourierVector(c0, c)


def _coord_index(e: int) -> MultiIndex:
    return MultiIndex.from_dict(0, {e: 1})


def _pair_index(a: int, b: int) -> MultiIndex:
    return MultiIndex.from_dict(0, {a: 2} if a == b else {a: 1, b: 1})


def _mode_coords(m: int) -> tuple[int, int, int]:
    """(u-coordinate, v-coordinate, sign) for signed mode m; v=-1 for m=0."""
    if m == 0:
        return 0, -1, 0
    k = abs(m)
    return 2 * k - 1, 2 * k, 1 if m > 0 else -1


def convolution_polynomials(K: int) -> tuple[list[Polynomial], list[Polynomial]]:
    """Real and imaginary parts of (z^2)_k, k = 0..K, as quadratic polynomials
    in the real coordinates, with the |l| <= K, |k-l| <= K truncation."""
    re: list[Polynomial] = []
    im: list[Polynomial] = []
    for k in range(K + 1):
        pr, pi = Polynomial(), Polynomial()
        for l in range(k - K, K + 1):
            m1, m2 = l, k - l
            ua, va, sa = _mode_coords(m1)
            ub, vb, sb = _mode_coords(m2)
            # (u_a + i sa v_a)(u_b + i sb v_b)
            pr.add_term(_pair_index(ua, ub), 1.0)
            if sa and sb:
                pr.add_term(_pair_index(va, vb), -sa * sb)
            if sa:
                pi.add_term(_pair_index(va, ub), sa)
            if sb:
                pi.add_term(_pair_index(ua, vb), sb)
        re.append(pr)
        im.append(pi)
    return re, im


def drift_polynomials(K: int, eps: float) -> list[Polynomial]:
    """Drift as 1 + 2K real polynomials of degree <= 2, ordered like the
    coordinates: evaluating them at to_real(f) gives the real/imaginary parts
    of drift(f, eps)."""
    if eps < 0:
        raise ValueError("reaction rate must be nonnegative")
    conv_re, conv_im = convolution_polynomials(K)
    polys: list[Polynomial] = []
    p0 = Polynomial({_coord_index(0): eps}) + conv_re[0].scale(-eps)
    polys.append(p0)
    for k in range(1, K + 1):
        lin = -((2 * math.pi * k) ** 2) + eps
        pu = Polynomial({_coord_index(2 * k - 1): lin}) + conv_re[k].scale(-eps)
        pv = Polynomial({_coord_index(2 * k): lin}) + conv_im[k].scale(-eps)
        polys.append(pu)
        polys.append(pv)
    return polys
