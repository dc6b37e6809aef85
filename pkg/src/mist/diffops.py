"""Finite-difference and spectral derivative operators on uniform grids.

Two schemes are offered:

* ``five_point_fd``: second-order central differences. Edges use ghost
  cells from a mirror reflection about the edge pixel (``mirror``) or from
  the opposite edge (``periodic``), so outputs keep the input shape.
* ``spectral_fourier``: exact derivatives of the trigonometric interpolant
  on a periodic domain. Odd-order content at the Nyquist frequency has no
  real-valued derivative and is dropped.

The ``*_array`` functions work on bare ``(height, width)`` arrays and are
what the simulator and solvers call; the field-level functions wrap them.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ScalarField


class Kind(str, Enum):
    FIVE_POINT_FD = "five_point_fd"
    SPECTRAL_FOURIER = "spectral_fourier"


class Boundary(str, Enum):
    MIRROR = "mirror"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class StencilScheme:
    kind: Kind = Kind.FIVE_POINT_FD
    boundary: Boundary = Boundary.MIRROR

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.kind is Kind.SPECTRAL_FOURIER and self.boundary is not Boundary.PERIODIC:
            raise ValueError("spectral_fourier scheme requires a periodic boundary")

    @classmethod
    def spectral(cls):
        return cls(Kind.SPECTRAL_FOURIER, Boundary.PERIODIC)

    @property
    def is_spectral(self):
        return self.kind is Kind.SPECTRAL_FOURIER

    def __str__(self):
        return f"{self.kind.value}/{self.boundary.value}"


DEFAULT_SCHEME = StencilScheme()
SPECTRAL = StencilScheme.spectral()

_PAD_MODE = {Boundary.MIRROR: "reflect", Boundary.PERIODIC: "wrap"}


def _check(a, scheme):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2D array, got shape {a.shape}")
    if min(a.shape) < 3:
        raise ValueError(f"field {a.shape} is smaller than the 3x3 stencil support")
    return a


def _padded(a, scheme):
    return np.pad(a, 1, mode=_PAD_MODE[scheme.boundary])


def _wavenumbers(shape, pitch):
    ky = 2.0 * np.pi * np.fft.fftfreq(shape[0], d=pitch)
    kx = 2.0 * np.pi * np.fft.fftfreq(shape[1], d=pitch)
    return kx[np.newaxis, :], ky[:, np.newaxis]


def _spectral_apply(a, multiplier):
    return np.real(np.fft.ifft2(np.fft.fft2(a) * multiplier))


def gradient_array(a, pitch, scheme=DEFAULT_SCHEME):
    """Return ``(d/dx, d/dy)`` of ``a``."""
    a = _check(a, scheme)
    if scheme.is_spectral:
        kx, ky = _wavenumbers(a.shape, pitch)
        fa = np.fft.fft2(a)
        gx = np.real(np.fft.ifft2(1j * kx * fa))
        gy = np.real(np.fft.ifft2(1j * ky * fa))
        return gx, gy
    p = _padded(a, scheme)
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * pitch)
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * pitch)
    return gx, gy


def second_derivative_array(a, pitch, axis, scheme=DEFAULT_SCHEME):
    """Pure second derivative along ``axis`` ('x' or 'y')."""
    a = _check(a, scheme)
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if scheme.is_spectral:
        kx, ky = _wavenumbers(a.shape, pitch)
        k = kx if axis == "x" else ky
        return _spectral_apply(a, -(k * k))
    p = _padded(a, scheme)
    c = p[1:-1, 1:-1]
    if axis == "x":
        return (p[1:-1, 2:] - 2.0 * c + p[1:-1, :-2]) / pitch**2
    return (p[2:, 1:-1] - 2.0 * c + p[:-2, 1:-1]) / pitch**2


def laplacian_array(a, pitch, scheme=DEFAULT_SCHEME):
    """Five-point (or spectral) Laplacian; equals d2/dx2 + d2/dy2 exactly."""
    a = _check(a, scheme)
    if scheme.is_spectral:
        kx, ky = _wavenumbers(a.shape, pitch)
        return _spectral_apply(a, -(kx * kx + ky * ky))
    p = _padded(a, scheme)
    return (
        p[1:-1, 2:] + p[1:-1, :-2] + p[2:, 1:-1] + p[:-2, 1:-1] - 4.0 * p[1:-1, 1:-1]
    ) / pitch**2


def mixed_derivative_array(a, pitch, scheme=DEFAULT_SCHEME):
    """d2/dxdy from the four diagonal neighbours (or spectrally)."""
    a = _check(a, scheme)
    if scheme.is_spectral:
        kx, ky = _wavenumbers(a.shape, pitch)
        return _spectral_apply(a, -(kx * ky))
    p = _padded(a, scheme)
    return (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4.0 * pitch**2)


def divergence_array(vx, vy, pitch, scheme=DEFAULT_SCHEME):
    return gradient_array(vx, pitch, scheme)[0] + gradient_array(vy, pitch, scheme)[1]


def gradient(f: ScalarField, scheme=DEFAULT_SCHEME):
    gx, gy = gradient_array(f.values, f.pitch, scheme)
    return f.like(gx), f.like(gy)


def laplacian(f: ScalarField, scheme=DEFAULT_SCHEME) -> ScalarField:
    return f.like(laplacian_array(f.values, f.pitch, scheme))


def mixed_derivative(f: ScalarField, scheme=DEFAULT_SCHEME) -> ScalarField:
    return f.like(mixed_derivative_array(f.values, f.pitch, scheme))


def second_derivative(f: ScalarField, axis, scheme=DEFAULT_SCHEME) -> ScalarField:
    return f.like(second_derivative_array(f.values, f.pitch, axis, scheme))


def divergence(fx: ScalarField, fy: ScalarField, scheme=DEFAULT_SCHEME) -> ScalarField:
    return fx.like(divergence_array(fx.values, fy.values, fx.pitch, scheme))
