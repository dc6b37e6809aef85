"""Deterministic synthetic speckle references and phantoms.

Random numbers come from numpy's ``PCG64`` bit generator seeded with the
user's integer seed, with normal variates drawn by ``Generator.standard_normal``.
The same seed therefore reproduces the same field on any platform running
the same numpy major version.
"""
from dataclasses import dataclass

import numpy as np

from .core import ScalarField


def rng_from_seed(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class SpeckleSpec:
    """Parameters of a synthetic reference speckle field.

    ``correlation_length`` is the standard deviation (in meters) of the
    Gaussian kernel applied to white noise; ``contrast`` is the target
    std/mean of the output.
    """

    seed: int
    width: int
    height: int
    pitch: float
    correlation_length: float
    mean_intensity: float = 1.0
    contrast: float = 0.2

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("speckle field dimensions must be positive")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        if self.correlation_length < 2.0 * self.pitch:
            raise ValueError(
                "correlation_length must be at least two pixels so speckles are resolved"
            )
        if not self.mean_intensity > 0:
            raise ValueError("mean_intensity must be positive")
        if not 0.0 <= self.contrast < 1.0:
            raise ValueError(f"contrast must lie in [0, 1), got {self.contrast}")


def gaussian_filter_periodic(a, sigma_px):
    """Convolve with a periodic Gaussian of standard deviation ``sigma_px`` pixels."""
    fy = np.fft.fftfreq(a.shape[0])[:, np.newaxis]
    fx = np.fft.fftfreq(a.shape[1])[np.newaxis, :]
    transfer = np.exp(-2.0 * (np.pi * sigma_px) ** 2 * (fx * fx + fy * fy))
    return np.real(np.fft.ifft2(np.fft.fft2(a) * transfer))


def generate_speckle(spec: SpeckleSpec) -> ScalarField:
    """Gaussian-correlated random intensity pattern.

    White Gaussian noise is low-pass filtered in Fourier space (periodic
    wrap), standardized, then mapped affinely to ``mean*(1 + contrast*z)``.
    Raises ``ValueError`` if the requested contrast would produce a
    non-positive pixel.
    """
    shape = (spec.height, spec.width)
    if spec.contrast == 0:
        return ScalarField(np.full(shape, float(spec.mean_intensity)), spec.pitch)
    noise = rng_from_seed(spec.seed).standard_normal(shape)
    smooth = gaussian_filter_periodic(noise, spec.correlation_length / spec.pitch)
    z = (smooth - smooth.mean()) / smooth.std()
    values = spec.mean_intensity * (1.0 + spec.contrast * z)
    if values.min() <= 0:
        raise ValueError(
            f"contrast {spec.contrast} is too high: minimum intensity would be "
            f"{values.min():.4g} for seed {spec.seed}"
        )
    return ScalarField(values, spec.pitch)


def _centre(width, height, pitch, center):
    if center is None:
        return (width // 2) * pitch, (height // 2) * pitch
    return float(center[0]), float(center[1])


def _radius2(width, height, pitch, center):
    cx, cy = _centre(width, height, pitch, center)
    y, x = np.indices((height, width), dtype=np.float64)
    return (x * pitch - cx) ** 2 + (y * pitch - cy) ** 2


def gaussian_phase_phantom(width, height, pitch, amplitude, sigma, center=None):
    """Gaussian phase bump ``amplitude*exp(-r^2/(2 sigma^2))`` in radians.

    ``center`` is ``(cx, cy)`` in meters and defaults to pixel
    ``(width // 2, height // 2)``.
    """
    if sigma < 4.0 * pitch:
        raise ValueError("phase phantom sigma must be at least four pixels")
    r2 = _radius2(width, height, pitch, center)
    return ScalarField(amplitude * np.exp(-r2 / (2.0 * sigma**2)), pitch)


def gaussian_phase_laplacian(width, height, pitch, amplitude, sigma, center=None):
    """Analytic Laplacian of :func:`gaussian_phase_phantom` in rad/m^2."""
    r2 = _radius2(width, height, pitch, center)
    g = amplitude * np.exp(-r2 / (2.0 * sigma**2))
    return ScalarField((r2 / sigma**4 - 2.0 / sigma**2) * g, pitch)


def smooth_diffusion_phantom(width, height, pitch, peak, sigma, center=None):
    """Non-negative Gaussian blob of height ``peak`` (meters)."""
    if sigma < 8.0 * pitch:
        raise ValueError("diffusion phantom sigma must be at least eight pixels")
    if peak < 0:
        raise ValueError("diffusion peak must be non-negative")
    r2 = _radius2(width, height, pitch, center)
    return ScalarField(peak * np.exp(-r2 / (2.0 * sigma**2)), pitch)
