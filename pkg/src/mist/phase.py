"""FFT Poisson solve turning a phase Laplacian into a phase map."""
from dataclasses import dataclass, replace

import numpy as np

from .core import ReconstructionResult, ScalarField


@dataclass(frozen=True)
class PoissonOptions:
    """``even_extension`` mirrors the input to a 2x periodic domain first.

    This is the usual Neumann-compatible treatment for measured images that
    are not periodic. The output is always shifted to zero mean, which fixes
    the arbitrary additive constant.
    """

    even_extension: bool = False


def _inverse_laplacian(lap):
    ny, nx = lap.shape
    ky = 2.0 * np.pi * np.fft.fftfreq(ny)[:, np.newaxis]
    kx = 2.0 * np.pi * np.fft.fftfreq(nx)[np.newaxis, :]
    k2 = kx * kx + ky * ky
    k2[0, 0] = 1.0
    spectrum = np.fft.fft2(lap) / -k2
    spectrum[0, 0] = 0.0
    return np.real(np.fft.ifft2(spectrum))


def integrate_phase(lap_phi: ScalarField, opts=PoissonOptions()) -> ScalarField:
    """Invert the periodic Laplacian; the result has zero mean.

    The DC term of the input is discarded, which is the solvability
    condition on a periodic domain.
    """
    lap = lap_phi.values
    if opts.even_extension:
        ny, nx = lap.shape
        top = np.concatenate([lap, lap[:, ::-1]], axis=1)
        ext = np.concatenate([top, top[::-1, :]], axis=0)
        phi = _inverse_laplacian(ext)[:ny, :nx]
    else:
        phi = _inverse_laplacian(lap)
    phi = phi * lap_phi.pitch**2
    return lap_phi.like(phi - phi.mean())


def with_phase(result: ReconstructionResult, opts=PoissonOptions()) -> ReconstructionResult:
    """Return ``result`` with its ``phi`` field integrated from ``lap_phi``."""
    return replace(result, phi=integrate_phase(result.lap_phi, opts))
