"""Fokker-Planck forward model: sample-image intensity from a reference.

Three variants are provided, each on its own code path:

``forward_full``
    I_S = I_R - (D/k) div(I_R grad phi) + D lap(D_eff I_R), with both
    operators expanded by the product rule and nothing dropped.
``forward_simplified``
    I_S = I_R - (D/k) I_R lap(phi) + D D_eff lap(I_R), the model the
    solvers invert.
``forward_tensor``
    The directional generalisation with a symmetric diffusion tensor. The
    cross term is a single d2/dxdy(D_xy I_R); no factor of two is applied.

Here D is the propagation distance and k the wave number. Negative output
intensities are never clipped; a warning is logged instead.
"""
import logging

import numpy as np

from .core import Geometry, ScalarField, check_same_grid
from .diffops import (
    DEFAULT_SCHEME,
    gradient_array,
    laplacian_array,
    mixed_derivative_array,
    second_derivative_array,
)
from .synth import rng_from_seed

log = logging.getLogger(__name__)


def _prepare(i_r, geometry, *fields):
    check_same_grid(i_r, *fields)
    if np.any(i_r.values <= 0):
        raise ValueError("reference intensities must be strictly positive")
    if not np.isclose(i_r.pitch, geometry.pitch, rtol=1e-12, atol=0):
        raise ValueError(
            f"field pitch {i_r.pitch} m does not match geometry pitch {geometry.pitch} m"
        )


def _finish(i_r, values, mode):
    n_bad = int(np.count_nonzero(values <= 0))
    if n_bad:
        log.warning("%s forward model produced %d non-positive pixels", mode, n_bad)
    return i_r.like(values)


def _coherent_flow(i, phi, pitch, scheme):
    """div(I grad phi) = I lap(phi) + grad I . grad phi."""
    gix, giy = gradient_array(i, pitch, scheme)
    gpx, gpy = gradient_array(phi, pitch, scheme)
    return i * laplacian_array(phi, pitch, scheme) + (gix * gpx + giy * gpy)


def forward_full(i_r, phi, d_eff, geometry: Geometry, scheme=DEFAULT_SCHEME):
    """Sample image from the full Fokker-Planck speckle equation."""
    _prepare(i_r, geometry, phi, d_eff)
    h = i_r.pitch
    i, d = i_r.values, d_eff.values
    gix, giy = gradient_array(i, h, scheme)
    gdx, gdy = gradient_array(d, h, scheme)
    diffusion = (
        d * laplacian_array(i, h, scheme)
        + i * laplacian_array(d, h, scheme)
        + 2.0 * (gdx * gix + gdy * giy)
    )
    flow = _coherent_flow(i, phi.values, h, scheme)
    values = i - (geometry.delta / geometry.wave_number) * flow + geometry.delta * diffusion
    return _finish(i_r, values, "full")


def forward_simplified(i_r, phi, d_eff, geometry: Geometry, scheme=DEFAULT_SCHEME):
    """Sample image from the simplified (lensing + local diffusion) model."""
    _prepare(i_r, geometry, phi, d_eff)
    h = i_r.pitch
    i = i_r.values
    lensing = i * laplacian_array(phi.values, h, scheme)
    diffusion = d_eff.values * laplacian_array(i, h, scheme)
    values = i - (geometry.delta / geometry.wave_number) * lensing + geometry.delta * diffusion
    return _finish(i_r, values, "simplified")


def _second_of_product(d, i, h, scheme, axis):
    """d2/da2 (d*i) expanded by the product rule along one axis."""
    k = 0 if axis == "x" else 1
    gd = gradient_array(d, h, scheme)[k]
    gi = gradient_array(i, h, scheme)[k]
    return (
        d * second_derivative_array(i, h, axis, scheme)
        + i * second_derivative_array(d, h, axis, scheme)
        + 2.0 * gd * gi
    )


def _mixed_of_product(d, i, h, scheme):
    """d2/dxdy (d*i) expanded by the product rule."""
    gdx, gdy = gradient_array(d, h, scheme)
    gix, giy = gradient_array(i, h, scheme)
    return (
        d * mixed_derivative_array(i, h, scheme)
        + i * mixed_derivative_array(d, h, scheme)
        + gdx * giy
        + gdy * gix
    )


def forward_tensor(i_r, phi, d_xx, d_yy, d_xy, geometry: Geometry, scheme=DEFAULT_SCHEME):
    """Sample image under a directional (tensor) diffusion model."""
    _prepare(i_r, geometry, phi, d_xx, d_yy, d_xy)
    h = i_r.pitch
    i = i_r.values
    diffusion = (
        _second_of_product(d_xx.values, i, h, scheme, "x")
        + _second_of_product(d_yy.values, i, h, scheme, "y")
        + _mixed_of_product(d_xy.values, i, h, scheme)
    )
    flow = _coherent_flow(i, phi.values, h, scheme)
    values = i - (geometry.delta / geometry.wave_number) * flow + geometry.delta * diffusion
    return _finish(i_r, values, "tensor")


def add_noise(field: ScalarField, seed, relative_sigma) -> ScalarField:
    """Add white Gaussian noise with std ``relative_sigma * mean(field)``."""
    if relative_sigma < 0:
        raise ValueError("relative_sigma must be non-negative")
    if relative_sigma == 0:
        return field
    sigma = relative_sigma * float(np.mean(field.values))
    noise = rng_from_seed(seed).standard_normal(field.shape) * sigma
    return field.like(field.values + noise)
