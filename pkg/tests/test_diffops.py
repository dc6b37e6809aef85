import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mist.core import ScalarField
from mist.diffops import (
    SPECTRAL,
    Boundary,
    Kind,
    StencilScheme,
    divergence,
    gradient,
    laplacian,
    mixed_derivative,
    second_derivative,
)

from conftest import random_field

FD_MIRROR = StencilScheme(Kind.FIVE_POINT_FD, Boundary.MIRROR)
FD_PERIODIC = StencilScheme(Kind.FIVE_POINT_FD, Boundary.PERIODIC)
ALL_SCHEMES = [FD_MIRROR, FD_PERIODIC, SPECTRAL]


def coords(shape, pitch):
    y, x = np.indices(shape, dtype=float)
    return x * pitch, y * pitch


def test_spectral_requires_periodic():
    with pytest.raises(ValueError):
        StencilScheme("spectral_fourier", "mirror")
    assert StencilScheme("five_point_fd", "periodic").boundary is Boundary.PERIODIC


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_constant_field_annihilated(scheme):
    f = ScalarField(np.full((16, 20), 3.7), 0.5)
    gx, gy = gradient(f, scheme)
    for out in (gx, gy, laplacian(f, scheme), mixed_derivative(f, scheme)):
        np.testing.assert_allclose(out.values, 0.0, atol=1e-12)


def test_mirror_annihilates_constant_exactly():
    f = ScalarField(np.full((9, 11), 0.3), 0.1)
    for out in (*gradient(f), laplacian(f), mixed_derivative(f)):
        assert np.all(out.values == 0.0)


def test_too_small():
    f = ScalarField(np.ones((2, 10)))
    with pytest.raises(ValueError):
        laplacian(f)


def test_gradient_linear_ramp():
    pitch = 0.01
    x, y = coords((20, 24), pitch)
    gx, gy = gradient(ScalarField(3.5 * x, pitch))
    np.testing.assert_allclose(gx.values[1:-1, 1:-1], 3.5, rtol=1e-12)
    np.testing.assert_allclose(gy.values[1:-1, 1:-1], 0.0, atol=1e-12)


def test_gradient_spectral_sine():
    n, pitch = 64, 0.25
    L = n * pitch
    x, _ = coords((32, n), pitch)
    gx, gy = gradient(ScalarField(np.sin(2 * np.pi * x / L), pitch), SPECTRAL)
    expect = (2 * np.pi / L) * np.cos(2 * np.pi * x / L)
    assert np.max(np.abs(gx.values - expect)) < 1e-10 * np.max(np.abs(expect))
    assert np.max(np.abs(gy.values)) < 1e-12


def test_laplacian_quadratic_exact():
    pitch = 0.1
    x, y = coords((20, 20), pitch)
    lap = laplacian(ScalarField(x**2 + y**2, pitch))
    np.testing.assert_allclose(lap.values[1:-1, 1:-1], 4.0, rtol=1e-9)


def gaussian_bump(sigma_px, n=128, pitch=2e-6):
    x, y = coords((n, n), pitch)
    s = sigma_px * pitch
    r2 = (x - n // 2 * pitch) ** 2 + (y - n // 2 * pitch) ** 2
    f = np.exp(-r2 / (2 * s**2))
    return ScalarField(f, pitch), (r2 / s**4 - 2 / s**2) * f


FD_SIGMA6 = pytest.param(
    FD_MIRROR, 6,
    marks=pytest.mark.xfail(
        strict=True,
        reason="five-point truncation error at the bump centre is h^2/(4 sigma^2) = 0.69% at 6 px",
    ),
)


@pytest.mark.parametrize("scheme,sigma_px", [
    (SPECTRAL, 6), (SPECTRAL, 8), FD_SIGMA6, (FD_MIRROR, 8), (FD_MIRROR, 12),
])
def test_laplacian_gaussian_bump(scheme, sigma_px):
    f, analytic = gaussian_bump(sigma_px)
    lap = laplacian(f, scheme).values
    assert np.max(np.abs(lap - analytic)) / np.max(np.abs(analytic)) < 5e-3


@pytest.mark.parametrize("sigma_px", [6, 8, 12])
def test_fd_laplacian_truncation_matches_leading_term(sigma_px):
    f, analytic = gaussian_bump(sigma_px)
    lap = laplacian(f).values
    rel = np.max(np.abs(lap - analytic)) / np.max(np.abs(analytic))
    leading = 1.0 / (4 * sigma_px**2)
    assert rel == pytest.approx(leading, rel=0.05)


def test_mixed_bilinear_exact():
    pitch = 0.3
    x, y = coords((15, 17), pitch)
    out = mixed_derivative(ScalarField(x * y, pitch))
    np.testing.assert_allclose(out.values[1:-1, 1:-1], 1.0, rtol=1e-12)


def test_mixed_separable_linear():
    pitch = 0.2
    x, y = coords((12, 12), pitch)
    out = mixed_derivative(ScalarField((2 * x + 1) * (-3 * y + 4), pitch))
    np.testing.assert_allclose(out.values[1:-1, 1:-1], -6.0, rtol=1e-12)


def test_mixed_spectral_sines():
    n, pitch = 48, 0.5
    L = n * pitch
    x, y = coords((n, n), pitch)
    kk = 2 * np.pi / L
    out = mixed_derivative(ScalarField(np.sin(kk * x) * np.sin(kk * y), pitch), SPECTRAL)
    expect = kk**2 * np.cos(kk * x) * np.cos(kk * y)
    assert np.max(np.abs(out.values - expect)) < 1e-10 * kk**2


def test_laplacian_spectral_single_mode():
    n, pitch = 40, 1.5
    x, y = coords((n, n), pitch)
    kx, ky = 2 * np.pi * 3 / (n * pitch), 2 * np.pi * 2 / (n * pitch)
    f = np.cos(kx * x + ky * y)
    out = laplacian(ScalarField(f, pitch), SPECTRAL)
    np.testing.assert_allclose(out.values, -(kx**2 + ky**2) * f, atol=1e-12 * (kx**2 + ky**2))


def test_laplacian_is_sum_of_second_derivatives():
    f = random_field(3)
    for scheme in ALL_SCHEMES:
        lap = laplacian(f, scheme).values
        parts = second_derivative(f, "x", scheme).values + second_derivative(f, "y", scheme).values
        np.testing.assert_allclose(lap, parts, atol=1e-12)


def band_limited(seed, n=64, kmax=8, pitch=1.0):
    rng = np.random.default_rng(seed)
    spec = np.zeros((n, n), complex)
    spec[:kmax, :kmax] = rng.standard_normal((kmax, kmax)) + 1j * rng.standard_normal((kmax, kmax))
    return ScalarField(np.real(np.fft.ifft2(spec)) * n, pitch)


def test_div_grad_equals_laplacian_spectral():
    f = band_limited(5)
    lap = laplacian(f, SPECTRAL).values
    gx, gy = gradient(f, SPECTRAL)
    dg = divergence(gx, gy, SPECTRAL).values
    assert np.max(np.abs(dg - lap)) < 1e-12 * np.max(np.abs(lap))


def test_div_grad_approximates_laplacian_fd():
    # wide stencil vs compact stencil agree to discretization order on smooth data
    n, pitch = 128, 1.0
    x, y = coords((n, n), pitch)
    f = ScalarField(np.sin(2 * np.pi * x / 64) * np.cos(2 * np.pi * y / 32), pitch)
    gx, gy = gradient(f, FD_PERIODIC)
    dg = divergence(gx, gy, FD_PERIODIC).values
    lap = laplacian(f, FD_PERIODIC).values
    assert np.max(np.abs(dg - lap)) < 0.02 * np.max(np.abs(lap))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(a=finite, b=finite, s1=st.integers(0, 2**31), s2=st.integers(0, 2**31),
       scheme=st.sampled_from(ALL_SCHEMES))
def test_operators_linear(a, b, s1, s2, scheme):
    f, g = random_field(s1, (16, 12), 0.5), random_field(s2, (16, 12), 0.5)
    combo = f.like(a * f.values + b * g.values)
    ops = [
        lambda h: laplacian(h, scheme).values,
        lambda h: mixed_derivative(h, scheme).values,
        lambda h: gradient(h, scheme)[0].values,
        lambda h: gradient(h, scheme)[1].values,
    ]
    for op in ops:
        lhs = op(combo)
        rhs = a * op(f) + b * op(g)
        scale = (abs(a) + abs(b) + 1) * max(np.max(np.abs(op(f))), np.max(np.abs(op(g))), 1.0)
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale
