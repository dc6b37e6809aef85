"""Per-pixel inversion of the simplified speckle model.

Every mask position ``i`` contributes one linear equation per pixel::

    (D/k) I_Ri * lap(phi)  -  D lap(I_Ri) * D_eff  =  I_Ri - I_Si

with D the propagation distance. Two positions give a square system that
is solved in closed form; more positions are solved in the least-squares
sense with uniform weights. The directional variant replaces the single
``lap(I_Ri)`` column by the three second derivatives of ``I_Ri``.

Conditioning
------------
A pixel is *degenerate* when the coefficient columns are nearly parallel.
Its conditioning number ``m`` (the 2x2 determinant magnitude, or the root
of the smallest Gram eigenvalue for the tensor case) is compared with
``denominator_epsilon * median(m)``; in addition, any pixel whose columns
subtend a sine below :data:`SINE_FLOOR` is degenerate regardless of the
median. Degenerate pixels are filled from the nearest well-conditioned
pixel and reported in a boolean mask. If every pixel is degenerate a
:class:`~mist.core.DegenerateSystemError` is raised.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import ndimage

from .core import (
    DegenerateSystemError,
    Geometry,
    ReconstructionResult,
    ScalarField,
    TensorResult,
    check_same_grid,
    check_solver_size,
)
from .diffops import (
    DEFAULT_SCHEME,
    StencilScheme,
    gradient_array,
    laplacian_array,
    mixed_derivative_array,
    second_derivative_array,
)

#: columns whose normalized cross product falls below this are rank deficient
SINE_FLOOR = 1e-7


@dataclass(frozen=True)
class SolverOptions:
    denominator_epsilon: float = 1e-6
    clamp_negative_d: bool = False
    scheme: StencilScheme = field(default_factory=StencilScheme)

    def __post_init__(self):
        if not self.denominator_epsilon >= 0:
            raise ValueError("denominator_epsilon must be non-negative")


DEFAULT_OPTIONS = SolverOptions()


def _check_pairs(pairs, geometry, minimum):
    pairs = list(pairs)
    if len(pairs) < minimum:
        raise ValueError(f"need at least {minimum} speckle pairs, got {len(pairs)}")
    fields = [f for p in pairs for f in (p.reference, p.sample)]
    check_same_grid(*fields)
    check_solver_size(fields[0])
    if not np.isclose(fields[0].pitch, geometry.pitch, rtol=1e-12, atol=0):
        raise ValueError(
            f"image pitch {fields[0].pitch} m does not match geometry pitch {geometry.pitch} m"
        )
    return pairs


def _degenerate_mask(m, sine, eps):
    """Flag pixels with small conditioning ``m`` or near-parallel columns."""
    bad = ~(sine > SINE_FLOOR)
    good_m = m[~bad]
    if good_m.size:
        bad |= m < eps * np.median(good_m)
    if bad.all():
        raise DegenerateSystemError(
            "linear system is rank deficient at every pixel "
            "(are the mask positions distinct?)"
        )
    return bad


def _fill_nearest(values, bad):
    """Replace flagged pixels by the value at the nearest unflagged pixel."""
    if not bad.any():
        return values
    idx = ndimage.distance_transform_edt(bad, return_distances=False, return_indices=True)
    return values[tuple(idx)]


def _columns(pairs, geometry, scheme):
    """Per-pair coefficient arrays (phase column, diffusion column, rhs)."""
    h = geometry.pitch
    c_phase = geometry.delta / geometry.wave_number
    a, b, r = [], [], []
    for p in pairs:
        i_r = p.reference.values
        a.append(c_phase * i_r)
        b.append(-geometry.delta * laplacian_array(i_r, h, scheme))
        r.append(i_r - p.sample.values)
    return np.array(a), np.array(b), np.array(r)


def _residual_rms(a, b, r, lap_phi, d_eff):
    res = r - a * lap_phi - b * d_eff
    return np.sqrt(np.mean(res * res, axis=0))


def solve_two_shot(p1, p2, geometry: Geometry, opts=DEFAULT_OPTIONS) -> ReconstructionResult:
    """Closed-form recovery of lap(phi) and D_eff from two mask positions.

    The diffusion map is::

        D_eff = (I_S1 I_R2 - I_S2 I_R1) / (D (I_R2 lap I_R1 - I_R1 lap I_R2))

    and lap(phi) is the mean of the two back-substituted rows.
    """
    _check_pairs([p1, p2], geometry, 2)
    scheme = opts.scheme
    h = geometry.pitch
    i1, i2 = p1.reference.values, p2.reference.values
    l1 = laplacian_array(i1, h, scheme)
    l2 = laplacian_array(i2, h, scheme)
    r1 = i1 - p1.sample.values
    r2 = i2 - p2.sample.values

    den = i2 * l1 - i1 * l2
    m = np.abs(den)
    scale = np.sqrt((i1 * i1 + i2 * i2) * (l1 * l1 + l2 * l2))
    with np.errstate(divide="ignore", invalid="ignore"):
        sine = m / scale
    bad = _degenerate_mask(m, sine, opts.denominator_epsilon)

    safe = np.where(bad, 1.0, den)
    d_eff = (r2 * i1 - r1 * i2) / (geometry.delta * safe)
    k_over_delta = geometry.wave_number / geometry.delta
    row1 = k_over_delta * (r1 + geometry.delta * d_eff * l1) / i1
    row2 = k_over_delta * (r2 + geometry.delta * d_eff * l2) / i2
    lap_phi = 0.5 * (row1 + row2)

    d_eff = _fill_nearest(d_eff, bad)
    lap_phi = _fill_nearest(lap_phi, bad)
    a, b, r = _columns([p1, p2], geometry, scheme)
    residual = _residual_rms(a, b, r, lap_phi, d_eff)
    like = p1.reference.like
    return ReconstructionResult(
        lap_phi=like(lap_phi), d_eff=like(d_eff), residual_rms=like(residual),
        degenerate=bad, n_pairs=2,
    )


def solve_least_squares(pairs, geometry: Geometry, opts=DEFAULT_OPTIONS) -> ReconstructionResult:
    """Unweighted per-pixel least squares over N >= 2 mask positions.

    The 2x2 normal equations are solved by Cramer's rule with the
    determinant and numerators written in Cauchy-Binet form, i.e. as sums
    over pairs of positions of products of 2x2 minors. This is algebraically
    the normal-equation solution but avoids the cancellation in
    ``sum(a^2) sum(b^2) - sum(ab)^2``. For N = 2 it reduces to the
    closed-form two-position solution.
    """
    pairs = _check_pairs(pairs, geometry, 2)
    a, b, r = _columns(pairs, geometry, opts.scheme)

    det = np.zeros(a.shape[1:])
    num_phase = np.zeros_like(det)
    num_diff = np.zeros_like(det)
    for i, j in combinations(range(len(pairs)), 2):
        minor = a[i] * b[j] - a[j] * b[i]
        det += minor * minor
        num_phase += minor * (r[i] * b[j] - r[j] * b[i])
        num_diff += minor * (a[i] * r[j] - a[j] * r[i])

    m = np.sqrt(det)
    scale = np.sqrt(np.sum(a * a, axis=0) * np.sum(b * b, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        sine = m / scale
    bad = _degenerate_mask(m, sine, opts.denominator_epsilon)

    safe = np.where(bad, 1.0, det)
    lap_phi = _fill_nearest(num_phase / safe, bad)
    d_eff = _fill_nearest(num_diff / safe, bad)
    residual = _residual_rms(a, b, r, lap_phi, d_eff)
    like = pairs[0].reference.like
    return ReconstructionResult(
        lap_phi=like(lap_phi), d_eff=like(d_eff), residual_rms=like(residual),
        degenerate=bad, n_pairs=len(pairs),
    )


def solve_tensor(pairs, geometry: Geometry, opts=DEFAULT_OPTIONS) -> TensorResult:
    """Recover lap(phi), D_xx, D_yy and D_xy from N >= 4 mask positions.

    Each row is ``[(D/k) I_R, -D d2I_R/dx2, -D d2I_R/dy2, -D d2I_R/dxdy]``.
    Columns are normalized to unit length before the 4x4 normal equations
    are solved, so the conditioning test works on a unit-diagonal Gram
    matrix.
    """
    pairs = _check_pairs(pairs, geometry, 4)
    scheme = opts.scheme
    h = geometry.pitch
    delta = geometry.delta
    c_phase = delta / geometry.wave_number

    cols, rhs = [], []
    for p in pairs:
        i_r = p.reference.values
        cols.append(np.stack([
            c_phase * i_r,
            -delta * second_derivative_array(i_r, h, "x", scheme),
            -delta * second_derivative_array(i_r, h, "y", scheme),
            -delta * mixed_derivative_array(i_r, h, scheme),
        ], axis=-1))
        rhs.append(i_r - p.sample.values)
    A = np.stack(cols, axis=-2)            # (H, W, N, 4)
    r = np.stack(rhs, axis=-1)             # (H, W, N)

    norms = np.sqrt(np.sum(A * A, axis=-2))  # (H, W, 4)
    norms = np.where(norms > 0, norms, 1.0)
    An = A / norms[..., np.newaxis, :]
    gram = np.einsum("...ni,...nj->...ij", An, An)
    rhs_n = np.einsum("...ni,...n->...i", An, r)

    lam_min = np.linalg.eigvalsh(gram)[..., 0]
    m = np.sqrt(np.clip(lam_min, 0.0, None))
    bad = _degenerate_mask(m, m, opts.denominator_epsilon)

    gram = np.where(bad[..., None, None], np.eye(4), gram)
    x = np.linalg.solve(gram, rhs_n[..., np.newaxis])[..., 0] / norms
    x = np.stack([_fill_nearest(x[..., q], bad) for q in range(4)], axis=-1)
    res = r - np.einsum("...ni,...i->...n", A, x)
    residual = np.sqrt(np.mean(res * res, axis=-1))

    like = pairs[0].reference.like
    return TensorResult(
        lap_phi=like(x[..., 0]), d_xx=like(x[..., 1]), d_yy=like(x[..., 2]),
        d_xy=like(x[..., 3]), residual_rms=like(residual), degenerate=bad,
    )


def validate_decorrelation(i_r: ScalarField, phi: ScalarField, scheme=DEFAULT_SCHEME):
    """Relative size of the neglected ``grad I_R . grad phi`` term.

    Returns ``mean(grad I_R . grad phi) / mean(|grad I_R| |grad phi|)``,
    which lies in [-1, 1]. Zero when phi is constant.
    """
    check_same_grid(i_r, phi)
    gix, giy = gradient_array(i_r.values, i_r.pitch, scheme)
    gpx, gpy = gradient_array(phi.values, phi.pitch, scheme)
    norm = np.mean(np.hypot(gix, giy) * np.hypot(gpx, gpy))
    if norm == 0:
        return 0.0
    return float(np.mean(gix * gpx + giy * gpy) / norm)
