"""Domain types shared by every stage of the pipeline.

All quantities are SI: lengths in meters, phases in radians. Photon energy
is accepted in eV and converted to a wave number once, in :class:`Geometry`.
Intensities are relative units; flat-field normalization is left to the
caller.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import constants

#: h*c expressed in eV*m
HC_EV_M = constants.h * constants.c / constants.e

#: smallest width/height accepted by the solvers
MIN_SOLVER_SIZE = 8


class MistError(Exception):
    """Base class for errors raised by this package."""


class DegenerateSystemError(MistError):
    """The per-pixel linear system is rank deficient everywhere."""


def wave_number_from_energy(energy):
    """Return the X-ray wave number ``2*pi/lambda`` in rad/m.

    Parameters
    ----------
    energy : float
        Photon energy in eV.
    """
    energy = float(energy)
    if not np.isfinite(energy) or energy <= 0:
        raise ValueError(f"energy must be positive and finite, got {energy!r}")
    return 2.0 * np.pi * energy / HC_EV_M


def _positive(name, value):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A 2D real-valued image with a uniform pixel pitch.

    ``values`` is stored as a read-only float64 array of shape
    ``(height, width)``; row index is y, column index is x.
    """

    values: np.ndarray
    pitch: float = 1.0

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"field values must be 2D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("field must contain at least one pixel")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite (no NaN/Inf)")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "pitch", _positive("pitch", self.pitch))

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def like(self, values):
        """New field with the same pitch and different values."""
        return ScalarField(values, self.pitch)

    def coordinates(self):
        """Pixel-centre coordinates ``(x, y)`` in meters, each of field shape."""
        y, x = np.indices(self.shape, dtype=np.float64)
        return x * self.pitch, y * self.pitch

    def same_grid(self, other):
        return self.shape == other.shape and self.pitch == other.pitch

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def check_same_grid(*fields):
    """Raise ``ValueError`` unless all fields share shape and pitch."""
    first = fields[0]
    for f in fields[1:]:
        if not first.same_grid(f):
            raise ValueError(
                f"field grids differ: {first.shape} @ {first.pitch} m vs "
                f"{f.shape} @ {f.pitch} m"
            )


def check_solver_size(f):
    if f.width < MIN_SOLVER_SIZE or f.height < MIN_SOLVER_SIZE:
        raise ValueError(
            f"fields entering a solver must be at least "
            f"{MIN_SOLVER_SIZE}x{MIN_SOLVER_SIZE}, got {f.width}x{f.height}"
        )


@dataclass(frozen=True)
class Geometry:
    """Propagation distance, photon energy and detector pitch."""

    delta: float
    energy: float
    pitch: float

    def __post_init__(self):
        object.__setattr__(self, "delta", _positive("delta", self.delta))
        object.__setattr__(self, "energy", _positive("energy", self.energy))
        object.__setattr__(self, "pitch", _positive("pitch", self.pitch))

    @property
    def wave_number(self):
        return wave_number_from_energy(self.energy)


@dataclass(frozen=True)
class SpecklePair:
    """Reference and sample images recorded at one mask position."""

    reference: ScalarField
    sample: ScalarField
    mask_position_id: str = ""

    def __post_init__(self):
        check_same_grid(self.reference, self.sample)
        if np.any(self.reference.values <= 0):
            raise ValueError("reference intensities must be strictly positive")

    @property
    def shape(self):
        return self.reference.shape

    @property
    def pitch(self):
        return self.reference.pitch


@dataclass(frozen=True)
class ReconstructionResult:
    """Output of the scalar solvers.

    ``degenerate`` marks pixels whose linear system failed the conditioning
    test; their values in ``lap_phi`` and ``d_eff`` were filled from the
    nearest well-conditioned pixel.
    """

    lap_phi: ScalarField
    d_eff: ScalarField
    residual_rms: ScalarField
    degenerate: np.ndarray
    phi: Optional[ScalarField] = None
    n_pairs: int = 0

    def __post_init__(self):
        fields = [self.lap_phi, self.d_eff, self.residual_rms]
        if self.phi is not None:
            fields.append(self.phi)
        check_same_grid(*fields)
        if self.degenerate.shape != self.lap_phi.shape:
            raise ValueError("degenerate mask shape does not match the fields")


@dataclass(frozen=True)
class TensorResult:
    """Phase Laplacian and the three independent diffusion tensor components."""

    lap_phi: ScalarField
    d_xx: ScalarField
    d_yy: ScalarField
    d_xy: ScalarField
    residual_rms: ScalarField
    degenerate: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        check_same_grid(self.lap_phi, self.d_xx, self.d_yy, self.d_xy, self.residual_rms)
