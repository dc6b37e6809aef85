"""Synthetic scenarios shared by the CLI and the acceptance suite.

Default geometry is 1 m propagation at 17 keV with 5.8 um pixels. Phantom
sizes are chosen so that the simulated sample images stay positive and the
diffusion map varies slowly compared with the speckle.
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from .core import Geometry, ScalarField, SpecklePair
from .diffops import StencilScheme, laplacian
from .forward import add_noise, forward_full, forward_simplified, forward_tensor
from .metrics import Roi, cnr_stats
from .solver import SolverOptions, solve_least_squares, solve_two_shot
from .synth import (
    SpeckleSpec,
    gaussian_phase_phantom,
    generate_speckle,
    smooth_diffusion_phantom,
)

DEFAULT_DELTA = 1.0
DEFAULT_ENERGY = 17000.0
DEFAULT_PITCH = 5.8e-6

MODES = ("full", "simplified", "tensor")


def derive_seed(seed, *keys):
    """Independent 32-bit seed for a (seed, role, index...) tuple."""
    return int(np.random.SeedSequence([int(seed), *keys]).generate_state(1)[0])


_ROLE_SPECKLE, _ROLE_NOISE_REF, _ROLE_NOISE_SAMPLE = 1, 2, 3


@dataclass(frozen=True)
class SimulationParams:
    """Everything needed to regenerate a synthetic data set.

    Lengths are meters. ``None`` lengths are resolved from the pitch by
    :meth:`resolved`.
    """

    seed: int = 0
    size: int = 256
    pitch: float = DEFAULT_PITCH
    delta: float = DEFAULT_DELTA
    energy: float = DEFAULT_ENERGY
    correlation_length: float = None   # default 2 px
    contrast: float = 0.2
    phase_amplitude: float = 1.0
    phase_sigma: float = None          # default 40 px
    diffusion_peak: float = 5e-11
    diffusion_sigma: float = None      # default 80 px
    anisotropy: float = 2.0            # D_xx / D_yy in tensor mode
    n_positions: int = 2
    noise: float = 0.0
    mode: str = "simplified"
    scheme: str = "five_point_fd"
    boundary: str = "mirror"

    def resolved(self):
        px = self.pitch
        out = dict(asdict(self))
        for name, n_px in (("correlation_length", 2), ("phase_sigma", 40), ("diffusion_sigma", 80)):
            if out[name] is None:
                out[name] = n_px * px
        if out["mode"] not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {out['mode']!r}")
        if out["n_positions"] < 1:
            raise ValueError("n_positions must be at least 1")
        if out["mode"] == "tensor" and out["anisotropy"] <= 0:
            raise ValueError("anisotropy must be positive")
        return SimulationParams(**out)

    @property
    def geometry(self):
        return Geometry(self.delta, self.energy, self.pitch)

    @property
    def stencil(self):
        return StencilScheme(self.scheme, self.boundary)


@dataclass
class Simulation:
    params: SimulationParams
    references: List[ScalarField]
    samples: List[ScalarField]
    truth: Dict[str, ScalarField] = field(default_factory=dict)

    @property
    def pairs(self):
        return [SpecklePair(r, s, str(i)) for i, (r, s) in enumerate(zip(self.references, self.samples))]


def speckle_references(seed, n, size, pitch, correlation_length, contrast):
    return [
        generate_speckle(SpeckleSpec(
            derive_seed(seed, _ROLE_SPECKLE, i), size, size, pitch,
            correlation_length, 1.0, contrast,
        ))
        for i in range(n)
    ]


def simulate(params: SimulationParams) -> Simulation:
    """Generate N reference/sample pairs and the ground-truth maps."""
    p = params.resolved()
    g, scheme, n = p.geometry, p.stencil, p.size
    phi = gaussian_phase_phantom(n, n, p.pitch, p.phase_amplitude, p.phase_sigma)
    d = smooth_diffusion_phantom(n, n, p.pitch, p.diffusion_peak, p.diffusion_sigma)
    truth = {"phi": phi, "lap_phi": laplacian(phi, scheme)}
    if p.mode == "tensor":
        d_xx = d.like(p.anisotropy * d.values)
        d_yy = d
        d_xy = d.like(np.zeros(d.shape))
        truth.update(d_xx=d_xx, d_yy=d_yy, d_xy=d_xy)
    else:
        truth["d_eff"] = d

    refs = speckle_references(p.seed, p.n_positions, n, p.pitch, p.correlation_length, p.contrast)
    samples = []
    for r in refs:
        if p.mode == "full":
            samples.append(forward_full(r, phi, d, g, scheme))
        elif p.mode == "simplified":
            samples.append(forward_simplified(r, phi, d, g, scheme))
        else:
            samples.append(forward_tensor(r, phi, d_xx, d_yy, d_xy, g, scheme))
    if p.noise > 0:
        refs = [add_noise(r, derive_seed(p.seed, _ROLE_NOISE_REF, i), p.noise) for i, r in enumerate(refs)]
        samples = [add_noise(s, derive_seed(p.seed, _ROLE_NOISE_SAMPLE, i), p.noise) for i, s in enumerate(samples)]
    return Simulation(p, refs, samples, truth)


def solve(pairs, geometry, opts=SolverOptions()):
    """Closed form for two positions, least squares otherwise."""
    if len(pairs) == 2:
        return solve_two_shot(pairs[0], pairs[1], geometry, opts)
    return solve_least_squares(pairs, geometry, opts)


# --- contrast-to-noise sweep ------------------------------------------------

@dataclass(frozen=True)
class CnrScenario:
    """Uniformly scattering slab containing a weakly scattering inclusion.

    The background ROI sits in the homogeneous slab far from the inclusion;
    the feature ROI covers the inclusion centre, where D_eff drops to
    ``(1 - depth)`` of the slab value. CNR is therefore positive.
    """

    seed: int = 7
    size: int = 256
    slab_d: float = 5e-11
    depth: float = 1.0
    inclusion_sigma_px: float = 20.0
    noise: float = 0.01
    background: Roi = Roi(8, 8, 64, 64)
    feature: Roi = Roi(118, 118, 20, 20)

    def diffusion(self, pitch):
        dip = smooth_diffusion_phantom(
            self.size, self.size, pitch, self.depth * self.slab_d, self.inclusion_sigma_px * pitch
        )
        return dip.like(self.slab_d - dip.values)


def cnr_sweep(n_values=(2, 4, 10), scenario=CnrScenario(), geometry=None):
    """Reconstruct D_eff from the first N positions for each N; same data throughout.

    Returns a list of ``(n, CnrStats, d_eff_array)``.
    """
    g = geometry or Geometry(DEFAULT_DELTA, DEFAULT_ENERGY, DEFAULT_PITCH)
    n_max = max(n_values)
    size, h = scenario.size, g.pitch
    phi = gaussian_phase_phantom(size, size, h, 1.0, 40 * h)
    d = scenario.diffusion(h)
    refs = speckle_references(scenario.seed, n_max, size, h, 2 * h, 0.2)
    pairs = []
    for i, r in enumerate(refs):
        s = forward_full(r, phi, d, g)
        pairs.append(SpecklePair(
            add_noise(r, derive_seed(scenario.seed, _ROLE_NOISE_REF, i), scenario.noise),
            add_noise(s, derive_seed(scenario.seed, _ROLE_NOISE_SAMPLE, i), scenario.noise),
            str(i),
        ))
    out = []
    for n in n_values:
        res = solve(pairs[:n], g)
        out.append((n, cnr_stats(res.d_eff, scenario.background, scenario.feature), res.d_eff.values))
    return out
