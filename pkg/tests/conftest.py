import logging

import numpy as np
import pytest

from mist.core import Geometry, ScalarField
from mist.experiments import derive_seed
from mist.synth import SpeckleSpec, gaussian_phase_phantom, generate_speckle, smooth_diffusion_phantom

PITCH = 5.8e-6
N = 256


@pytest.fixture(autouse=True)
def _quiet_forward(caplog):
    caplog.set_level(logging.ERROR, logger="mist.forward")


@pytest.fixture(scope="session")
def geometry():
    return Geometry(delta=1.0, energy=17000.0, pitch=PITCH)


def speckle(seed, size=N, corr_px=2, contrast=0.2, pitch=PITCH):
    return generate_speckle(SpeckleSpec(seed, size, size, pitch, corr_px * pitch, 1.0, contrast))


@pytest.fixture(scope="session")
def references():
    return [speckle(derive_seed(11, i)) for i in range(10)]


@pytest.fixture(scope="session")
def phase_phantom():
    return gaussian_phase_phantom(N, N, PITCH, 1.0, 40 * PITCH)


@pytest.fixture(scope="session")
def diffusion_phantom():
    return smooth_diffusion_phantom(N, N, PITCH, 5e-11, 80 * PITCH)


def random_field(seed, shape=(32, 40), pitch=1.0):
    return ScalarField(np.random.default_rng(seed).standard_normal(shape), pitch)


# one line per acceptance criterion, echoed in the terminal summary so the
# verdicts are visible even when pytest captures stdout
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
