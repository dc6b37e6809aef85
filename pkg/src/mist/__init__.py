"""Multi-modal intrinsic speckle tracking: phase and dark-field recovery
from reference/sample speckle image pairs."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DegenerateSystemError,
    Geometry,
    MistError,
    ReconstructionResult,
    ScalarField,
    SpecklePair,
    TensorResult,
    wave_number_from_energy,
)
from .diffops import StencilScheme  # noqa: E402
from .forward import add_noise, forward_full, forward_simplified, forward_tensor  # noqa: E402
from .phase import integrate_phase  # noqa: E402
from .solver import (  # noqa: E402
    SolverOptions,
    solve_least_squares,
    solve_tensor,
    solve_two_shot,
    validate_decorrelation,
)
