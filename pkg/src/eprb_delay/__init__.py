"""Delayed-relaxation model of two-photon polarization correlations.

Subpackages: state algebra (``states``), Lindblad relaxation (``lindblad``),
the delay equation for the correlation parameter (``dde``), the stochastic
EPRB experiment (``experiment``), coincidence spectra (``spectral``), and a
CLI (``cli``).
"""

__version__ = "0.1.0"

from .dde import DdeParams, RhoDTrajectory, integrate_dde, step_response  # noqa: E402
from .experiment import (  # noqa: E402
    ExperimentConfig,
    feasibility,
    generate_settings,
    generate_time_tags,
    s_chsh_from_counts,
    s_chsh_ideal,
    simulate_rho_d,
    tune_gamma,
)
from .states import (  # noqa: E402
    Projector,
    RelaxationState,
    RotInvariantState,
    TwistInvariantState,
    coincidence_probability,
    concurrence,
    is_positive,
    make_rho_alpha,
)

__all__ = [
    "DdeParams",
    "ExperimentConfig",
    "Projector",
    "RelaxationState",
    "RhoDTrajectory",
    "RotInvariantState",
    "TwistInvariantState",
    "__version__",
    "coincidence_probability",
    "concurrence",
    "feasibility",
    "generate_settings",
    "generate_time_tags",
    "integrate_dde",
    "is_positive",
    "make_rho_alpha",
    "s_chsh_from_counts",
    "s_chsh_ideal",
    "simulate_rho_d",
    "step_response",
    "tune_gamma",
]
