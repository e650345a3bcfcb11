"""Mean-field, stability, spectral, microscopic and finite-size analysis of
all-to-all coupled three-level quantum limit-cycle oscillators."""

__version__ = "0.1.0"

from .model import GroupLabel, MeanFieldState, ModelParams  # noqa: E402
from .dynamics import IntegratorConfig, Trajectory, integrate, order_parameter  # noqa: E402
from .stability import critical_coupling, spectral_abscissa  # noqa: E402

__all__ = [
    "GroupLabel",
    "MeanFieldState",
    "ModelParams",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "order_parameter",
    "critical_coupling",
    "spectral_abscissa",
]
