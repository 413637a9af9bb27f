"""Memory-augmented neural-network model-reference adaptive control."""
from .controller import ControllerConfig, build_controller, control, theorem_gains
from .metrics import run_metrics
from .nn import NnGains, TwoLayerNet
from .numerics import NonFiniteState, solve_care, solve_lyapunov
from .scenario import SCENARIOS, b747_plant, get_scenario
from .simulation import VARIANTS, record_diagnostics, simulate

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig",
    "NnGains",
    "NonFiniteState",
    "SCENARIOS",
    "TwoLayerNet",
    "VARIANTS",
    "b747_plant",
    "build_controller",
    "control",
    "get_scenario",
    "record_diagnostics",
    "run_metrics",
    "simulate",
    "solve_care",
    "solve_lyapunov",
    "theorem_gains",
]
