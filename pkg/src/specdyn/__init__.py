"""Learn periodic multi-band reflectance dynamics with Euler/RK4 residual networks."""

__version__ = "0.1.0"

from .augment import ReflectanceSeries, augment, extract_reflectance
from .cube import SpectralCube, read_cube, write_cube
from .delta import DeltaNet, init_delta
from .errors import ContractError, DivergenceError, FormatError
from .evaluation import HorizonReport, evaluate_longrun, rmse, sae
from .integrators import StepperKind, Trajectory, euler_step, rk4_step, rollout
from .model import Model, ModelKind, forecast, init_model, load_checkpoint, save_checkpoint
from .training import TrainConfig, train

__all__ = [
    "ReflectanceSeries", "augment", "extract_reflectance", "SpectralCube", "read_cube",
    "write_cube", "DeltaNet", "init_delta", "ContractError", "DivergenceError", "FormatError",
    "HorizonReport", "evaluate_longrun", "rmse", "sae", "StepperKind", "Trajectory",
    "euler_step", "rk4_step", "rollout", "Model", "ModelKind", "forecast", "init_model",
    "load_checkpoint", "save_checkpoint", "TrainConfig", "train",
]
