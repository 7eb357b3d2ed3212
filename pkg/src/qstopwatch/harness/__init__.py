from .config import SweepConfig, load_config
from .sweep import PointResult, SweepResult, run_point, run_sweep

__all__ = ["PointResult", "SweepConfig", "SweepResult", "load_config", "run_point", "run_sweep"]
