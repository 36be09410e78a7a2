"""Future-graph learning for delivery pressure forecasting on a synthetic food-delivery world."""

from .config import ABLATION_ROWS, AblationMask, ModelDims, RunConfig, TrainConfig
from .world import WorldConfig, make_dataset, preset

__version__ = "0.1.0"

__all__ = ["ABLATION_ROWS", "AblationMask", "ModelDims", "RunConfig", "TrainConfig", "WorldConfig",
           "make_dataset", "preset"]
