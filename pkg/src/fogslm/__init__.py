"""Min-max latency workload split and power control for an IoT-fog-cloud chain."""

__version__ = "0.1.0"

from .config import ParameterSet
from .model import (
    Allocation,
    LatencyBreakdown,
    LayerParams,
    LinkParams,
    Solution,
    SystemInstance,
    Unbounded,
    evaluate,
)
from .oracle import grid_oracle, inner_minmax
from .slm import slm_run

__all__ = [
    "Allocation", "LatencyBreakdown", "LayerParams", "LinkParams", "ParameterSet",
    "Solution", "SystemInstance", "Unbounded", "evaluate", "grid_oracle",
    "inner_minmax", "slm_run",
]
