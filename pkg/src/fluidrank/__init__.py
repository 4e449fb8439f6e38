"""PageRank via residual-driven fluid diffusion."""

from .engine import (ConvergenceTrace, DiffusionParams, DiffusionState,
                     StarvationError, collect, diffuse, error_bound, init,
                     init_from_fluid, run)
from .graph import (GraphDelta, SparseGraph, apply_delta, delta_columns,
                    dump_edge_list, load_delta, load_edge_list)
from .sched import make_scheduler

__version__ = "0.1.0"

__all__ = [
    "ConvergenceTrace", "DiffusionParams", "DiffusionState", "StarvationError",
    "GraphDelta", "SparseGraph", "apply_delta", "collect", "delta_columns",
    "diffuse", "dump_edge_list", "error_bound", "init", "init_from_fluid",
    "load_delta", "load_edge_list", "make_scheduler", "run", "__version__",
]
