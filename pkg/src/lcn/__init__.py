"""Inference for logical credal networks: probability-bound sentences over logic formulas.

Submodules are imported on first attribute access so that ``lcn`` stays cheap
to import (and the CLI can set thread limits before numpy loads).
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "parse_program": "parser", "parse_formula": "parser", "parse_query": "parser", "load": "parser",
    "ground": "model", "GroundProgram": "model", "LCNProgram": "model",
    "build_dependency_graph": "depgraph", "markov_statements": "depgraph",
    "query_interval": "exact", "query_maxent": "exact", "factored_query_interval": "exact",
    "credal_vertex_oracle": "exact",
    "run_bp": "bp", "build_factor_graph": "bp",
    "map_assignment": "map_inference", "MapTask": "map_inference",
    "SolverConfig": "solver", "solve": "solver",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module 'lcn' has no attribute {name!r}")
