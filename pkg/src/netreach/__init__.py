"""Exact and positive reachability of transport flows on networks.

The package builds the graph matrices of a weighted network, evolves states
exactly in a piecewise-polynomial algebra, decides (positive)
controllability from the Krylov span and cone of ``B^k b``, and synthesizes
and verifies steering controls.
"""
__version__ = "0.1.0"

from .funcspace import ExtendedState, PiecewisePoly, lp_norm
from .network import GraphMatrices, NetworkSpec, build_matrices, load_network, parse_network, validate_relations
from .semigroup import DynamicSystem, StaticSystem
from .reach import cone_reach, dynamic_reach_structure, krylov_reach, membership_exact, network_reach
from .control import (
    ControlSignal,
    controllability_map_dynamic,
    controllability_map_static,
    synthesize,
    synthesize_positive,
    verify_closed_loop,
)

__all__ = [
    "__version__",
    "PiecewisePoly",
    "ExtendedState",
    "lp_norm",
    "NetworkSpec",
    "GraphMatrices",
    "build_matrices",
    "load_network",
    "parse_network",
    "validate_relations",
    "StaticSystem",
    "DynamicSystem",
    "krylov_reach",
    "network_reach",
    "membership_exact",
    "cone_reach",
    "dynamic_reach_structure",
    "ControlSignal",
    "controllability_map_static",
    "controllability_map_dynamic",
    "synthesize",
    "synthesize_positive",
    "verify_closed_loop",
]
