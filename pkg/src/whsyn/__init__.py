"""Controller design and simulation for control tasks that may miss deadlines.

A task subject to a weakly-hard constraint (at most ``r`` misses in any
``s`` consecutive activations) is modelled as a switched linear system over
a minimized constraint graph; linear matrix inequalities then certify or
synthesize state-feedback gains with a guaranteed l2 gain.
"""
from .constraints import (ConstraintError, InadmissibleLabel, Kind, WHConstraint, WHGraph, admits, advance,
                          build_graph, convert, initial_node, language)
from .lifting import ALL_STRATEGIES, Actuator, LiftedSystem, Overrun, Plant, StrategyPair, closed_loop, lift
from .lmi import Controller, SolverOptions, Status, analyze, synthesize, verify_certificate

__version__ = "0.1.0"

__all__ = [
    "ConstraintError", "InadmissibleLabel", "Kind", "WHConstraint", "WHGraph", "admits", "advance",
    "build_graph", "convert", "initial_node", "language", "ALL_STRATEGIES", "Actuator", "LiftedSystem",
    "Overrun", "Plant", "StrategyPair", "closed_loop", "lift", "Controller", "SolverOptions", "Status",
    "analyze", "synthesize", "verify_certificate",
]
