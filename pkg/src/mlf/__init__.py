"""mlf: a numerical laboratory for Lefschetz fibrations on cotangent bundles.

Builds, from a Morse function and adapted gradient on a concrete manifold,
the symplectic Lefschetz fibration data on T*M (coarse complexification,
rearranged Lyapunov function, h = f + ig) and verifies the explicitly
computable structure by independent numerical oracles: transport formulas,
Dehn-twist monodromy, vanishing cycles and thimbles, Lyapunov inequalities,
Morse-Smale diagnostics, Weinstein handle topology.
"""

__version__ = "0.1.0"

from .geometry import (
    EuclideanMorseSystem,
    MorseSystem,
    PhasePoint,
    SphereMorseSystem,
    TorusMorseSystem,
)
from .ode import FlowResult, OdeConfig
from .scenarios import CANONICAL_SCENARIOS, build_scenario

__all__ = [
    "CANONICAL_SCENARIOS",
    "EuclideanMorseSystem",
    "FlowResult",
    "MorseSystem",
    "OdeConfig",
    "PhasePoint",
    "SphereMorseSystem",
    "TorusMorseSystem",
    "build_scenario",
    "__version__",
]
