"""Adaptive ODE engine shared by flows and parallel transport.

Thin wrapper over scipy's DOP853 with escape detection and per-invariant
drift diagnostics.  Every trajectory is integrated sequentially and
deterministically; the declared first integrals (g along the Hamiltonian
lift, rho along the contact lift, |z_j|^2 along the rotation flow of the
local model) are monitored at the accepted sample points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

COMPLETED = "completed"
ESCAPED = "escaped"
STEP_FAILURE = "step-failure"


@dataclass
class OdeConfig:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    max_step: float = np.inf
    escape_radius: float = 1e4
    max_steps: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.escape_radius <= 0:
            raise ValueError("escape_radius must be positive")


@dataclass
class FlowResult:
    times: np.ndarray
    states: np.ndarray            # (len(times), dim)
    terminal: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]


def flow(rhs: Callable, y0, T: float, cfg: OdeConfig,
         invariants: Optional[dict] = None,
         escape_norm: Optional[Callable] = None,
         n_samples: int = 129) -> FlowResult:
    """Integrate dy/dt = rhs(t, y) for t in [0, T].

    invariants: mapping name -> scalar function of y; the result records the
    max drift of each along the sampled trajectory.
    escape_norm: scalar function of y compared against cfg.escape_radius
    (default: euclidean norm).
    """
    y0 = np.asarray(y0, dtype=float)
    if escape_norm is None:
        escape_norm = lambda y: float(np.linalg.norm(y))

    def escape_event(t, y):
        return escape_norm(y) - cfg.escape_radius

    escape_event.terminal = True
    escape_event.direction = 1.0

    t_eval = np.linspace(0.0, T, n_samples) if T != 0 else np.array([0.0])
    sol = solve_ivp(
        rhs, (0.0, T), y0, method="DOP853",
        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
        t_eval=t_eval, events=[escape_event], dense_output=False,
    )
    if sol.status == 1:
        terminal = ESCAPED
        times = np.append(sol.t, sol.t_events[0])
        states = np.vstack([sol.y.T, sol.y_events[0]]) if len(sol.y_events[0]) else sol.y.T
    elif sol.status == 0:
        terminal = COMPLETED
        times, states = sol.t, sol.y.T
    else:
        terminal = STEP_FAILURE
        times, states = sol.t, sol.y.T

    diagnostics = {}
    if invariants and len(states):
        for name, fn in invariants.items():
            vals = np.array([fn(y) for y in states])
            diagnostics[name] = float(np.max(np.abs(vals - vals[0])))
    return FlowResult(times=times, states=states, terminal=terminal, diagnostics=diagnostics)
