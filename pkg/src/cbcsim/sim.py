"""Deterministic fixed-step closed-loop simulation with full logging.

Controls are sampled and held across each RK4 step (zero-order hold); the
continuous-time safety guarantees therefore hold up to an O(dt) gap absorbed
by the violation tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barriers import BarrierFamily
from .control import wrap_angle
from .errors import NonFiniteDerivative

DEFAULT_DT = 1e-3
VIOLATION_TOL = 1e-6


def rk4_step(field, state, dt: float):
    """Classical 4th-order Runge-Kutta step of d(state)/dt = field(state)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    state = np.asarray(state, dtype=float)
    k1 = np.asarray(field(state), dtype=float)
    k2 = np.asarray(field(state + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(field(state + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(field(state + dt * k3), dtype=float)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise NonFiniteDerivative("non-finite derivative at an RK4 stage")
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Sample:
    t: float
    state: np.ndarray
    control: np.ndarray
    h_values: np.ndarray
    goal: np.ndarray
    goal_in_corridor: bool
    s_star: float = None  # path parameter, when following a path


@dataclass
class Trajectory:
    """Time-stamped closed-loop log; violation_index marks an early stop."""

    kind: str
    dt: float
    samples: list = field(default_factory=list)
    violation_index: int = None

    @property
    def violated(self) -> bool:
        return self.violation_index is not None

    def states(self) -> np.ndarray:
        return np.array([s.state for s in self.samples])

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def h_matrix(self) -> np.ndarray:
        return np.array([s.h_values for s in self.samples])

    def min_barrier(self) -> float:
        return float(self.h_matrix().min())

    @property
    def final_state(self) -> np.ndarray:
        return self.samples[-1].state


class StepDecision:
    """What the controller decided at one sample instant."""

    __slots__ = ("control", "goal", "goal_in_corridor", "s_star")

    def __init__(self, control, goal=None, goal_in_corridor=True, s_star=None):
        self.control = np.atleast_1d(np.asarray(control, dtype=float))
        self.goal = None if goal is None else np.asarray(goal, dtype=float)
        self.goal_in_corridor = bool(goal_in_corridor)
        self.s_star = s_star


def _field_full(state, control):
    return control


def _field_unicycle(state, control):
    v, omega = control
    theta = state[2]
    return np.array([v * np.cos(theta), v * np.sin(theta), omega])


def position_of(kind: str, state: np.ndarray) -> np.ndarray:
    """Coordinates the barrier family is evaluated at for a system kind."""
    if kind == "unicycle":
        return state[:2]
    return state


def run_closed_loop(
    kind: str,
    step_fn,
    fam: BarrierFamily,
    x0,
    duration: float,
    dt: float = DEFAULT_DT,
    plant=None,
    stop_fn=None,
    violation_tol: float = VIOLATION_TOL,
) -> Trajectory:
    """Integrate a closed loop with per-sample barrier logging.

    kind: 'full' (state = position), 'unicycle' (x, y, theta), or 'lor'
    (plant state; requires plant).  step_fn(t, state) -> StepDecision.
    Stops early with the violation index recorded if any barrier drops
    below -violation_tol, or when stop_fn(state) becomes true.
    """
    if kind not in ("full", "unicycle", "lor"):
        raise ValueError(f"unknown system kind {kind!r}")
    if kind == "lor" and plant is None:
        raise ValueError("kind 'lor' requires a plant")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    state = np.atleast_1d(np.asarray(x0, dtype=float))
    n_steps = int(round(duration / dt))
    traj = Trajectory(kind=kind, dt=dt)
    for k in range(n_steps + 1):
        t = k * dt
        decision = step_fn(t, state)
        h = fam.values(position_of(kind, state))
        goal = decision.goal if decision.goal is not None else np.full_like(
            position_of(kind, state), np.nan
        )
        traj.samples.append(
            Sample(
                t=t,
                state=state.copy(),
                control=decision.control.copy(),
                h_values=h,
                goal=goal,
                goal_in_corridor=decision.goal_in_corridor,
                s_star=decision.s_star,
            )
        )
        if np.any(h < -violation_tol):
            traj.violation_index = k
            break
        if stop_fn is not None and stop_fn(state):
            break
        if k == n_steps:
            break
        control = decision.control
        if kind == "full":
            field_fn = lambda s: _field_full(s, control)
        elif kind == "unicycle":
            field_fn = lambda s: _field_unicycle(s, control)
        else:
            field_fn = lambda s: plant.A @ s + plant.B @ control
        state = rk4_step(field_fn, state, dt)
        if kind == "unicycle":
            state[2] = wrap_angle(state[2])
    return traj
