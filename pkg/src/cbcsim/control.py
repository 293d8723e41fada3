"""Controllers and safety filters.

Proportional goal control, unicycle inner-outer control, the explicit scalar
QP, the safe unicycle velocity filter, linear output regulation gains and
control, and a 2D QP safety-filter baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .barriers import BarrierFamily, goal_barriers_eval_all
from .corridor import CorridorParams, bc_full
from .errors import NotHurwitz, PreconditionViolated, SingularBlock

GOAL_RADIUS = 1e-12
QP_FEAS_TOL = 1e-9


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return float(np.mod(theta + np.pi, 2.0 * np.pi) - np.pi)


@dataclass(frozen=True)
class UnicyclePose:
    position: np.ndarray
    heading: float

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.position, dtype=float))
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def forward(self) -> np.ndarray:
        return np.array([np.cos(self.heading), np.sin(self.heading)])

    @property
    def lateral(self) -> np.ndarray:
        return np.array([-np.sin(self.heading), np.cos(self.heading)])


@dataclass(frozen=True)
class ScalarInterval:
    lo: float
    hi: float

    @property
    def feasible(self) -> bool:
        return self.lo <= self.hi

    def clamp(self, v: float) -> float:
        return min(max(v, self.lo), self.hi)


def proportional_control(x, g, kappa: float) -> np.ndarray:
    """u = -kappa (x - g)."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    return -kappa * (x - g)


def unicycle_reference_control(
    pose: UnicyclePose, g, kappa_v: float, kappa_w: float
):
    """Inner-outer loop unicycle control toward a goal position.

    v = -kappa_v o(theta) . (x - g);
    omega = kappa_w atan2(n(theta) . (g - x), o(theta) . (g - x)).
    Returns (0, 0) within GOAL_RADIUS of the goal, where alignment is
    undefined.
    """
    g = np.asarray(g, dtype=float)
    d = g - pose.position
    if float(np.linalg.norm(d)) < GOAL_RADIUS:
        return 0.0, 0.0
    v = -kappa_v * float(pose.forward @ (pose.position - g))
    omega = kappa_w * wrap_angle(
        np.arctan2(float(pose.lateral @ d), float(pose.forward @ d))
    )
    return v, omega


def scalar_interval(constraints) -> ScalarInterval:
    """Feasible interval of constraints a v >= b on a scalar v.

    a = 0 rows are vacuous when b <= 0 and make the problem infeasible
    otherwise.
    """
    lo, hi = -np.inf, np.inf
    for a, b in constraints:
        a = float(a)
        b = float(b)
        if a > 0.0:
            lo = max(lo, b / a)
        elif a < 0.0:
            hi = min(hi, b / a)
        elif b > 0.0:
            return ScalarInterval(np.inf, -np.inf)
    return ScalarInterval(lo, hi)


def scalar_qp(v_desired: float, constraints):
    """argmin (v - v_desired)^2 s.t. a_i v >= b_i, or None if infeasible."""
    interval = scalar_interval(constraints)
    if not interval.feasible:
        return None
    return interval.clamp(float(v_desired))


def safe_unicycle_velocity(
    pose: UnicyclePose,
    g,
    fam: BarrierFamily,
    params: CorridorParams,
    kappa_w: float = None,
):
    """Safety-filtered unicycle (v, omega) toward an eps-safer corridor goal.

    Filters the reference linear velocity through the scalar QP with robot
    safety and eps-safer goal-control barrier constraints; v = 0 is feasible
    under the preconditions, so infeasibility here is a fault.
    """
    g = np.asarray(g, dtype=float)
    x = pose.position
    values, grads = fam.eval_all(x)
    if np.any(values < 0.0):
        raise PreconditionViolated(
            f"unsafe pose: min barrier value {float(np.min(values)):g} < 0"
        )
    corridor = bc_full(fam, x, params)
    if not corridor.contains(g):
        raise PreconditionViolated("goal is outside the eps-safer corridor")

    o = pose.forward
    k, a, eps = params.kappa, params.alpha_rate, params.epsilon
    gvals, ggrads = goal_barriers_eval_all(fam, x, g, k, a, eps)
    rows_a = np.concatenate([grads @ o, ggrads @ o])
    rows_b = np.concatenate([-a * values, -a * gvals])
    v_desired = -k * float(o @ (x - g))
    v = scalar_qp(v_desired, zip(rows_a, rows_b))
    if v is None:
        raise PreconditionViolated("velocity filter infeasible (v = 0 excluded)")
    kw = k if kappa_w is None else kappa_w
    _, omega = unicycle_reference_control(pose, g, k, kw)
    return v, omega


def output_regulation_gains(A, B, C):
    """Solve [A B; C 0] [X; U] = [0; I] by dense LU with partial pivoting."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    block = np.zeros((n + p, n + m))
    block[:n, :n] = A
    block[:n, n:] = B
    block[n:, :n] = C
    if block.shape[0] != block.shape[1]:
        raise SingularBlock("block matrix [A B; C 0] is not square")
    scale = max(float(np.max(np.abs(block))), 1.0)
    try:
        lu, piv = lu_factor(block)
    except Exception as exc:  # LinAlgError on exactly singular input
        raise SingularBlock("block matrix [A B; C 0] is singular") from exc
    if float(np.min(np.abs(np.diag(lu)))) < 1e-12 * scale:
        raise SingularBlock("block matrix [A B; C 0] is rank deficient")
    rhs = np.zeros((n + p, p))
    rhs[n:] = np.eye(p)
    sol = lu_solve((lu, piv), rhs)
    X, U = sol[:n], sol[n:]
    if not np.allclose(C @ X, np.eye(p), atol=1e-10):
        raise SingularBlock("postcondition C X = I failed")
    if not np.allclose(A @ X + B @ U, 0.0, atol=1e-10):
        raise SingularBlock("postcondition A X + B U = 0 failed")
    return X, U


@dataclass(frozen=True)
class LinearPlant:
    """LTI plant with stabilizing gain K and output-regulation maps X, U."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        for name, mat in (("A", A), ("B", B), ("C", C), ("K", K)):
            object.__setattr__(self, name, mat)
        L = A + B @ K
        if np.any(np.linalg.eigvals(L).real >= 0.0):
            raise NotHurwitz("A + B K must be Hurwitz")
        X, U = output_regulation_gains(A, B, C)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "closed_loop", L)


def output_regulation_control(x, y_star, plant: LinearPlant) -> np.ndarray:
    """u = K (x - X y*) + U y*."""
    x = np.asarray(x, dtype=float)
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    return plant.K @ (x - plant.X @ y_star) + plant.U @ y_star


def qp_filter_2d(u_desired, constraints):
    """Exact minimizer of |u - u_desired|^2 over {u : a_i . u >= b_i} in 2D.

    Candidates: u_desired, projections onto single active constraints, and
    pairwise constraint vertices.  Returns None if infeasible.
    """
    u_d = np.asarray(u_desired, dtype=float)
    if u_d.size != 2:
        raise ValueError("qp_filter_2d requires a 2-vector")
    rows = []
    for a, b in constraints:
        a = np.asarray(a, dtype=float)
        b = float(b)
        na = float(np.linalg.norm(a))
        if na < 1e-14:
            if b > 0.0:
                return None
            continue  # vacuous
        rows.append((a, b, na))
    if not rows:
        return u_d.copy()

    def feasible(u):
        return all(a @ u >= b - QP_FEAS_TOL * max(1.0, na) for a, b, na in rows)

    candidates = [u_d]
    for a, b, na in rows:
        resid = b - float(a @ u_d)
        if resid > 0.0:
            candidates.append(u_d + a * (resid / na**2))
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            ai, bi, _ = rows[i]
            aj, bj, _ = rows[j]
            M = np.array([ai, aj])
            det = float(np.linalg.det(M))
            if abs(det) < 1e-12 * max(1.0, np.abs(M).max() ** 2):
                continue
            candidates.append(np.linalg.solve(M, np.array([bi, bj])))
    best = None
    best_obj = np.inf
    for u in candidates:
        if feasible(u):
            obj = float(np.sum((u - u_d) ** 2))
            if obj < best_obj:
                best, best_obj = u, obj
    return best
