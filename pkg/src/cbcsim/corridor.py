"""Control barrier corridor constructions for the three system classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barriers import BarrierFamily
from .errors import NotHurwitz, UnsafeAnchor
from .geom import Corridor, Halfspace

UNSAFE_TOL = 0.0


@dataclass(frozen=True)
class CorridorParams:
    """Gains shared by corridor constructions.

    kappa: proportional/velocity gain [1/s]; alpha_rate: linear barrier decay
    rate [1/s]; epsilon: extra safety margin in barrier units.
    """

    kappa: float
    alpha_rate: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (
            np.isfinite(self.kappa)
            and np.isfinite(self.alpha_rate)
            and np.isfinite(self.epsilon)
        ):
            raise ValueError("corridor parameters must be finite")
        if self.kappa <= 0.0 or self.alpha_rate <= 0.0 or self.epsilon < 0.0:
            raise ValueError("kappa, alpha_rate > 0 and epsilon >= 0 required")


def _check_anchor(values, allow_unsafe: bool):
    unsafe = bool(np.any(values < UNSAFE_TOL))
    if unsafe and not allow_unsafe:
        raise UnsafeAnchor(
            f"anchor has min barrier value {float(np.min(values)):g} < 0"
        )
    return unsafe


def bc_full(
    fam: BarrierFamily, x, params: CorridorParams, allow_unsafe: bool = False
) -> Corridor:
    """Corridor of the fully actuated system under proportional control.

    One halfspace per barrier:
    kappa grad_h_i(x) . g >= kappa grad_h_i(x) . x - alpha (h_i(x) - epsilon).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    values, grads = fam.eval_all(x)
    unsafe = _check_anchor(values, allow_unsafe)
    k, a, eps = params.kappa, params.alpha_rate, params.epsilon
    halfspaces = [
        Halfspace(k * g, float(k * g @ x - a * (h - eps)))
        for g, h in zip(grads, values)
    ]
    kind = "full_eps" if eps > 0.0 else "full"
    return Corridor(x, halfspaces, kind=kind, unsafe_anchor=unsafe)


def bc_uni(
    fam: BarrierFamily,
    x,
    theta: float,
    params: CorridorParams,
    allow_unsafe: bool = False,
) -> Corridor:
    """Corridor of the unicycle: safety only along the heading direction.

    One halfspace per barrier:
    -kappa_v grad_h_i(x) . o o^T (x - g) >= -alpha h_i(x), o = (cos, sin)(theta).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    o = np.array([np.cos(theta), np.sin(theta)])
    values, grads = fam.eval_all(x)
    unsafe = _check_anchor(values, allow_unsafe)
    kv, a = params.kappa, params.alpha_rate
    proj = grads @ o  # grad_h_i . o
    halfspaces = [
        Halfspace(kv * s * o, float(kv * s * (o @ x) - a * h))
        for s, h in zip(proj, values)
    ]
    return Corridor(x, halfspaces, kind="uni", unsafe_anchor=unsafe)


def _closed_loop_matrix(A, B, K):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    L = A + B @ K
    eig = np.linalg.eigvals(L)
    if np.any(eig.real >= 0.0):
        raise NotHurwitz(f"A+BK has eigenvalues {eig} (real parts must be < 0)")
    return L


def bc_lor(
    fam: BarrierFamily,
    x,
    A,
    B,
    C,
    K,
    X,
    params: CorridorParams,
    allow_unsafe: bool = False,
) -> Corridor:
    """Corridor over desired outputs y* for linear output regulation.

    One halfspace per barrier:
    grad_h_i(x) . (A+BK)(x - X y*) >= -alpha h_i(x), anchored at Cx.
    May be empty; Cx itself is not guaranteed a member.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = _closed_loop_matrix(A, B, K)
    X = np.asarray(X, dtype=float)
    C = np.asarray(C, dtype=float)
    values, grads = fam.eval_all(x)
    unsafe = _check_anchor(values, allow_unsafe)
    a = params.alpha_rate
    halfspaces = []
    for g, h in zip(grads, values):
        row = g @ L  # grad_h^T (A+BK)
        halfspaces.append(Halfspace(-(row @ X), float(-(row @ x) - a * h)))
    anchor = C @ x
    return Corridor(anchor, halfspaces, kind="lor", unsafe_anchor=unsafe)


def output_goal_barriers(fam: BarrierFamily, x, A, B, K, X, alpha_rate, y_star):
    """Goal-output control barrier values; nonnegativity certifies
    y* in bc_lor(x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = _closed_loop_matrix(A, B, K)
    X = np.asarray(X, dtype=float)
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    values, grads = fam.eval_all(x)
    return grads @ (L @ (x - X @ y_star)) + alpha_rate * values


def output_current_barriers(fam: BarrierFamily, x, A, B, C, K, X, alpha_rate):
    """Current-output control barrier values; nonnegativity certifies
    Cx in bc_lor(x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = _closed_loop_matrix(A, B, K)
    X = np.asarray(X, dtype=float)
    C = np.asarray(C, dtype=float)
    proj = np.eye(x.size) - X @ C
    values, grads = fam.eval_all(x)
    return grads @ (L @ (proj @ x)) + alpha_rate * values


def spectral_norm(M, rel_tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest singular value via power iteration on M^T M.

    Deterministic start vector; intended for small dense matrices (dim <= 8).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix must be finite")
    G = M.T @ M
    n = G.shape[0]
    v = np.linspace(1.0, 2.0, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        lam_new = float(v @ (G @ v))
        if abs(lam_new - lam) <= rel_tol * max(lam_new, 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))


def trust_region_contains(
    fam: BarrierFamily, x, A, B, K, X, alpha_rate: float, y_star
) -> bool:
    """Eq.-(27)-style trust region membership of a desired output y*.

    True iff |grad_h_i(x)| |A+BK| |x - X y*| <= alpha h_i(x) for all i.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = _closed_loop_matrix(A, B, K)
    X = np.asarray(X, dtype=float)
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    values, grads = fam.eval_all(x)
    gnorms = np.linalg.norm(grads, axis=1)
    Lnorm = spectral_norm(L)
    dist = float(np.linalg.norm(x - X @ y_star))
    return bool(np.all(gnorms * Lnorm * dist <= alpha_rate * values))
