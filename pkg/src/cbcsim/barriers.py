"""Barrier function families with analytic value/gradient/Hessian.

Implements the power-distance barrier ``|x-q|^p - r^p``, soft-min and
product compositions, uniform epsilon shifts, and goal-control barriers.
Families of power-distance members are evaluated vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BarrierSingularity

SINGULARITY_RADIUS = 1e-12

CONVEX = "convex"
STRICTLY_CONVEX = "strictly_convex"
STRONGLY_CONVEX = "strongly_convex"
NONCONVEX = "nonconvex"


def power_convexity_tag(p: float):
    """(tag, mu) consistent with the power order p."""
    if p == 2.0:
        return STRONGLY_CONVEX, 2.0
    if p > 1.0:
        return STRICTLY_CONVEX, 0.0
    if p == 1.0:
        return CONVEX, 0.0
    return NONCONVEX, 0.0


@dataclass(frozen=True)
class PowerDistanceBarrier:
    """h(x) = |x - q|^p - r^p around an obstacle point q."""

    q: np.ndarray
    r: float
    p: float

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if not (self.r > 0.0 and self.p > 0.0):
            raise ValueError("r and p must be positive")
        object.__setattr__(self, "q", q)
        tag, mu = power_convexity_tag(self.p)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "mu", mu)

    def _delta(self, x, need_derivative: bool):
        d = np.asarray(x, dtype=float) - self.q
        n = float(np.linalg.norm(d))
        if need_derivative and self.p < 2.0 and n < SINGULARITY_RADIUS:
            raise BarrierSingularity(
                f"power-distance derivative singular at |x-q|={n:g} for p={self.p}"
            )
        return d, n

    def value(self, x) -> float:
        _, n = self._delta(x, need_derivative=False)
        return n**self.p - self.r**self.p

    def gradient(self, x) -> np.ndarray:
        d, n = self._delta(x, need_derivative=True)
        if self.p == 2.0:
            return 2.0 * d
        return self.p * n ** (self.p - 2.0) * d

    def hessian(self, x) -> np.ndarray:
        d, n = self._delta(x, need_derivative=True)
        eye = np.eye(d.size)
        if self.p == 2.0:
            return 2.0 * eye
        outer = np.outer(d, d) / n**2
        return self.p * n ** (self.p - 2.0) * (eye + (self.p - 2.0) * outer)


@dataclass(frozen=True)
class AffineBarrier:
    """h(x) = a . x + b; convex with zero Hessian."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "tag", CONVEX)
        object.__setattr__(self, "mu", 0.0)

    def value(self, x) -> float:
        return float(self.a @ np.asarray(x, dtype=float)) + self.b

    def gradient(self, x) -> np.ndarray:
        return self.a.copy()

    def hessian(self, x) -> np.ndarray:
        return np.zeros((self.a.size, self.a.size))


@dataclass(frozen=True)
class ShiftedBarrier:
    """Base barrier lowered by a constant margin; derivatives unchanged."""

    base: object
    eps: float

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        object.__setattr__(self, "tag", self.base.tag)
        object.__setattr__(self, "mu", getattr(self.base, "mu", 0.0))

    def value(self, x) -> float:
        return self.base.value(x) - self.eps

    def gradient(self, x) -> np.ndarray:
        return self.base.gradient(x)

    def hessian(self, x) -> np.ndarray:
        return self.base.hessian(x)


class BarrierFamily:
    """Ordered collection of barrier evaluators.

    ``eval_all`` and ``hessian_apply_all`` take a vectorized fast path when
    every member is a (possibly shifted) power-distance barrier, which is the
    hot case in sensor-based corridors.
    """

    def __init__(self, members):
        self.members = tuple(members)
        if not self.members:
            raise ValueError("family must be non-empty")

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @cached_property
    def _power_arrays(self):
        qs, rs, ps, shifts = [], [], [], []
        for m in self.members:
            shift = 0.0
            while isinstance(m, ShiftedBarrier):
                shift += m.eps
                m = m.base
            if not isinstance(m, PowerDistanceBarrier):
                return None
            qs.append(m.q)
            rs.append(m.r)
            ps.append(m.p)
            shifts.append(shift)
        return (
            np.array(qs),
            np.array(rs),
            np.array(ps),
            np.array(shifts),
        )

    def _power_geometry(self, x):
        qs, rs, ps, shifts = self._power_arrays
        d = np.asarray(x, dtype=float) - qs
        n = np.linalg.norm(d, axis=1)
        if np.any((ps < 2.0) & (n < SINGULARITY_RADIUS)):
            raise BarrierSingularity("power-distance derivative singular")
        return qs, rs, ps, shifts, d, n

    def eval_all(self, x):
        """(values (m,), gradients (m, n)) of every member at x."""
        if self._power_arrays is not None:
            _, rs, ps, shifts, d, n = self._power_geometry(x)
            values = n**ps - rs**ps - shifts
            grads = (ps * n ** (ps - 2.0))[:, None] * d
            return values, grads
        values = np.array([m.value(x) for m in self.members])
        grads = np.array([m.gradient(x) for m in self.members])
        return values, grads

    def values(self, x) -> np.ndarray:
        if self._power_arrays is not None:
            qs, rs, ps, shifts = self._power_arrays
            n = np.linalg.norm(np.asarray(x, dtype=float) - qs, axis=1)
            return n**ps - rs**ps - shifts
        return np.array([m.value(x) for m in self.members])

    def hessian_apply_all(self, x, v) -> np.ndarray:
        """(m, n) array whose rows are H_i(x) @ v."""
        v = np.asarray(v, dtype=float)
        if self._power_arrays is not None:
            _, _, ps, _, d, n = self._power_geometry(x)
            # H v = p n^(p-2) (v + (p-2) d (d.v) / n^2)
            coeff = ps * n ** (ps - 2.0)
            dv = d @ v
            return coeff[:, None] * (v[None, :] + ((ps - 2.0) * dv / n**2)[:, None] * d)
        return np.array([m.hessian(x) @ v for m in self.members])

    def min_value(self, x) -> float:
        return float(np.min(self.values(x)))


def shift_epsilon(fam: BarrierFamily, eps: float) -> BarrierFamily:
    """Family with every member lowered by eps."""
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return fam
    return BarrierFamily([ShiftedBarrier(m, eps) for m in fam])


class SoftMinBarrier:
    """-(1/lambda) log sum exp(-lambda h_i); max-shifted for overflow safety."""

    tag = NONCONVEX
    mu = 0.0

    def __init__(self, fam: BarrierFamily, lam: float):
        if lam <= 0.0:
            raise ValueError("lambda must be positive")
        self.fam = fam
        self.lam = lam

    def _weights(self, x):
        values, grads = self.fam.eval_all(x)
        z = -self.lam * values
        zmax = np.max(z)
        e = np.exp(z - zmax)
        s = np.sum(e)
        value = -(zmax + np.log(s)) / self.lam
        return value, e / s, values, grads

    def value(self, x) -> float:
        value, _, _, _ = self._weights(x)
        return float(value)

    def gradient(self, x) -> np.ndarray:
        _, w, _, grads = self._weights(x)
        return w @ grads

    def hessian(self, x) -> np.ndarray:
        _, w, _, grads = self._weights(x)
        gbar = w @ grads
        hess = self.lam * (np.outer(gbar, gbar) - (grads.T * w) @ grads)
        for wi, m in zip(w, self.fam):
            hess += wi * m.hessian(x)
        return hess


class ProductBarrier:
    """Product of all member values; gradient/Hessian by the product rule."""

    tag = NONCONVEX
    mu = 0.0

    def __init__(self, fam: BarrierFamily):
        self.fam = fam

    def value(self, x) -> float:
        return float(np.prod(self.fam.values(x)))

    def _partial_products(self, values):
        # prod over j != i, robust to zero factors
        m = values.size
        prefix = np.concatenate(([1.0], np.cumprod(values)[:-1]))
        suffix = np.concatenate((np.cumprod(values[::-1])[-2::-1], [1.0]))
        return prefix * suffix if m > 1 else np.ones(1)

    def gradient(self, x) -> np.ndarray:
        values, grads = self.fam.eval_all(x)
        others = self._partial_products(values)
        return others @ grads

    def hessian(self, x) -> np.ndarray:
        values, grads = self.fam.eval_all(x)
        m, n = grads.shape
        others = self._partial_products(values)
        hess = np.zeros((n, n))
        for i, member in enumerate(self.fam):
            hess += others[i] * member.hessian(x)
        for i in range(m):
            for j in range(i + 1, m):
                mask = np.ones(m, dtype=bool)
                mask[[i, j]] = False
                rest = float(np.prod(values[mask]))
                cross = np.outer(grads[i], grads[j])
                hess += rest * (cross + cross.T)
        return hess


def softmin_compose(fam: BarrierFamily, lam: float) -> SoftMinBarrier:
    return SoftMinBarrier(fam, lam)


def product_compose(fam: BarrierFamily) -> ProductBarrier:
    return ProductBarrier(fam)


@dataclass(frozen=True)
class GoalControlBarrier:
    """Corridor constraint treated as a barrier for goal persistence.

    value   = -kappa grad_h(x) . (x - g) + alpha (h(x) - eps)
    gradient = -kappa hess_h(x) (x - g) + (alpha - kappa) grad_h(x)
    """

    base: object
    goal: np.ndarray
    kappa: float
    alpha_rate: float
    epsilon: float = 0.0

    def __post_init__(self):
        goal = np.atleast_1d(np.asarray(self.goal, dtype=float))
        if not (self.kappa > 0.0 and self.alpha_rate > 0.0 and self.epsilon >= 0.0):
            raise ValueError("kappa, alpha_rate must be positive; epsilon >= 0")
        object.__setattr__(self, "goal", goal)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        g = self.base.gradient(x)
        return float(
            -self.kappa * g @ (x - self.goal)
            + self.alpha_rate * (self.base.value(x) - self.epsilon)
        )

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        hv = self.base.hessian(x) @ (x - self.goal)
        return -self.kappa * hv + (self.alpha_rate - self.kappa) * self.base.gradient(x)


def goal_barrier_eval(gb: GoalControlBarrier, x):
    """(value, gradient) of a goal-control barrier at x."""
    return gb.value(x), gb.gradient(x)


def goal_barriers_eval_all(fam: BarrierFamily, x, goal, kappa, alpha_rate, eps=0.0):
    """Vectorized goal-control barrier values and (gradient . direction)-ready
    pieces for a whole family.

    Returns (values (m,), gradients (m, n)).
    """
    x = np.asarray(x, dtype=float)
    goal = np.asarray(goal, dtype=float)
    values, grads = fam.eval_all(x)
    gvals = -kappa * grads @ (x - goal) + alpha_rate * (values - eps)
    hv = fam.hessian_apply_all(x, x - goal)
    ggrads = -kappa * hv + (alpha_rate - kappa) * grads
    return gvals, ggrads
