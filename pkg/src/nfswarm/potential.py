"""Navigation-function potentials for formation and rendezvous agents.

Every potential here has the form ``phi = gamma / (gamma**alpha + beta)**(1/alpha)``
where ``gamma`` is a goal function that vanishes at the target and ``beta`` a
constraint term that vanishes on obstacles, the workspace boundary, or at the
edge of a maintained link. All gradients are analytic and taken with respect
to the evaluating agent's own position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

COINCIDENT_TOL = 1e-12
DEGENERATE_TOL = 1e-15

ZERO2 = np.zeros(2)


class DegenerateConfiguration(ValueError):
    """Goal and constraint terms vanish together; the potential is undefined."""


class ConnectivityLost(RuntimeError):
    """A follower has no neighbors left to track."""


class OutsideWorkspace(ValueError):
    pass


@dataclass(frozen=True)
class FieldParams:
    alpha: float
    comm_radius: float
    delta1: float
    delta2: float
    workspace_radius: float
    eps_nh: float = 0.01

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.delta1 < self.comm_radius:
            raise ValueError("delta1 must satisfy 0 < delta1 < comm_radius")
        if not 0 < self.delta2 < self.comm_radius:
            raise ValueError("delta2 must satisfy 0 < delta2 < comm_radius")
        if not self.workspace_radius > 0:
            raise ValueError("workspace_radius must be positive")
        if not self.eps_nh > 0:
            raise ValueError("eps_nh must be positive")


@dataclass(frozen=True)
class FieldEval:
    value: float
    gradient: np.ndarray
    gamma: float
    beta: float
    beta_term: float
    collisions: int = 0


@dataclass(frozen=True)
class FormationContext:
    self_position: np.ndarray
    formation_neighbors: Sequence = ()   # (position, offset c_ij) pairs
    proximity_neighbors: Sequence = ()   # sensed agent positions
    obstacles: Sequence = ()             # sensed obstacle positions


@dataclass(frozen=True)
class RendezvousContext:
    self_position: np.ndarray
    neighbors: Sequence = ()
    destination: np.ndarray = field(default_factory=lambda: np.zeros(2))
    desired_heading: float = 0.0
    role: str = "follower"


def _vec(p) -> np.ndarray:
    return np.asarray(p, dtype=float).reshape(2)


def edge_tension(d: float, params: FieldParams) -> tuple[float, float]:
    """Connectivity factor ``b_ij`` and its derivative in the link length.

    Flat at 1 inside ``comm_radius - delta2``, a concave quadratic ramp across
    the escape ring, and 0 from ``comm_radius`` outwards. The ramp
    ``-(u/delta2)**2 + 2*u/delta2`` with ``u = d + 2*delta2 - comm_radius`` is
    evaluated as ``1 - (1 - s)**2`` with ``s = (comm_radius - d)/delta2``,
    which avoids the cancellation in ``u``.
    """
    if d < 0:
        raise ValueError("distance must be nonnegative")
    rc, d2 = params.comm_radius, params.delta2
    if d <= rc - d2:
        return 1.0, 0.0
    if d >= rc:
        return 0.0, 0.0
    w = 1.0 - (rc - d) / d2
    return 1.0 - w * w, -2.0 * w / d2


def collision_factor(d: float, params: FieldParams) -> tuple[float, float]:
    """Repulsion factor ``B_ik``: 0 at contact, 1 beyond ``delta1``."""
    if d < 0:
        raise ValueError("distance must be nonnegative")
    d1 = params.delta1
    if d >= d1:
        return 1.0, 0.0
    return -(d * d) / (d1 * d1) + 2.0 * d / d1, -2.0 * d / (d1 * d1) + 2.0 / d1


def boundary_factor(position, params: FieldParams) -> tuple[float, np.ndarray]:
    """Collision factor against the circular workspace wall."""
    p = _vec(position)
    r = math.hypot(p[0], p[1])
    if r > params.workspace_radius:
        raise OutsideWorkspace(f"position {tuple(p)} lies outside the workspace")
    val, der = collision_factor(params.workspace_radius - r, params)
    if r < COINCIDENT_TOL or der == 0.0:
        return val, ZERO2.copy()
    return val, -der * p / r


def _product_with_gradient(factors: list[tuple[float, np.ndarray]]) -> tuple[float, np.ndarray]:
    # prefix/suffix products keep the product rule exact when a factor is 0
    n = len(factors)
    if n == 0:
        return 1.0, ZERO2.copy()
    vals = [f[0] for f in factors]
    prefix = [1.0] * (n + 1)
    for k in range(n):
        prefix[k + 1] = prefix[k] * vals[k]
    suffix = 1.0
    grad = np.zeros(2)
    for k in range(n - 1, -1, -1):
        g = factors[k][1]
        if g[0] != 0.0 or g[1] != 0.0:
            grad += prefix[k] * suffix * g
        suffix *= vals[k]
    return prefix[n], grad


def _distance_factor(q, other, fn, params):
    """``fn`` applied to ``|q - other|`` with its gradient in ``q``.

    Returns ``(value, gradient, coincident)``.
    """
    diff = q - _vec(other)
    d = math.hypot(diff[0], diff[1])
    val, der = fn(d, params)
    if d < COINCIDENT_TOL:
        return val, ZERO2.copy(), True
    if der == 0.0:
        return val, ZERO2.copy(), False
    return val, der * diff / d, False


def formation_goal(ctx: FormationContext) -> tuple[float, np.ndarray]:
    q = _vec(ctx.self_position)
    gamma = 0.0
    grad = np.zeros(2)
    for pos, offset in ctx.formation_neighbors:
        e = q - _vec(pos) - _vec(offset)
        gamma += float(e @ e)
        grad += 2.0 * e
    return gamma, grad


def formation_constraint(ctx: FormationContext, params: FieldParams, events: list | None = None):
    """``beta_i`` = wall factor x link factors x collision factors, with gradient.

    Coincident points (distance below 1e-12) zero their factor, drop its
    gradient contribution, and append ``"collision"`` to ``events``.
    """
    q = _vec(ctx.self_position)
    factors = [boundary_factor(q, params)]
    hits = 0
    for pos, _ in ctx.formation_neighbors:
        v, g, _c = _distance_factor(q, pos, edge_tension, params)
        factors.append((v, g))
    for pos in list(ctx.proximity_neighbors) + list(ctx.obstacles):
        v, g, coincident = _distance_factor(q, pos, collision_factor, params)
        if coincident:
            hits += 1
            v = 0.0
        factors.append((v, g))
    beta, grad = _product_with_gradient(factors)
    if hits and events is not None:
        events.extend(["collision"] * hits)
    return min(max(beta, 0.0), 1.0), grad


def nf_compose(gamma, grad_gamma, beta_term, grad_beta, alpha) -> FieldEval:
    """Combine goal and constraint terms into a navigation-function value.

    The gradient uses the closed form
    ``(g**a + b)**(-(1+a)/a) * (b * grad_g - (g/a) * grad_b)``,
    which stays finite at ``g = 0`` for any ``alpha > 0``.
    """
    if gamma < DEGENERATE_TOL and beta_term < DEGENERATE_TOL:
        raise DegenerateConfiguration("goal and constraint terms are both zero")
    gg = _vec(grad_gamma)
    gb = _vec(grad_beta)
    s = gamma ** alpha + beta_term
    # on an obstacle or the wall the value is exactly 1; the power round trip would lose ulps
    value = 1.0 if beta_term == 0.0 else gamma / s ** (1.0 / alpha)
    grad = s ** (-(1.0 + alpha) / alpha) * (beta_term * gg - (gamma / alpha) * gb)
    return FieldEval(min(value, 1.0), grad, float(gamma), float(beta_term), float(beta_term))


def nf_formation(ctx: FormationContext, params: FieldParams, events: list | None = None) -> FieldEval:
    local: list = []
    gamma, gg = formation_goal(ctx)
    beta, gb = formation_constraint(ctx, params, local)
    if events is not None:
        events.extend(local)
    out = nf_compose(gamma, gg, beta, gb, params.alpha)
    if local:
        out = _with(out, collisions=len(local))
    return out


def _with(ev: FieldEval, **kw) -> FieldEval:
    return replace(ev, **kw)


def dipolar_factor(ctx: RendezvousContext, params: FieldParams) -> tuple[float, np.ndarray]:
    """``H_d = eps_nh + ((p - p*) . n_d)**2`` with ``n_d`` the goal heading."""
    n = np.array([math.cos(ctx.desired_heading), math.sin(ctx.desired_heading)])
    proj = float((_vec(ctx.self_position) - _vec(ctx.destination)) @ n)
    return params.eps_nh + proj * proj, 2.0 * proj * n


def nf_informed(ctx: RendezvousContext, params: FieldParams) -> FieldEval:
    """Dipolar navigation function of the informed agent."""
    p = _vec(ctx.self_position)
    e = p - _vec(ctx.destination)
    gamma = float(e @ e)
    h, gh = dipolar_factor(ctx, params)
    bd, gbd = boundary_factor(p, params)
    out = nf_compose(gamma, 2.0 * e, h * bd, bd * gh + h * gbd, params.alpha)
    return _with(out, beta=bd)


def nf_follower(ctx: RendezvousContext, params: FieldParams) -> FieldEval:
    """Consensus potential of a follower over its maintained links."""
    if len(ctx.neighbors) == 0:
        raise ConnectivityLost("follower has no maintained links")
    p = _vec(ctx.self_position)
    gamma = 0.0
    gg = np.zeros(2)
    factors = []
    for pos in ctx.neighbors:
        e = p - _vec(pos)
        gamma += float(e @ e)
        gg += 2.0 * e
        v, g, _c = _distance_factor(p, pos, edge_tension, params)
        factors.append((v, g))
    beta, gb = _product_with_gradient(factors)
    beta = min(max(beta, 0.0), 1.0)
    return nf_compose(gamma, gg, beta, gb, params.alpha)


def nf_rendezvous(ctx: RendezvousContext, params: FieldParams) -> FieldEval:
    if ctx.role == "informed":
        return nf_informed(ctx, params)
    return nf_follower(ctx, params)


def finite_diff_gradient(field_fn: Callable[[np.ndarray], float], position, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar field on the plane."""
    p = _vec(position)
    out = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        hi = field_fn(p + e)
        lo = field_fn(p - e)
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise ValueError("field returned a non-finite sample")
        out[k] = (hi - lo) / (2.0 * step)
    return out
