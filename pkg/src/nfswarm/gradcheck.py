"""Random-configuration harness comparing analytic and finite-difference gradients."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .potential import (FieldParams, FormationContext, RendezvousContext, finite_diff_gradient,
                        nf_follower, nf_formation, nf_informed)

KINDS = ("formation", "informed", "follower")
BREAKPOINT_MARGIN = 1e-3
FD_STEP = 1e-5

FORMATION_PARAMS = FieldParams(alpha=1.5, comm_radius=2.0, delta1=0.4, delta2=0.4, workspace_radius=10.0)
RENDEZVOUS_PARAMS = FieldParams(alpha=1.2, comm_radius=2.0, delta1=0.4, delta2=0.4, workspace_radius=5.0)


@dataclass
class GradcheckResult:
    trials: int
    worst_error: float
    worst_kind: str
    worst_position: tuple


def relative_error(analytic, numeric) -> float:
    a = np.asarray(analytic, float)
    n = np.asarray(numeric, float)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-12))


def _disk(rng, center, rmin, rmax):
    r = math.sqrt(rng.uniform(rmin * rmin, rmax * rmax))
    a = rng.uniform(-math.pi, math.pi)
    return np.asarray(center, float) + r * np.array([math.cos(a), math.sin(a)])


def _clear(d, points, margin=BREAKPOINT_MARGIN):
    return all(abs(d - p) > margin for p in points)


def sample_configuration(kind: str, rng: np.random.Generator):
    """Draw ``(evaluator, position, context)`` for one random configuration.

    Every distance that enters a piecewise factor stays more than 1e-3 away
    from that factor's breakpoints so the field is smooth around the sample.
    """
    while True:
        if kind == "formation":
            p = FORMATION_PARAMS
            q = _disk(rng, (0, 0), 0, p.workspace_radius - 2 * BREAKPOINT_MARGIN)
            wall = p.workspace_radius - np.hypot(*q)
            if not _clear(wall, [p.delta1, 0.0]):
                continue
            fn, sensed, obst = [], [], []
            ok = True
            for _ in range(int(rng.integers(1, 4))):
                nb = _disk(rng, q, 0.05, p.comm_radius - BREAKPOINT_MARGIN)
                c = rng.uniform(-1.5, 1.5, size=2)
                fn.append((nb, c))
                d = np.hypot(*(q - nb))
                ok &= _clear(d, [p.comm_radius - p.delta2, p.comm_radius, p.delta1])
                sensed.append(nb)
            for _ in range(int(rng.integers(0, 3))):
                nb = _disk(rng, q, 0.05, p.comm_radius)
                sensed.append(nb)
                ok &= _clear(np.hypot(*(q - nb)), [p.delta1])
            for _ in range(int(rng.integers(0, 3))):
                o = _disk(rng, q, 0.05, 1.0)
                obst.append(o)
                ok &= _clear(np.hypot(*(q - o)), [p.delta1])
            if not ok:
                continue
            ctx = FormationContext(q, fn, sensed, obst)
            return (lambda x, ctx=ctx: nf_formation(replace(ctx, self_position=x), p)), q, ctx
        if kind == "informed":
            p = RENDEZVOUS_PARAMS
            q = _disk(rng, (0, 0), 0, p.workspace_radius - 2 * BREAKPOINT_MARGIN)
            if not _clear(p.workspace_radius - np.hypot(*q), [p.delta1, 0.0]):
                continue
            dest = _disk(rng, (0, 0), 0, 2.0)
            if np.hypot(*(q - dest)) < 1e-2:
                continue
            ctx = RendezvousContext(q, (), dest, float(rng.uniform(-math.pi, math.pi)), "informed")
            return (lambda x, ctx=ctx: nf_informed(replace(ctx, self_position=x), p)), q, ctx
        if kind == "follower":
            p = RENDEZVOUS_PARAMS
            q = _disk(rng, (0, 0), 0, p.workspace_radius)
            nbrs = [_disk(rng, q, 0.05, p.comm_radius - BREAKPOINT_MARGIN) for _ in range(int(rng.integers(1, 5)))]
            if not all(_clear(np.hypot(*(q - nb)), [p.comm_radius - p.delta2, p.comm_radius]) for nb in nbrs):
                continue
            ctx = RendezvousContext(q, nbrs, np.zeros(2), 0.0, "follower")
            return (lambda x, ctx=ctx: nf_follower(replace(ctx, self_position=x), p)), q, ctx
        raise ValueError(f"unknown field kind {kind!r}")


def check_one(kind: str, rng: np.random.Generator):
    evaluate, q, _ctx = sample_configuration(kind, rng)
    analytic = evaluate(q).gradient
    numeric = finite_diff_gradient(lambda x: evaluate(x).value, q, FD_STEP)
    return relative_error(analytic, numeric), q


def run_gradcheck(seed: int, trials: int, kinds=KINDS) -> GradcheckResult:
    """``trials`` random configurations of every kind; keeps the worst case."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    worst = (-1.0, "", (0.0, 0.0))
    for kind in kinds:
        for _ in range(trials):
            err, q = check_one(kind, rng)
            if err > worst[0]:
                worst = (err, kind, (float(q[0]), float(q[1])))
    return GradcheckResult(trials, worst[0], worst[1], worst[2])
