"""Synchronous discrete-time engine for formation and rendezvous runs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import graph
from .control import HeadingTracker, gradient_control, heading_error, unicycle_control, wrap_angle
from .potential import (ConnectivityLost, DegenerateConfiguration, FieldEval, FieldParams,
                        FormationContext, OutsideWorkspace, RendezvousContext, nf_formation,
                        nf_informed, nf_follower)
from .scenario import ScenarioSpec, initial_agents

FORMATION_GOAL_TOL = 1e-4
RENDEZVOUS_POS_TOL = 0.05
RENDEZVOUS_HEADING_TOL = 0.1
STALL_GRAD_TOL = 1e-9
STALL_DWELL = 1.0

FAILURE_EVENTS = {"collision", "link_break", "boundary", "connectivity_lost", "degenerate"}


class InvalidTopology(ValueError):
    """The initial layout violates the mode's connectivity precondition."""


@dataclass(frozen=True)
class AgentState:
    id: int
    position: np.ndarray
    heading: float = 0.0
    role: str = "follower"


@dataclass
class WorldState:
    time: float
    agents: list
    maintained_links: frozenset = frozenset()
    obstacles: tuple = ()
    trackers: list = field(default_factory=list)
    step_index: int = 0

    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.agents], dtype=float)


@dataclass(frozen=True)
class StepRecord:
    time: float
    positions: np.ndarray
    headings: np.ndarray
    phi: np.ndarray
    gradients: np.ndarray
    gammas: np.ndarray
    links: frozenset
    fiedler: float
    events: tuple                 # (agent id or -1, kind)


@dataclass
class SimTrace:
    mode: str
    dt: float
    records: list = field(default_factory=list)
    status: str = "horizon"       # horizon | converged | failed

    @property
    def failed(self) -> bool:
        return self.status == "failed"


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------

def euler_step_holonomic(state: AgentState, velocity, dt: float) -> AgentState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return replace(state, position=np.asarray(state.position, float) + np.asarray(velocity, float) * dt)


def euler_step_unicycle(state: AgentState, v: float, omega: float, dt: float) -> AgentState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    th = state.heading
    p = np.asarray(state.position, float) + v * dt * np.array([math.cos(th), math.sin(th)])
    return replace(state, position=p, heading=wrap_angle(th + omega * dt))


def outside_workspace(state: AgentState, params: FieldParams) -> bool:
    return math.hypot(*state.position) > params.workspace_radius


# ---------------------------------------------------------------------------
# links
# ---------------------------------------------------------------------------

def _pair(i, j):
    return (i, j) if i < j else (j, i)


def update_links(world: WorldState, params: FieldParams, mode: str = "rendezvous",
                 formation_pairs=()) -> tuple[WorldState, list]:
    """Refresh the maintained link set and report broken links.

    Formation links are the fixed formation pairs. Rendezvous links persist
    once made; a new one forms only when an unlinked pair comes within
    ``comm_radius - delta2``.
    """
    pos = world.positions()
    events = []
    if mode == "formation":
        links = set(_pair(i, j) for i, j in formation_pairs)
    else:
        links = set(world.maintained_links)
        n = len(pos)
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) not in links and math.hypot(*(pos[i] - pos[j])) <= params.comm_radius - params.delta2:
                    links.add((i, j))
    for i, j in sorted(links):
        if math.hypot(*(pos[i] - pos[j])) > params.comm_radius:
            events.append((-1, "link_break"))
    return replace(world, maintained_links=frozenset(links)), events


def initial_links(positions, params: FieldParams, mode: str, formation_pairs=()) -> frozenset:
    if mode == "formation":
        return frozenset(_pair(i, j) for i, j in formation_pairs)
    g = graph.build_proximity_graph(positions, params.comm_radius)
    return frozenset(g.edges)


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------

def _linked(links, i):
    return sorted(b if a == i else a for a, b in links if i in (a, b))


def evaluate_agent(world: WorldState, i: int, spec: ScenarioSpec, events: list | None = None) -> FieldEval:
    """Field seen by agent ``i`` in the snapshot ``world``."""
    params = spec.params
    pos = world.positions()
    q = pos[i]
    if spec.mode == "formation":
        rc = params.comm_radius
        fn = [(pos[j], spec.offset(i, j)) for j in spec.formation_neighbors(i)]
        sensed = [pos[j] for j in range(len(pos)) if j != i and math.hypot(*(q - pos[j])) <= rc]
        obst = [np.asarray(o, float) for o in world.obstacles if math.hypot(*(q - np.asarray(o))) <= rc]
        local: list = []
        ev = nf_formation(FormationContext(q, fn, sensed, obst), params, local)
        if events is not None:
            events.extend((i, kind) for kind in local)
        return ev
    role = world.agents[i].role
    ctx = RendezvousContext(q, [pos[j] for j in _linked(world.maintained_links, i)],
                            np.asarray(spec.destination, float), spec.desired_heading, role)
    if role == "informed":
        return nf_informed(ctx, params)
    return nf_follower(ctx, params)


def _safe_eval(world, i, spec, events):
    try:
        return evaluate_agent(world, i, spec, events)
    except ConnectivityLost:
        events.append((i, "connectivity_lost"))
    except OutsideWorkspace:
        events.append((i, "boundary"))
    except DegenerateConfiguration:
        events.append((i, "degenerate"))
    return None


# ---------------------------------------------------------------------------
# metrics helpers
# ---------------------------------------------------------------------------

class _FiedlerCache:
    def __init__(self):
        self._memo: dict = {}

    def __call__(self, g: graph.ProximityGraph) -> float:
        if g.node_count < 2:
            return 0.0
        key = (g.node_count, g.edges)
        if key not in self._memo:
            self._memo[key] = graph.fiedler_value(g).fiedler
        return self._memo[key]


def metric_graph(positions, spec: ScenarioSpec) -> graph.ProximityGraph:
    g = graph.build_proximity_graph(positions, spec.comm_radius)
    if spec.fiedler_edges == "formation":
        g = graph.restrict(g, spec.formation_pairs())
    return g


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def initial_world(spec: ScenarioSpec) -> WorldState:
    states = initial_agents(spec)
    agents = []
    for k, (x, y, h) in enumerate(states):
        role = "informed" if (spec.mode == "rendezvous" and k == spec.informed) else "follower"
        agents.append(AgentState(k, np.array([x, y], dtype=float), wrap_angle(h), role))
    pos = np.array([a.position for a in agents])
    links = initial_links(pos, spec.params, spec.mode, spec.formation_pairs())
    return WorldState(0.0, agents, links, tuple(spec.obstacles),
                      [HeadingTracker() for _ in agents], 0)


def check_initial_topology(world: WorldState, spec: ScenarioSpec) -> None:
    n = len(world.agents)
    if n < 2:
        return
    pos = world.positions()
    params = spec.params
    if spec.mode == "formation":
        g = graph.build_proximity_graph(pos, params.comm_radius)
        if not graph.is_connected(g):
            raise InvalidTopology("initial proximity graph is disconnected")
        for i, j in spec.formation_pairs():
            if math.hypot(*(pos[i] - pos[j])) >= params.comm_radius:
                raise InvalidTopology(f"formation pair ({i}, {j}) is not initially linked")
    else:
        arcs = set()
        for i, j in world.maintained_links:
            arcs.add((i, j))
            arcs.add((j, i))
        g = graph.ProximityGraph.from_edges(n, arcs, directed=True, radius=params.comm_radius)
        if not graph.has_directed_spanning_tree(g, spec.informed):
            raise InvalidTopology("initial graph has no directed spanning tree rooted at the informed agent")


def _controls(world: WorldState, spec: ScenarioSpec, evals, order=None):
    """Commands for every agent from the pre-step snapshot."""
    n = len(world.agents)
    out = [None] * n
    trackers = [HeadingTracker(t.previous_desired_heading, t.previous_time) for t in world.trackers]
    for i in (order if order is not None else range(n)):
        ev = evals[i]
        if ev is None:
            out[i] = (0.0, 0.0)
            continue
        if spec.mode == "formation":
            out[i] = tuple(gradient_control(ev, spec.gains))
        else:
            out[i] = unicycle_control(ev, world.agents[i].heading, trackers[i], world.time, spec.gains)
    return out, trackers


def _advance(world: WorldState, spec: ScenarioSpec, commands, trackers) -> WorldState:
    agents = []
    for a, cmd in zip(world.agents, commands):
        if spec.mode == "formation":
            agents.append(euler_step_holonomic(a, cmd, spec.dt))
        else:
            agents.append(euler_step_unicycle(a, cmd[0], cmd[1], spec.dt))
    k = world.step_index + 1
    return WorldState(k * spec.dt, agents, world.maintained_links, world.obstacles, trackers, k)


def step(world: WorldState, spec: ScenarioSpec, order=None) -> tuple[WorldState, list]:
    """Advance all agents one ``dt`` from the same snapshot.

    Returns the new world and the events raised while stepping. ``order``
    only changes the sequence in which agents are evaluated.
    """
    events: list = []
    n = len(world.agents)
    idx = list(order) if order is not None else list(range(n))
    evals = [None] * n
    for i in idx:
        evals[i] = _safe_eval(world, i, spec, events)
    commands, trackers = _controls(world, spec, evals, idx)
    new = _advance(world, spec, commands, trackers)
    return _post_step(new, spec, events)


def _post_step(world: WorldState, spec: ScenarioSpec, events: list):
    params = spec.params
    for a in world.agents:
        if outside_workspace(a, params):
            events.append((a.id, "boundary"))
    world, link_events = update_links(world, params, spec.mode, spec.formation_pairs())
    events.extend(link_events)
    return world, events


def _converged(world: WorldState, spec: ScenarioSpec, evals) -> bool:
    if any(e is None for e in evals):
        return False
    if spec.mode == "formation":
        return all(e.gamma < FORMATION_GOAL_TOL for e in evals)
    dest = np.asarray(spec.destination, float)
    for a in world.agents:
        if math.hypot(*(a.position - dest)) >= RENDEZVOUS_POS_TOL:
            return False
        if abs(heading_error(a.heading, spec.desired_heading)) >= RENDEZVOUS_HEADING_TOL:
            return False
    return True


def _record(world, spec, evals, events, fiedler_of) -> StepRecord:
    n = len(world.agents)
    pos = world.positions()
    phi = np.array([e.value if e is not None else math.nan for e in evals])
    grads = np.array([e.gradient if e is not None else (math.nan, math.nan) for e in evals]).reshape(n, 2)
    gam = np.array([e.gamma if e is not None else math.nan for e in evals])
    return StepRecord(world.time, pos, np.array([a.heading for a in world.agents]), phi, grads, gam,
                      world.maintained_links, fiedler_of(metric_graph(pos, spec)), tuple(events))


def run(spec: ScenarioSpec, stop_on_converge: bool = True, world: WorldState | None = None) -> SimTrace:
    """Simulate ``spec`` to its horizon, stopping early on convergence or failure."""
    world = world if world is not None else initial_world(spec)
    check_initial_topology(world, spec)
    n_steps = int(round(spec.duration / spec.dt))
    trace = SimTrace(spec.mode, spec.dt)
    fiedler_of = _FiedlerCache()
    pending: list = []
    dwell_steps = max(1, math.ceil(STALL_DWELL / spec.dt - 1e-9))
    stalled_for = [0] * len(world.agents)
    k = 0
    while True:
        events = list(pending)
        evals = [_safe_eval(world, i, spec, events) for i in range(len(world.agents))]
        failed = any(kind in FAILURE_EVENTS for _, kind in events)
        done = False
        if failed:
            trace.status = "failed"
            events.append((-1, "failed"))
            done = True
        elif _converged(world, spec, evals):
            trace.status = "converged"
            events.append((-1, "converged"))
            done = stop_on_converge
        if not done:
            for i, e in enumerate(evals):
                stalled = e is not None and e.gamma > FORMATION_GOAL_TOL and math.hypot(*e.gradient) < STALL_GRAD_TOL
                stalled_for[i] = stalled_for[i] + 1 if stalled else 0
                if stalled_for[i] == dwell_steps:
                    events.append((i, "stall"))
        trace.records.append(_record(world, spec, evals, events, fiedler_of))
        if done or k >= n_steps:
            break
        commands, trackers = _controls(world, spec, evals)
        world = _advance(world, spec, commands, trackers)
        world, pending = _post_step(world, spec, [])
        k += 1
    return trace


def stall_detector(records, dt: float, goal_tol: float = FORMATION_GOAL_TOL,
                   grad_tol: float = STALL_GRAD_TOL, dwell: float = STALL_DWELL):
    """Report ``(agent, "stall")`` if some agent sat at a spurious critical point.

    An agent stalls when its gradient norm stays below ``grad_tol`` while its
    goal function exceeds ``goal_tol`` for at least ``dwell`` seconds of the
    supplied trailing records.
    """
    if not records:
        return None
    n = len(records[-1].phi)
    for i in range(n):
        run_len = 0.0
        for rec in records:
            g = rec.gradients[i]
            if rec.gammas[i] > goal_tol and math.hypot(g[0], g[1]) < grad_tol:
                run_len += dt
                if run_len >= dwell - 1e-9:
                    return (i, "stall")
            else:
                run_len = 0.0
    return None


@dataclass(frozen=True)
class Summary:
    fiedler: list
    max_link_length: list
    min_obstacle_clearance: float
    min_agent_separation: float
    min_boundary_clearance: float
    terminal_distance_errors: dict
    terminal_position_errors: list
    terminal_heading_errors: list
    status: str
    final_time: float


def metrics(trace: SimTrace, spec: ScenarioSpec) -> Summary:
    if not trace.records:
        raise ValueError("empty trace")
    fied, max_link = [], []
    clear = sep = math.inf
    bclear = math.inf
    obst = np.array(spec.obstacles, dtype=float).reshape(-1, 2)
    for rec in trace.records:
        fied.append(rec.fiedler)
        pos = rec.positions
        lengths = [math.hypot(*(pos[i] - pos[j])) for i, j in rec.links]
        max_link.append(max(lengths) if lengths else 0.0)
        if len(obst):
            d = np.hypot(*(pos[:, None, :] - obst[None, :, :]).transpose(2, 0, 1))
            clear = min(clear, float(d.min()))
        n = len(pos)
        if n > 1:
            d = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
            d[np.arange(n), np.arange(n)] = math.inf
            sep = min(sep, float(d.min()))
        bclear = min(bclear, float(spec.workspace_radius - np.hypot(pos[:, 0], pos[:, 1]).max()))
    last = trace.records[-1]
    dist_err = {}
    if spec.mode == "formation":
        for i, j in spec.formation_pairs():
            want = float(np.hypot(*spec.offset(i, j)))
            dist_err[(i, j)] = abs(math.hypot(*(last.positions[i] - last.positions[j])) - want)
    dest = np.asarray(spec.destination, float)
    pos_err = [float(math.hypot(*(p - dest))) for p in last.positions]
    head_err = [abs(heading_error(h, spec.desired_heading)) for h in last.headings]
    return Summary(fied, max_link, clear, sep, bclear, dist_err, pos_err, head_err,
                   trace.status, last.time)
