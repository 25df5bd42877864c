"""Scenario documents: schema, validation, YAML round-trip, seeded deployment.

A scenario is a YAML mapping. Keys mirror :class:`ScenarioSpec`::

    mode: rendezvous            # or formation
    workspace_radius: 5.0
    comm_radius: 2.0
    delta1: 0.4
    delta2: 0.4
    alpha: 1.2
    eps_nh: 0.01                # optional
    dt: 0.1                     # optional
    duration: 100.0             # optional
    gains: {K: 1.0, k_v: 1.0, k_w: 2.0}   # optional, per-key defaults
    seed: 7                     # optional
    agents: {random: 6}         # or a list of {x: .., y: .., heading: ..}
    obstacles: [[1.0, 2.0]]     # optional
    formation_offsets:          # formation mode; c_ij = q_i - q_j at the goal
      - {i: 0, j: 1, offset: [1.0, 0.0]}
    destination: [0.0, 0.0]     # rendezvous mode
    desired_heading: 0.0        # rendezvous mode
    informed: 0                 # rendezvous mode
    fiedler_edges: proximity    # or formation
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

from . import graph
from .control import ControlGains, wrap_angle
from .potential import FieldParams

MAX_DEPLOY_REJECTIONS = 10000

_REQUIRED = ("mode", "workspace_radius", "comm_radius", "delta1", "delta2", "alpha", "agents")
_KNOWN = set(_REQUIRED) | {
    "eps_nh", "dt", "duration", "gains", "seed", "obstacles", "formation_offsets",
    "destination", "desired_heading", "informed", "fiedler_edges",
}


class ScenarioError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class DeploymentInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    mode: str
    workspace_radius: float
    comm_radius: float
    delta1: float
    delta2: float
    alpha: float
    agents: tuple | None = None          # ((x, y, heading), ...)
    random_agents: int | None = None
    eps_nh: float = 0.01
    dt: float = 0.1
    duration: float = 50.0
    gains: ControlGains = field(default_factory=ControlGains)
    seed: int = 0
    obstacles: tuple = ()
    formation_offsets: tuple = ()        # (((i, j), (cx, cy)), ...) with i < j
    destination: tuple = (0.0, 0.0)
    desired_heading: float = 0.0
    informed: int = 0
    fiedler_edges: str = "proximity"

    @property
    def n_agents(self) -> int:
        return len(self.agents) if self.agents is not None else int(self.random_agents)

    @property
    def params(self) -> FieldParams:
        return FieldParams(self.alpha, self.comm_radius, self.delta1, self.delta2,
                           self.workspace_radius, self.eps_nh)

    def offset(self, i: int, j: int) -> np.ndarray:
        """Desired ``q_i - q_j``."""
        for (a, b), c in self.formation_offsets:
            if (a, b) == (i, j):
                return np.array(c, dtype=float)
            if (a, b) == (j, i):
                return -np.array(c, dtype=float)
        raise KeyError((i, j))

    def formation_pairs(self) -> list[tuple[int, int]]:
        return [pair for pair, _ in self.formation_offsets]

    def formation_neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.formation_pairs():
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)


def _num(d, key, kind=float):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(key, f"expected a number, got {v!r}")
    v = kind(v)
    if kind is float and not math.isfinite(v):
        raise ScenarioError(key, "must be finite")
    return v


def _point(v, name):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ScenarioError(name, f"expected [x, y], got {v!r}")
    try:
        x, y = float(v[0]), float(v[1])
    except (TypeError, ValueError):
        raise ScenarioError(name, f"non-numeric point {v!r}") from None
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ScenarioError(name, "non-finite coordinate")
    return (x, y)


def spec_from_dict(doc: dict) -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a mapping")
    unknown = sorted(set(doc) - _KNOWN)
    if unknown:
        raise ScenarioError(unknown[0], "unknown key")
    for key in _REQUIRED:
        if key not in doc:
            raise ScenarioError(key, "missing required field")
    mode = doc["mode"]
    if mode not in ("formation", "rendezvous"):
        raise ScenarioError("mode", "must be 'formation' or 'rendezvous'")

    kw: dict = {"mode": mode}
    for key in ("workspace_radius", "comm_radius", "delta1", "delta2", "alpha"):
        kw[key] = _num(doc, key)
    for key in ("eps_nh", "dt", "duration", "desired_heading"):
        if key in doc:
            kw[key] = _num(doc, key)
    if "seed" in doc:
        kw["seed"] = _num(doc, "seed", int)
        if not 0 <= kw["seed"] < 2 ** 64:
            raise ScenarioError("seed", "must be a 64-bit unsigned integer")

    g = doc.get("gains", {}) or {}
    if not isinstance(g, dict) or set(g) - {"K", "k_v", "k_w"}:
        raise ScenarioError("gains", "expected a mapping with keys K, k_v, k_w")
    try:
        kw["gains"] = ControlGains(**{k: _num(g, k) for k in g})
    except ValueError as exc:
        raise ScenarioError("gains", str(exc)) from None

    agents = doc["agents"]
    if isinstance(agents, dict):
        if set(agents) != {"random"}:
            raise ScenarioError("agents", "expected {random: n} or a list of agents")
        n = agents["random"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ScenarioError("agents", "random count must be a positive integer")
        kw["random_agents"] = n
    elif isinstance(agents, list) and agents:
        states = []
        for k, a in enumerate(agents):
            if not isinstance(a, dict) or not {"x", "y"} <= set(a) or set(a) - {"x", "y", "heading"}:
                raise ScenarioError(f"agents[{k}]", "expected {x, y[, heading]}")
            x, y = _point([a["x"], a["y"]], f"agents[{k}]")
            h = float(a.get("heading", 0.0))
            if not math.isfinite(h):
                raise ScenarioError(f"agents[{k}].heading", "non-finite")
            states.append((x, y, wrap_angle(h)))
        kw["agents"] = tuple(states)
    else:
        raise ScenarioError("agents", "expected {random: n} or a nonempty list")

    kw["obstacles"] = tuple(_point(p, f"obstacles[{k}]") for k, p in enumerate(doc.get("obstacles", []) or []))
    if "destination" in doc:
        kw["destination"] = _point(doc["destination"], "destination")
    if "informed" in doc:
        kw["informed"] = _num(doc, "informed", int)
    fe = doc.get("fiedler_edges", "proximity")
    if fe not in ("proximity", "formation"):
        raise ScenarioError("fiedler_edges", "must be 'proximity' or 'formation'")
    kw["fiedler_edges"] = fe

    n_agents = len(kw["agents"]) if "agents" in kw else kw["random_agents"]
    offsets: dict = {}
    for k, item in enumerate(doc.get("formation_offsets", []) or []):
        name = f"formation_offsets[{k}]"
        if not isinstance(item, dict) or set(item) != {"i", "j", "offset"}:
            raise ScenarioError(name, "expected {i, j, offset}")
        i, j = item["i"], item["j"]
        if not (isinstance(i, int) and isinstance(j, int)) or i == j or not (0 <= i < n_agents and 0 <= j < n_agents):
            raise ScenarioError(name, "invalid node indices")
        c = _point(item["offset"], name)
        if i > j:
            i, j, c = j, i, (-c[0], -c[1])
        if (i, j) in offsets:
            prev = offsets[(i, j)]
            if abs(prev[0] - c[0]) > 1e-12 or abs(prev[1] - c[1]) > 1e-12:
                raise ScenarioError(name, "offsets are not antisymmetric")
            continue
        offsets[(i, j)] = (c[0] + 0.0, c[1] + 0.0)
    kw["formation_offsets"] = tuple(sorted(offsets.items()))

    spec = ScenarioSpec(**kw)
    validate(spec)
    return spec


def validate(spec: ScenarioSpec) -> None:
    try:
        spec.params
    except ValueError as exc:
        msg = str(exc)
        name = msg.split()[0] if msg.split()[0] in {f.name for f in fields(spec)} else "parameters"
        raise ScenarioError(name, msg) from None
    if not spec.dt > 0:
        raise ScenarioError("dt", "must be positive")
    if spec.duration < 0:
        raise ScenarioError("duration", "must be nonnegative")
    if spec.mode == "formation" and not spec.formation_offsets and spec.n_agents > 1:
        raise ScenarioError("formation_offsets", "required in formation mode")
    if spec.mode == "rendezvous" and not 0 <= spec.informed < spec.n_agents:
        raise ScenarioError("informed", "not a valid agent index")
    for k, p in enumerate(spec.obstacles):
        if math.hypot(*p) > spec.workspace_radius:
            raise ScenarioError(f"obstacles[{k}]", "outside the workspace")
    if spec.agents is not None:
        for k, (x, y, _h) in enumerate(spec.agents):
            if math.hypot(x, y) > spec.workspace_radius:
                raise ScenarioError(f"agents[{k}]", "outside the workspace")


def parse_scenario(text: str) -> ScenarioSpec:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("<document>", f"malformed YAML: {exc}") from None
    return spec_from_dict(doc)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    doc: dict = {
        "mode": spec.mode,
        "workspace_radius": spec.workspace_radius,
        "comm_radius": spec.comm_radius,
        "delta1": spec.delta1,
        "delta2": spec.delta2,
        "alpha": spec.alpha,
        "eps_nh": spec.eps_nh,
        "dt": spec.dt,
        "duration": spec.duration,
        "gains": {"K": spec.gains.K, "k_v": spec.gains.k_v, "k_w": spec.gains.k_w},
        "seed": spec.seed,
    }
    if spec.agents is not None:
        doc["agents"] = [{"x": x, "y": y, "heading": h} for x, y, h in spec.agents]
    else:
        doc["agents"] = {"random": spec.random_agents}
    doc["obstacles"] = [list(p) for p in spec.obstacles]
    if spec.formation_offsets:
        doc["formation_offsets"] = [{"i": i, "j": j, "offset": list(c)} for (i, j), c in spec.formation_offsets]
    doc["destination"] = list(spec.destination)
    doc["desired_heading"] = spec.desired_heading
    doc["informed"] = spec.informed
    doc["fiedler_edges"] = spec.fiedler_edges
    return doc


def serialize_scenario(spec: ScenarioSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False, default_flow_style=None)


def load_scenario(path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def with_overrides(spec: ScenarioSpec, dt=None, duration=None, seed=None) -> ScenarioSpec:
    kw = {k: v for k, v in (("dt", dt), ("duration", duration), ("seed", seed)) if v is not None}
    out = replace(spec, **kw)
    validate(out)
    return out


# ---------------------------------------------------------------------------
# deployment
# ---------------------------------------------------------------------------

def _layout_ok(pts, params, mode, informed, pairs) -> bool:
    if len(pts) == 1:
        return True
    if mode == "formation":
        g = graph.build_proximity_graph(pts, params.comm_radius)
        if not graph.fiedler_value(g).connected:
            return False
        return all(np.hypot(*(pts[i] - pts[j])) < params.comm_radius for i, j in pairs)
    g = graph.build_proximity_graph(pts, params.comm_radius, directed=True)
    return graph.has_directed_spanning_tree(g, informed)


def deploy_connected(n: int, params: FieldParams, seed: int, mode: str = "rendezvous",
                     informed: int = 0, formation_pairs=(), obstacles=()):
    """Seeded random initial layout satisfying the mode's topology precondition.

    Agents are placed one at a time. Each candidate is drawn uniformly from
    the disk of radius ``comm_radius - delta2`` around an already placed
    agent (a formation neighbor when one exists) and rejected unless it is
    inside the workspace with a ``delta1`` margin, at least ``delta1`` from
    every agent and obstacle, and within link range of every placed
    formation neighbor. Returns a list of ``(x, y, heading)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    reach = params.comm_radius - params.delta2
    inner = params.workspace_radius - params.delta1
    obst = [np.asarray(o, dtype=float) for o in obstacles]
    nbrs: dict = {k: set() for k in range(n)}
    for i, j in formation_pairs:
        nbrs[i].add(j)
        nbrs[j].add(i)

    def clear(p, placed):
        if np.hypot(*p) > inner:
            return False
        return all(np.hypot(*(p - q)) >= params.delta1 for q in list(placed) + obst)

    rejections = 0
    while True:
        placed: list = []
        while len(placed) < n:
            k = len(placed)
            if k == 0:
                r = inner * math.sqrt(rng.random())
                a = rng.uniform(-math.pi, math.pi)
                p = np.array([r * math.cos(a), r * math.sin(a)])
            else:
                anchors = sorted(j for j in nbrs[k] if j < k) or list(range(k))
                c = placed[anchors[int(rng.integers(len(anchors)))]]
                r = reach * math.sqrt(rng.random())
                a = rng.uniform(-math.pi, math.pi)
                p = c + np.array([r * math.cos(a), r * math.sin(a)])
            ok = clear(p, placed) and all(
                np.hypot(*(p - placed[j])) <= reach for j in nbrs[k] if j < k)
            if ok:
                placed.append(p)
            else:
                rejections += 1
                if rejections >= MAX_DEPLOY_REJECTIONS:
                    raise DeploymentInfeasible(
                        f"no valid layout after {MAX_DEPLOY_REJECTIONS} rejected samples; "
                        "enlarge the workspace or comm_radius, or reduce the agent count")
        pts = np.array(placed)
        if _layout_ok(pts, params, mode, informed, formation_pairs):
            break
        rejections += 1
    headings = [wrap_angle(-math.pi + 2.0 * math.pi * (1.0 - rng.random())) for _ in range(n)]
    return [(float(p[0]), float(p[1]), h) for p, h in zip(pts, headings)]


def initial_agents(spec: ScenarioSpec) -> list[tuple[float, float, float]]:
    if spec.agents is not None:
        return [tuple(a) for a in spec.agents]
    return deploy_connected(spec.random_agents, spec.params, spec.seed, spec.mode,
                            spec.informed, spec.formation_pairs(), spec.obstacles)
