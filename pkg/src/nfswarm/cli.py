"""Command-line entry point: ``nfswarm {simulate,field,gradcheck,fiedler}``.

Exit codes: 0 success, 2 invalid input, 3 failed run or failed check.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import graph, output, sim
from .gradcheck import run_gradcheck
from .potential import (ConnectivityLost, DegenerateConfiguration, FormationContext, OutsideWorkspace,
                        RendezvousContext, nf_formation, nf_informed)
from .scenario import (DeploymentInfeasible, ScenarioError, ScenarioSpec, initial_agents, load_scenario,
                       serialize_scenario, with_overrides)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3
GRADCHECK_TOL = 1e-6


class InvalidInput(Exception):
    pass


def _load(path, dt=None, duration=None, seed=None) -> ScenarioSpec:
    try:
        spec = load_scenario(path)
    except OSError as exc:
        raise InvalidInput(f"cannot read scenario: {exc}") from None
    except ScenarioError as exc:
        raise InvalidInput(f"invalid scenario ({exc.field}): {exc}") from None
    try:
        return with_overrides(spec, dt=dt, duration=duration, seed=seed)
    except ScenarioError as exc:
        raise InvalidInput(f"invalid override ({exc.field}): {exc}") from None


def _summary_doc(m: sim.Summary) -> dict:
    def num(x):
        return float(x) if math.isfinite(x) else str(x)
    return {
        "status": m.status,
        "final_time": num(m.final_time),
        "min_fiedler": num(min(m.fiedler)),
        "max_link_length": num(max(m.max_link_length)),
        "min_obstacle_clearance": num(m.min_obstacle_clearance),
        "min_agent_separation": num(m.min_agent_separation),
        "min_boundary_clearance": num(m.min_boundary_clearance),
        "terminal_distance_errors": {f"{i}-{j}": num(e) for (i, j), e in m.terminal_distance_errors.items()},
        "terminal_position_errors": [num(e) for e in m.terminal_position_errors],
        "terminal_heading_errors": [num(e) for e in m.terminal_heading_errors],
    }


def cmd_simulate(args) -> int:
    spec = _load(args.scenario, args.dt, args.duration, args.seed)
    try:
        trace = sim.run(spec)
    except (sim.InvalidTopology, DeploymentInfeasible) as exc:
        raise InvalidInput(str(exc)) from None
    m = sim.metrics(trace, spec)
    out = Path(args.out)
    output.write_atomic(out / "trace.csv", output.write_trace(trace))
    output.write_atomic(out / "metrics.yaml", yaml.safe_dump(_summary_doc(m), sort_keys=False))
    output.write_atomic(out / "trajectories.svg", output.render_svg(trace, spec))
    output.write_atomic(out / "scenario.yaml", serialize_scenario(spec))
    print(f"status: {trace.status} at t={m.final_time:.6g} s ({len(trace.records)} records)")
    print(f"min Fiedler value: {min(m.fiedler):.6g}")
    if spec.mode == "formation":
        worst = max(m.terminal_distance_errors.values(), default=0.0)
        print(f"max terminal distance error: {worst:.6g} m")
    else:
        print(f"max terminal position error: {max(m.terminal_position_errors):.6g} m")
        print(f"max terminal heading error: {max(m.terminal_heading_errors):.6g} rad")
    print(f"artifacts written to {out}")
    return EXIT_FAILED if trace.failed else EXIT_OK


def field_evaluator(spec: ScenarioSpec):
    """Scalar field of the informed agent (rendezvous) or of agent 0 with others frozen (formation)."""
    states = initial_agents(spec)
    pos = [np.array(s[:2], dtype=float) for s in states]
    params = spec.params
    if spec.mode == "rendezvous":
        dest = np.asarray(spec.destination, float)

        def evaluate(q):
            return nf_informed(RendezvousContext(q, (), dest, spec.desired_heading, "informed"), params).value
    else:
        fn = [(pos[j], spec.offset(0, j)) for j in spec.formation_neighbors(0)]
        others = pos[1:]
        obst = [np.asarray(o, float) for o in spec.obstacles]

        def evaluate(q):
            near = [p for p in others if math.hypot(*(q - p)) <= params.comm_radius]
            close_obst = [o for o in obst if math.hypot(*(q - o)) <= params.comm_radius]
            return nf_formation(FormationContext(q, fn, near, close_obst), params).value

    def safe(q):
        try:
            return evaluate(q)
        except (OutsideWorkspace, DegenerateConfiguration, ConnectivityLost):
            return 1.0
    return safe


def cmd_field(args) -> int:
    if args.grid < 2:
        raise InvalidInput("--grid must be at least 2")
    spec = _load(args.scenario, seed=args.seed)
    try:
        fn = field_evaluator(spec)
    except DeploymentInfeasible as exc:
        raise InvalidInput(str(exc)) from None
    rw = spec.workspace_radius
    text = output.export_field_grid(fn, (-rw, rw, -rw, rw), args.grid, rw)
    target = Path(args.out) / "field.csv"
    output.write_atomic(target, text)
    v = output.grid_values(text)[:, 2]
    print(f"{args.grid}x{args.grid} grid, values in [{v.min():.6g}, {v.max():.6g}], written to {target}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise InvalidInput("--trials must be at least 1")
    res = run_gradcheck(args.seed, args.trials)
    x, y = res.worst_position
    print(f"{res.trials} trials per field kind, worst relative error {res.worst_error:.3e} "
          f"({res.worst_kind} at ({x:.6g}, {y:.6g}))")
    ok = res.worst_error <= GRADCHECK_TOL
    print("PASS" if ok else f"FAIL: exceeds {GRADCHECK_TOL:g}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_fiedler(args) -> int:
    spec = _load(args.scenario, seed=args.seed)
    try:
        world = sim.initial_world(spec)
    except DeploymentInfeasible as exc:
        raise InvalidInput(str(exc)) from None
    n = len(world.agents)
    if n < 2:
        print("single agent: connectivity is trivial")
        return EXIT_OK
    pos = world.positions()
    rep = graph.fiedler_value(graph.build_proximity_graph(pos, spec.comm_radius))
    verdict = "connected" if rep.connected else "disconnected"
    print(f"Fiedler value: {rep.fiedler:.6g} ({verdict})")
    ok = rep.connected
    if spec.mode == "rendezvous":
        arcs = set()
        for i, j in world.maintained_links:
            arcs |= {(i, j), (j, i)}
        g = graph.ProximityGraph.from_edges(n, arcs, directed=True)
        tree = graph.has_directed_spanning_tree(g, spec.informed)
        if tree:
            print(f"directed spanning tree rooted at informed agent {spec.informed}: yes")
        else:
            print(f"directed spanning tree rooted at informed agent {spec.informed}: NO "
                  "(the informed agent cannot reach every follower)")
        ok = ok and tree
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfswarm", description="Navigation-function swarm simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write trace, metrics and SVG")
    s.add_argument("scenario")
    s.add_argument("--out", default="out")
    s.add_argument("--dt", type=float)
    s.add_argument("--duration", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("field", help="sample the potential field on a grid")
    f.add_argument("scenario")
    f.add_argument("--grid", type=int, default=101)
    f.add_argument("--out", default="out")
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_field)

    g = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--trials", type=int, default=1000)
    g.set_defaults(func=cmd_gradcheck)

    c = sub.add_parser("fiedler", help="connectivity of the initial layout")
    c.add_argument("scenario")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_fiedler)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
