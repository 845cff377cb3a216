"""Shared test helpers: random problem builders and independent oracles.

Everything here recomputes expected behavior from first principles (event-log
replay, direct route scoring, enumeration) so the tests never trust the code
under test for its own expected values.
"""

from __future__ import annotations

import numpy as np

from vrpanneal import BinaryPolynomial, Box, DrivingWindow, ProblemInstance


def rand_poly(rng, max_vars=8, max_terms=12, high_degree_terms=3,
              integer=False) -> BinaryPolynomial:
    """Random polynomial; integer=True keeps all arithmetic exact in floats."""
    nv = int(rng.integers(3, max_vars + 1))
    terms = {}
    for _ in range(int(rng.integers(1, high_degree_terms + 1))):
        deg = int(rng.integers(3, 5))
        mono = tuple(sorted(rng.choice(nv, size=min(deg, nv), replace=False).tolist()))
        c = int(rng.integers(-10, 11)) or 1
        terms[mono] = terms.get(mono, 0.0) + (c if integer else c * rng.uniform(0.5, 1.0))
    for _ in range(int(rng.integers(0, max_terms))):
        deg = int(rng.integers(1, 3))
        mono = tuple(sorted(rng.choice(nv, size=deg, replace=False).tolist()))
        c = int(rng.integers(-10, 11)) or 1
        terms[mono] = terms.get(mono, 0.0) + (c if integer else c * rng.uniform(0.5, 1.0))
    return BinaryPolynomial({m: float(c) for m, c in terms.items()}, num_vars=nv)


def one_hot_bits(nodes, n, tau):
    bits = [0] * (n * tau)
    for t, i in enumerate(nodes):
        bits[i * tau + t] = 1
    return tuple(bits)


def route_score(nodes, overall, time, params) -> float:
    """Score of a one-node-per-step route, computed from the route alone:
    weighted drive time, minus weighted demand reachable within delta_max
    steps, plus the weighted count of repeated small-demand transitions."""
    tau = len(nodes)
    drive = sum(float(time[a, b]) for a, b in zip(nodes, nodes[1:]))
    demand = 0.0
    for t in range(tau - 1):
        for d in range(1, min(params.delta_max, tau - 1 - t) + 1):
            demand += float(overall[nodes[t], nodes[t + d]])
    flags = (overall > 0) & (overall <= params.redundancy_threshold)
    repeats = 0
    for t1 in range(tau - 1):
        for t2 in range(t1 + 2, tau - 1):
            if (nodes[t1], nodes[t1 + 1]) == (nodes[t2], nodes[t2 + 1]) \
                    and flags[nodes[t1], nodes[t1 + 1]]:
                repeats += 1
    return (params.a_time * drive - params.a_demand * demand
            + params.a_nonredundant * repeats)


def random_small_instance(rng, n_max=6, max_boxes=50) -> ProblemInstance:
    n = int(rng.integers(2, n_max + 1))
    time = rng.uniform(1.0, 60.0, (n, n))
    np.fill_diagonal(time, 0.0)
    boxes = []
    for b in range(int(rng.integers(1, max_boxes + 1))):
        rank = 3 if rng.random() < 0.35 else 2
        path = [int(rng.integers(n))]
        while len(path) < rank:
            nxt = int(rng.integers(n))
            if nxt != path[-1]:
                path.append(nxt)
        boxes.append(Box(b, float(rng.uniform(0.01, 0.4)), tuple(path)))
    window = DrivingWindow(float(rng.uniform(30.0, 600.0)))
    return ProblemInstance(n=n, time=time, boxes=boxes, window=window)


def random_routes(rng, n, max_trucks=5, max_len=8):
    routes = []
    for _ in range(int(rng.integers(1, max_trucks + 1))):
        routes.append([int(rng.integers(n))
                       for _ in range(int(rng.integers(1, max_len + 1)))])
    return routes


def replay_violations(instance, routes, report):
    """Independently re-derive a run from its event log; list every broken
    invariant: window compliance, route following, pickup/dropoff legality,
    path order, capacity, and agreement of the satisfaction metrics."""
    problems = []
    boxes = {b.id: b for b in instance.boxes}
    vol = {b.id: b.volume for b in instance.boxes}
    loc = {b.id: ("node", b.path[0]) for b in instance.boxes}
    progress = {b.id: 1 for b in instance.boxes}
    cargo_vol = {}
    truck_node = {}
    truck_clock = {}
    arrivals = {}
    t_max = instance.window.t_max

    for ev in report.event_log:
        t, m, kind = ev["t_s"], ev["truck"], ev["event"]
        if t > t_max + 1e-9:
            problems.append(f"event past window: {ev}")
        if kind == "arrive":
            if m in truck_clock and t < truck_clock[m] - 1e-12:
                problems.append(f"truck {m} clock went backwards at {t}")
            truck_clock[m] = t
            truck_node[m] = ev["node"]
            cargo_vol.setdefault(m, 0.0)
            arrivals.setdefault(m, []).append((t, ev["node"]))
        elif kind == "pickup":
            b = ev["box"]
            if loc[b] != ("node", ev["node"]):
                problems.append(f"pickup of box {b} not waiting at node {ev['node']}")
            if ev["node"] != truck_node.get(m):
                problems.append(f"pickup by truck {m} away from its node")
            if progress[b] >= len(boxes[b].path):
                problems.append(f"pickup of already satisfied box {b}")
            loc[b] = ("truck", m)
            cargo_vol[m] += vol[b]
            if cargo_vol[m] > instance.truck_capacity + 1e-9:
                problems.append(f"truck {m} over capacity: {cargo_vol[m]}")
        elif kind == "dropoff":
            b = ev["box"]
            if loc[b] != ("truck", m):
                problems.append(f"dropoff of box {b} not riding truck {m}")
            if ev["node"] != truck_node.get(m):
                problems.append(f"dropoff by truck {m} away from its node")
            path = boxes[b].path
            if progress[b] >= len(path) or path[progress[b]] != ev["node"]:
                problems.append(f"box {b} dropped out of path order at {ev['node']}")
            progress[b] += 1
            loc[b] = ("node", ev["node"])
            cargo_vol[m] -= vol[b]
        else:
            problems.append(f"unknown event kind {kind}")

    node_lists = [list(r.nodes) if hasattr(r, "nodes") else list(r) for r in routes]
    for m, nodes in enumerate(node_lists):
        got = arrivals.get(m, [])
        if len(got) < 1 or len(got) > len(nodes):
            problems.append(f"truck {m} made {len(got)} arrivals on a {len(nodes)}-stop route")
            continue
        expect_t = 0.0
        for k, (t, node) in enumerate(got):
            if node != nodes[k]:
                problems.append(f"truck {m} arrival {k} at {node}, route says {nodes[k]}")
            if k > 0:
                expect_t += float(instance.time[nodes[k - 1], nodes[k]])
            if abs(t - expect_t) > 1e-9:
                problems.append(f"truck {m} arrival {k} at t={t}, expected {expect_t}")
        if len(got) < len(nodes):
            nxt = expect_t + float(instance.time[nodes[len(got) - 1], nodes[len(got)]])
            if nxt <= t_max:
                problems.append(f"truck {m} stopped although next arrival {nxt} fits")

    sat_vol = sum(vol[b] for b in progress if progress[b] == len(boxes[b].path))
    total = sum(vol.values())
    want = sat_vol / total if total > 0 else 1.0
    if abs(report.satisfied_volume_fraction - want) > 1e-12:
        problems.append(f"satisfied volume {report.satisfied_volume_fraction} != replay {want}")
    return problems
