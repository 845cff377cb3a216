"""Box-level discrete-event check of a route plan.

Every box is an individual item with a volume and a two- or three-node path.
Trucks drive their routes on a shared clock; arrivals are processed in
(time, truck index, sequence) order.  At each stop a truck first drops every
cargo box whose next path node is here, then fills leftover capacity with
waiting boxes destined for stops it will still visit, scanning destinations
in visit order and boxes in ascending id.  No leg starts if its arrival
would land after the driving window.

A box is satisfied when it has reached every node of its path in order.
The simulation is deterministic: same instance and routes, same event log,
byte for byte.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .model import Box, ProblemInstance
from .pubo_builder import Route, route_duration

CAPACITY_EPS = 1e-12


@dataclass
class BoxState:
    """Where one box is and how far along its path it has come.

    progress counts path nodes reached so far (starts at 1: the origin).
    Exactly one of node/truck is set: waiting at a node, or riding a truck.
    """

    box: Box
    progress: int
    node: "int | None"
    truck: "int | None" = None

    @property
    def satisfied(self) -> bool:
        return self.progress == len(self.box.path)

    @property
    def next_target(self) -> "int | None":
        return None if self.satisfied else self.box.path[self.progress]


@dataclass
class TruckState:
    """One truck mid-run: position is an index into its route."""

    index: int
    route: Tuple[int, ...]
    position: int = 0
    clock: float = 0.0
    cargo: List[int] = field(default_factory=list)
    cargo_volume: float = 0.0
    carried_volume: float = 0.0


@dataclass
class SimReport:
    """Outcome of one simulation run."""

    satisfied_volume_fraction: float
    satisfied_box_fraction: float
    per_truck_carried_volume: List[float]
    event_log: List[dict]
    violations: List[str]

    def to_dict(self) -> dict:
        return {
            "satisfied_volume_fraction": self.satisfied_volume_fraction,
            "satisfied_box_fraction": self.satisfied_box_fraction,
            "per_truck_carried_volume": list(self.per_truck_carried_volume),
            "event_log": list(self.event_log),
            "violations": list(self.violations),
        }


def pickup_selection(cargo_volume: float, capacity: float,
                     inventory: Mapping[int, Sequence[Tuple[int, float]]],
                     route_remainder: Sequence[int]) -> List[int]:
    """Pick waiting boxes for the remaining route, greedily by volume fit.

    Destinations are scanned in visit order, each distinct one at its first
    occurrence; within a destination, boxes in the order inventory lists
    them.  A box is taken iff it fits the leftover capacity at that moment.
    """
    loaded: List[int] = []
    seen = set()
    for dest in route_remainder:
        if dest in seen:
            continue
        seen.add(dest)
        for box_id, volume in inventory.get(dest, ()):
            if cargo_volume + volume <= capacity + CAPACITY_EPS:
                loaded.append(box_id)
                cargo_volume += volume
    return loaded


@dataclass
class _SimState:
    box_states: List[BoxState]
    trucks: List[TruckState]
    cargo_after: List[List[float]]
    report: SimReport


def _as_node_tuples(routes: Sequence, n: int) -> List[Tuple[int, ...]]:
    out = []
    for k, r in enumerate(routes):
        nodes = tuple(int(p) for p in (r.nodes if isinstance(r, Route) else r))
        if len(nodes) < 1:
            raise ValueError(f"route {k} is empty")
        if any(not (0 <= p < n) for p in nodes):
            raise ValueError(f"route {k} has nodes outside 0..{n - 1}: {nodes}")
        out.append(nodes)
    return out


def _simulate(instance: ProblemInstance, routes: Sequence,
              pickup_order: str = "id", shuffle_seed: int = 0) -> _SimState:
    if pickup_order not in ("id", "shuffle"):
        raise ValueError("pickup_order must be 'id' or 'shuffle'")
    node_routes = _as_node_tuples(routes, instance.n)
    time = instance.time
    t_max = instance.window.t_max
    capacity = instance.truck_capacity
    rng = np.random.default_rng(shuffle_seed) if pickup_order == "shuffle" else None

    ids = [b.id for b in instance.boxes]
    if len(set(ids)) != len(ids):
        raise ValueError("box ids must be unique")
    states: Dict[int, BoxState] = {
        b.id: BoxState(box=b, progress=1, node=b.path[0]) for b in instance.boxes}
    volume = {b.id: b.volume for b in instance.boxes}
    # waiting[node][next_target] -> box ids at that node heading there next
    waiting: Dict[int, Dict[int, List[int]]] = {}
    for b in instance.boxes:
        waiting.setdefault(b.path[0], {}).setdefault(b.path[1], []).append(b.id)

    trucks = [TruckState(m, nodes) for m, nodes in enumerate(node_routes)]
    cargo_after: List[List[float]] = [[] for _ in trucks]
    log: List[dict] = []
    violations: List[str] = []

    seq = 0
    heap: List[Tuple[float, int, int, int]] = []
    for m in range(len(trucks)):
        heapq.heappush(heap, (0.0, m, seq, 0))
        seq += 1

    while heap:
        t, m, _, pos = heapq.heappop(heap)
        truck = trucks[m]
        truck.position = pos
        truck.clock = t
        here = truck.route[pos]
        log.append({"t_s": t, "truck": m, "event": "arrive", "node": here, "box": None})
        if t > t_max + 1e-9:
            violations.append(f"truck {m} arrived at {t} past window {t_max}")

        for box_id in sorted(truck.cargo):
            state = states[box_id]
            if state.box.path[state.progress] != here:
                continue
            truck.cargo.remove(box_id)
            truck.cargo_volume -= volume[box_id]
            state.progress += 1
            state.truck = None
            state.node = here
            if not state.satisfied:
                waiting.setdefault(here, {}).setdefault(state.next_target, []).append(box_id)
            log.append({"t_s": t, "truck": m, "event": "dropoff", "node": here, "box": box_id})
        if not truck.cargo:
            truck.cargo_volume = 0.0  # clear summation drift so empty means 0.0

        buckets = waiting.get(here, {})
        inventory = {}
        for dest, box_ids in buckets.items():
            ordered = sorted(box_ids)
            if rng is not None:
                ordered = [ordered[k] for k in rng.permutation(len(ordered))]
            inventory[dest] = [(box_id, volume[box_id]) for box_id in ordered]
        for box_id in pickup_selection(truck.cargo_volume, capacity, inventory,
                                       truck.route[pos + 1:]):
            state = states[box_id]
            buckets[state.next_target].remove(box_id)
            state.node = None
            state.truck = m
            truck.cargo.append(box_id)
            truck.cargo_volume += volume[box_id]
            truck.carried_volume += volume[box_id]
            log.append({"t_s": t, "truck": m, "event": "pickup", "node": here, "box": box_id})

        if truck.cargo_volume > capacity + CAPACITY_EPS:
            violations.append(f"truck {m} over capacity {truck.cargo_volume} at {t}")
        cargo_after[m].append(truck.cargo_volume)

        if pos + 1 < len(truck.route):
            arrival = t + float(time[here, truck.route[pos + 1]])
            if arrival <= t_max:
                heapq.heappush(heap, (arrival, m, seq, pos + 1))
                seq += 1

    box_states = [states[b.id] for b in instance.boxes]
    report = compute_metrics(box_states, instance, log, len(trucks), violations)
    return _SimState(box_states, trucks, cargo_after, report)


def compute_metrics(box_states: Sequence[BoxState], instance: ProblemInstance,
                    event_log: Sequence[dict] = (), num_trucks: int = 0,
                    violations: Sequence[str] = ()) -> SimReport:
    """Satisfaction fractions from final box states, carried volume from the
    event log.  With no boxes at all both fractions are 1.0."""
    total_volume = sum(b.volume for b in instance.boxes)
    total_count = len(instance.boxes)
    done_volume = sum(s.box.volume for s in box_states if s.satisfied)
    done_count = sum(1 for s in box_states if s.satisfied)
    volume_by_id = {b.id: b.volume for b in instance.boxes}
    carried = [0.0] * num_trucks
    for event in event_log:
        if event["event"] == "pickup":
            carried[event["truck"]] += volume_by_id[event["box"]]
    return SimReport(
        satisfied_volume_fraction=done_volume / total_volume if total_volume > 0 else 1.0,
        satisfied_box_fraction=done_count / total_count if total_count > 0 else 1.0,
        per_truck_carried_volume=carried,
        event_log=list(event_log),
        violations=list(violations),
    )


def run_full_simulation(instance: ProblemInstance, routes: Sequence,
                        pickup_order: str = "id", shuffle_seed: int = 0) -> SimReport:
    """Simulate the plan and report satisfaction, events, and violations."""
    return _simulate(instance, routes, pickup_order, shuffle_seed).report


def per_truck_itineraries(event_log: Sequence[dict]) -> List[dict]:
    """Regroup an event log into per-truck stop lists with loads/unloads."""
    stops: Dict[int, List[dict]] = {}
    for event in event_log:
        m = event["truck"]
        if event["event"] == "arrive":
            stops.setdefault(m, []).append(
                {"node": event["node"], "t_s": event["t_s"], "load": [], "unload": []})
        elif event["event"] == "pickup":
            stops[m][-1]["load"].append(event["box"])
        elif event["event"] == "dropoff":
            stops[m][-1]["unload"].append(event["box"])
    return [{"truck": m, "stops": stops[m]} for m in sorted(stops)]


def _unsatisfied_leg_volume(state: _SimState, n: int) -> np.ndarray:
    # volume of off-board, unfinished boxes by (current node, next required stop)
    unsat = np.zeros((n, n), dtype=np.float64)
    for s in state.box_states:
        if s.truck is None and not s.satisfied:
            unsat[s.node, s.next_target] += s.box.volume
    return unsat


def _extend_with_shuttle(prefix: Sequence[int], pair: Tuple[int, int],
                         time: np.ndarray, t_max: float) -> Tuple[int, ...]:
    i, j = pair
    nodes = list(prefix)
    dur = route_duration(nodes, time)
    entry = i if time[nodes[-1], i] <= time[nodes[-1], j] else j
    other = j if entry == i else i
    target = other if nodes[-1] == entry else entry
    zero_run = 0
    while True:
        hop = float(time[nodes[-1], target])
        if dur + hop > t_max:
            break
        if hop == 0.0:
            zero_run += 1
            if zero_run >= 2:
                break
        else:
            zero_run = 0
        nodes.append(target)
        dur += hop
        target = other if target == entry else entry
    return tuple(nodes)


def _shuttle_candidate(instance: ProblemInstance, routes: List[Route],
                       state: _SimState) -> "List[Route] | None":
    unsat = _unsatisfied_leg_volume(state, instance.n)
    if float(unsat.max()) <= 0.0:
        return None
    flat = int(np.argmax(unsat))  # first max in row-major order: smallest (i, j)
    pair = (flat // instance.n, flat % instance.n)
    t_max = instance.window.t_max
    changed = False
    out: List[Route] = []
    for m, route in enumerate(routes):
        processed = state.cargo_after[m]
        last_loaded = len(processed)
        while last_loaded > 0 and processed[last_loaded - 1] == 0.0:
            last_loaded -= 1
        # clip only when the truck ran empty for at least its last two stops
        if last_loaded <= len(route.nodes) - 2:
            new_nodes = _extend_with_shuttle(route.nodes[:last_loaded + 1], pair,
                                             instance.time, t_max)
            if new_nodes != route.nodes:
                route = Route.from_nodes(new_nodes, instance.time)
                changed = True
        out.append(route)
    return out if changed else None


def correct_routes(instance: ProblemInstance, routes: Sequence,
                   rounds: int = 5) -> Tuple[List[Route], SimReport]:
    """Repair empty route tails with a shuttle over the worst unserved leg.

    Each round finds the ordered node pair with the most unserved waiting
    volume, replaces every truck's trailing cargo-free stops with an
    alternating shuttle between that pair (entered at the endpoint nearer
    the clip point), and re-simulates.  The change is kept only if the
    satisfied volume fraction strictly improved; otherwise the previous
    routes stand and the repair stops.  Never returns a worse plan than the
    input.
    """
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    current = [r if isinstance(r, Route) else Route.from_nodes(r, instance.time)
               for r in routes]
    state = _simulate(instance, current)
    best_report = state.report
    for _ in range(rounds):
        candidate = _shuttle_candidate(instance, current, state)
        if candidate is None:
            break
        cand_state = _simulate(instance, candidate)
        if cand_state.report.satisfied_volume_fraction > best_report.satisfied_volume_fraction:
            current, state, best_report = candidate, cand_state, cand_state.report
        else:
            break
    return current, best_report
