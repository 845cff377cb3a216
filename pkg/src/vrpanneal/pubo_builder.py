"""Building the one-truck routing polynomial and decoding its solutions.

A truck's route over a horizon of tau steps is encoded in n * tau binary
variables, one per (node, step): variable x[i, t] means the truck sits at
node i on step t.  The polynomial combines four ingredients:

- locality: a quadratic penalty per step that is zero exactly when one node
  is active on that step,
- demand: a negative reward for visiting i and then j within a bounded
  number of steps, weighted by the pairwise demand,
- drive time: the travel time of every consecutive transition,
- redundancy: a quartic penalty on repeating the same i -> j transition at
  two different times, applied only where demand is small enough that one
  pass already covers it.

Decoding goes through rectify (force exactly one node per step) and
fit_to_window (shrink or cyclically grow the route to the driving window).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .binpoly import BinaryPolynomial
from .model import DrivingWindow, ParseError, validate_time_matrix


@dataclass(frozen=True)
class PuboParams:
    """Term weights and shape knobs for the one-truck polynomial."""

    a_local: float = 5000.0
    a_demand: float = 320.0
    a_time: float = 0.01
    a_nonredundant: float = 1.0
    delta_max: int = 3
    redundancy_threshold: float = 1.0
    tau: int = 15

    def __post_init__(self):
        if self.a_local <= 0.0:
            raise ValueError("a_local must be positive")
        for name in ("a_demand", "a_time", "a_nonredundant"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.delta_max < 1:
            raise ValueError("delta_max must be at least 1")
        if self.redundancy_threshold < 0.0:
            raise ValueError("redundancy_threshold must be non-negative")
        if self.tau < 2:
            raise ValueError("tau must be at least 2")


class VarIndex:
    """Bijection between (node, step) pairs and flat variable indices."""

    def __init__(self, n: int, tau: int):
        if n < 1 or tau < 1:
            raise ValueError("n and tau must be positive")
        self.n = n
        self.tau = tau
        self.pairs: List[Tuple[int, int]] = [(i, t) for i in range(n) for t in range(tau)]

    @property
    def num_vars(self) -> int:
        return self.n * self.tau

    def index(self, node: int, step: int) -> int:
        if not (0 <= node < self.n):
            raise ValueError(f"node {node} outside 0..{self.n - 1}")
        if not (0 <= step < self.tau):
            raise ValueError(f"step {step} outside 0..{self.tau - 1}")
        return node * self.tau + step

    def pair(self, index: int) -> Tuple[int, int]:
        if not (0 <= index < self.num_vars):
            raise ValueError(f"variable index {index} outside 0..{self.num_vars - 1}")
        return self.pairs[index]


def locality_term(n: int, tau: int) -> BinaryPolynomial:
    """Sum over steps of (1 - sum_i x[i, t])^2, expanded."""
    terms: Dict[Tuple[int, ...], float] = {(): float(tau)}
    for t in range(tau):
        for i in range(n):
            terms[(i * tau + t,)] = -1.0
            for j in range(i + 1, n):
                terms[(i * tau + t, j * tau + t)] = 2.0
    return BinaryPolynomial._raw(terms, n * tau)


def demand_term(overall: np.ndarray, tau: int, delta_max: int) -> BinaryPolynomial:
    """Reward -overall[i, j] for x[i, t] x[j, t + d], d = 1 .. min(delta_max,
    remaining steps)."""
    n = overall.shape[0]
    terms: Dict[Tuple[int, ...], float] = {}
    for i, j in np.argwhere(overall > 0):
        i, j = int(i), int(j)
        coeff = -float(overall[i, j])
        for t in range(tau - 1):
            for d in range(1, min(delta_max, tau - 1 - t) + 1):
                a, b = i * tau + t, j * tau + t + d
                terms[(a, b) if a < b else (b, a)] = coeff
    return BinaryPolynomial._raw(terms, n * tau)


def time_term(time: np.ndarray, tau: int) -> BinaryPolynomial:
    """Travel time of every consecutive transition: time[i, j] x[i, t] x[j, t+1]."""
    n = time.shape[0]
    terms: Dict[Tuple[int, ...], float] = {}
    for i in range(n):
        for j in range(n):
            if i == j or time[i, j] == 0.0:
                continue
            coeff = float(time[i, j])
            for t in range(tau - 1):
                a, b = i * tau + t, j * tau + t + 1
                terms[(a, b) if a < b else (b, a)] = coeff
    return BinaryPolynomial._raw(terms, n * tau)


def redundancy_term(flags: np.ndarray, tau: int) -> BinaryPolynomial:
    """Quartic penalty on repeating a flagged i -> j transition at two times:
    x[i, t] x[j, t+1] x[i, t+d] x[j, t+1+d] for d >= 2."""
    n = flags.shape[0]
    terms: Dict[Tuple[int, ...], float] = {}
    for i, j in np.argwhere(flags):
        i, j = int(i), int(j)
        if i == j:
            continue
        for d in range(2, tau - 1):
            for t in range(tau - 1 - d):
                key = tuple(sorted((i * tau + t, j * tau + t + 1,
                                    i * tau + t + d, j * tau + t + 1 + d)))
                terms[key] = terms.get(key, 0.0) + 1.0
    return BinaryPolynomial._raw(terms, n * tau)


def build_single_truck_pubo(overall: np.ndarray, time: np.ndarray,
                            params: PuboParams | None = None,
                            ) -> Tuple[BinaryPolynomial, VarIndex]:
    """Weighted sum of the four terms over n * params.tau variables.

    The redundancy penalty applies where 0 < overall[i, j] <=
    params.redundancy_threshold, so a second pass over an already coverable
    pair is discouraged.
    """
    if params is None:
        params = PuboParams()
    overall = np.asarray(overall, dtype=np.float64)
    if overall.ndim != 2 or overall.shape[0] != overall.shape[1]:
        raise ValueError("overall demand must be a square matrix")
    if not np.isfinite(overall).all() or (overall < 0).any():
        raise ValueError("overall demand must be finite and non-negative")
    time = validate_time_matrix(time)
    if time.shape != overall.shape:
        raise ValueError(f"time shape {time.shape} != demand shape {overall.shape}")
    n, tau = overall.shape[0], params.tau
    vidx = VarIndex(n, tau)
    poly = BinaryPolynomial(num_vars=vidx.num_vars)
    poly = poly.add_scaled(locality_term(n, tau), params.a_local)
    poly = poly.add_scaled(demand_term(overall, tau, params.delta_max), params.a_demand)
    poly = poly.add_scaled(time_term(time, tau), params.a_time)
    flags = (overall > 0) & (overall <= params.redundancy_threshold)
    poly = poly.add_scaled(redundancy_term(flags, tau), params.a_nonredundant)
    return poly, vidx


@dataclass(frozen=True)
class Route:
    """A node sequence and its total drive time.  Consecutive repeats are
    allowed and cost nothing (the truck stays put for that step)."""

    nodes: Tuple[int, ...]
    duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(p) for p in self.nodes))
        if len(self.nodes) < 1:
            raise ValueError("route needs at least one node")
        if any(p < 0 for p in self.nodes):
            raise ValueError("route nodes must be non-negative")

    @classmethod
    def from_nodes(cls, nodes: Sequence[int], time: np.ndarray) -> "Route":
        return cls(tuple(nodes), route_duration(nodes, time))

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "duration_s": self.duration_s}

    @classmethod
    def from_dict(cls, data: dict) -> "Route":
        for name in ("nodes", "duration_s"):
            if name not in data:
                raise ParseError(f"route JSON missing field: {name}")
        return cls(tuple(data["nodes"]), float(data["duration_s"]))


def route_duration(nodes: Sequence[int], time: np.ndarray) -> float:
    total = 0.0
    for a, b in zip(nodes, nodes[1:]):
        total += float(time[a, b])
    return total


def rectify(assignment: Sequence[int], pubo: BinaryPolynomial, var_index: VarIndex,
            rng: np.random.Generator, time: np.ndarray) -> Route:
    """Force exactly one active node per step and read off the route.

    Steps are fixed in ascending order.  A step with no active node gets a
    uniformly random one.  A step with several keeps the candidate whose
    one-node assignment scores lowest on the polynomial terms touching that
    step (earlier steps already fixed, later steps as given); ties keep the
    lowest node index.
    """
    n, tau = var_index.n, var_index.tau
    if len(assignment) != var_index.num_vars:
        raise ValueError(
            f"assignment length {len(assignment)} != {var_index.num_vars} variables")
    bits = [1 if b else 0 for b in assignment]
    by_step: List[List[Tuple[Tuple[int, ...], float]]] = [[] for _ in range(tau)]
    for mono, coeff in pubo.terms.items():
        for step in {var_index.pair(v)[1] for v in mono}:
            by_step[step].append((mono, coeff))
    nodes = []
    for t in range(tau):
        active = [i for i in range(n) if bits[i * tau + t]]
        if len(active) == 1:
            node = active[0]
        elif not active:
            node = int(rng.integers(n))
        else:
            node = active[0]
            best = None
            for cand in active:
                for i in active:
                    bits[i * tau + t] = 1 if i == cand else 0
                score = 0.0
                for mono, coeff in by_step[t]:
                    for v in mono:
                        if not bits[v]:
                            break
                    else:
                        score += coeff
                if best is None or score < best:
                    best = score
                    node = cand
        for i in range(n):
            bits[i * tau + t] = 1 if i == node else 0
        nodes.append(node)
    return Route.from_nodes(nodes, time)


def fit_to_window(route: Route, time: np.ndarray, window: DrivingWindow) -> Route:
    """Shrink or grow a route to the driving window.

    Over budget: drop trailing nodes until the duration fits.  Under budget:
    keep appending the original node sequence cyclically (skipping
    self-transitions) while the next arrival still fits; a full cycle that
    adds no drive time stops the growth.
    """
    t_max = window.t_max
    nodes = list(route.nodes)
    dur = route_duration(nodes, time)
    if dur > t_max:
        while len(nodes) > 1 and dur > t_max:
            dur -= float(time[nodes[-2], nodes[-1]])
            nodes.pop()
        return Route(tuple(nodes), dur)
    original = route.nodes
    k = len(original)
    idx = 0
    no_gain = 0
    while no_gain < k:
        cand = original[idx % k]
        idx += 1
        if cand == nodes[-1]:
            no_gain += 1
            continue
        hop = float(time[nodes[-1], cand])
        if dur + hop > t_max:
            break
        nodes.append(cand)
        dur += hop
        no_gain = no_gain + 1 if hop == 0.0 else 0
    return Route(tuple(nodes), dur)
