"""Problem instances: boxes, travel times, demand tensors, and a generator.

A delivery problem is a set of boxes, each with a volume and a path of two
or three nodes it must visit in order, plus a travel-time matrix and a
driving window shared by all trucks.  Box volumes aggregate into demand
tensors indexed by path, and those collapse into a single pairwise demand
matrix that drives route construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np


class ParseError(ValueError):
    """Input file is structurally broken: bad JSON/CSV or missing fields."""


@dataclass(frozen=True)
class Box:
    """One transport item: an id, a volume, and the node path it must follow.

    Paths have two nodes (origin, destination) or three (origin, middle,
    destination); consecutive nodes must differ.
    """

    id: int
    volume: float
    path: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))
        object.__setattr__(self, "volume", float(self.volume))
        if self.id < 0:
            raise ValueError(f"box id must be non-negative, got {self.id}")
        if not (self.volume > 0.0 and np.isfinite(self.volume)):
            raise ValueError(f"box {self.id}: volume must be positive and finite")
        if len(self.path) not in (2, 3):
            raise ValueError(f"box {self.id}: path must have 2 or 3 nodes, got {len(self.path)}")
        if any(p < 0 for p in self.path):
            raise ValueError(f"box {self.id}: path nodes must be non-negative")
        if any(a == b for a, b in zip(self.path, self.path[1:])):
            raise ValueError(f"box {self.id}: consecutive path nodes must differ")


@dataclass(frozen=True)
class BoxGroup:
    """All boxes sharing one path, with their total volume."""

    path: Tuple[int, ...]
    total_volume: float
    box_ids: Tuple[int, ...]


@dataclass(frozen=True)
class DrivingWindow:
    """Shared driving horizon: no truck may arrive anywhere after t_max."""

    t_max: float

    def __post_init__(self):
        if not (self.t_max > 0.0 and np.isfinite(self.t_max)):
            raise ValueError("t_max must be positive and finite")


class DemandTensors:
    """Volume demand by path: d2[i, j] for two-node paths, d3[i, j, k] for
    three-node ones.  Entries with a repeated consecutive node are zero."""

    def __init__(self, d2: np.ndarray, d3: np.ndarray):
        d2 = np.asarray(d2, dtype=np.float64)
        d3 = np.asarray(d3, dtype=np.float64)
        if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
            raise ValueError("d2 must be a square matrix")
        n = d2.shape[0]
        if d3.shape != (n, n, n):
            raise ValueError(f"d3 must have shape ({n}, {n}, {n}), got {d3.shape}")
        if not (np.isfinite(d2).all() and np.isfinite(d3).all()):
            raise ValueError("demand tensors must be finite")
        if (d2 < 0).any() or (d3 < 0).any():
            raise ValueError("demand tensors must be non-negative")
        if np.diagonal(d2).any():
            raise ValueError("d2 diagonal must be zero")
        idx = np.arange(n)
        if d3[idx, idx, :].any() or d3[:, idx, idx].any():
            raise ValueError("d3 entries with equal consecutive nodes must be zero")
        self.d2 = d2
        self.d3 = d3

    @property
    def n(self) -> int:
        return self.d2.shape[0]


def group_boxes(boxes: Sequence[Box]) -> List[BoxGroup]:
    """Group boxes by path, in first-seen order."""
    order: List[Tuple[int, ...]] = []
    volumes: Dict[Tuple[int, ...], float] = {}
    ids: Dict[Tuple[int, ...], List[int]] = {}
    for box in boxes:
        if box.path not in volumes:
            order.append(box.path)
            volumes[box.path] = 0.0
            ids[box.path] = []
        volumes[box.path] += box.volume
        ids[box.path].append(box.id)
    return [BoxGroup(p, volumes[p], tuple(ids[p])) for p in order]


def box_soup(groups: Sequence[BoxGroup], n: int) -> DemandTensors:
    """Pour grouped volumes into demand tensors over n nodes."""
    d2 = np.zeros((n, n), dtype=np.float64)
    d3 = np.zeros((n, n, n), dtype=np.float64)
    for group in groups:
        if any(not (0 <= p < n) for p in group.path):
            raise ValueError(f"path {group.path} has nodes outside 0..{n - 1}")
        if len(group.path) == 2:
            d2[group.path] += group.total_volume
        elif len(group.path) == 3:
            d3[group.path] += group.total_volume
        else:
            raise ValueError(f"unsupported path rank {len(group.path)} for {group.path}")
    return DemandTensors(d2, d3)


def overall_demand(tensors: DemandTensors) -> np.ndarray:
    """Pairwise demand matrix: each path contributes its volume to every
    consecutive leg it contains."""
    return tensors.d2 + tensors.d3.sum(axis=2) + tensors.d3.sum(axis=0)


def validate_time_matrix(time: np.ndarray) -> np.ndarray:
    time = np.asarray(time, dtype=np.float64)
    if time.ndim != 2 or time.shape[0] != time.shape[1]:
        raise ValueError("time matrix must be square")
    if not np.isfinite(time).all():
        raise ValueError("time matrix must be finite")
    if (time < 0).any():
        raise ValueError("time matrix must be non-negative")
    if np.diagonal(time).any():
        raise ValueError("time matrix diagonal must be zero")
    return time


@dataclass
class ProblemInstance:
    """Nodes, travel times, boxes, driving window, and truck capacity."""

    n: int
    time: np.ndarray
    boxes: List[Box]
    window: DrivingWindow
    truck_capacity: float = 1.0

    def __post_init__(self):
        self.time = validate_time_matrix(self.time)
        if self.n < 2:
            raise ValueError("instance needs at least 2 nodes")
        if self.time.shape != (self.n, self.n):
            raise ValueError(f"time matrix shape {self.time.shape} != ({self.n}, {self.n})")
        if not (self.truck_capacity > 0.0 and np.isfinite(self.truck_capacity)):
            raise ValueError("truck_capacity must be positive and finite")
        for box in self.boxes:
            if any(p >= self.n for p in box.path):
                raise ValueError(f"box {box.id}: path {box.path} has nodes outside 0..{self.n - 1}")
        ids = [b.id for b in self.boxes]
        if len(set(ids)) != len(ids):
            raise ValueError("box ids must be unique")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.time, other.time)
                and self.boxes == other.boxes
                and self.window == other.window
                and self.truck_capacity == other.truck_capacity)

    def demand_tensors(self) -> DemandTensors:
        return box_soup(group_boxes(self.boxes), self.n)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "time": [[float(x) for x in row] for row in self.time],
            "window_s": self.window.t_max,
            "capacity": self.truck_capacity,
            "boxes": [{"id": b.id, "volume": b.volume, "path": list(b.path)}
                      for b in self.boxes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        for name in ("n", "time", "window_s", "capacity", "boxes"):
            if name not in data:
                raise ParseError(f"instance JSON missing field: {name}")
        boxes = []
        for k, entry in enumerate(data["boxes"]):
            for name in ("id", "volume", "path"):
                if name not in entry:
                    raise ParseError(f"box entry {k} missing field: {name}")
            try:
                boxes.append(Box(int(entry["id"]), entry["volume"], entry["path"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"box entry {k}: {exc}") from exc
        return cls(
            n=int(data["n"]),
            time=np.asarray(data["time"], dtype=np.float64),
            boxes=boxes,
            window=DrivingWindow(float(data["window_s"])),
            truck_capacity=float(data["capacity"]),
        )


def save_instance(instance: ProblemInstance, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(instance.to_dict(), fh, indent=2)
        fh.write("\n")


def load_instance(path: str) -> ProblemInstance:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return ProblemInstance.from_dict(data)


def load_time_matrix_csv(path: str) -> np.ndarray:
    """Square travel-time matrix from a headerless CSV of seconds."""
    try:
        time = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{path} is not a numeric CSV matrix: {exc}") from exc
    return validate_time_matrix(time)


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for synthetic instances.

    num_paths counts distinct box paths; the generator arranges paths so the
    number of distinct directed legs equals num_paths as well.  Travel times
    and volumes are drawn log-uniformly from their ranges.
    """

    n: int = 23
    num_boxes: int = 10_000
    num_paths: int = 115
    rank3_fraction: float = 0.25
    volume_range: Tuple[float, float] = (0.001, 0.05)
    time_range_s: Tuple[float, float] = (300.0, 14_400.0)
    window_s: float = 57_600.0
    symmetric_times: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.num_paths < 1:
            raise ValueError("num_paths must be at least 1")
        if self.num_boxes < self.num_paths:
            raise ValueError("num_boxes must be at least num_paths so every path gets a box")
        if self.num_paths > self.n * (self.n - 1):
            raise ValueError(
                f"num_paths {self.num_paths} exceeds the {self.n * (self.n - 1)} "
                "distinct directed legs available")
        if not (0.0 <= self.rank3_fraction <= 1.0):
            raise ValueError("rank3_fraction must be in [0, 1]")
        for name, (lo, hi) in (("volume_range", self.volume_range),
                               ("time_range_s", self.time_range_s)):
            if not (0.0 < lo <= hi):
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        if self.window_s <= 0.0:
            raise ValueError("window_s must be positive")


def _place_rank3(rng: np.random.Generator, n: int, edge_list: List[Tuple[int, int]],
                 edges: set, path_set: set) -> Tuple[int, int, int]:
    # extend one existing leg by one new leg, forward or backward, so each
    # three-node path adds exactly one distinct leg
    order = rng.permutation(len(edge_list))
    first_dir = int(rng.integers(0, 2))
    for edge_idx in order:
        u, v = edge_list[edge_idx]
        for direction in (first_dir, 1 - first_dir):
            if direction == 0:
                cands = [w for w in range(n)
                         if w != v and (v, w) not in edges and (u, v, w) not in path_set]
                if cands:
                    w = int(cands[rng.integers(len(cands))])
                    return (u, v, w)
            else:
                cands = [w for w in range(n)
                         if w != u and (w, u) not in edges and (w, u, v) not in path_set]
                if cands:
                    w = int(cands[rng.integers(len(cands))])
                    return (w, u, v)
    raise ValueError("could not place all rank-3 paths; lower num_paths or rank3_fraction")


def generate_instance(config: GeneratorConfig | None = None,
                      seed: int = 0) -> ProblemInstance:
    """Deterministic synthetic instance for a given (config, seed).

    Paths are chosen so that distinct paths and distinct directed legs both
    equal num_paths: two-node paths are distinct legs, and each three-node
    path reuses one existing leg and introduces exactly one new one.  The
    first num_paths boxes cover each path once; the rest are assigned
    uniformly.
    """
    if config is None:
        config = GeneratorConfig()
    if seed < 0:
        raise ValueError("seed must be non-negative")
    rng = np.random.default_rng(seed)
    n = config.n

    num_rank3 = int(round(config.rank3_fraction * config.num_paths))
    num_rank2 = config.num_paths - num_rank3
    if num_rank3 > 0 and num_rank2 == 0:
        raise ValueError("three-node paths need at least one two-node path to extend")

    all_pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    chosen = rng.choice(len(all_pairs), size=num_rank2, replace=False)
    paths: List[Tuple[int, ...]] = [all_pairs[int(k)] for k in chosen]
    edges = set(paths)
    edge_list = list(paths)
    path_set = set(paths)
    for _ in range(num_rank3):
        path = _place_rank3(rng, n, edge_list, edges, path_set)
        new_edge = path[1:] if (path[0], path[1]) in edges else path[:2]
        edges.add(new_edge)
        edge_list.append(new_edge)
        paths.append(path)
        path_set.add(path)

    v_lo, v_hi = config.volume_range
    volumes = np.exp(rng.uniform(np.log(v_lo), np.log(v_hi), config.num_boxes))
    path_idx = np.concatenate([
        np.arange(config.num_paths),
        rng.integers(0, config.num_paths, config.num_boxes - config.num_paths),
    ])
    boxes = [Box(i, float(volumes[i]), paths[int(path_idx[i])])
             for i in range(config.num_boxes)]

    t_lo, t_hi = config.time_range_s
    raw = np.exp(rng.uniform(np.log(t_lo), np.log(t_hi), (n, n)))
    if config.symmetric_times:
        upper = np.triu(raw, 1)
        time = upper + upper.T
    else:
        time = raw
        np.fill_diagonal(time, 0.0)

    return ProblemInstance(n=n, time=time, boxes=boxes,
                           window=DrivingWindow(config.window_s),
                           truck_capacity=1.0)
