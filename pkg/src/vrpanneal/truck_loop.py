"""Adding trucks one at a time until pairwise demand is exhausted.

Each iteration builds the one-truck polynomial from the current residual
demand, minimizes it, rectifies and window-fits the route, estimates the
demand that route satisfies with a greedy cargo walk, and deducts the
estimate.  The loop stops when the residual maximum falls below a cutoff,
when a truck budget is reached, or after three consecutive trucks that
satisfy nothing.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .anneal import SolverConfig, solve
from .model import DrivingWindow, ParseError, validate_time_matrix
from .pubo_builder import PuboParams, Route, build_single_truck_pubo, fit_to_window, rectify
from .seeding import derive_seed

logger = logging.getLogger(__name__)


class TruckLoopError(RuntimeError):
    """Solver failure inside the loop, tagged with the truck index."""

    def __init__(self, truck_index: int, message: str):
        super().__init__(message)
        self.truck_index = truck_index


@dataclass(frozen=True)
class LoopConfig:
    """Horizon, polynomial weights, solver choice, and stop conditions.

    tau here wins over params.tau, so profiles can swap the horizon without
    respelling the weights.  solver_config.seed is the root seed; each truck
    derives its own solver and rectify streams from it.
    """

    tau: int = 15
    params: PuboParams = field(default_factory=PuboParams)
    solver_name: str = "sa"
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    demand_cutoff: float = 5e-4
    max_trucks: int = 200
    window: DrivingWindow = DrivingWindow(57_600.0)
    truck_capacity: float = 1.0

    def __post_init__(self):
        if self.demand_cutoff < 0.0:
            raise ValueError("demand_cutoff must be non-negative")
        if self.max_trucks < 1:
            raise ValueError("max_trucks must be at least 1")
        if self.truck_capacity <= 0.0:
            raise ValueError("truck_capacity must be positive")

    def effective_params(self) -> PuboParams:
        return replace(self.params, tau=self.tau)


def stop(overall: np.ndarray, num_trucks: int, config: LoopConfig) -> bool:
    """True when the loop should not add another truck."""
    if num_trucks >= config.max_trucks:
        return True
    return overall.size == 0 or float(overall.max()) < config.demand_cutoff


def estimate_demand(overall: np.ndarray, route: "Route | Sequence[int]",
                    capacity: float = 1.0) -> Tuple[np.ndarray, float]:
    """Greedy cargo walk along the route against the pairwise demand.

    At each stop the truck first unloads cargo destined there, then fills
    remaining capacity with demand from this stop toward later stops, taken
    in route order.  Returns (reduction matrix, total); the reduction is
    elementwise non-negative and never exceeds the input demand.
    """
    nodes = list(route.nodes) if isinstance(route, Route) else [int(p) for p in route]
    if capacity <= 0.0:
        raise ValueError("capacity must be positive")
    working = np.array(overall, dtype=np.float64, copy=True)
    if working.ndim != 2 or working.shape[0] != working.shape[1]:
        raise ValueError("overall demand must be a square matrix")
    if any(not (0 <= p < working.shape[0]) for p in nodes):
        raise ValueError("route nodes outside the demand matrix")
    cargo: dict[int, float] = {}
    cargo_total = 0.0
    for p, here in enumerate(nodes):
        cargo_total -= cargo.pop(here, 0.0)
        for q in range(p + 1, len(nodes)):
            dest = nodes[q]
            room = capacity - cargo_total
            if room <= 0.0:
                break
            take = min(room, working[here, dest])
            if take > 0.0:
                working[here, dest] -= take
                cargo[dest] = cargo.get(dest, 0.0) + take
                cargo_total += take
    reduction = overall - working
    return reduction, float(reduction.sum())


@dataclass
class RoutePlan:
    """Routes in truck order, per-truck demand estimates, and the residual
    demand left after all deductions."""

    routes: List[Route]
    estimated: List[float]
    residual: np.ndarray

    def to_dict(self) -> dict:
        return {
            "routes": [r.to_dict() for r in self.routes],
            "estimated": [float(e) for e in self.estimated],
            "residual": [[float(x) for x in row] for row in self.residual],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoutePlan":
        for name in ("routes", "estimated", "residual"):
            if name not in data:
                raise ParseError(f"plan JSON missing field: {name}")
        return cls(
            routes=[Route.from_dict(r) for r in data["routes"]],
            estimated=[float(e) for e in data["estimated"]],
            residual=np.asarray(data["residual"], dtype=np.float64),
        )


def save_plan(plan: RoutePlan, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(plan.to_dict(), fh, indent=2)
        fh.write("\n")


def load_plan(path: str) -> RoutePlan:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return RoutePlan.from_dict(data)


ProgressFn = Callable[[int, float, float], None]


def run_truck_loop(overall: np.ndarray, time: np.ndarray,
                   config: LoopConfig | None = None,
                   progress: ProgressFn | None = None) -> RoutePlan:
    """Build routes until demand is exhausted or a stop condition fires.

    progress, when given, is called after each truck with (truck index,
    estimated demand, residual max).  Deterministic for fixed inputs and
    config; truck m uses solver and rectify streams derived from
    (root seed, "truck", m).
    """
    if config is None:
        config = LoopConfig()
    current = np.array(overall, dtype=np.float64, copy=True)
    if current.ndim != 2 or current.shape[0] != current.shape[1]:
        raise ValueError("overall demand must be a square matrix")
    if not np.isfinite(current).all() or (current < 0).any():
        raise ValueError("overall demand must be finite and non-negative")
    time = validate_time_matrix(time)
    if time.shape != current.shape:
        raise ValueError(f"time shape {time.shape} != demand shape {current.shape}")

    root = config.solver_config.seed
    routes: List[Route] = []
    estimated: List[float] = []
    zero_streak = 0
    while not stop(current, len(routes), config):
        m = len(routes)
        pubo, vidx = build_single_truck_pubo(current, time, config.effective_params())
        solver_cfg = replace(config.solver_config,
                             seed=derive_seed(root, "truck", m, "solve"))
        try:
            result = solve(pubo, config.solver_name, solver_cfg)
        except Exception as exc:
            raise TruckLoopError(m, f"truck {m}: solver {config.solver_name!r} failed: {exc}") from exc
        rng = np.random.default_rng(derive_seed(root, "truck", m, "rectify"))
        route = rectify(result.best_assignment, pubo, vidx, rng, time)
        route = fit_to_window(route, time, config.window)
        reduction, est = estimate_demand(current, route, config.truck_capacity)
        current = current - reduction
        routes.append(route)
        estimated.append(est)
        if progress is not None:
            progress(m, est, float(current.max()))
        zero_streak = zero_streak + 1 if est <= 0.0 else 0
        if zero_streak >= 3:
            logger.warning(
                "stopping after %d trucks: three consecutive trucks satisfied "
                "no demand (residual max %.6g)", len(routes), float(current.max()))
            break
    return RoutePlan(routes, estimated, current)
