"""Multi-truck vehicle routing via binary optimization.

Pipeline: pour box demand into a pairwise demand matrix, build one small
routing polynomial per truck, minimize it (simulated annealing by default),
decode and window-fit the route, deduct the demand the truck is estimated
to satisfy, repeat until demand is exhausted, then validate the whole plan
with a box-level discrete-event simulation and repair idle route tails.
"""

from .anneal import (CoolingSchedule, ExternalSolverError, SolverConfig,
                     SolverLookupError, SolverResult, available_solvers,
                     make_external_solver, register_solver, simulated_anneal,
                     solve)
from .binpoly import BinaryPolynomial, brute_force_minimize, reduce_to_quadratic
from .model import (Box, BoxGroup, DemandTensors, DrivingWindow, GeneratorConfig,
                    ParseError, ProblemInstance, box_soup, generate_instance,
                    group_boxes, load_instance, load_time_matrix_csv,
                    overall_demand, save_instance)
from .pubo_builder import (PuboParams, Route, VarIndex, build_single_truck_pubo,
                           fit_to_window, rectify, route_duration)
from .seeding import derive_seed
from .simulate import (BoxState, SimReport, TruckState, compute_metrics,
                       correct_routes, per_truck_itineraries, pickup_selection,
                       run_full_simulation)
from .truck_loop import (LoopConfig, RoutePlan, TruckLoopError, estimate_demand,
                         load_plan, run_truck_loop, save_plan, stop)

__version__ = "0.1.0"

__all__ = [
    "BinaryPolynomial", "brute_force_minimize", "reduce_to_quadratic",
    "CoolingSchedule", "SolverConfig", "SolverResult", "simulated_anneal",
    "solve", "register_solver", "available_solvers", "make_external_solver",
    "SolverLookupError", "ExternalSolverError",
    "Box", "BoxGroup", "DemandTensors", "DrivingWindow", "ProblemInstance",
    "GeneratorConfig", "generate_instance", "group_boxes", "box_soup",
    "overall_demand", "save_instance", "load_instance", "load_time_matrix_csv",
    "ParseError",
    "PuboParams", "VarIndex", "Route", "build_single_truck_pubo", "rectify",
    "fit_to_window", "route_duration",
    "LoopConfig", "RoutePlan", "TruckLoopError", "estimate_demand",
    "run_truck_loop", "stop", "save_plan", "load_plan",
    "BoxState", "TruckState", "SimReport", "pickup_selection",
    "run_full_simulation", "compute_metrics", "correct_routes",
    "per_truck_itineraries",
    "derive_seed",
]
