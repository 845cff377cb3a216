"""Minimizing binary polynomials: simulated annealing and a solver registry.

The annealer walks assignments by single-bit flips under a Metropolis accept
rule with a decreasing temperature schedule.  The hot loop is compiled with
numba over a flat incidence layout of the polynomial, and each restart draws
all of its randomness up front from an independent, seed-derived stream, so
results are reproducible bit for bit.

Other solvers (the exact brute-force one, or an external process or HTTP
service) plug into the same entry point through a small registry.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from numba import njit

from .binpoly import BinaryPolynomial, reduce_to_quadratic

EXTERNAL_SOLVER_NAME = "external"
EXTERNAL_SOLVER_ENV = "VRPANNEAL_EXTERNAL_SOLVER"

_COOLING_KINDS = ("geometric", "linear")


class SolverLookupError(LookupError):
    """Requested solver name is not registered."""


class ExternalSolverError(RuntimeError):
    """External solver process or endpoint failed or answered garbage."""


@dataclass(frozen=True)
class CoolingSchedule:
    """Temperature plan for one annealing chain.

    kind is "geometric" or "linear"; temperatures run from t_start down to
    t_end over num_steps steps.  t_end == t_start gives a flat schedule,
    which turns the walk into a greedy descent when the value is tiny.
    """

    kind: str = "geometric"
    t_start: float = 1.0
    t_end: float = 1e-3
    num_steps: int = 10_000

    def __post_init__(self):
        if self.kind not in _COOLING_KINDS:
            raise ValueError(f"kind must be one of {_COOLING_KINDS}, got {self.kind!r}")
        if not (self.t_start > 0.0):
            raise ValueError("t_start must be positive")
        if not (0.0 < self.t_end <= self.t_start):
            raise ValueError("t_end must satisfy 0 < t_end <= t_start")
        if self.num_steps < 1:
            raise ValueError("num_steps must be at least 1")

    def temperatures(self) -> np.ndarray:
        if self.kind == "geometric":
            return np.geomspace(self.t_start, self.t_end, self.num_steps)
        return np.linspace(self.t_start, self.t_end, self.num_steps)


@dataclass(frozen=True)
class SolverConfig:
    """Restart count, seed, and optional explicit schedule.

    With schedule=None the annealer picks a scale-aware default: geometric,
    t_start = max(1, largest |coefficient|), t_end = 1e-3 * t_start, and
    default_num_steps steps.
    """

    schedule: CoolingSchedule | None = None
    num_restarts: int = 20
    seed: int = 0
    default_num_steps: int = 10_000

    def __post_init__(self):
        if self.num_restarts < 1:
            raise ValueError("num_restarts must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.default_num_steps < 1:
            raise ValueError("default_num_steps must be at least 1")


@dataclass(frozen=True)
class SolverResult:
    """Best assignment found, its exact re-evaluated value, and how many
    assignments the solver scored (0 when the solver does not report it)."""

    best_assignment: Tuple[int, ...]
    best_value: float
    samples_evaluated: int


def default_schedule(poly: BinaryPolynomial, num_steps: int = 10_000) -> CoolingSchedule:
    scale = max((abs(c) for c in poly.terms.values()), default=1.0)
    t_start = max(1.0, scale)
    return CoolingSchedule("geometric", t_start, 1e-3 * t_start, num_steps)


def _compile_terms(poly: BinaryPolynomial):
    monos = list(poly.terms.items())
    coeffs = np.array([c for _, c in monos], dtype=np.float64)
    term_offsets = np.zeros(len(monos) + 1, dtype=np.int64)
    flat_vars = []
    incident: Dict[int, list] = {}
    for t, (mono, _) in enumerate(monos):
        term_offsets[t + 1] = term_offsets[t] + len(mono)
        for idx in mono:
            flat_vars.append(idx)
            incident.setdefault(idx, []).append(t)
    term_vars = np.array(flat_vars, dtype=np.int64)
    var_offsets = np.zeros(poly.num_vars + 1, dtype=np.int64)
    flat_terms = []
    for i in range(poly.num_vars):
        hits = incident.get(i, ())
        var_offsets[i + 1] = var_offsets[i] + len(hits)
        flat_terms.extend(hits)
    var_terms = np.array(flat_terms, dtype=np.int64)
    return coeffs, term_vars, term_offsets, var_terms, var_offsets


@njit(cache=True)
def _chain(bits, coeffs, term_vars, term_offsets, var_terms, var_offsets,
           flips, unifs, temps, best_bits, trace):
    energy = 0.0
    for t in range(coeffs.shape[0]):
        prod = 1.0
        for k in range(term_offsets[t], term_offsets[t + 1]):
            prod *= bits[term_vars[k]]
        energy += coeffs[t] * prod
    best = energy
    for j in range(bits.shape[0]):
        best_bits[j] = bits[j]
    record = trace.shape[0] > 0
    for s in range(flips.shape[0]):
        i = flips[s]
        partial = 0.0
        for k in range(var_offsets[i], var_offsets[i + 1]):
            t = var_terms[k]
            prod = 1.0
            for q in range(term_offsets[t], term_offsets[t + 1]):
                j = term_vars[q]
                if j != i:
                    prod *= bits[j]
            partial += coeffs[t] * prod
        delta = (1.0 - 2.0 * bits[i]) * partial
        if delta <= 0.0 or unifs[s] < np.exp(-delta / temps[s]):
            bits[i] = 1.0 - bits[i]
            energy += delta
            if energy < best:
                best = energy
                for j in range(bits.shape[0]):
                    best_bits[j] = bits[j]
        if record:
            trace[s] = energy
    return best


_NO_TRACE = np.zeros(0, dtype=np.float64)


def _run_restart(compiled, n: int, temps: np.ndarray, seed: int, restart: int,
                 trace: np.ndarray | None = None) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, restart)))
    bits = rng.integers(0, 2, n).astype(np.float64)
    flips = rng.integers(0, n, temps.shape[0])
    unifs = rng.random(temps.shape[0])
    best_bits = np.zeros(n, dtype=np.float64)
    _chain(bits, *compiled, flips, unifs, temps,
           best_bits, _NO_TRACE if trace is None else trace)
    return best_bits


def simulated_anneal(poly: BinaryPolynomial,
                     config: SolverConfig | None = None) -> SolverResult:
    """Anneal over single-bit flips; best assignment ever visited wins.

    Restarts are independent chains with streams derived from
    (config.seed, restart index); on equal values the earlier restart keeps
    the win, so the result is a deterministic function of (poly, config).
    """
    if config is None:
        config = SolverConfig()
    n = poly.num_vars
    if n == 0:
        raise ValueError("cannot anneal a polynomial with no variables")
    schedule = (config.schedule if config.schedule is not None
                else default_schedule(poly, config.default_num_steps))
    temps = schedule.temperatures()
    compiled = _compile_terms(poly)
    best_bits: Tuple[int, ...] | None = None
    best_value = float("inf")
    for r in range(config.num_restarts):
        bits = _run_restart(compiled, n, temps, config.seed, r)
        assignment = tuple(int(b) for b in bits)
        value = poly.evaluate(assignment)
        if value < best_value:
            best_value = value
            best_bits = assignment
    assert best_bits is not None
    samples = config.num_restarts * (schedule.num_steps + 1)
    return SolverResult(best_bits, best_value, samples)


def _chain_energy_trace(poly: BinaryPolynomial, schedule: CoolingSchedule,
                        seed: int = 0, restart: int = 0) -> np.ndarray:
    # per-step current energy of one chain, for tests of the accept rule
    trace = np.zeros(schedule.num_steps, dtype=np.float64)
    compiled = _compile_terms(poly)
    _run_restart(compiled, poly.num_vars, schedule.temperatures(), seed,
                 restart, trace=trace)
    return trace


def _brute_solver(poly: BinaryPolynomial,
                  config: SolverConfig | None = None) -> SolverResult:
    from .binpoly import brute_force_minimize

    bits, value = brute_force_minimize(poly)
    return SolverResult(bits, value, 1 << poly.num_vars)


Solver = Callable[[BinaryPolynomial, "SolverConfig | None"], SolverResult]

_REGISTRY: Dict[str, Tuple[Solver, bool]] = {}


def register_solver(name: str, solver: Solver, *, quadratic_only: bool = False) -> None:
    """Register a solver callable under a name; re-registering replaces it.

    quadratic_only solvers receive a quadratic reduction of higher-degree
    input; solve() projects their answer back to the original variables.
    """
    if not name:
        raise ValueError("solver name must be non-empty")
    _REGISTRY[name] = (solver, quadratic_only)


def available_solvers() -> Tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


register_solver("sa", simulated_anneal)
register_solver("brute", _brute_solver)


def make_external_solver(target: str) -> Solver:
    """Adapter around a command line or an HTTP endpoint.

    The polynomial is sent as JSON (the binpoly wire form) on stdin or as a
    POST body; the reply must be {"assignment": [0/1, ...], "value": number}
    with one bit per variable.  Anything else raises ExternalSolverError.
    """
    is_http = target.startswith("http://") or target.startswith("https://")

    def _call(payload: bytes) -> bytes:
        if is_http:
            req = urllib.request.Request(
                target, data=payload, headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=600) as resp:
                    return resp.read()
            except urllib.error.URLError as exc:
                raise ExternalSolverError(f"external solver at {target} failed: {exc}") from exc
        argv = shlex.split(target)
        try:
            proc = subprocess.run(argv, input=payload, capture_output=True, timeout=600)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExternalSolverError(f"external solver {argv[0]!r} failed: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalSolverError(
                f"external solver {argv[0]!r} exited {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace').strip()}")
        return proc.stdout

    def _solve(poly: BinaryPolynomial, config: SolverConfig | None = None) -> SolverResult:
        raw = _call(json.dumps(poly.to_dict()).encode())
        try:
            data = json.loads(raw.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ExternalSolverError(f"external solver returned non-JSON: {exc}") from exc
        if not isinstance(data, dict) or "assignment" not in data or "value" not in data:
            raise ExternalSolverError(
                "external solver reply must be an object with 'assignment' and 'value'")
        bits = data["assignment"]
        if (not isinstance(bits, list) or len(bits) != poly.num_vars
                or any(b not in (0, 1) for b in bits)):
            raise ExternalSolverError(
                f"external solver assignment must be {poly.num_vars} bits of 0/1")
        assignment = tuple(int(b) for b in bits)
        return SolverResult(assignment, poly.evaluate(assignment), 0)

    return _solve


def solve(poly: BinaryPolynomial, solver_name: str = "sa",
          config: SolverConfig | None = None) -> SolverResult:
    """Run a registered solver; the name "external" binds lazily to the
    command or URL in the VRPANNEAL_EXTERNAL_SOLVER environment variable.

    Quadratic-only solvers see a quadratic reduction; the answer is projected
    to the original variables and re-scored, so best_value always equals
    evaluate(poly, best_assignment).
    """
    entry = _REGISTRY.get(solver_name)
    if entry is None:
        if solver_name == EXTERNAL_SOLVER_NAME:
            target = os.environ.get(EXTERNAL_SOLVER_ENV)
            if not target:
                raise SolverLookupError(
                    f"solver 'external' needs the {EXTERNAL_SOLVER_ENV} "
                    "environment variable (command line or http(s) URL)")
            entry = (make_external_solver(target), True)
        else:
            raise SolverLookupError(
                f"unknown solver {solver_name!r}; available: {', '.join(available_solvers())}")
    fn, quadratic_only = entry
    target_poly = poly
    if quadratic_only and poly.degree > 2:
        target_poly, _ = reduce_to_quadratic(poly)
    result = fn(target_poly, config)
    if len(result.best_assignment) != target_poly.num_vars:
        raise ValueError(
            f"solver {solver_name!r} returned {len(result.best_assignment)} bits "
            f"for a {target_poly.num_vars}-variable polynomial")
    bits = tuple(int(b) for b in result.best_assignment[:poly.num_vars])
    return SolverResult(bits, poly.evaluate(bits), result.samples_evaluated)
