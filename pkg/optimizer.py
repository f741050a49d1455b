"""
Coupling-rate optimizer for the Cascade Node simulator
Grid sweeps and Nelder-Mead refinement of (J12, ..., kappa)/g for maximum
pulse time-symmetry
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from dynamics_engine import TimeGrid, evolve_emission
from errors import ConfigValidationError, DegenerateSpectrumError, EigenSolverError, GridSizeError
from metrics import symmetry_factor
from node_model import NodeConfig, build_reduced_hamiltonian
from spectral_engine import analytic_emission, eigendecompose

logger = logging.getLogger(__name__)

MAX_SWEEP_POINTS = 10_000_000
BOUNDARY_MARGIN = 1e-3
RESTART_PERTURBATION = 0.05
CHUNK_SIZE = 256


@dataclass(frozen=True)
class OptimizerSettings:
    max_evaluations: int = 2000
    xatol: float = 1e-4
    fatol: float = 1e-7
    upper_bound: float = 20.0


def parameter_names(n_rings: int) -> List[str]:
    return [f"J{k}{k + 1}" for k in range(1, n_rings)] + ["kappa"]


def in_bounds(ratios: Sequence[float], upper: float = OptimizerSettings.upper_bound) -> bool:
    return all(0.0 < r <= upper for r in ratios)


def evaluate_beta(ratios: Sequence[float], grid: Optional[TimeGrid] = None) -> float:
    """beta of the ideal node at these ratios; eigenmode pulse, ODE when the spectrum is degenerate"""
    grid = grid or TimeGrid()
    config = NodeConfig.from_ratios(ratios)
    try:
        pulse = analytic_emission(config, grid).pulse
    except (DegenerateSpectrumError, EigenSolverError) as e:
        logger.debug(f"Falling back to ODE emission at {tuple(ratios)}: {e}")
        pulse = evolve_emission(config, grid).emitted
    return symmetry_factor(pulse, warn=False).beta


@dataclass(frozen=True)
class SweepSpec:
    """Per-parameter (low, high, steps) for (J12, ..., J_{N-1,N}, kappa)/g"""

    n_rings: int
    ranges: Tuple[Tuple[float, float, int], ...]
    objective: str = "beta"
    max_points: int = MAX_SWEEP_POINTS

    def __post_init__(self):
        if self.n_rings < 1:
            raise ConfigValidationError("n_rings", "must be >= 1")
        if self.objective != "beta":
            raise ConfigValidationError("objective", "only 'beta' is supported")
        ranges = tuple((float(lo), float(hi), int(steps)) for lo, hi, steps in self.ranges)
        if len(ranges) != self.n_rings:
            raise ConfigValidationError("ranges", f"expected {self.n_rings} ranges, got {len(ranges)}")
        for name, (lo, hi, steps) in zip(parameter_names(self.n_rings), ranges):
            if lo <= 0 or hi < lo:
                raise ConfigValidationError(f"ranges.{name}", "need 0 < low <= high")
            if steps < 1:
                raise ConfigValidationError(f"ranges.{name}", "need at least one step")
        object.__setattr__(self, "ranges", ranges)
        if self.size > self.max_points:
            raise GridSizeError(f"sweep of {self.size} points exceeds the guard of {self.max_points}")

    @property
    def size(self) -> int:
        return math.prod(steps for _, _, steps in self.ranges)

    @property
    def axes(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, steps) for lo, hi, steps in self.ranges]

    @property
    def columns(self) -> List[str]:
        return parameter_names(self.n_rings)

    def points(self):
        return itertools.product(*self.axes)


def _evaluate_chunk(args) -> List[float]:
    points, grid = args
    return [evaluate_beta(p, grid) for p in points]


def _chunks(points, size):
    iterator = iter(points)
    while True:
        chunk = list(itertools.islice(iterator, size))
        if not chunk:
            return
        yield chunk


def grid_sweep(spec: SweepSpec, workers: int = 1, grid: Optional[TimeGrid] = None) -> pd.DataFrame:
    """beta at every grid point; rows in itertools.product order regardless of scheduling"""
    grid = grid or TimeGrid()
    logger.info(f"📊 Sweeping {spec.size} points with {workers} worker(s)")
    chunks = ((chunk, grid) for chunk in _chunks(spec.points(), CHUNK_SIZE))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            betas = [b for part in pool.map(_evaluate_chunk, chunks) for b in part]
    else:
        betas = [b for part in map(_evaluate_chunk, chunks) for b in part]

    frame = pd.DataFrame(list(spec.points()), columns=spec.columns)
    frame["beta"] = betas
    return frame


@dataclass(frozen=True)
class OptimumReport:
    n_rings: int
    best_params: Tuple[float, ...]
    best_beta: float
    eigenvalues: Tuple[complex, ...]
    trace: Tuple[Dict, ...]
    converged: bool
    evaluations: int
    restarts: int = 0
    ode_beta: Optional[float] = None
    warnings: Tuple[str, ...] = field(default=())

    def to_dict(self) -> Dict:
        return {
            "n_rings": self.n_rings,
            "parameters": parameter_names(self.n_rings),
            "best_params": list(self.best_params),
            "best_beta": self.best_beta,
            "ode_beta": self.ode_beta,
            "eigenvalues_re": [w.real for w in self.eigenvalues],
            "eigenvalues_im": [w.imag for w in self.eigenvalues],
            "converged": self.converged,
            "evaluations": self.evaluations,
            "restarts": self.restarts,
            "warnings": list(self.warnings),
            "trace": list(self.trace),
        }


class _TracedObjective:
    """-beta with a hard wall outside the bounds; records every evaluation"""

    def __init__(self, upper: float, grid: TimeGrid):
        self.upper = upper
        self.grid = grid
        self.trace: List[Dict] = []
        self.best_beta = -math.inf
        self.best_params: Optional[Tuple[float, ...]] = None

    def __call__(self, x: np.ndarray) -> float:
        params = tuple(float(v) for v in x)
        beta = evaluate_beta(params, self.grid) if in_bounds(params, self.upper) else -math.inf
        if beta > self.best_beta:
            self.best_beta, self.best_params = beta, params
        self.trace.append(
            {
                "evaluation": len(self.trace) + 1,
                "params": list(params),
                "beta": beta if math.isfinite(beta) else None,
                "best_beta": self.best_beta if math.isfinite(self.best_beta) else None,
            }
        )
        logger.debug(f"eval {len(self.trace)}: {params} -> beta={beta:.9f}")
        return -beta if math.isfinite(beta) else math.inf


def _on_boundary(params: Sequence[float], upper: float) -> bool:
    return any(p <= BOUNDARY_MARGIN * upper or p >= upper * (1 - BOUNDARY_MARGIN) for p in params)


def refine(
    start: Sequence[float],
    n_rings: int,
    settings: Optional[OptimizerSettings] = None,
    seed: int = 0,
    grid: Optional[TimeGrid] = None,
    cross_validate: bool = True,
) -> OptimumReport:
    """Nelder-Mead on -beta from ``start``; one perturbed restart if it stops on a boundary"""
    settings = settings or OptimizerSettings()
    grid = grid or TimeGrid()
    start = tuple(float(s) for s in start)
    if len(start) != n_rings:
        raise ConfigValidationError("start", f"expected {n_rings} ratios, got {len(start)}")
    if not in_bounds(start, settings.upper_bound):
        raise ConfigValidationError("start", f"ratios must lie in (0, {settings.upper_bound}]")

    objective = _TracedObjective(settings.upper_bound, grid)
    rng = np.random.default_rng(seed)
    warnings: List[str] = []
    restarts = 0

    def run(x0) -> bool:
        remaining = settings.max_evaluations - len(objective.trace)
        if remaining <= 0:
            return False
        result = minimize(
            objective,
            np.asarray(x0, dtype=float),
            method="Nelder-Mead",
            options={"xatol": settings.xatol, "fatol": settings.fatol, "maxfev": remaining},
        )
        return bool(result.success)

    converged = run(start)
    if converged and _on_boundary(objective.best_params, settings.upper_bound):
        restarts = 1
        perturbed = np.asarray(objective.best_params) * (1 + RESTART_PERTURBATION * rng.uniform(-1, 1, n_rings))
        perturbed = np.clip(perturbed, BOUNDARY_MARGIN * settings.upper_bound * 2, settings.upper_bound)
        logger.info(f"🔁 Optimum on boundary, restarting from {tuple(perturbed)}")
        converged = run(perturbed)

    if not converged:
        message = f"no convergence within {settings.max_evaluations} evaluations; returning best so far"
        warnings.append(message)
        logger.warning(f"⚠️ {message}")

    best_params = objective.best_params
    config = NodeConfig.from_ratios(best_params)
    eigenvalues = tuple(complex(w) for w in eigendecompose(build_reduced_hamiltonian(config)).eigenvalues)

    ode_beta = None
    if cross_validate:
        ode_beta = symmetry_factor(evolve_emission(config, grid).emitted, warn=False).beta
        if abs(ode_beta - objective.best_beta) > 1e-6:
            message = f"ODE cross-check beta {ode_beta:.9f} differs from eigenmode beta {objective.best_beta:.9f}"
            warnings.append(message)
            logger.warning(f"⚠️ {message}")

    logger.info(f"✅ Optimum {best_params} beta={objective.best_beta:.6f} after {len(objective.trace)} evaluations")
    return OptimumReport(
        n_rings=n_rings,
        best_params=best_params,
        best_beta=objective.best_beta,
        eigenvalues=eigenvalues,
        trace=tuple(objective.trace),
        converged=converged,
        evaluations=len(objective.trace),
        restarts=restarts,
        ode_beta=ode_beta,
        warnings=tuple(warnings),
    )
