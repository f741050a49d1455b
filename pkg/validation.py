"""
Property suite for the Cascade Node simulator
Cross-checks the eigenmode synthesis, the ODE dynamics and the pulse
metrics on random ideal nodes and reference pulses
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from dynamics_engine import IntegratorSettings, TimeGrid, Trajectory, evolve_driven, evolve_emission, evolve_full
from errors import ConfigValidationError, DegenerateSpectrumError
from metrics import exponential_pulse, gaussian_pulse, success_rate, symmetry_factor
from node_model import NodeConfig
from spectral_engine import analytic_emission, pairing_defect, residue_sums

logger = logging.getLogger(__name__)

RATIO_RANGE = (1.0, 4.0)
KAPPA_RANGE = (2.0, 8.0)
REVERSAL_MIN_WINDOW = 40.0
REVERSAL_DT = REVERSAL_MIN_WINDOW / 8191
# |e|^2 falls below 1e-8 of its envelope after this many slowest decay times
REVERSAL_DECAY_TIMES = 9.0
EXPONENTIAL_GRID = TimeGrid(0.0, 30.0, 2 ** 17)

TOLERANCES = {
    "probability_balance": 1e-8,
    "analytic_vs_ode": 1e-6,
    "residue_sums": 1e-8,
    "spectral_pairing": 1e-9,
    "full_reduced_equivalence": 1e-8,
    "beta_gaussian": 1e-6,
    "beta_exponential": 1e-4,
    "time_reversed_absorption": 1e-3,
}


@dataclass
class PropertyCheck:
    """Worst deviation of one named property over all sampled cases"""

    name: str
    tolerance: float
    worst: float = 0.0
    cases: int = 0

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.worst <= self.tolerance

    def record(self, deviation: float):
        self.cases += 1
        if not math.isfinite(deviation):
            self.worst = math.inf
        else:
            self.worst = max(self.worst, deviation)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "tolerance": self.tolerance,
            "worst": self.worst,
            "cases": self.cases,
            "passed": self.passed,
        }


def random_ideal_configs(n_rings: int, count: int, rng: np.random.Generator) -> List[NodeConfig]:
    """``count`` ideal nodes, J ratios from RATIO_RANGE and kappa from KAPPA_RANGE"""
    configs = []
    while len(configs) < count:
        ratios = np.append(rng.uniform(*RATIO_RANGE, n_rings - 1), rng.uniform(*KAPPA_RANGE))
        config = NodeConfig.from_ratios(ratios)
        try:
            analytic_emission(config, TimeGrid(0.0, 1.0, 2))
        except DegenerateSpectrumError:
            continue
        configs.append(config)
    return configs


def reversal_grid(eigenvalues: np.ndarray) -> TimeGrid:
    """Window holding the whole emitted pulse, at a fixed sample spacing"""
    slowest = float(np.min(-eigenvalues.imag))
    t_end = max(REVERSAL_MIN_WINDOW, REVERSAL_DECAY_TIMES / slowest)
    return TimeGrid(0.0, t_end, int(math.ceil(t_end / REVERSAL_DT)) + 1)


def direction_symmetry_defect(full: Trajectory, reduced: Trajectory) -> float:
    """Worst mismatch between a backscatter-free full run and the reduced run.

    Both directions carry equal ring amplitudes a_n = b_n, and sqrt(2) a_n is the
    reduced ring amplitude c_n.
    """
    n_rings = reduced.rings.shape[0]
    a_rings = full.amplitudes[1 : n_rings + 1]
    b_rings = full.amplitudes[n_rings + 1 :]
    total = np.abs(full.emitted.samples) ** 2 + np.abs(full.emitted_minus.samples) ** 2
    return max(
        float(np.max(np.abs(full.c0 - reduced.c0))),
        float(np.max(np.abs(a_rings - b_rings))),
        float(np.max(np.abs(math.sqrt(2.0) * a_rings - reduced.rings))),
        float(np.max(np.abs(total - np.abs(reduced.emitted.samples) ** 2))),
    )


def _node_checks(config: NodeConfig, checks: Dict[str, PropertyCheck], grid: TimeGrid, integrator: IntegratorSettings):
    emission = evolve_emission(config, grid, integrator)
    checks["probability_balance"].record(emission.balance_defect(1.0))

    analytic = analytic_emission(config, grid)
    checks["analytic_vs_ode"].record(float(np.max(np.abs(analytic.pulse.samples - emission.emitted.samples))))

    sums = residue_sums(analytic.decomposition, config.n_rings)
    checks["residue_sums"].record(max(sums))
    checks["spectral_pairing"].record(pairing_defect(analytic.decomposition.eigenvalues))

    full = evolve_full(config, grid, integrator=integrator)
    checks["full_reduced_equivalence"].record(direction_symmetry_defect(full, emission))

    long_emission = analytic_emission(config, reversal_grid(analytic.decomposition.eigenvalues)).pulse
    absorbed = evolve_driven(config, long_emission.time_reversed_conjugate(), integrator=integrator)
    F, _ = success_rate(absorbed)
    checks["time_reversed_absorption"].record(max(0.0, 1.0 - F))


def _pulse_checks(checks: Dict[str, PropertyCheck], grid: TimeGrid):
    for width in (0.5, 1.0, 2.0):
        beta = symmetry_factor(gaussian_pulse(grid, width)).beta
        checks["beta_gaussian"].record(abs(beta - 1.0))
    beta = symmetry_factor(exponential_pulse(EXPONENTIAL_GRID, 1.0)).beta
    checks["beta_exponential"].record(abs(beta - 4.0 / math.e ** 2))


def run_property_suite(
    configs_per_n: int = 100,
    n_values: Sequence[int] = (1, 2, 3, 4),
    seed: int = 0,
    grid: Optional[TimeGrid] = None,
    integrator: Optional[IntegratorSettings] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> Dict:
    """Run every property on ``configs_per_n`` random ideal nodes for each N.

    Returns a JSON-ready report; ``passed`` is True only when every check passed.
    """
    if configs_per_n < 1:
        raise ConfigValidationError("configs_per_n", "must be >= 1")
    grid = grid or TimeGrid()
    integrator = integrator or IntegratorSettings()
    rng = np.random.default_rng(seed)
    checks = {name: PropertyCheck(name, tol) for name, tol in TOLERANCES.items()}

    started = time.perf_counter()
    total = configs_per_n * len(n_values)
    done = 0
    for n_rings in n_values:
        for config in random_ideal_configs(n_rings, configs_per_n, rng):
            _node_checks(config, checks, grid, integrator)
            done += 1
            if progress:
                progress(done, total)
        logger.info(f"📊 N={n_rings}: {configs_per_n} nodes checked")
    _pulse_checks(checks, grid)

    failed = [c.name for c in checks.values() if not c.passed]
    for name in failed:
        logger.warning(f"❌ {name}: worst {checks[name].worst:.3e} > {checks[name].tolerance:.1e}")
    if not failed:
        logger.info("✅ All properties hold")

    return {
        "seed": seed,
        "configs_per_n": configs_per_n,
        "n_values": list(n_values),
        "runtime_s": time.perf_counter() - started,
        "checks": [c.to_dict() for c in checks.values()],
        "passed": not failed,
    }
