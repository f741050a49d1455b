"""
Pulse metrics for the Cascade Node simulator
Time-symmetry factor, transfer success rate and pulse overlaps
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar
from scipy.signal import fftconvolve

from dynamics_engine import Pulse, TimeGrid, Trajectory, parabolic_peak
from errors import ConfigValidationError, GridMismatchError

logger = logging.getLogger(__name__)

T0_TOLERANCE = 1e-6
TAIL_LIMIT = 1e-6


@dataclass(frozen=True)
class SymmetryResult:
    """beta = max_t0 (integral |e(t) e(2 t0 - t)| dt)^2 on the unit-normalized pulse"""

    beta: float
    t0_star: float
    normalized: bool
    pulse_norm: float
    tail_warning: Optional[str] = None

    def to_dict(self):
        return {"beta": self.beta, "t0_star": self.t0_star, "pulse_norm": self.pulse_norm}


def _reflected_overlap(times: np.ndarray, magnitude: np.ndarray, dt: float, t0: float) -> float:
    reflected = np.interp(2.0 * t0 - times, times, magnitude, left=0.0, right=0.0)
    return float(trapezoid(magnitude * reflected, dx=dt))


def _edge_tail(magnitude: np.ndarray, dt: float) -> float:
    # population a sample step beyond either edge, if the pulse kept its edge value
    return float(max(magnitude[0] ** 2, magnitude[-1] ** 2) * dt)


def symmetry_factor(pulse: Pulse, warn: bool = True) -> SymmetryResult:
    """Coarse scan over half-sample reflection centers, then bounded golden/Brent refinement"""
    if pulse.norm <= 0:
        raise ConfigValidationError("pulse", "zero-norm pulse has no symmetry factor")
    unit = pulse.normalized()
    times = unit.times
    dt = unit.grid.dt
    magnitude = np.abs(unit.samples)

    # reflection about t_start + m dt / 2 maps sample j onto sample m - j exactly
    autocorrelation = fftconvolve(magnitude, magnitude) * dt
    m_best = int(np.argmax(autocorrelation))
    t0_coarse = unit.grid.t_start + 0.5 * m_best * dt
    coarse = _reflected_overlap(times, magnitude, dt, t0_coarse)

    lo = max(unit.grid.t_start, t0_coarse - 0.5 * dt)
    hi = min(unit.grid.t_end, t0_coarse + 0.5 * dt)
    t0_star, best = t0_coarse, coarse
    if hi > lo:
        result = minimize_scalar(
            lambda t0: -_reflected_overlap(times, magnitude, dt, t0),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": T0_TOLERANCE},
        )
        if -result.fun > best:
            t0_star, best = float(result.x), float(-result.fun)

    tail_warning = None
    tail = _edge_tail(magnitude, dt)
    if tail > TAIL_LIMIT:
        tail_warning = f"pulse not contained in window: edge tail estimate {tail:.2e}"
        if warn:
            logger.warning(f"⚠️ {tail_warning}")

    return SymmetryResult(
        beta=best ** 2,
        t0_star=t0_star,
        normalized=not math.isclose(pulse.norm, 1.0, rel_tol=1e-12),
        pulse_norm=pulse.norm,
        tail_warning=tail_warning,
    )


def success_rate(traj: Trajectory) -> Tuple[float, float]:
    """F = max_t |c0(t)|^2 with parabolic sub-sample refinement; returns (F, t*)"""
    populations = traj.p_tls
    if not np.any(populations > 0):
        return 0.0, float(traj.grid.t_start)
    t_star, peak = parabolic_peak(traj.times, populations)
    return float(peak), float(t_star)


def pulse_overlap(p: Pulse, q: Pulse) -> complex:
    """Trapezoid integral of conj(p) q on a shared grid"""
    if not p.grid.matches(q.grid):
        raise GridMismatchError(f"pulse grids differ: {p.grid} vs {q.grid}")
    return complex(trapezoid(np.conj(p.samples) * q.samples, dx=p.grid.dt))


def gaussian_pulse(grid: TimeGrid, width: float = 1.0, center: Optional[float] = None) -> Pulse:
    """Unit-norm Gaussian whose intensity has standard deviation ``width``"""
    if width <= 0:
        raise ConfigValidationError("width", "must be > 0")
    center = 0.5 * (grid.t_start + grid.t_end) if center is None else center
    t = grid.times
    samples = (2.0 * math.pi * width ** 2) ** -0.25 * np.exp(-((t - center) ** 2) / (4.0 * width ** 2))
    return Pulse(grid, samples)


def exponential_pulse(grid: TimeGrid, rate: float = 1.0, t_on: float = 0.0) -> Pulse:
    """sqrt(rate) exp(-rate (t - t_on) / 2) for t >= t_on, zero before"""
    if rate <= 0:
        raise ConfigValidationError("rate", "must be > 0")
    t = grid.times
    samples = np.where(t >= t_on, math.sqrt(rate) * np.exp(-0.5 * rate * (t - t_on)), 0.0)
    return Pulse(grid, samples)
