"""
Dynamics engine for the Cascade Node simulator
Integrates the single-excitation amplitudes in time for emission and for
driven (receiving) processes, in the reduced and the full two-direction model
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicSpline

from errors import ConfigValidationError, DataFileError, IntegrationError
from node_model import EffectiveHamiltonian, NodeConfig, build_full_hamiltonian, build_reduced_hamiltonian

logger = logging.getLogger(__name__)

DEFAULT_T_END = 20.0
DEFAULT_SAMPLES = 4096
RESIDUAL_POPULATION_LIMIT = 1e-6
NORM_SLACK = 1e-6

DriveDirection = Optional[str]
DRIVE_DIRECTIONS = ("plus", "minus", "both")


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "DOP853"
    rtol: float = 1e-10
    atol: float = 1e-12

    def halved(self) -> "IntegratorSettings":
        return IntegratorSettings(self.method, self.rtol / 2, self.atol / 2)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform output grid, time in units of 1/g"""

    t_start: float = 0.0
    t_end: float = DEFAULT_T_END
    n_samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)) or self.t_end <= self.t_start:
            raise ConfigValidationError("t_end", "must be greater than t_start")
        if isinstance(self.n_samples, bool) or int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ConfigValidationError("n_samples", "must be an integer >= 2")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_samples)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_samples - 1)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def shifted(self, delay: float) -> "TimeGrid":
        return TimeGrid(self.t_start + delay, self.t_end + delay, self.n_samples)

    def extended(self, factor: int = 2) -> "TimeGrid":
        """Same spacing and start, ``factor`` times the duration"""
        return TimeGrid(
            self.t_start,
            self.t_start + factor * self.duration,
            factor * (self.n_samples - 1) + 1,
        )

    def matches(self, other: "TimeGrid") -> bool:
        return (
            self.n_samples == other.n_samples
            and math.isclose(self.t_start, other.t_start, rel_tol=0, abs_tol=1e-12 * max(1.0, self.duration))
            and math.isclose(self.t_end, other.t_end, rel_tol=0, abs_tol=1e-12 * max(1.0, self.duration))
        )


@dataclass(frozen=True)
class Pulse:
    """Complex waveguide amplitude sampled on a uniform grid"""

    grid: TimeGrid
    samples: np.ndarray
    norm: float = field(init=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=complex)
        if samples.shape != (self.grid.n_samples,):
            raise ConfigValidationError("samples", f"expected {self.grid.n_samples} samples, got {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "norm", float(trapezoid(np.abs(samples) ** 2, dx=self.grid.dt)))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def scaled(self, factor: complex) -> "Pulse":
        return Pulse(self.grid, self.samples * factor)

    def phase_rotated(self, phi: float) -> "Pulse":
        return self.scaled(np.exp(1j * phi))

    def normalized(self) -> "Pulse":
        if self.norm <= 0:
            raise ConfigValidationError("pulse", "zero-norm pulse cannot be normalized")
        return self.scaled(1.0 / math.sqrt(self.norm))

    def shifted(self, delay: float) -> "Pulse":
        """Exact translation by ``delay`` (the grid moves, samples do not)"""
        return Pulse(self.grid.shifted(delay), self.samples)

    def time_reversed_conjugate(self) -> "Pulse":
        """conj(e(t_start + t_end - t)) on the same grid"""
        return Pulse(self.grid, np.conj(self.samples[::-1]))

    def to_absolute(self, g: float) -> "Pulse":
        """Time in seconds and amplitude in 1/sqrt(s) for a node with coupling g (rad/s)"""
        grid = TimeGrid(self.grid.t_start / g, self.grid.t_end / g, self.grid.n_samples)
        return Pulse(grid, self.samples * math.sqrt(g))

    def drive_function(self) -> Callable[[float], complex]:
        """Cubic interpolant of the samples, zero outside the pulse window"""
        spline = CubicSpline(self.times, np.column_stack([self.samples.real, self.samples.imag]))
        t_lo, t_hi = self.grid.t_start, self.grid.t_end

        def drive(t: float) -> complex:
            if t < t_lo or t > t_hi:
                return 0j
            re, im = spline(t)
            return complex(re, im)

        return drive

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "re_e": self.samples.real, "im_e": self.samples.imag})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, source: str = "pulse") -> "Pulse":
        missing = [c for c in ("t", "re_e", "im_e") if c not in frame.columns]
        if missing:
            raise DataFileError(source, "missing pulse columns", missing)
        if len(frame) < 2:
            raise DataFileError(source, "pulse needs at least two samples")
        t = frame["t"].to_numpy(dtype=float)
        grid = TimeGrid(float(t[0]), float(t[-1]), len(t))
        if not np.allclose(t, grid.times, rtol=0, atol=1e-9 * max(1.0, grid.duration)):
            raise DataFileError(source, "pulse samples are not uniformly spaced")
        return cls(grid, frame["re_e"].to_numpy(dtype=float) + 1j * frame["im_e"].to_numpy(dtype=float))


@dataclass(frozen=True)
class Trajectory:
    """Time series of every basis amplitude plus the outgoing waveguide field"""

    grid: TimeGrid
    basis_labels: Tuple[str, ...]
    amplitudes: np.ndarray
    emitted: Pulse
    waveguide_cumulative: np.ndarray
    leak_integrals: Dict[str, np.ndarray]
    input_cumulative: np.ndarray
    model_kind: str = "reduced"
    emitted_minus: Optional[Pulse] = None
    peak_time: Optional[float] = None
    peak_population: Optional[float] = None
    warnings: Tuple[str, ...] = ()

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def c0(self) -> np.ndarray:
        return self.amplitudes[0]

    @property
    def rings(self) -> np.ndarray:
        return self.amplitudes[1:]

    @property
    def p_tls(self) -> np.ndarray:
        return np.abs(self.c0) ** 2

    @property
    def system_population(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)

    @property
    def total_leak(self) -> np.ndarray:
        return sum(self.leak_integrals.values())

    def balance_defect(self, initial_population: float) -> float:
        """max_t |population + outflow + leaks - inflow - initial|"""
        residual = (
            self.system_population
            + self.waveguide_cumulative
            + self.total_leak
            - self.input_cumulative
            - initial_population
        )
        return float(np.max(np.abs(residual)))


def parabolic_peak(times: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """Maximum of sampled values with three-point parabolic refinement"""
    k = int(np.argmax(values))
    if k == 0 or k == len(values) - 1:
        return float(times[k]), float(values[k])
    y0, y1, y2 = values[k - 1], values[k], values[k + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0:
        return float(times[k]), float(y1)
    offset = 0.5 * (y0 - y2) / denom
    dt = times[1] - times[0]
    peak = y1 - 0.25 * (y0 - y2) * offset
    return float(times[k] + offset * dt), float(peak)


def _integrate(
    hamiltonian: EffectiveHamiltonian,
    node: NodeConfig,
    grid: TimeGrid,
    initial: np.ndarray,
    drives: Sequence[Optional[Callable[[float], complex]]],
    breakpoints: Sequence[float],
    integrator: IntegratorSettings,
) -> np.ndarray:
    """Returns the augmented state (amplitudes + accumulators) on the grid"""
    dim = hamiltonian.dim
    generator = -1j * np.asarray(hamiltonian.entries)
    ports = np.array(hamiltonian.port_indices)
    sqrt_kappa = math.sqrt(node.kappa)
    gamma0, gamma_c = node.gamma0, node.gamma_c
    active = [(i, fn) for i, fn in enumerate(drives) if fn is not None]

    def rhs(t, y):
        c = y[:dim]
        dc = generator @ c
        f = np.zeros(len(ports), dtype=complex)
        for i, fn in active:
            f[i] = fn(t)
        if active:
            dc[ports] += -1j * sqrt_kappa * f
        out = f - 1j * sqrt_kappa * c[ports]
        pops = (c.real ** 2) + (c.imag ** 2)
        extra = np.array(
            [
                np.sum(np.abs(out) ** 2),
                gamma0 * pops[0],
                gamma_c * np.sum(pops[1:]),
                np.sum(np.abs(f) ** 2),
            ],
            dtype=complex,
        )
        return np.concatenate([dc, extra])

    times = grid.times
    y0 = np.concatenate([np.asarray(initial, dtype=complex), np.zeros(4, dtype=complex)])
    states = np.zeros((dim + 4, len(times)), dtype=complex)
    states[:, 0] = y0
    filled = np.zeros(len(times), dtype=bool)
    filled[0] = True

    edges = [grid.t_start] + sorted(b for b in set(breakpoints) if grid.t_start < b < grid.t_end) + [grid.t_end]
    tol = 1e-12 * max(1.0, grid.duration)
    for a, b in zip(edges[:-1], edges[1:]):
        result = solve_ivp(
            rhs,
            (a, b),
            y0,
            method=integrator.method,
            dense_output=True,
            rtol=integrator.rtol,
            atol=integrator.atol,
        )
        if not result.success:
            raise IntegrationError(f"integration failed ({result.message})", float(result.t[-1]))
        mask = (times >= a - tol) & (times <= b + tol) & ~filled
        if mask.any():
            states[:, mask] = result.sol(np.clip(times[mask], a, b))
            filled |= mask
        y0 = result.y[:, -1]
    return states


def _build_trajectory(
    hamiltonian: EffectiveHamiltonian,
    node: NodeConfig,
    grid: TimeGrid,
    states: np.ndarray,
    drives_sampled: Sequence[np.ndarray],
) -> Trajectory:
    dim = hamiltonian.dim
    amplitudes = states[:dim]
    amplitudes.setflags(write=False)
    sqrt_kappa = math.sqrt(node.kappa)
    outs = [
        drives_sampled[i] - 1j * sqrt_kappa * amplitudes[port]
        for i, port in enumerate(hamiltonian.port_indices)
    ]
    return Trajectory(
        grid=grid,
        basis_labels=hamiltonian.basis_labels,
        amplitudes=amplitudes,
        emitted=Pulse(grid, outs[0]),
        emitted_minus=Pulse(grid, outs[1]) if len(outs) > 1 else None,
        waveguide_cumulative=states[dim].real.copy(),
        leak_integrals={"gamma0": states[dim + 1].real.copy(), "gamma_c": states[dim + 2].real.copy()},
        input_cumulative=states[dim + 3].real.copy(),
        model_kind=hamiltonian.model_kind,
    )


def _with_residual_check(traj: Trajectory) -> Trajectory:
    residual = float(traj.system_population[-1])
    if residual < RESIDUAL_POPULATION_LIMIT:
        return traj
    message = f"window too short: residual node population {residual:.3e} at t={traj.grid.t_end:.4g}"
    logger.warning(f"⚠️ {message}")
    return replace(traj, warnings=traj.warnings + (message,))


def _with_peak(traj: Trajectory) -> Trajectory:
    t_peak, f_peak = parabolic_peak(traj.times, traj.p_tls)
    return replace(traj, peak_time=t_peak, peak_population=f_peak)


def _excited_tls(dim: int) -> np.ndarray:
    initial = np.zeros(dim, dtype=complex)
    initial[0] = 1.0
    return initial


def _check_incoming(pulse: Pulse, name: str = "incoming"):
    if pulse.norm > 1.0 + NORM_SLACK:
        raise ConfigValidationError(name, f"pulse norm {pulse.norm:.6g} exceeds 1")


def evolve_emission(
    config: NodeConfig,
    grid: Optional[TimeGrid] = None,
    integrator: Optional[IntegratorSettings] = None,
) -> Trajectory:
    """Free decay of an excited emitter through the ring chain into the waveguide"""
    grid = grid or TimeGrid()
    integrator = integrator or IntegratorSettings()
    node = config.normalized()
    hamiltonian = build_reduced_hamiltonian(node)
    states = _integrate(hamiltonian, node, grid, _excited_tls(hamiltonian.dim), [None], [], integrator)
    traj = _build_trajectory(hamiltonian, node, grid, states, [np.zeros(grid.n_samples)])
    return _with_residual_check(traj)


def evolve_driven(
    config: NodeConfig,
    incoming: Pulse,
    grid: Optional[TimeGrid] = None,
    integrator: Optional[IntegratorSettings] = None,
) -> Trajectory:
    """Node starting empty, driven through ring N by the incoming waveguide pulse.

    The default window starts with the pulse and lasts twice its length.
    """
    _check_incoming(incoming)
    grid = grid or incoming.grid.extended(2)
    integrator = integrator or IntegratorSettings()
    node = config.normalized()
    hamiltonian = build_reduced_hamiltonian(node)
    drive = incoming.drive_function()
    states = _integrate(
        hamiltonian,
        node,
        grid,
        np.zeros(hamiltonian.dim, dtype=complex),
        [drive],
        [incoming.grid.t_start, incoming.grid.t_end],
        integrator,
    )
    sampled = np.array([drive(t) for t in grid.times])
    traj = _build_trajectory(hamiltonian, node, grid, states, [sampled])
    return _with_peak(traj)


def evolve_full(
    config: NodeConfig,
    grid: Optional[TimeGrid] = None,
    drive_direction: DriveDirection = None,
    incoming: Union[Pulse, Tuple[Pulse, Pulse], None] = None,
    integrator: Optional[IntegratorSettings] = None,
) -> Trajectory:
    """Both-direction model: emission when ``drive_direction`` is None, else driven.

    ``plus`` enters through b_N, ``minus`` through a_N; ``both`` takes a pair
    (f_plus, f_minus) or splits a single pulse equally (amplitude / sqrt 2).
    """
    integrator = integrator or IntegratorSettings()
    node = config.normalized()
    hamiltonian = build_full_hamiltonian(node)

    if drive_direction is None:
        grid = grid or TimeGrid()
        states = _integrate(hamiltonian, node, grid, _excited_tls(hamiltonian.dim), [None, None], [], integrator)
        zeros = np.zeros(grid.n_samples)
        return _with_residual_check(_build_trajectory(hamiltonian, node, grid, states, [zeros, zeros]))

    if drive_direction not in DRIVE_DIRECTIONS:
        raise ConfigValidationError("drive_direction", f"must be one of {DRIVE_DIRECTIONS} or None")
    if incoming is None:
        raise ConfigValidationError("incoming", "a driven run needs an incoming pulse")

    pulses: List[Optional[Pulse]]
    if drive_direction == "both":
        if isinstance(incoming, Pulse):
            half = incoming.scaled(1.0 / math.sqrt(2.0))
            pulses = [half, half]
        else:
            pulses = list(incoming)
    elif isinstance(incoming, Pulse):
        pulses = [incoming, None] if drive_direction == "plus" else [None, incoming]
    else:
        raise ConfigValidationError("incoming", "a single-direction drive takes one pulse")

    present = [p for p in pulses if p is not None]
    total_norm = sum(p.norm for p in present)
    if total_norm > 1.0 + NORM_SLACK:
        raise ConfigValidationError("incoming", f"pulse norm {total_norm:.6g} exceeds 1")
    grid = grid or present[0].grid.extended(2)

    drives = [p.drive_function() if p is not None else None for p in pulses]
    breakpoints = [t for p in present for t in (p.grid.t_start, p.grid.t_end)]
    states = _integrate(
        hamiltonian, node, grid, np.zeros(hamiltonian.dim, dtype=complex), drives, breakpoints, integrator
    )
    sampled = [
        np.array([fn(t) for t in grid.times]) if fn is not None else np.zeros(grid.n_samples)
        for fn in drives
    ]
    return _with_peak(_build_trajectory(hamiltonian, node, grid, states, sampled))


def _series_labels(traj: Trajectory) -> List[str]:
    if traj.model_kind == "reduced":
        return [f"c{k}" for k in range(len(traj.basis_labels))]
    return ["c0"] + list(traj.basis_labels[1:])


def trajectory_to_frame(traj: Trajectory) -> pd.DataFrame:
    """Columns t, re_c0, im_c0, ..., re_e, im_e, p_tls, p_waveguide_cum"""
    columns: Dict[str, np.ndarray] = {"t": traj.times}
    for label, series in zip(_series_labels(traj), traj.amplitudes):
        columns[f"re_{label}"] = series.real
        columns[f"im_{label}"] = series.imag
    if traj.emitted_minus is None:
        columns["re_e"] = traj.emitted.samples.real
        columns["im_e"] = traj.emitted.samples.imag
    else:
        columns["re_e_plus"] = traj.emitted.samples.real
        columns["im_e_plus"] = traj.emitted.samples.imag
        columns["re_e_minus"] = traj.emitted_minus.samples.real
        columns["im_e_minus"] = traj.emitted_minus.samples.imag
    columns["p_tls"] = traj.p_tls
    columns["p_waveguide_cum"] = traj.waveguide_cumulative
    return pd.DataFrame(columns)
