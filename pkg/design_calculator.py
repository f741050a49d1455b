"""
Physical design calculator for the Cascade Node simulator
Handles the emitter-ring coupling estimate and gap lookups in
gap -> coupling-rate tables for fabrication planning
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import ConfigValidationError, DataFileError, TargetRangeError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
TABLE_COLUMNS = ("gap_nm", "rate_ghz")
TABLE_KINDS = ("ring_ring", "ring_waveguide")
OPTIMAL_RATIOS_N3 = (1.88, 2.94, 7.92)


def ghz_to_rad_s(rate_ghz: float) -> float:
    return 2.0 * math.pi * 1e9 * rate_ghz


def rad_s_to_ghz(rate: float) -> float:
    return rate / (2.0 * math.pi * 1e9)


@dataclass(frozen=True)
class EmitterModeSpec:
    """Emitter and cavity-mode parameters in SI units (gamma0 in rad/s)"""

    wavelength: float
    gamma0: float
    n_index: float
    v_eff: float

    def __post_init__(self):
        for name in ("wavelength", "gamma0", "n_index", "v_eff"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigValidationError(name, "must be finite and > 0")

    @classmethod
    def from_lab_units(
        cls,
        wavelength_nm: float,
        n_index: float,
        veff_um3: float,
        linewidth_hz: Optional[float] = None,
        gamma0: Optional[float] = None,
    ) -> "EmitterModeSpec":
        """Linewidth either as an ordinary frequency (Hz, times 2 pi) or directly in rad/s"""
        if (linewidth_hz is None) == (gamma0 is None):
            raise ConfigValidationError("linewidth", "give exactly one of linewidth_hz or gamma0")
        rate = gamma0 if gamma0 is not None else 2.0 * math.pi * linewidth_hz
        return cls(wavelength_nm * 1e-9, rate, n_index, veff_um3 * 1e-18)


def coupling_g(spec: EmitterModeSpec) -> float:
    """g = 0.5 sqrt(3 lambda^2 c Gamma0 / (2 pi n^3 V_eff)) in rad/s"""
    return 0.5 * math.sqrt(
        3.0 * spec.wavelength ** 2 * SPEED_OF_LIGHT * spec.gamma0
        / (2.0 * math.pi * spec.n_index ** 3 * spec.v_eff)
    )


@dataclass(frozen=True)
class GapRateTable:
    """Gap (m) to coupling rate (rad/s); gaps increasing, rates decreasing"""

    gaps: Tuple[float, ...]
    rates: Tuple[float, ...]
    kind: str = "ring_ring"

    def __post_init__(self):
        if self.kind not in TABLE_KINDS:
            raise ConfigValidationError("kind", f"must be one of {TABLE_KINDS}")
        gaps = tuple(float(g) for g in self.gaps)
        rates = tuple(float(r) for r in self.rates)
        if len(gaps) != len(rates):
            raise ConfigValidationError("rates", "one rate per gap")
        if len(gaps) < 2:
            raise ConfigValidationError("gaps", "need at least two rows")
        if any(r <= 0 for r in rates):
            raise ConfigValidationError("rates", "must be > 0")
        if any(b <= a for a, b in zip(gaps, gaps[1:])):
            raise ConfigValidationError("gaps", "must be strictly increasing")
        if any(b >= a for a, b in zip(rates, rates[1:])):
            raise ConfigValidationError("rates", "must decrease strictly with gap")
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "rates", rates)

    @property
    def rate_bounds(self) -> Tuple[float, float]:
        return self.rates[-1], self.rates[0]

    def rows(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"gap_nm": np.asarray(self.gaps) * 1e9, "rate_ghz": [rad_s_to_ghz(r) for r in self.rates]}
        )

    @classmethod
    def from_csv(cls, path: Union[str, Path], kind: str = "ring_ring") -> "GapRateTable":
        """Read a ``gap_nm, rate_ghz`` table; rates are ordinary frequencies"""
        try:
            frame = pd.read_csv(path, skipinitialspace=True)
        except FileNotFoundError:
            raise DataFileError(str(path), "file not found")
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise DataFileError(str(path), f"cannot parse table: {e}")
        frame.columns = [str(c).strip() for c in frame.columns]
        missing = [c for c in TABLE_COLUMNS if c not in frame.columns]
        if missing:
            raise DataFileError(str(path), f"missing columns {missing}", missing)
        if frame.empty or frame[list(TABLE_COLUMNS)].isna().any().any():
            raise DataFileError(str(path), "table is empty or has blank cells")
        logger.debug(f"Loaded {len(frame)} {kind} rows from {path}")
        return cls(
            gaps=tuple(frame["gap_nm"].astype(float) * 1e-9),
            rates=tuple(ghz_to_rad_s(r) for r in frame["rate_ghz"].astype(float)),
            kind=kind,
        )


@dataclass(frozen=True)
class GapSolution:
    gap: float
    target_rate: float
    bracket: Tuple[Tuple[float, float], Tuple[float, float]]

    def to_dict(self) -> Dict:
        (g_lo, r_lo), (g_hi, r_hi) = self.bracket
        return {
            "gap_nm": self.gap * 1e9,
            "target_ghz": rad_s_to_ghz(self.target_rate),
            "table_rows_used": [
                {"gap_nm": g_lo * 1e9, "rate_ghz": rad_s_to_ghz(r_lo)},
                {"gap_nm": g_hi * 1e9, "rate_ghz": rad_s_to_ghz(r_hi)},
            ],
        }


def _rate_axis(values, linear: bool) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values if linear else np.log(values)


def solve_gap(table: GapRateTable, target_rate: float, linear: bool = False) -> GapSolution:
    """Gap giving ``target_rate`` (rad/s), interpolated linearly in log(rate) unless ``linear``"""
    low, high = table.rate_bounds
    if not (low <= target_rate <= high):
        raise TargetRangeError(target_rate, (low, high))

    # np.interp needs increasing abscissae; rates fall with gap
    rates = np.asarray(table.rates[::-1])
    gaps = np.asarray(table.gaps[::-1])
    exact = np.flatnonzero(rates == target_rate)
    if exact.size:
        gap = float(gaps[exact[0]])
    else:
        gap = float(np.interp(_rate_axis(target_rate, linear), _rate_axis(rates, linear), gaps))

    k = int(np.clip(np.searchsorted(table.gaps, gap), 1, len(table.gaps) - 1))
    bracket = ((table.gaps[k - 1], table.rates[k - 1]), (table.gaps[k], table.rates[k]))
    return GapSolution(gap=gap, target_rate=float(target_rate), bracket=bracket)


def forward_rate(table: GapRateTable, gap: float, linear: bool = False) -> float:
    """Coupling rate at ``gap`` using the same interpolation as :func:`solve_gap`"""
    if not (table.gaps[0] <= gap <= table.gaps[-1]):
        raise ConfigValidationError("gap", f"outside table range [{table.gaps[0]:.6g}, {table.gaps[-1]:.6g}] m")
    exact = [r for g, r in zip(table.gaps, table.rates) if g == gap]
    if exact:
        return exact[0]
    value = float(np.interp(gap, table.gaps, _rate_axis(table.rates, linear)))
    return value if linear else math.exp(value)


def plan_node(
    g: float,
    ring_table: GapRateTable,
    wg_table: GapRateTable,
    ratios: Sequence[float] = OPTIMAL_RATIOS_N3,
    linear: bool = False,
) -> Dict:
    """Gaps realizing (J12, ..., kappa) = ratios * g; ring-ring tables for J, ring-waveguide for kappa"""
    if not (math.isfinite(g) and g > 0):
        raise ConfigValidationError("g", "must be finite and > 0")
    if len(ratios) < 1:
        raise ConfigValidationError("ratios", "need at least kappa")
    names = [f"j{k}{k + 1}" for k in range(1, len(ratios))] + ["kappa"]

    gaps, rows = {}, {}
    for name, ratio in zip(names, ratios):
        table = wg_table if name == "kappa" else ring_table
        solution = solve_gap(table, ratio * g, linear=linear)
        gaps[name] = solution.gap * 1e9
        rows[name] = solution.to_dict()["table_rows_used"]
        logger.info(f"📐 {name}: {rad_s_to_ghz(ratio * g):.4f} GHz -> gap {solution.gap * 1e9:.3f} nm")

    return {
        "g": g,
        "g_ghz": rad_s_to_ghz(g),
        "ratios": dict(zip(names, (float(r) for r in ratios))),
        "gaps": gaps,
        "table_rows_used": rows,
    }
