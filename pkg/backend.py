"""
Backend logic for the Cascade Node simulator
Handles settings, node presets, config precedence and the engines behind
every command
"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import pandas as pd
from dotenv import load_dotenv

from design_calculator import EmitterModeSpec, GapRateTable, coupling_g, plan_node, solve_gap
from dynamics_engine import IntegratorSettings, Pulse, TimeGrid, evolve_driven, evolve_emission, evolve_full
from errors import ConfigValidationError, DataFileError, DegenerateSpectrumError
from node_model import NodeConfig, build_full_hamiltonian, build_reduced_hamiltonian
from optimizer import OptimizerSettings, SweepSpec, grid_sweep, refine
from plot_dashboard import PlotDashboard
from spectral_engine import analytic_emission, eigendecompose
from transfer_manager import degradation_scan, run_transfer
from validation import run_property_suite

# Load environment variables (settings path, worker count)
load_dotenv()

logger = logging.getLogger(__name__)

SETTINGS_FILE = "nodes_config.json"
SETTINGS_ENV = "CASCADE_NODE_SETTINGS"
WORKERS_ENV = "CASCADE_NODE_WORKERS"


class CascadeNodeBackend:
    """Settings-aware facade over the simulation engines"""

    def __init__(self, settings_path: Optional[Union[str, Path]] = None):
        self.settings = CascadeNodeBackend.load_settings(settings_path)
        self.presets: Dict[str, Dict] = self.settings.get("presets", {})
        self.default_preset = self.settings.get("default_preset", "optimal_n3")
        self.dashboard = PlotDashboard()

    @staticmethod
    def load_settings(path: Optional[Union[str, Path]] = None) -> Dict:
        """Load settings from JSON; missing keys and unreadable files fall back to defaults"""
        path = path or os.getenv(SETTINGS_ENV) or Path(__file__).parent / SETTINGS_FILE
        defaults = CascadeNodeBackend.get_default_settings()
        try:
            with open(path, "r") as f:
                loaded = json.load(f)
        except FileNotFoundError:
            logger.warning(f"⚠️ {path} not found. Using default settings.")
            return defaults
        except json.JSONDecodeError as e:
            logger.warning(f"⚠️ Error parsing {path}: {e}. Using default settings.")
            return defaults
        if not isinstance(loaded, dict):
            logger.warning(f"⚠️ {path} is not a JSON object. Using default settings.")
            return defaults

        merged = dict(defaults)
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(defaults.get(key), dict):
                merged[key] = {**defaults[key], **value}
            else:
                merged[key] = value
        return merged

    @staticmethod
    def get_default_settings() -> Dict:
        """Fallback settings if the settings file is not available"""
        return {
            "default_preset": "optimal_n3",
            "presets": {
                "optimal_n3": {"n_rings": 3, "g": 1.0, "j_rates": [1.88, 2.94], "kappa": 7.92},
                "single_ring": {"n_rings": 1, "g": 1.0, "j_rates": [], "kappa": 2.0},
            },
            "grid": {"t_end": 20.0, "n_samples": 4096},
            "integrator": {"method": "DOP853", "rtol": 1e-10, "atol": 1e-12},
            "transfer": {"delay": 5.0},
            "optimizer": {"max_evaluations": 2000, "xatol": 1e-4, "fatol": 1e-7, "upper_bound": 20.0},
            "sweep": {"max_points": 10_000_000},
        }

    # Settings -> engine parameters

    def grid(self, t_end: Optional[float] = None, n_samples: Optional[int] = None) -> TimeGrid:
        section = self.settings["grid"]
        return TimeGrid(
            0.0,
            float(t_end if t_end is not None else section["t_end"]),
            int(n_samples if n_samples is not None else section["n_samples"]),
        )

    def integrator(self) -> IntegratorSettings:
        section = self.settings["integrator"]
        if section["method"] not in ("DOP853", "RK45"):
            raise ConfigValidationError("integrator.method", "must be 'DOP853' or 'RK45'")
        return IntegratorSettings(section["method"], float(section["rtol"]), float(section["atol"]))

    def optimizer_settings(self) -> OptimizerSettings:
        section = self.settings["optimizer"]
        return OptimizerSettings(
            max_evaluations=int(section["max_evaluations"]),
            xatol=float(section["xatol"]),
            fatol=float(section["fatol"]),
            upper_bound=float(section["upper_bound"]),
        )

    @property
    def default_delay(self) -> float:
        return float(self.settings["transfer"]["delay"])

    @property
    def max_sweep_points(self) -> int:
        return int(float(self.settings["sweep"]["max_points"]))

    @staticmethod
    def resolve_workers(requested: Optional[int] = None) -> int:
        """--workers, then CASCADE_NODE_WORKERS, then the CPU count"""
        if requested is not None:
            workers = requested
        elif os.getenv(WORKERS_ENV):
            try:
                workers = int(os.environ[WORKERS_ENV])
            except ValueError:
                raise ConfigValidationError(WORKERS_ENV, "must be an integer")
        else:
            workers = os.cpu_count() or 1
        if workers < 1:
            raise ConfigValidationError("workers", "must be >= 1")
        return workers

    # Node configuration

    @staticmethod
    def read_json(path: Union[str, Path]) -> Dict:
        try:
            with open(path, "r") as f:
                return json.load(f)
        except FileNotFoundError:
            raise DataFileError(str(path), "file not found")
        except json.JSONDecodeError as e:
            raise DataFileError(str(path), f"invalid JSON: {e}")

    def get_preset(self, name: Optional[str] = None) -> Dict:
        name = name or self.default_preset
        if name not in self.presets:
            raise ConfigValidationError("preset", f"unknown preset '{name}' (available: {sorted(self.presets)})")
        return dict(self.presets[name])

    def resolve_config(
        self,
        config_path: Optional[Union[str, Path]] = None,
        preset: Optional[str] = None,
        overrides: Optional[Dict] = None,
    ) -> NodeConfig:
        """CLI overrides > --config file > preset > default preset.

        A config file describes a complete node and replaces the preset;
        overrides replace single fields.
        """
        if config_path is not None:
            data = self.read_json(config_path)
            if not isinstance(data, dict):
                raise ConfigValidationError("config", "must be a JSON object")
        else:
            data = self.get_preset(preset)
        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value
        return NodeConfig.from_dict(data)

    # Engines

    def emit(self, config: NodeConfig, grid: TimeGrid, full: bool = False) -> Dict:
        """ODE emission plus, for ideal nodes, the eigenmode pulse and its components.

        The two-direction model has no eigenmode components.
        """
        if full:
            return {"trajectory": evolve_full(config, grid, integrator=self.integrator()), "analytic": None}
        trajectory = evolve_emission(config, grid, self.integrator())
        analytic = None
        if config.is_ideal:
            try:
                analytic = analytic_emission(config, grid)
            except DegenerateSpectrumError as e:
                logger.warning(f"⚠️ No eigenmode components: {e}")
        return {"trajectory": trajectory, "analytic": analytic}

    def receive(self, config: NodeConfig, pulse: Pulse):
        return evolve_driven(config, pulse, integrator=self.integrator())

    def eigen(self, config: NodeConfig, full: bool = False):
        if full:
            return eigendecompose(build_full_hamiltonian(config))
        if config.is_ideal:
            return analytic_emission(config, TimeGrid(0.0, 1.0, 2)).decomposition
        return eigendecompose(build_reduced_hamiltonian(config))

    def transfer(self, sender: NodeConfig, receiver: NodeConfig, delay: float, grid: TimeGrid, full: bool = False):
        return run_transfer(
            sender, receiver, delay=delay, grid=grid, model="full" if full else "reduced", integrator=self.integrator()
        )

    def optimize(self, start: Sequence[float], n_rings: int, seed: int, grid: TimeGrid):
        return refine(start, n_rings, settings=self.optimizer_settings(), seed=seed, grid=grid)

    def sweep(self, n_rings: int, ranges, workers: int, grid: TimeGrid) -> pd.DataFrame:
        spec = SweepSpec(n_rings, tuple(ranges), max_points=self.max_sweep_points)
        return grid_sweep(spec, workers=workers, grid=grid)

    def degrade(self, base: NodeConfig, parameter: str, values: Sequence[float], delay: float, grid: TimeGrid):
        return degradation_scan(base, parameter, values, delay=delay, grid=grid)

    def validate(self, configs_per_n: int, seed: int) -> Dict:
        return run_property_suite(configs_per_n=configs_per_n, seed=seed, integrator=self.integrator())

    # Design

    @staticmethod
    def design_g(spec: EmitterModeSpec) -> float:
        return coupling_g(spec)

    @staticmethod
    def design_gap(table_path: Union[str, Path], target_rate: float, linear: bool = False, kind: str = "ring_ring"):
        return solve_gap(GapRateTable.from_csv(table_path, kind), target_rate, linear=linear)

    @staticmethod
    def design_plan(g: float, ring_table: Union[str, Path], wg_table: Union[str, Path], ratios: Sequence[float], linear: bool = False) -> Dict:
        return plan_node(
            g,
            GapRateTable.from_csv(ring_table, "ring_ring"),
            GapRateTable.from_csv(wg_table, "ring_waveguide"),
            ratios=ratios,
            linear=linear,
        )
