"""
Command-line interface for the Cascade Node simulator
Every subcommand resolves its inputs, runs one engine through the backend,
writes CSV/JSON/SVG into --outdir and finishes with manifest.json
"""

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from backend import CascadeNodeBackend
from design_calculator import OPTIMAL_RATIOS_N3, EmitterModeSpec, ghz_to_rad_s, rad_s_to_ghz
from dynamics_engine import Pulse, TimeGrid, trajectory_to_frame
from errors import CascadeNodeError, ConfigValidationError, DataFileError
from metrics import exponential_pulse, gaussian_pulse, success_rate, symmetry_factor
from optimizer import parameter_names
from transfer_manager import DEGRADATION_PARAMETERS, combined_frame, mirror_defect

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
FLOAT_FORMAT = "%.12g"
DEFAULT_STARTS = {1: (2.0,), 2: (2.0, 5.0), 3: (2.0, 3.0, 8.0), 4: (1.5, 2.5, 3.5, 10.0)}


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become validation errors (exit 1) instead of argparse's exit 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigValidationError("argv", message)


def _round_floats(value):
    if isinstance(value, float):
        return float(f"{value:.12g}") if math.isfinite(value) else None
    if isinstance(value, (np.floating, np.integer)):
        return _round_floats(value.item())
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    return value


def parse_floats(text: str, name: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigValidationError(name, f"expected comma-separated numbers, got '{text}'")


@dataclass
class RunManifest:
    """Success marker listing everything a command produced"""

    command: str
    config: Dict = field(default_factory=dict)
    version: str = VERSION
    started_at: str = ""
    wall_clock_s: float = 0.0
    outputs: List[str] = field(default_factory=list)
    integrator: Dict = field(default_factory=dict)

    def write(self, outdir: Path) -> Path:
        path = outdir / "manifest.json"
        with open(path, "w") as f:
            json.dump(_round_floats(asdict(self)), f, indent=2)
        return path


class CascadeNodeCLI:
    """Argument parsing and per-command handlers"""

    def __init__(self):
        self.parser = self.create_parser()
        self.backend: Optional[CascadeNodeBackend] = None
        self.outdir = Path("out")
        self.manifest: Optional[RunManifest] = None

    # Parser

    @staticmethod
    def _node_arguments(parser: argparse.ArgumentParser):
        parser.add_argument("--config", help="node JSON file (replaces the preset)")
        parser.add_argument("--preset", help="named preset from the settings file")
        parser.add_argument("--kappa", type=float, help="override kappa")
        parser.add_argument("--j-rates", help="override ring-ring rates, comma separated")
        parser.add_argument("--gamma0", type=float, help="override emitter loss rate")
        parser.add_argument("--gamma-c", type=float, help="override ring loss rate")
        parser.add_argument("--deltas", help="override ring detunings, comma separated")
        parser.add_argument("--backscatter", help="override ring backscattering rates, comma separated")

    @staticmethod
    def _grid_arguments(parser: argparse.ArgumentParser):
        parser.add_argument("--t-end", type=float, help="window length in 1/g (default from settings)")
        parser.add_argument("--samples", type=int, help="number of grid samples (default from settings)")

    def create_parser(self) -> argparse.ArgumentParser:
        parser = _ArgumentParser(
            prog="cascade-node",
            description="Single-excitation simulator and optimizer for emitter + ring-chain photonic nodes",
        )
        parser.add_argument("--outdir", default="out", help="output directory (default: out)")
        parser.add_argument("--verbose", action="store_true", help="DEBUG logging")
        parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
        parser.add_argument("--settings", help="settings JSON (default: nodes_config.json)")
        parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
        sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

        p = sub.add_parser("emit", help="free emission pulse and eigenstate components")
        self._node_arguments(p)
        self._grid_arguments(p)
        p.add_argument("--absolute", action="store_true", help="also write the pulse in seconds using g in rad/s")
        p.add_argument("--full", action="store_true", help="two-direction model, writes e_plus and e_minus")

        p = sub.add_parser("receive", help="drive an empty node with a pulse from CSV")
        self._node_arguments(p)
        p.add_argument("--pulse-csv", required=True, help="CSV with columns t, re_e, im_e")

        p = sub.add_parser("transfer", help="sender emission, delay and receiver absorption")
        self._node_arguments(p)
        self._grid_arguments(p)
        p.add_argument("--receiver-config", help="receiver node JSON (default: same as sender)")
        p.add_argument("--delay", type=float, help="waveguide delay in 1/g (default from settings)")
        p.add_argument("--full", action="store_true", help="use the two-direction ring model")

        p = sub.add_parser("eigen", help="eigenvalues and modal amplitudes")
        self._node_arguments(p)
        p.add_argument("--full", action="store_true", help="two-direction model")

        p = sub.add_parser("beta", help="time-symmetry factor of a reference or CSV pulse")
        self._grid_arguments(p)
        p.add_argument("--pulse", choices=["gaussian", "exponential", "csv"], default="gaussian")
        p.add_argument("--width", type=float, default=1.0, help="Gaussian intensity standard deviation")
        p.add_argument("--rate", type=float, default=1.0, help="exponential decay rate")
        p.add_argument("--pulse-csv", help="CSV with columns t, re_e, im_e")

        p = sub.add_parser("optimize", help="Nelder-Mead refinement of the coupling ratios")
        p.add_argument("--n", type=int, default=3, help="number of rings")
        p.add_argument("--start", help="starting ratios J12,...,kappa")
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
        self._grid_arguments(p)

        p = sub.add_parser("sweep", help="beta over a grid of coupling ratios")
        p.add_argument("--n", type=int, default=3, help="number of rings")
        p.add_argument("--grid", required=True, help="steps per parameter, e.g. 40x40x40")
        p.add_argument("--ranges", required=True, help="lo:hi per parameter, e.g. 0.5:4,0.5:6,1:12")
        p.add_argument("--workers", type=int, help="worker processes (default: env or CPU count)")
        self._grid_arguments(p)

        p = sub.add_parser("design-g", help="emitter-ring coupling g from emitter and mode data")
        p.add_argument("--wavelength-nm", type=float, required=True)
        line = p.add_mutually_exclusive_group(required=True)
        line.add_argument("--linewidth-hz", type=float, help="natural linewidth as an ordinary frequency")
        line.add_argument("--gamma0", type=float, help="natural linewidth in rad/s")
        p.add_argument("--n-index", type=float, required=True)
        p.add_argument("--veff-um3", type=float, required=True)

        p = sub.add_parser("design-gap", help="gap realizing a target coupling rate")
        p.add_argument("--table", required=True, help="CSV with columns gap_nm, rate_ghz")
        p.add_argument("--target-ghz", type=float, required=True)
        p.add_argument("--kind", choices=["ring_ring", "ring_waveguide"], default="ring_ring")
        p.add_argument("--linear", action="store_true", help="interpolate linearly in rate instead of log(rate)")

        p = sub.add_parser("design-plan", help="all gaps of a node for given ratios")
        p.add_argument("--g", type=float, required=True, help="coupling g in rad/s")
        p.add_argument("--ring-table", required=True)
        p.add_argument("--wg-table", required=True)
        p.add_argument("--ratios", default=",".join(str(r) for r in OPTIMAL_RATIOS_N3))
        p.add_argument("--linear", action="store_true")

        p = sub.add_parser("degrade", help="transfer success rate vs one non-ideal parameter")
        self._node_arguments(p)
        self._grid_arguments(p)
        p.add_argument("--parameter", choices=DEGRADATION_PARAMETERS, required=True)
        p.add_argument("--values", required=True, help="comma-separated values in units of g")
        p.add_argument("--delay", type=float)

        p = sub.add_parser("plot", help="SVG figure from a CSV written by another command")
        p.add_argument("--kind", choices=["transfer", "sweep", "emit", "degrade"], required=True)
        p.add_argument("--input", required=True)
        p.add_argument("--kappa-slice", type=float, help="sweep only: beta contours at this kappa/g")

        p = sub.add_parser("validate", help="run the property suite for N = 1..4")
        p.add_argument("--configs-per-n", type=int, default=100)

        return parser

    # Helpers

    def _grid(self, args) -> TimeGrid:
        return self.backend.grid(getattr(args, "t_end", None), getattr(args, "samples", None))

    def _node(self, args, config_path: Optional[str] = None):
        overrides = {
            "kappa": args.kappa,
            "gamma0": args.gamma0,
            "gamma_c": args.gamma_c,
            "j_rates": parse_floats(args.j_rates, "j_rates") if args.j_rates else None,
            "deltas": parse_floats(args.deltas, "deltas") if args.deltas else None,
            "backscatter": parse_floats(args.backscatter, "backscatter") if args.backscatter else None,
        }
        config = self.backend.resolve_config(config_path or args.config, args.preset, overrides)
        self.manifest.config = config.to_dict()
        return config

    def _write_csv(self, frame: pd.DataFrame, name: str) -> Path:
        path = self.outdir / name
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self.manifest.outputs.append(name)
        return path

    def _write_json(self, data: Dict, name: str) -> Path:
        path = self.outdir / name
        with open(path, "w") as f:
            json.dump(_round_floats(data), f, indent=2)
        self.manifest.outputs.append(name)
        return path

    @staticmethod
    def _read_csv(path: str) -> pd.DataFrame:
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError:
            raise DataFileError(path, "file not found")
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise DataFileError(path, f"cannot parse CSV: {e}")
        if frame.empty:
            raise DataFileError(path, "no rows")
        return frame

    # Commands

    def cmd_emit(self, args) -> Dict:
        config = self._node(args)
        grid = self._grid(args)
        result = self.backend.emit(config, grid, full=args.full)
        trajectory, analytic = result["trajectory"], result["analytic"]

        frame = trajectory_to_frame(trajectory)
        if analytic is not None:
            for n, component in enumerate(analytic.components, start=1):
                frame[f"re_e{n}"] = component.real
                frame[f"im_e{n}"] = component.imag
        self._write_csv(frame, "emission.csv")
        if args.absolute:
            self._write_csv(trajectory.emitted.to_absolute(config.g).to_frame(), "emission_absolute.csv")

        symmetry = symmetry_factor(trajectory.emitted)
        summary = {
            **symmetry.to_dict(),
            "emission_efficiency": float(trajectory.waveguide_cumulative[-1]),
            "residual_population": float(trajectory.system_population[-1]),
            "balance_defect": trajectory.balance_defect(1.0),
            "warnings": list(trajectory.warnings) + ([symmetry.tail_warning] if symmetry.tail_warning else []),
        }
        if trajectory.emitted_minus is not None:
            summary["model"] = "full"
            summary["norm_plus"] = trajectory.emitted.norm
            summary["norm_minus"] = trajectory.emitted_minus.norm
        if analytic is not None:
            summary["eigen"] = analytic.decomposition.to_dict()
        self._write_json(summary, "emission.json")
        return summary

    def cmd_receive(self, args) -> Dict:
        config = self._node(args)
        pulse = Pulse.from_frame(self._read_csv(args.pulse_csv), args.pulse_csv)
        trajectory = self.backend.receive(config, pulse)
        F, t_peak = success_rate(trajectory)
        self._write_csv(trajectory_to_frame(trajectory), "receive.csv")
        summary = {
            "F": F,
            "t_peak": t_peak,
            "pulse_norm": pulse.norm,
            "balance_defect": trajectory.balance_defect(0.0),
            "warnings": list(trajectory.warnings),
        }
        self._write_json(summary, "receive.json")
        return summary

    def cmd_transfer(self, args) -> Dict:
        sender = self._node(args)
        receiver = sender
        if args.receiver_config:
            receiver = self.backend.resolve_config(args.receiver_config)
        delay = args.delay if args.delay is not None else self.backend.default_delay
        report = self.backend.transfer(sender, receiver, delay, self._grid(args), full=args.full)
        self.manifest.config = {"sender": sender.to_dict(), "receiver": receiver.to_dict(), "delay": delay}

        self._write_csv(combined_frame(report), "transfer.csv")
        self._write_csv(trajectory_to_frame(report.sender_trajectory), "sender.csv")
        self._write_csv(trajectory_to_frame(report.receiver_trajectory), "receiver.csv")
        summary = report.to_dict()
        summary["mirror_defect"] = mirror_defect(report.sender_trajectory, report.receiver_trajectory, report.t_peak)
        self._write_json(summary, "transfer.json")
        return summary

    def cmd_eigen(self, args) -> Dict:
        config = self._node(args)
        decomposition = self.backend.eigen(config, full=args.full)
        summary = {"model": "full" if args.full else "reduced", **decomposition.to_dict(), "condition": decomposition.condition}
        self._write_json(summary, "eigen.json")
        return summary

    def cmd_beta(self, args) -> Dict:
        if args.pulse == "csv":
            if not args.pulse_csv:
                raise ConfigValidationError("pulse_csv", "required with --pulse csv")
            pulse = Pulse.from_frame(self._read_csv(args.pulse_csv), args.pulse_csv)
        elif args.pulse == "gaussian":
            pulse = gaussian_pulse(self._grid(args), args.width)
        else:
            pulse = exponential_pulse(self._grid(args), args.rate)
        result = symmetry_factor(pulse)
        self.manifest.config = {"pulse": args.pulse, "width": args.width, "rate": args.rate}
        summary = {**result.to_dict(), "normalized": result.normalized, "tail_warning": result.tail_warning}
        self._write_json(summary, "beta.json")
        return summary

    def cmd_optimize(self, args) -> Dict:
        if args.start:
            start = parse_floats(args.start, "start")
        elif args.n in DEFAULT_STARTS:
            start = DEFAULT_STARTS[args.n]
        else:
            raise ConfigValidationError("start", f"no default start for N={args.n}; pass --start")
        seed = getattr(args, "seed", 0)
        self.manifest.config = {"n_rings": args.n, "start": list(start), "seed": seed}
        report = self.backend.optimize(start, args.n, seed, self._grid(args))

        names = parameter_names(args.n)
        trace = pd.DataFrame(
            [dict(zip(names, row["params"]), evaluation=row["evaluation"], beta=row["beta"]) for row in report.trace]
        )
        self._write_csv(trace, "trace.csv")
        summary = report.to_dict()
        summary.pop("trace")
        self._write_json(summary, "optimum.json")
        return summary

    def cmd_sweep(self, args) -> Dict:
        try:
            steps = [int(s) for s in args.grid.lower().split("x")]
            ranges = [tuple(float(v) for v in part.split(":")) for part in args.ranges.split(",")]
        except ValueError:
            raise ConfigValidationError("grid", "use --grid AxBxC and --ranges lo:hi,lo:hi,...")
        if len(steps) != len(ranges) or any(len(r) != 2 for r in ranges):
            raise ConfigValidationError("ranges", "one lo:hi range per --grid dimension")
        workers = self.backend.resolve_workers(args.workers)
        spec_ranges = [(lo, hi, n) for (lo, hi), n in zip(ranges, steps)]
        self.manifest.config = {"n_rings": args.n, "ranges": spec_ranges, "workers": workers}

        frame = self.backend.sweep(args.n, spec_ranges, workers, self._grid(args))
        self._write_csv(frame, "sweep.csv")
        best = frame.loc[frame["beta"].idxmax()]
        return {"points": len(frame), "best": best.to_dict()}

    def cmd_design_g(self, args) -> Dict:
        spec = EmitterModeSpec.from_lab_units(
            args.wavelength_nm, args.n_index, args.veff_um3, linewidth_hz=args.linewidth_hz, gamma0=args.gamma0
        )
        g = self.backend.design_g(spec)
        self.manifest.config = asdict(spec)
        summary = {"g_rad_s": g, "g_ghz": rad_s_to_ghz(g), "spec": asdict(spec)}
        self._write_json(summary, "design_g.json")
        return summary

    def cmd_design_gap(self, args) -> Dict:
        solution = self.backend.design_gap(args.table, ghz_to_rad_s(args.target_ghz), args.linear, args.kind)
        self.manifest.config = {"table": args.table, "target_ghz": args.target_ghz, "linear": args.linear}
        summary = solution.to_dict()
        self._write_json(summary, "design_gap.json")
        return summary

    def cmd_design_plan(self, args) -> Dict:
        ratios = parse_floats(args.ratios, "ratios")
        plan = self.backend.design_plan(args.g, args.ring_table, args.wg_table, ratios, args.linear)
        self.manifest.config = {"g": args.g, "ratios": ratios}
        self._write_json(plan, "design_plan.json")
        return plan

    def cmd_degrade(self, args) -> Dict:
        base = self._node(args)
        values = parse_floats(args.values, "values")
        delay = args.delay if args.delay is not None else self.backend.default_delay
        frame = self.backend.degrade(base, args.parameter, values, delay, self._grid(args))
        self._write_csv(frame, "degrade.csv")
        return {"parameter": args.parameter, "rows": frame.to_dict(orient="records")}

    def cmd_plot(self, args) -> Dict:
        frame = self._read_csv(args.input)
        dashboard = self.backend.dashboard
        charts = {
            "transfer": dashboard.generate_transfer_chart,
            "sweep": dashboard.generate_sweep_map,
            "emit": dashboard.generate_emission_chart,
            "degrade": dashboard.generate_degradation_chart,
        }
        if args.kind == "sweep" and args.kappa_slice is not None:
            fig = dashboard.generate_sweep_map(frame, args.input, kappa_slice=args.kappa_slice)
        else:
            fig = charts[args.kind](frame, args.input)
        written = dashboard.save_figure(fig, self.outdir / f"plot_{args.kind}.svg")
        self.manifest.outputs.append(written.name)
        self.manifest.config = {"kind": args.kind, "input": args.input, "kappa_slice": args.kappa_slice}
        return {"figure": written.name}

    def cmd_validate(self, args) -> Dict:
        report = self.backend.validate(args.configs_per_n, args.seed)
        self.manifest.config = {"configs_per_n": args.configs_per_n, "seed": args.seed}
        self._write_json(report, "validate.json")
        if not report["passed"]:
            failed = [c["name"] for c in report["checks"] if not c["passed"]]
            raise ConfigValidationError("validate", f"properties failed: {failed}")
        return report

    # Entry

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse, dispatch and map errors to exit codes (0 ok, 1 validation, 2 numerical, 3 I/O)"""
        try:
            args = self.parser.parse_args(argv)
        except CascadeNodeError as e:
            print(f"❌ {e}", file=sys.stderr)
            return e.exit_code

        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        started = time.perf_counter()
        try:
            self.outdir = Path(args.outdir)
            self.outdir.mkdir(parents=True, exist_ok=True)
            self.backend = CascadeNodeBackend(args.settings)
            integrator = self.backend.integrator()
            self.manifest = RunManifest(
                command=args.command,
                started_at=datetime.now(timezone.utc).isoformat(),
                integrator={"method": integrator.method, "rtol": integrator.rtol, "atol": integrator.atol},
            )
            handler = getattr(self, "cmd_" + args.command.replace("-", "_"))
            summary = handler(args)
        except CascadeNodeError as e:
            logger.error(f"❌ {type(e).__name__}: {e}")
            return e.exit_code
        except OSError as e:
            logger.error(f"❌ I/O error: {e}")
            return DataFileError.exit_code

        self.manifest.wall_clock_s = time.perf_counter() - started
        self.manifest.write(self.outdir)
        print(json.dumps(_round_floats(summary), indent=2))
        return 0
