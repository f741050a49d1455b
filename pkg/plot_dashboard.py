"""
Plot Dashboard for the Cascade Node simulator
Builds plotly figures for emission, transfer timelines, sweep maps and
degradation scans, and exports them as SVG
"""

import logging
import re
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from errors import DataFileError

logger = logging.getLogger(__name__)

SECTION_COLORS = {"sending": "#FFE3E3", "transport": "#E8F4FD", "receiving": "#E3F9E5"}
CONTOUR_LEVELS = (0.9, 0.97, 0.99)
PALETTE = ["#FF6B6B", "#4ECDC4", "#45B7D1", "#96CEB4", "#FFA07A", "#9B59B6", "#F7DC6F"]


def _empty_figure(message: str = "No data available") -> go.Figure:
    fig = go.Figure()
    fig.add_annotation(text=message, xref="paper", yref="paper", x=0.5, y=0.5, showarrow=False)
    return fig


def _require(frame: pd.DataFrame, columns, source: str):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataFileError(source, "missing plot columns", missing)


class PlotDashboard:
    """Publication-style figures from the simulator's CSV outputs"""

    def __init__(self, width: int = 900, height: int = 500):
        self.width = width
        self.height = height

    def _layout(self, fig: go.Figure, title: str, x_title: str, y_title: str) -> go.Figure:
        fig.update_layout(
            title=title,
            xaxis_title=x_title,
            yaxis_title=y_title,
            template="plotly_white",
            width=self.width,
            height=self.height,
            legend=dict(orientation="h", yanchor="bottom", y=1.02, xanchor="right", x=1),
        )
        return fig

    def generate_emission_chart(self, frame: pd.DataFrame, source: str = "emission") -> go.Figure:
        """|e(t)|^2 with the per-eigenstate components underneath"""
        if frame.empty:
            return _empty_figure()
        _require(frame, ("t", "re_e", "im_e"), source)
        fig = go.Figure()
        intensity = frame["re_e"] ** 2 + frame["im_e"] ** 2
        fig.add_trace(go.Scatter(x=frame["t"], y=intensity, mode="lines", name="|e(t)|²", line=dict(color="#2C3E50", width=3)))

        components = sorted(
            (int(m.group(1)) for m in (re.fullmatch(r"re_e(\d+)", c) for c in frame.columns) if m)
        )
        for i, n in enumerate(components):
            fig.add_trace(
                go.Scatter(
                    x=frame["t"],
                    y=frame[f"re_e{n}"],
                    mode="lines",
                    name=f"Re e{n}(t)",
                    line=dict(color=PALETTE[i % len(PALETTE)], dash="dash"),
                )
            )
        return self._layout(fig, "Emitted Pulse and Eigenstate Components", "t (1/g)", "amplitude")

    def generate_transfer_chart(self, frame: pd.DataFrame, source: str = "transfer") -> go.Figure:
        """Sender populations, pulse intensity and receiver populations on one time axis"""
        if frame.empty:
            return _empty_figure()
        _require(frame, ("t", "sender_p_tls", "receiver_p_tls", "pulse_intensity"), source)
        fig = go.Figure()

        if "section" in frame.columns:
            t = frame["t"].to_numpy()
            sections = frame["section"].to_numpy()
            starts = np.flatnonzero(np.r_[True, sections[1:] != sections[:-1]])
            ends = np.r_[starts[1:], len(t)] - 1
            for s, e in zip(starts, ends):
                fig.add_vrect(
                    x0=t[s], x1=t[e], fillcolor=SECTION_COLORS.get(sections[s], "#EEEEEE"),
                    opacity=0.5, line_width=0, annotation_text=sections[s], annotation_position="top left",
                )

        fig.add_trace(go.Scatter(x=frame["t"], y=frame["sender_p_tls"], name="sender |c0|²", line=dict(color="#FF6B6B", width=3)))
        fig.add_trace(go.Scatter(x=frame["t"], y=frame["pulse_intensity"], name="|e(t)|²", line=dict(color="#2C3E50", dash="dot")))
        if "pulse_arriving" in frame.columns:
            fig.add_trace(go.Scatter(x=frame["t"], y=frame["pulse_arriving"], name="|f(t)|²", line=dict(color="#7F8C8D", dash="dot")))
        fig.add_trace(go.Scatter(x=frame["t"], y=frame["receiver_p_tls"], name="receiver |c0|²", line=dict(color="#4ECDC4", width=3)))

        rings = [c for c in frame.columns if re.fullmatch(r"(sender|receiver)_p_(?!tls).+", c)]
        for i, column in enumerate(rings):
            fig.add_trace(
                go.Scatter(
                    x=frame["t"], y=frame[column], name=column.replace("_p_", " "),
                    line=dict(color=PALETTE[(i + 2) % len(PALETTE)], width=1), opacity=0.6,
                )
            )
        return self._layout(fig, "Quantum State Transfer", "t (1/g)", "population")

    def generate_sweep_map(
        self, frame: pd.DataFrame, source: str = "sweep", kappa_slice: Optional[float] = None
    ) -> go.Figure:
        """beta over the coupling-rate grid; heatmap for two parameters, 3-D scatter beyond.

        With ``kappa_slice`` the rows at the grid kappa nearest to it are drawn as
        beta contours over the two remaining couplings.
        """
        if frame.empty:
            return _empty_figure()
        _require(frame, ("kappa", "beta"), source)
        params = [c for c in frame.columns if c != "beta"]

        if kappa_slice is not None:
            return self._contour_slice(frame, params, kappa_slice, source)

        if len(params) == 1:
            fig = go.Figure(go.Scatter(x=frame[params[0]], y=frame["beta"], mode="lines+markers", marker_color="#FF6B6B"))
            return self._layout(fig, "Time Symmetry vs Coupling", f"{params[0]}/g", "β")
        if len(params) == 2:
            table = frame.pivot_table(index=params[1], columns=params[0], values="beta")
            fig = go.Figure(go.Heatmap(x=table.columns, y=table.index, z=table.values, colorscale="Viridis", colorbar=dict(title="β")))
            return self._layout(fig, "Time Symmetry Map", f"{params[0]}/g", f"{params[1]}/g")

        x, y, z = params[:3]
        fig = go.Figure(
            go.Scatter3d(
                x=frame[x], y=frame[y], z=frame[z], mode="markers",
                marker=dict(size=3, color=frame["beta"], colorscale="Viridis", colorbar=dict(title="β"), opacity=0.8),
            )
        )
        fig.update_layout(
            title="Time Symmetry Map",
            scene=dict(xaxis_title=f"{x}/g", yaxis_title=f"{y}/g", zaxis_title=f"{z}/g"),
            width=self.width, height=self.height,
        )
        return fig

    def _contour_slice(self, frame: pd.DataFrame, params: List[str], kappa: float, source: str) -> go.Figure:
        others = [p for p in params if p != "kappa"]
        if len(others) != 2:
            raise DataFileError(source, f"a kappa slice needs exactly two other parameters, found {others}")
        levels = np.unique(frame["kappa"])
        nearest = float(levels[np.argmin(np.abs(levels - kappa))])
        subset = frame[np.isclose(frame["kappa"], nearest)]
        table = subset.pivot_table(index=others[1], columns=others[0], values="beta")

        fig = go.Figure(go.Heatmap(x=table.columns, y=table.index, z=table.values, colorscale="Viridis", colorbar=dict(title="β")))
        for level in CONTOUR_LEVELS:
            fig.add_trace(
                go.Contour(
                    x=table.columns, y=table.index, z=table.values, name=f"β={level}",
                    contours=dict(start=level, end=level, size=1.0, coloring="none", showlabels=True),
                    line=dict(color="white", width=1.5), showscale=False,
                )
            )
        return self._layout(fig, f"Time Symmetry at κ={nearest:.3g}g", f"{others[0]}/g", f"{others[1]}/g")

    def generate_degradation_chart(self, frame: pd.DataFrame, source: str = "degradation") -> go.Figure:
        """F and beta against one non-ideal parameter"""
        if frame.empty:
            return _empty_figure()
        _require(frame, ("F", "beta"), source)
        knob = frame.columns[0]
        fig = go.Figure()
        fig.add_trace(go.Scatter(x=frame[knob], y=frame["F"], mode="lines+markers", name="F", line=dict(color="#FF6B6B")))
        fig.add_trace(go.Scatter(x=frame[knob], y=frame["beta"], mode="lines+markers", name="β", line=dict(color="#4ECDC4", dash="dash")))
        return self._layout(fig, "Transfer Degradation", f"{knob} (units of g)", "F, β")

    def save_figure(self, fig: go.Figure, path: Union[str, Path]) -> Path:
        """SVG through kaleido; an HTML copy if the static export engine is unavailable"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fig.write_image(str(path), format="svg")
        except Exception as e:
            fallback = path.with_suffix(".html")
            logger.warning(f"⚠️ Static export failed ({e}); writing {fallback.name} instead")
            fig.write_html(str(fallback), include_plotlyjs="cdn")
            return fallback
        logger.info(f"✅ Figure written to {path}")
        return path
