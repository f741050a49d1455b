"""
Spectral engine for the Cascade Node simulator
Eigen-decomposes the effective Hamiltonian and synthesizes the emitted
pulse as a superposition of eigenstate channels
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np

from dynamics_engine import Pulse, TimeGrid
from errors import ConfigValidationError, DegenerateSpectrumError, EigenSolverError
from node_model import EffectiveHamiltonian, NodeConfig, build_reduced_hamiltonian

logger = logging.getLogger(__name__)

DEGENERACY_THRESHOLD = 1e-8
MAX_EIGENVECTOR_CONDITION = 1e12
RECONSTRUCTION_TOLERANCE = 1e-9
# real parts closer than this are treated as ties when sorting
SORT_DECIMALS = 10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (units of g), right eigenvectors and modal pulse amplitudes"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    modal_amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    condition: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return v @ np.diag(self.eigenvalues) @ np.linalg.inv(v)

    def to_dict(self) -> Dict:
        """JSON layout: omega_re, omega_im, alpha_re, alpha_im in sort order"""
        return {
            "omega_re": [float(w.real) for w in self.eigenvalues],
            "omega_im": [float(w.imag) for w in self.eigenvalues],
            "alpha_re": [float(a.real) for a in self.modal_amplitudes],
            "alpha_im": [float(a.imag) for a in self.modal_amplitudes],
        }


def _sort_order(eigenvalues: np.ndarray) -> np.ndarray:
    re = np.round(eigenvalues.real, SORT_DECIMALS)
    im = np.round(eigenvalues.imag, SORT_DECIMALS)
    # lexsort uses the last key as primary
    return np.lexsort((-im, -re))


def eigendecompose(h: EffectiveHamiltonian) -> EigenDecomposition:
    """Eigenpairs sorted by descending real part, ties by descending imaginary part"""
    if h.dim < 1:
        raise ConfigValidationError("entries", "matrix dimension must be >= 1")
    matrix = np.asarray(h.entries)
    try:
        eigenvalues, eigenvectors = np.linalg.eig(matrix)
    except np.linalg.LinAlgError as e:
        raise EigenSolverError(f"eigensolver did not converge: {e}")

    order = _sort_order(eigenvalues)
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    condition = float(np.linalg.cond(eigenvectors))
    if not math.isfinite(condition) or condition > MAX_EIGENVECTOR_CONDITION:
        raise EigenSolverError("eigenvectors are defective beyond tolerance", condition)

    decomposition = EigenDecomposition(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        condition=condition,
    )
    scale = max(np.linalg.norm(matrix), 1.0)
    error = np.linalg.norm(decomposition.reconstruct() - matrix) / scale
    if error > RECONSTRUCTION_TOLERANCE:
        raise EigenSolverError(f"reconstruction error {error:.3e} exceeds tolerance", condition)
    return decomposition


def min_separation(eigenvalues: np.ndarray) -> float:
    if len(eigenvalues) < 2:
        return math.inf
    diffs = np.abs(eigenvalues[:, None] - eigenvalues[None, :])
    np.fill_diagonal(diffs, np.inf)
    return float(diffs.min())


def modal_amplitudes(config: NodeConfig, eig: EigenDecomposition) -> EigenDecomposition:
    """Residue weights alpha_n of each eigenstate in the emitted pulse.

    alpha_n = -i sqrt(2 kappa) g prod(J) / prod_{m != n} (Omega_n - Omega_m)
    """
    if not config.is_ideal:
        raise ConfigValidationError("config", "modal amplitudes need a lossless resonant node without backscatter")
    node = config.normalized()
    omegas = eig.eigenvalues
    if len(omegas) != node.n_rings + 1:
        raise ConfigValidationError("eig", "decomposition does not belong to the reduced model of this node")

    separation = min_separation(omegas)
    if separation <= DEGENERACY_THRESHOLD * node.g:
        raise DegenerateSpectrumError(separation, DEGENERACY_THRESHOLD)

    prefactor = -1j * math.sqrt(2.0 * node.kappa) * node.g * math.prod(node.j_rates)
    alphas = np.empty(len(omegas), dtype=complex)
    for n, omega_n in enumerate(omegas):
        others = np.delete(omegas, n)
        alphas[n] = prefactor / np.prod(omega_n - others)
    return replace(eig, modal_amplitudes=alphas)


@dataclass(frozen=True)
class AnalyticEmission:
    """Emitted pulse and its per-eigenstate components e_n(t) = alpha_n exp(-i Omega_n t)"""

    pulse: Pulse
    components: np.ndarray
    decomposition: EigenDecomposition


def analytic_emission(config: NodeConfig, grid: TimeGrid) -> AnalyticEmission:
    """Sample e(t) = sum_n alpha_n exp(-i Omega_n t) on the grid (time in 1/g)"""
    eig = modal_amplitudes(config, eigendecompose(build_reduced_hamiltonian(config)))
    t = grid.times
    components = eig.modal_amplitudes[:, None] * np.exp(-1j * np.outer(eig.eigenvalues, t))
    samples = components.sum(axis=0)
    return AnalyticEmission(
        pulse=Pulse(grid=grid, samples=samples),
        components=components,
        decomposition=eig,
    )


def residue_sums(eig: EigenDecomposition, powers: int) -> Tuple[float, ...]:
    """Normalized |sum_n alpha_n Omega_n^p| for p = 0 .. powers-1"""
    alphas = eig.modal_amplitudes
    omegas = eig.eigenvalues
    a_max = np.abs(alphas).max()
    w_max = np.abs(omegas).max()
    return tuple(
        float(abs(np.sum(alphas * omegas ** p)) / (a_max * w_max ** p)) for p in range(powers)
    )


def pairing_defect(eigenvalues: np.ndarray) -> float:
    """Distance between the spectrum and its image under Omega -> -conj(Omega)"""
    mirrored = -np.conj(eigenvalues)
    diffs = np.abs(eigenvalues[:, None] - mirrored[None, :])
    # greedy matching is sufficient for well separated spectra
    used = set()
    worst = 0.0
    for i in range(len(eigenvalues)):
        order = np.argsort(diffs[i])
        j = next(k for k in order if k not in used)
        used.add(j)
        worst = max(worst, float(diffs[i, j]))
    return worst
