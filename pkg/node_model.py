"""
Node model for the Cascade Node simulator
Holds the physical rates of one quantum photonic node and builds the
effective non-Hermitian Hamiltonians of the single-excitation sector
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigValidationError

logger = logging.getLogger(__name__)

ModelKind = Literal["reduced", "full"]

CONFIG_KEYS = ("n_rings", "g", "j_rates", "kappa", "deltas", "gamma0", "gamma_c", "backscatter")


def _as_rate_tuple(name: str, values: Optional[Sequence[float]], length: int) -> Tuple[float, ...]:
    if values is None:
        return (0.0,) * length
    try:
        rates = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigValidationError(name, "must be a sequence of numbers")
    if len(rates) != length:
        raise ConfigValidationError(name, f"expected {length} values, got {len(rates)}")
    if not all(math.isfinite(v) for v in rates):
        raise ConfigValidationError(name, "values must be finite")
    return rates


@dataclass(frozen=True)
class NodeConfig:
    """All physical rates of one node: emitter, ring chain and waveguide port.

    Rates may be absolute angular frequencies or already normalized to g;
    everything downstream works on ``normalized()``.
    """

    n_rings: int
    g: float
    j_rates: Tuple[float, ...]
    kappa: float
    deltas: Optional[Tuple[float, ...]] = None
    gamma0: float = 0.0
    gamma_c: float = 0.0
    backscatter: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if isinstance(self.n_rings, bool) or not isinstance(self.n_rings, (int, np.integer)):
            raise ConfigValidationError("n_rings", "must be an integer")
        if self.n_rings < 1:
            raise ConfigValidationError("n_rings", "must be >= 1")
        n = int(self.n_rings)
        object.__setattr__(self, "n_rings", n)

        for name in ("g", "kappa"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ConfigValidationError(name, "must be > 0")
            object.__setattr__(self, name, value)
        for name in ("gamma0", "gamma_c"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ConfigValidationError(name, "must be >= 0")
            object.__setattr__(self, name, value)

        j_rates = _as_rate_tuple("j_rates", self.j_rates, n - 1)
        if any(j <= 0 for j in j_rates):
            raise ConfigValidationError("j_rates", "all ring-ring rates must be > 0")
        object.__setattr__(self, "j_rates", j_rates)
        object.__setattr__(self, "deltas", _as_rate_tuple("deltas", self.deltas, n))
        object.__setattr__(self, "backscatter", _as_rate_tuple("backscatter", self.backscatter, n))

    @property
    def is_ideal(self) -> bool:
        """Lossless, resonant and free of backscattering"""
        return (
            self.gamma0 == 0.0
            and self.gamma_c == 0.0
            and not any(self.deltas)
            and not any(self.backscatter)
        )

    @property
    def ratios(self) -> Tuple[float, ...]:
        """(J12, ..., J_{N-1,N}, kappa) / g"""
        return tuple(j / self.g for j in self.j_rates) + (self.kappa / self.g,)

    def normalized(self) -> "NodeConfig":
        """Same node with every rate divided by g (time measured in 1/g)"""
        if self.g == 1.0:
            return self
        s = 1.0 / self.g
        return NodeConfig(
            n_rings=self.n_rings,
            g=1.0,
            j_rates=tuple(j * s for j in self.j_rates),
            kappa=self.kappa * s,
            deltas=tuple(d * s for d in self.deltas),
            gamma0=self.gamma0 * s,
            gamma_c=self.gamma_c * s,
            backscatter=tuple(h * s for h in self.backscatter),
        )

    def replace(self, **changes) -> "NodeConfig":
        data = self.to_dict()
        data.update(changes)
        return NodeConfig.from_dict(data)

    @classmethod
    def from_ratios(cls, ratios: Sequence[float], **extra) -> "NodeConfig":
        """Ideal node at g = 1 from (J12, ..., kappa)/g"""
        ratios = tuple(float(r) for r in ratios)
        if not ratios:
            raise ConfigValidationError("ratios", "need at least kappa/g")
        return cls(n_rings=len(ratios), g=1.0, j_rates=ratios[:-1], kappa=ratios[-1], **extra)

    def to_dict(self) -> Dict:
        return {
            "n_rings": self.n_rings,
            "g": self.g,
            "j_rates": list(self.j_rates),
            "kappa": self.kappa,
            "deltas": list(self.deltas),
            "gamma0": self.gamma0,
            "gamma_c": self.gamma_c,
            "backscatter": list(self.backscatter),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "NodeConfig":
        if not isinstance(data, dict):
            raise ConfigValidationError("config", "must be a JSON object")
        unknown = sorted(set(data) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigValidationError(unknown[0], "unknown key")
        for key in ("n_rings", "g", "kappa"):
            if key not in data:
                raise ConfigValidationError(key, "missing required key")
        return cls(
            n_rings=data["n_rings"],
            g=data["g"],
            j_rates=data.get("j_rates", ()),
            kappa=data["kappa"],
            deltas=data.get("deltas"),
            gamma0=data.get("gamma0", 0.0),
            gamma_c=data.get("gamma_c", 0.0),
            backscatter=data.get("backscatter"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NodeConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigValidationError("config", f"invalid JSON: {e}")
        return cls.from_dict(data)


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Dense complex matrix of the single-excitation sector, in units of g"""

    entries: np.ndarray
    basis_labels: Tuple[str, ...]
    model_kind: ModelKind
    kappa: float = 0.0
    port_indices: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ConfigValidationError("entries", "must be a square matrix")
        if entries.shape[0] != len(self.basis_labels):
            raise ConfigValidationError("basis_labels", "length must equal matrix dimension")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_passive(self, slack: float = 1e-12) -> bool:
        """All diagonal and eigenvalue imaginary parts are <= 0"""
        if np.any(self.entries.diagonal().imag > slack):
            return False
        return bool(np.all(np.linalg.eigvals(self.entries).imag <= slack))


def build_reduced_hamiltonian(config: NodeConfig, include_waveguide: bool = True) -> EffectiveHamiltonian:
    """Tridiagonal (N+1)x(N+1) matrix acting on (c0, c1, ..., cN).

    ``include_waveguide=False`` drops the -i kappa/2 port term (closed-node diagnostic).
    """
    node = config.normalized()
    n = node.n_rings
    matrix = np.zeros((n + 1, n + 1), dtype=complex)

    couplings = (math.sqrt(2.0) * node.g,) + node.j_rates
    for i, u in enumerate(couplings):
        matrix[i, i + 1] = u
        matrix[i + 1, i] = u

    matrix[0, 0] = -0.5j * node.gamma0
    for k in range(n):
        matrix[k + 1, k + 1] = node.deltas[k] - 0.5j * node.gamma_c
    if include_waveguide:
        matrix[n, n] += -0.5j * node.kappa

    if any(node.backscatter):
        logger.debug("Reduced model ignores backscatter; use the full model for h_n != 0")

    labels = ("TLS",) + tuple(f"ring {k}" for k in range(1, n + 1))
    return EffectiveHamiltonian(
        entries=matrix,
        basis_labels=labels,
        model_kind="reduced",
        kappa=node.kappa if include_waveguide else 0.0,
        port_indices=(n,),
    )


def build_full_hamiltonian(config: NodeConfig) -> EffectiveHamiltonian:
    """(2N+1)x(2N+1) matrix on (TLS, a1..aN, b1..bN) with both propagation directions.

    a_n couples to b_{n+1} and b_n to a_{n+1}; a_N feeds the backward channel
    and b_N the forward channel, each with -i kappa/2.
    """
    node = config.normalized()
    n = node.n_rings
    dim = 2 * n + 1
    a = lambda k: k  # noqa: E731
    b = lambda k: n + k  # noqa: E731

    matrix = np.zeros((dim, dim), dtype=complex)
    matrix[0, 0] = -0.5j * node.gamma0
    for idx in (a(1), b(1)):
        matrix[0, idx] = node.g
        matrix[idx, 0] = node.g

    for k in range(1, n + 1):
        diag = node.deltas[k - 1] - 0.5j * node.gamma_c
        matrix[a(k), a(k)] = diag
        matrix[b(k), b(k)] = diag
        h = node.backscatter[k - 1]
        matrix[a(k), b(k)] = h
        matrix[b(k), a(k)] = h

    for k in range(1, n):
        j = node.j_rates[k - 1]
        for p, q in ((a(k), b(k + 1)), (b(k), a(k + 1))):
            matrix[p, q] = j
            matrix[q, p] = j

    matrix[a(n), a(n)] += -0.5j * node.kappa
    matrix[b(n), b(n)] += -0.5j * node.kappa

    labels = (
        ("TLS",)
        + tuple(f"a{k}" for k in range(1, n + 1))
        + tuple(f"b{k}" for k in range(1, n + 1))
    )
    return EffectiveHamiltonian(
        entries=matrix,
        basis_labels=labels,
        model_kind="full",
        kappa=node.kappa,
        port_indices=(b(n), a(n)),
    )
