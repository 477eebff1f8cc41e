"""
Shared domain types and the instantaneous economics of the aquifer problem.

Two state variables (aquifer height ``h`` and water quality ``psi``), three
controls (food ``f``, groundwater extraction ``g``, fertilizer intensity
``gamma``) and two shadow prices (``mu`` for height, ``lam`` for quality).

All functions are written with numpy operations so they accept scalars or
equal-shaped arrays (used to evaluate whole trajectories at once).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain where the model is defined."""


class StateRangeWarning(UserWarning):
    """A state variable left [0, 1]; the value is still computed."""


class ModelKind(str, enum.Enum):
    """Model regime.

    ``BENCHMARK`` and ``LINEAR_ZERO`` have identical state/control solutions;
    the zero-fertilizer linear regime additionally reports the quality channel
    (which stays at 1). Table labels map as: Zero/No -> LINEAR_ZERO,
    Full/Total -> LINEAR_FULL, Concave -> CONCAVE.
    """

    BENCHMARK = "benchmark"
    LINEAR_ZERO = "zero"
    LINEAR_FULL = "full"
    CONCAVE = "concave"

    @property
    def is_linear(self) -> bool:
        return self in (ModelKind.LINEAR_ZERO, ModelKind.LINEAR_FULL)

    @property
    def fixed_gamma(self) -> float | None:
        """Fertilizer intensity imposed by the regime, ``None`` if chosen freely."""
        if self is ModelKind.LINEAR_FULL:
            return 1.0
        if self is ModelKind.CONCAVE:
            return None
        return 0.0

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        key = text.strip().lower()
        aliases = {
            "benchmark": cls.BENCHMARK,
            "zero": cls.LINEAR_ZERO,
            "no": cls.LINEAR_ZERO,
            "linear_zero": cls.LINEAR_ZERO,
            "full": cls.LINEAR_FULL,
            "total": cls.LINEAR_FULL,
            "linear_full": cls.LINEAR_FULL,
            "concave": cls.CONCAVE,
            "nonlinear": cls.CONCAVE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown regime {text!r}; expected one of {sorted(aliases)}") from None


@dataclass(frozen=True)
class ModelParams:
    """Exogenous parameters.

    ``delta`` (natural degradation rate) is not stored: it is always
    ``1 - rho``. Range restrictions are *reported* by
    :func:`aquifer_control.feasibility.validate_params` rather than enforced
    here, because parameter sweeps deliberately visit infeasible corners.
    """

    b: float
    d: float
    rho: float
    eta: float
    beta: float
    hbar: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise DomainError(f"parameter {name} must be finite, got {value!r}")

    @property
    def delta(self) -> float:
        return 1.0 - self.rho

    @property
    def mu_e(self) -> float:
        """Steady-state shadow price of aquifer height, common to every regime."""
        return self.hbar / (self.rho + 1.0)

    @property
    def f0(self) -> float:
        """Zero-fertilizer steady-state food production."""
        return self.d + self.b * self.mu_e

    def replace(self, **changes) -> "ModelParams":
        values = asdict(self)
        unknown = set(changes) - set(values)
        if unknown:
            raise TypeError(f"unknown parameter(s): {sorted(unknown)}")
        values.update(changes)
        return ModelParams(**values)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["delta"] = self.delta
        return out


class StateVector(NamedTuple):
    h: float
    psi: float


class ControlVector(NamedTuple):
    f: float
    g: float
    gamma: float


class AdjointVector(NamedTuple):
    lam: float
    mu: float


def _check_gamma(gamma):
    arr = np.asarray(gamma, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise DomainError(f"fertilizer intensity must lie in [0, 1], got {gamma!r}")


def _warn_state_range(state: StateVector):
    for name in ("h", "psi"):
        arr = np.asarray(getattr(state, name), dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            warnings.warn(f"state {name} outside [0, 1]", StateRangeWarning, stacklevel=3)


def rebate(gamma, kind: ModelKind, beta: float):
    """Food price discount ``D(gamma)``: ``beta*gamma`` (linear), ``beta*sqrt(gamma)`` (concave), 0 (benchmark)."""
    _check_gamma(gamma)
    kind = ModelKind(kind)
    if kind is ModelKind.BENCHMARK:
        return np.zeros_like(np.asarray(gamma, dtype=float))[()]
    if kind is ModelKind.CONCAVE:
        return beta * np.sqrt(gamma)
    return beta * gamma


class UtilityParts(NamedTuple):
    water: float
    food: float
    environment: float

    @property
    def total(self):
        return self.water + self.food + self.environment


def utility_decomposition(params: ModelParams, state: StateVector, controls: ControlVector,
                          kind: ModelKind, check_range: bool = True) -> UtilityParts:
    """Split instantaneous utility into water surplus, food surplus and the environmental term."""
    if check_range:
        _warn_state_range(state)
    h, psi = state
    f, g, gamma = controls
    water = -0.5 * g * g + g * h
    food = (params.d + rebate(gamma, kind, params.beta)) * f - 0.5 * f * f
    environment = -0.5 * (h - params.hbar) ** 2 - 0.5 * (1.0 - psi) ** 2
    return UtilityParts(water, food, environment)


def utility(params: ModelParams, state: StateVector, controls: ControlVector,
            kind: ModelKind, check_range: bool = True):
    """Instantaneous social utility.

    ``-g^2/2 + g*h + (d + D(gamma))*f - f^2/2 - (h - hbar)^2/2 - (1 - psi)^2/2``
    """
    return utility_decomposition(params, state, controls, kind, check_range).total


def aquifer_rate(params: ModelParams, f, g):
    """dh/dt: recharge from irrigated food production minus extraction."""
    return params.b * f - g


def quality_rate(params: ModelParams, psi, f, gamma):
    """dpsi/dt: natural degradation of the pollutant stock minus fertilizer loading."""
    return params.delta * (1.0 - psi) - params.eta * f * gamma


def hamiltonian(params: ModelParams, state: StateVector, controls: ControlVector,
                adjoints: AdjointVector, kind: ModelKind, check_range: bool = True):
    """Current-value Hamiltonian ``U + lam*psi_dot + mu*h_dot``."""
    h, psi = state
    f, g, gamma = controls
    lam, mu = adjoints
    return (utility(params, state, controls, kind, check_range)
            + lam * quality_rate(params, psi, f, gamma)
            + mu * aquifer_rate(params, f, g))
