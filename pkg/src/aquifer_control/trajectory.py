"""Closed-form stable-manifold paths, discounted welfare and transversality."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import simpson

from .equilibrium import (Equilibrium, SaddleStructure, benchmark_equilibrium, concave_equilibrium,
                          linear_equilibrium, spectrum)
from .model import ControlVector, DomainError, ModelKind, ModelParams, StateVector, utility

COLUMNS = ("t", "h", "psi", "mu", "lambda", "f", "g", "gamma", "U")


class PathError(ValueError):
    """The closed-form path leaves the region where it is defined."""


class GridError(ValueError):
    """The time grid cannot be used for the requested quadrature."""


class TrajectoryPoint(NamedTuple):
    t: float
    h: float
    psi: float
    mu: float
    lam: float
    f: float
    g: float
    gamma: float
    U: float


@dataclass(frozen=True)
class PathSpec:
    t_max: float = 50.0
    dt: float = 0.01
    regime: ModelKind | None = None
    h0: float = 1.0
    psi0: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_max) and self.t_max >= 0):
            raise DomainError(f"t_max must be non-negative, got {self.t_max!r}")

    def grid(self) -> np.ndarray:
        """Uniform grid ``0, dt, ..., t_max``; empty when ``t_max`` is 0."""
        if self.t_max == 0:
            return np.empty(0)
        n = int(round(self.t_max / self.dt))
        if not math.isclose(n * self.dt, self.t_max, rel_tol=1e-9, abs_tol=1e-12):
            raise GridError(f"t_max={self.t_max!r} is not a multiple of dt={self.dt!r}")
        return np.linspace(0.0, self.t_max, n + 1)


@dataclass(frozen=True)
class StablePath:
    """Analytic path of one regime, evaluable at any time array.

    Calling it returns a dict of arrays keyed by :data:`COLUMNS` plus
    ``gamma_raw`` (the unclamped fertilizer FOC) and ``clamped``.
    """

    params: ModelParams
    regime: ModelKind
    equilibrium: Equilibrium
    saddle: SaddleStructure

    def __call__(self, t) -> dict:
        p, eq, s = self.params, self.equilibrium, self.saddle
        t = np.asarray(t, dtype=float)
        decay = np.exp(-t)
        mode = np.exp(s.theta2 * t)
        k = p.b * p.eta * eq.gamma_e
        if self.regime is ModelKind.CONCAVE:
            psi = eq.psi_e + s.v2[1] * s.c2 * mode
            lam = eq.lambda_e + s.c2 * mode
            h = eq.h_e + s.c1 * decay - k / (1.0 + s.theta2) * s.c2 * mode
            if np.any(lam <= 0):
                raise PathError("quality shadow price reaches zero; concave FOC undefined")
            f = p.d + p.beta ** 2 / (4.0 * lam * p.eta) + p.b * eq.mu_e
            raw = p.beta ** 2 / (4.0 * p.eta ** 2 * lam ** 2)
            gamma = np.clip(raw, 0.0, 1.0)
        else:
            gam = 0.0 if self.regime is ModelKind.BENCHMARK else eq.gamma_e
            psi = eq.psi_e + 2.0 * s.c2 * (1.0 - s.theta2) * mode
            lam = eq.lambda_e - 2.0 * s.c2 * mode
            h = eq.h_e + s.c1 * decay + s.c2 * (2.0 * k / (1.0 + s.theta2)) * mode
            f = p.d + p.beta * gam - lam * gam * p.eta + p.b * eq.mu_e + 0.0 * t
            raw = np.full_like(t, gam)
            gamma = raw
        mu = np.full_like(t, eq.mu_e)
        g = h - eq.mu_e
        kind = ModelKind.BENCHMARK if self.regime is ModelKind.BENCHMARK else self.regime
        U = utility(p, StateVector(h, psi), ControlVector(f, g, gamma), kind, check_range=False)
        return {"t": t, "h": h, "psi": psi, "mu": mu, "lambda": lam, "f": f, "g": g,
                "gamma": gamma, "U": np.asarray(U, dtype=float) + 0.0 * t,
                "gamma_raw": raw, "clamped": raw != gamma}


@dataclass
class Trajectory:
    regime: ModelKind
    params: ModelParams
    spec: PathSpec
    path: StablePath
    columns: dict = field(repr=False)
    clamped: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def equilibrium(self) -> Equilibrium:
        return self.path.equilibrium

    @property
    def saddle(self) -> SaddleStructure:
        return self.path.saddle

    def points(self) -> list[TrajectoryPoint]:
        return [TrajectoryPoint(*(float(self.columns[c][i]) for c in COLUMNS)) for i in range(len(self))]

    def rows(self):
        for i in range(len(self)):
            yield [float(self.columns[c][i]) for c in COLUMNS]

    def to_csv(self, target=None) -> str | None:
        """Write ``t,h,psi,mu,lambda,f,g,gamma,U`` rows; return the text when no target is given."""
        buf = io.StringIO() if target is None else None
        handle = buf if buf is not None else open(target, "w", newline="")
        try:
            writer = csv.writer(handle)
            writer.writerow(COLUMNS)
            for row in self.rows():
                writer.writerow([repr(v) for v in row])
        finally:
            if buf is None:
                handle.close()
        return buf.getvalue() if buf is not None else None

    def to_json(self) -> str:
        return json.dumps({"regime": self.regime.value, "params": self.params.as_dict(),
                           "columns": list(COLUMNS),
                           "rows": list(self.rows()),
                           "clamped": [bool(x) for x in self.clamped]})


def _build(params, regime, eq, spec) -> Trajectory:
    saddle = spectrum(params, regime, eq.gamma_e, h0=spec.h0, psi0=spec.psi0)
    path = StablePath(params, regime, eq, saddle)
    values = path(spec.grid())
    columns = {c: values[c] for c in COLUMNS}
    return Trajectory(regime, params, spec, path, columns, values["clamped"])


def benchmark_path(params: ModelParams, spec: PathSpec = PathSpec()) -> Trajectory:
    """Zero-fertilizer path: ``h_t = h_e + (h0 - h_e) e^{-t}``, constant food, pristine water."""
    if spec.psi0 != 1.0:
        raise DomainError("benchmark model keeps psi at 1; psi0 must be 1")
    return _build(params, ModelKind.BENCHMARK, benchmark_equilibrium(params), spec)


def linear_path(params: ModelParams, gamma_star: int, spec: PathSpec = PathSpec()) -> Trajectory:
    """Stable path of the linear model with fertilizer held at ``gamma_star``."""
    eq = linear_equilibrium(params, gamma_star)
    if gamma_star == 0 and spec.psi0 != 1.0:
        raise DomainError("with zero fertilizer psi stays at 1; psi0 must be 1")
    return _build(params, eq.regime, eq, spec)


def concave_path(params: ModelParams, spec: PathSpec = PathSpec()) -> Trajectory:
    """Stable path of the concave model.

    The fertilizer FOC is clamped to [0, 1]; food keeps the unclamped formula
    and clamped samples are marked in ``Trajectory.clamped``.
    """
    return _build(params, ModelKind.CONCAVE, concave_equilibrium(params), spec)


def stable_path(params: ModelParams, regime: ModelKind, spec: PathSpec = PathSpec()) -> Trajectory:
    regime = ModelKind(regime)
    if regime is ModelKind.BENCHMARK:
        return benchmark_path(params, spec)
    if regime is ModelKind.CONCAVE:
        return concave_path(params, spec)
    return linear_path(params, int(regime.fixed_gamma), spec)


@dataclass(frozen=True)
class Welfare:
    J: float
    tail_bound: float
    t_max: float
    n_points: int

    @property
    def total_estimate(self) -> float:
        return self.J + self.tail_bound


def _check_grid(t: np.ndarray):
    if t.ndim != 1 or len(t) < 3:
        raise GridError("Simpson quadrature needs at least 3 grid points")
    if len(t) % 2 == 0:
        raise GridError(f"Simpson quadrature needs an odd number of points, got {len(t)}")
    steps = np.diff(t)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
        raise GridError("time grid must be uniform and increasing")


def discounted_welfare(series: Trajectory, params: ModelParams | None = None) -> Welfare:
    """Composite Simpson integral of ``U_t e^{-rho t}`` over the grid, with the tail bound kept separate."""
    params = params or series.params
    t = np.asarray(series["t"], dtype=float)
    _check_grid(t)
    J = float(simpson(series["U"] * np.exp(-params.rho * t), x=t))
    T = float(t[-1])
    U_e = series.equilibrium.U_e
    tail = math.inf if params.rho == 0 else U_e * math.exp(-params.rho * T) / params.rho
    return Welfare(J, tail, T, len(t))


@dataclass(frozen=True)
class TransversalityReport:
    status: str  # "pass", "fail" or "inconclusive"
    final_lambda: float
    final_mu_h: float
    tolerance: float | None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def residual(self) -> float:
        return max(abs(self.final_lambda), abs(self.final_mu_h))


def transversality_check(series: Trajectory, params: ModelParams | None = None,
                         tolerance: float | None = None) -> TransversalityReport:
    """Check that ``e^{-rho t} lambda_t`` and ``e^{-rho t} mu_t h_t`` decay toward zero.

    Without a ``tolerance`` the test is that both discounted series are
    non-increasing in magnitude over the last half of the grid; with one, the
    final magnitudes must also be below it.
    """
    params = params or series.params
    t = series["t"]
    if len(t) < 2:
        return TransversalityReport("inconclusive", math.nan, math.nan, tolerance, "grid too short")
    disc = np.exp(-params.rho * t)
    a = np.abs(disc * series["lambda"])
    b = np.abs(disc * series["mu"] * series["h"])
    if params.rho <= 0:
        return TransversalityReport("inconclusive", float(a[-1]), float(b[-1]), tolerance,
                                    "rho = 0: no discounting, decay is not implied")
    half = len(t) // 2
    decaying = all(np.all(np.diff(x[half:]) <= 1e-15) for x in (a, b))
    small = tolerance is None or max(a[-1], b[-1]) <= tolerance
    status = "pass" if decaying and small else "fail"
    detail = "" if decaying else "discounted adjoint terms still growing at the end of the grid"
    if not small:
        detail = f"final magnitude {max(a[-1], b[-1]):.3g} above tolerance {tolerance:.3g}"
    return TransversalityReport(status, float(a[-1]), float(b[-1]), tolerance, detail)
