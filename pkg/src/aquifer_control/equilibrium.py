"""
Steady states, saddle eigenstructure and cross-regime comparisons.

Benchmark and linear (bang-bang) regimes have closed forms. The concave
regime reduces to a scalar root of ``P(gamma)`` on
``[beta^2/(4 eta^2), 1]``, solved by a bracket-guarded Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .feasibility import check_concave, check_linear_full, full_threshold, validate_params, RegimeError
from .model import ControlVector, DomainError, ModelKind, ModelParams, StateVector, utility

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 100
DEGENERATE_TOL = 1e-10


class InfeasibleError(ValueError):
    """No steady state exists in the admissible range."""


class DegenerateSpectrumError(ArithmeticError):
    """A stable eigenvalue makes the closed-form path constants blow up."""


@dataclass(frozen=True)
class Equilibrium:
    regime: ModelKind
    h_e: float
    psi_e: float
    gamma_e: float
    mu_e: float
    lambda_e: float
    g_e: float
    f_e: float
    U_e: float
    consistent: bool
    note: str = ""

    @property
    def in_bounds(self) -> bool:
        """Both states inside [0, 1] (to 1e-12)."""
        tol = 1e-12
        return (-tol <= self.h_e <= 1 + tol) and (-tol <= self.psi_e <= 1 + tol)

    @property
    def state(self) -> StateVector:
        return StateVector(self.h_e, self.psi_e)

    @property
    def controls(self) -> ControlVector:
        return ControlVector(self.f_e, self.g_e, self.gamma_e)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["regime"] = self.regime.value
        out["in_bounds"] = self.in_bounds
        return out


def _steady_utility(params, kind, h, psi, f, g, gamma):
    return float(utility(params, StateVector(h, psi), ControlVector(f, g, gamma), kind, check_range=False))


def benchmark_equilibrium(params: ModelParams, regime: ModelKind = ModelKind.BENCHMARK) -> Equilibrium:
    """Zero-fertilizer steady state: ``f = d + b*mu``, ``g = b*f``, ``h = g + mu``, pristine water."""
    p = params
    mu = p.mu_e
    f = p.f0
    g = p.b * f
    h = g + mu
    U = _steady_utility(p, ModelKind.BENCHMARK, h, 1.0, f, g, 0.0)
    return Equilibrium(ModelKind(regime), h, 1.0, 0.0, mu, 0.0, g, f, U,
                       consistent=validate_params(p).overall)


def linear_equilibrium(params: ModelParams, gamma: int) -> Equilibrium:
    """Steady state of the linear-rebate model with fertilizer fixed at 0 or 1.

    Out-of-range states are returned (``in_bounds`` False, ``consistent``
    False) rather than rejected.
    """
    if gamma not in (0, 1):
        raise DomainError(f"linear regime needs gamma in {{0, 1}}, got {gamma!r}")
    p = params
    if gamma == 0:
        eq = benchmark_equilibrium(p, ModelKind.LINEAR_ZERO)
        return eq
    mu = p.mu_e
    denom = p.eta ** 2 + p.delta
    lam = p.eta * (p.f0 + p.beta) / denom
    f = p.delta * (p.f0 + p.beta) / denom
    psi = 1.0 - lam
    g = p.b * f
    h = g + mu
    U = _steady_utility(p, ModelKind.LINEAR_FULL, h, psi, f, g, 1.0)
    try:
        report_ok = check_linear_full(p).overall
        note = ""
    except RegimeError as exc:
        report_ok = False
        note = str(exc)
    eq = Equilibrium(ModelKind.LINEAR_FULL, h, psi, 1.0, mu, lam, g, f, U, consistent=False, note=note)
    return _with_consistency(eq, report_ok and eq.in_bounds)


def _with_consistency(eq: Equilibrium, flag: bool) -> Equilibrium:
    values = asdict(eq)
    values["consistent"] = bool(flag)
    return Equilibrium(**values)


def _p_coeffs(params: ModelParams):
    p = params
    if p.beta <= 0:
        raise DomainError(f"P(gamma) is defined for beta > 0, got beta={p.beta!r}")
    scale = 2.0 * p.eta ** 2 / (p.beta * (1.0 - p.rho))
    return p.d + p.b * p.mu_e, scale


def residual_P(params: ModelParams, gamma):
    """Steady-state condition for the concave model; its root is the equilibrium fertilizer intensity.

    ``P(gamma) = (d + (beta/2) sqrt(gamma) + b*mu_e) * 2 eta^2 / (beta (1 - rho)) * gamma^(3/2) - 1``
    """
    base, scale = _p_coeffs(params)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise DomainError("P(gamma) needs gamma >= 0")
    root = np.sqrt(gamma)
    return ((base + 0.5 * params.beta * root) * scale * gamma * root - 1.0)[()]


def residual_P_prime(params: ModelParams, gamma):
    base, scale = _p_coeffs(params)
    gamma = np.asarray(gamma, dtype=float)
    return (scale * (1.5 * base * np.sqrt(gamma) + params.beta * gamma))[()]


def concave_bracket(params: ModelParams) -> tuple[float, float]:
    return params.beta ** 2 / (4.0 * params.eta ** 2), 1.0


def newton_root(params: ModelParams, tol: float = NEWTON_TOL, maxiter: int = NEWTON_MAXITER) -> float:
    """Root of ``P`` on the bracket: Newton from the midpoint, bisection step whenever Newton leaves the bracket."""
    lo, hi = concave_bracket(params)
    if lo > hi:
        raise InfeasibleError(f"empty bracket [{lo:.6g}, {hi:.6g}]: needs beta <= 2*eta")
    p_lo, p_hi = float(residual_P(params, lo)), float(residual_P(params, hi))
    if p_lo > 0 or p_hi < 0:
        raise InfeasibleError(_no_sign_change_message(params, p_lo, p_hi))
    if p_lo == 0:
        return lo
    if p_hi == 0:
        return hi
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        px = float(residual_P(params, x))
        if abs(px) < tol:
            return x
        if px < 0:
            lo = x
        else:
            hi = x
        slope = float(residual_P_prime(params, x))
        step = x - px / slope if slope > 0 else math.nan
        x = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15 * max(1.0, hi):
            return x
    # P is monotone, so the bracket midpoint is still a valid root estimate
    return x


def _no_sign_change_message(params, p_lo, p_hi):
    report = check_concave(params)
    failed = ", ".join(f"{c.name} (margin {c.margin:+.4g})" for c in report.failed()) or "none"
    return (f"P has no sign change on the bracket (P(lo)={p_lo:.4g}, P(1)={p_hi:.4g}); "
            f"violated conditions: {failed}")


def concave_from_gamma(params: ModelParams, gamma_e: float, consistent: bool = True) -> Equilibrium:
    """Steady-state tuple of the concave model implied by a fertilizer level."""
    p = params
    mu = p.mu_e
    root = math.sqrt(gamma_e)
    lam = p.beta / (2.0 * p.eta) / root
    psi = 1.0 - lam
    f = p.d + p.beta ** 2 / (4.0 * p.eta * lam) + p.b * mu
    h = p.b * p.d + 0.5 * p.b * p.beta * root + (1.0 + p.b ** 2) * mu
    g = h - mu
    U = _steady_utility(p, ModelKind.CONCAVE, h, psi, f, g, gamma_e)
    eq = Equilibrium(ModelKind.CONCAVE, h, psi, gamma_e, mu, lam, g, f, U, consistent=False)
    return _with_consistency(eq, consistent and eq.in_bounds)


def concave_equilibrium(params: ModelParams) -> Equilibrium:
    """Equilibrium of the concave-rebate model.

    For ``beta <= 0`` the Hamiltonian is non-increasing in gamma, so the
    corner ``gamma = 0`` (the benchmark steady state, ``lambda = 0``) is
    returned and flagged inconsistent with the interior characterization.
    """
    p = params
    if p.beta <= 0:
        eq = benchmark_equilibrium(p, ModelKind.CONCAVE)
        return Equilibrium(**{**asdict(eq), "regime": ModelKind.CONCAVE, "consistent": False,
                              "note": "beta <= 0: corner solution gamma = 0"})
    if p.eta <= 0:
        raise InfeasibleError("eta = 0: fertilizer is free of pollution, no interior equilibrium")
    gamma_e = newton_root(p)
    return concave_from_gamma(p, gamma_e, consistent=check_concave(p).overall)


def equilibrium(params: ModelParams, regime: ModelKind) -> Equilibrium:
    regime = ModelKind(regime)
    if regime is ModelKind.BENCHMARK:
        return benchmark_equilibrium(params)
    if regime is ModelKind.LINEAR_ZERO:
        return linear_equilibrium(params, 0)
    if regime is ModelKind.LINEAR_FULL:
        return linear_equilibrium(params, 1)
    return concave_equilibrium(params)


@dataclass(frozen=True)
class SaddleStructure:
    regime: ModelKind
    theta1: float
    theta2: float
    theta3: float
    theta4: float
    W: float | None
    c1: float
    c2: float
    v1: tuple
    v2: tuple

    @property
    def eigenvalues(self) -> tuple:
        return (self.theta1, self.theta2, self.theta3, self.theta4)

    def signs(self) -> tuple:
        return tuple("-" if x < 0 else "+" for x in self.eigenvalues)


def coupling(params: ModelParams, regime: ModelKind, gamma_e: float) -> float:
    """Sensitivity of quality growth to the quality shadow price at the steady state.

    ``(eta*gamma)^2`` for fixed fertilizer; the concave model adds
    ``2(1 - rho)`` from the response of gamma and f to lambda.
    """
    a = (params.eta * gamma_e) ** 2
    if ModelKind(regime) is ModelKind.CONCAVE:
        a += 2.0 * (1.0 - params.rho)
    return a


def jacobian(params: ModelParams, regime: ModelKind, gamma_e: float) -> np.ndarray:
    """Linearization of the canonical system in ``(h, psi, mu, lambda)``."""
    p = params
    k = p.b * p.eta * gamma_e
    return np.array([
        [-1.0, 0.0, 1.0 + p.b ** 2, -k],
        [0.0, p.rho - 1.0, -k, coupling(p, regime, gamma_e)],
        [0.0, 0.0, 1.0 + p.rho, 0.0],
        [0.0, 1.0, 0.0, 1.0],
    ])


def spectrum(params: ModelParams, regime: ModelKind, gamma_e: float,
             h0: float = 1.0, psi0: float = 1.0) -> SaddleStructure:
    """Eigenvalues, stable eigenvectors and path constants at a steady state.

    ``c1`` and ``c2`` follow each regime's own closed form and are chosen so
    that the stable path starts at ``(h0, psi0)``.
    """
    p = params
    regime = ModelKind(regime)
    gamma_e = 0.0 if regime is ModelKind.BENCHMARK else float(gamma_e)
    a = coupling(p, regime, gamma_e)
    if a == 0:
        # uncoupled quality block: roots are rho - 1 and 1 exactly
        theta2, theta3 = p.rho - 1.0, 1.0
    else:
        disc = math.sqrt((2.0 - p.rho) ** 2 + 4.0 * a)
        theta2 = (p.rho - disc) / 2.0
        theta3 = (p.rho + disc) / 2.0
    if abs(1.0 + theta2) < DEGENERATE_TOL or abs(1.0 - theta2 ** 2) < DEGENERATE_TOL:
        raise DegenerateSpectrumError(
            f"theta2={theta2!r} coincides with theta1=-1; closed-form path constants are undefined")
    k = p.b * p.eta * gamma_e
    if regime is ModelKind.CONCAVE:
        eq = concave_from_gamma(p, gamma_e) if gamma_e > 0 else benchmark_equilibrium(p)
        c2 = (1.0 - p.rho + theta2) * (psi0 - eq.psi_e) / a
        c1 = h0 - eq.h_e + c2 * k / (1.0 + theta2)
        v2 = (-k / (1.0 + theta2), a / (1.0 - p.rho + theta2), 0.0, 1.0)
        W = a
    else:
        eq = benchmark_equilibrium(p) if gamma_e == 0 else linear_equilibrium(p, 1)
        c2 = (psi0 - eq.psi_e) / (2.0 * (1.0 - theta2))
        c1 = h0 - eq.h_e - 2.0 * k * c2 / (1.0 + theta2)
        v2 = (2.0 * k / (1.0 + theta2), 2.0 * (1.0 - theta2), 0.0, -2.0)
        W = None
    return SaddleStructure(regime, -1.0, theta2, theta3, 1.0 + p.rho, W, c1, c2,
                           (1.0, 0.0, 0.0, 0.0), v2)


@dataclass
class Comparison:
    f0: float
    threshold: float
    full_dominates_zero: bool
    concave_dominates_zero: bool
    concave_dominates_full: bool
    best: ModelKind
    equilibria: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def compare_equilibria(params: ModelParams) -> Comparison:
    """Dominance relations between regimes and the regime with the highest steady-state utility."""
    p = params
    zero = linear_equilibrium(p, 0)
    full = linear_equilibrium(p, 1)
    eqs = {ModelKind.LINEAR_ZERO: zero, ModelKind.LINEAR_FULL: full}
    notes = []
    concave = None
    if p.beta > 0:
        try:
            concave = concave_equilibrium(p)
            eqs[ModelKind.CONCAVE] = concave
        except InfeasibleError as exc:
            notes.append(f"concave: {exc}")
    else:
        notes.append("beta <= 0: concave regime degenerates to zero fertilizer")
    conc_zero = concave is not None and all(
        getattr(concave, k) > getattr(zero, k) for k in ("f_e", "g_e", "h_e"))
    conc_full = concave is not None and p.beta < p.eta and all(
        getattr(concave, k) > getattr(full, k) for k in ("f_e", "g_e", "h_e"))
    best = max(eqs.values(), key=lambda e: (e.U_e, e.psi_e)).regime
    return Comparison(p.f0, full_threshold(p), bool(p.f0 < full_threshold(p)),
                      bool(conc_zero), bool(conc_full), best, eqs, notes)


@dataclass(frozen=True)
class EtaResponse:
    eta: np.ndarray
    f: np.ndarray
    h: np.ndarray
    eta_at_max: float
    f_max: float
    above_one: tuple | None  # eta interval where f > 1, None when f <= 1 everywhere


def eta_response(delta: float, eta_grid) -> EtaResponse:
    """Pollution-intensity response curves ``eta/(eta^2+delta)`` and ``delta/(delta+eta^2)``."""
    if not 0 < delta <= 1:
        raise DomainError(f"delta must lie in (0, 1], got {delta!r}")
    eta = np.asarray(eta_grid, dtype=float)
    f = eta / (eta ** 2 + delta)
    h = delta / (delta + eta ** 2)
    interval = None
    if delta <= 0.25:
        r = math.sqrt(1.0 - 4.0 * delta)
        interval = ((1.0 - r) / 2.0, (1.0 + r) / 2.0)
    return EtaResponse(eta, f, h, math.sqrt(delta), 1.0 / (2.0 * math.sqrt(delta)), interval)
