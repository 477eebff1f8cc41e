"""
Independent numerical oracles for the analytic results.

Root finding by plain bisection, short-horizon RK4 integration of the
canonical system, finite-difference residuals and FOC/concavity probes.
Nothing here calls the closed-form solvers except to obtain the starting
point or the object under test.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .equilibrium import (InfeasibleError, concave_bracket, concave_equilibrium, equilibrium,
                          jacobian, newton_root, residual_P)
from .feasibility import bang_bang
from .model import (AdjointVector, ControlVector, DomainError, ModelKind, ModelParams, StateVector,
                    hamiltonian, utility)
from .trajectory import PathSpec, Trajectory, benchmark_path, discounted_welfare, stable_path

GRAD_STEP = 1e-6
HESS_STEP = 1e-4
MAX_HORIZON = 10.0
DIVERGENCE_BOUND = 10.0


class UnstableIntegrationError(ArithmeticError):
    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class OracleReport:
    name: str
    max_abs_residual: float
    tolerance: float
    samples: int
    detail: str = ""
    informational: bool = False  # reported but not part of the pass/fail gate

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_residual <= self.tolerance)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def render(self) -> str:
        tag = "PASS" if self.passed else ("INFO" if self.informational else "FAIL")
        text = f"[{tag}] {self.name}: max|r|={self.max_abs_residual:.3e} tol={self.tolerance:.1e} n={self.samples}"
        return f"{text} ({self.detail})" if self.detail else text


def bisection_root(params: ModelParams, width: float = 1e-12) -> float:
    """Root of ``P`` on ``[beta^2/(4 eta^2), 1]`` by halving until the bracket is narrower than ``width``."""
    lo, hi = concave_bracket(params)
    if lo > hi:
        raise InfeasibleError("empty bracket: beta > 2*eta")
    f_lo = float(residual_P(params, lo))
    f_hi = float(residual_P(params, hi))
    if f_lo > 0 or f_hi < 0:
        raise InfeasibleError(f"no sign change on bracket (P(lo)={f_lo:.4g}, P(hi)={f_hi:.4g})")
    while hi - lo >= width:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if float(residual_P(params, mid)) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# canonical system -----------------------------------------------------------

def _controls(p: ModelParams, regime: ModelKind, h, psi, mu, lam):
    """Optimal (f, g, gamma) given states and adjoints, from the first-order conditions."""
    if regime is ModelKind.CONCAVE:
        gamma = 1.0 if lam <= 0 else min(1.0, p.beta ** 2 / (4.0 * p.eta ** 2 * lam ** 2))
        rebate = p.beta * math.sqrt(gamma)
    else:
        gamma = 0.0 if regime is ModelKind.BENCHMARK else float(regime.fixed_gamma)
        rebate = p.beta * gamma
    f = p.d + rebate - lam * p.eta * gamma + p.b * mu
    return f, h - mu, gamma


def _nonlinear_rhs(p, regime):
    def rhs(y):
        h, psi, mu, lam = y
        f, g, gamma = _controls(p, regime, h, psi, mu, lam)
        return (p.b * f - g,
                p.delta * (1.0 - psi) - p.eta * f * gamma,
                (1.0 + p.rho) * mu - p.hbar,
                lam + psi - 1.0)
    return rhs


def _linearized_rhs(p, regime):
    eq = equilibrium(p, regime)
    J = jacobian(p, regime, eq.gamma_e).tolist()
    ye = (eq.h_e, eq.psi_e, eq.mu_e, eq.lambda_e)

    def rhs(y):
        dy = [y[i] - ye[i] for i in range(4)]
        return tuple(sum(J[r][c] * dy[c] for c in range(4)) for r in range(4))
    return rhs


def canonical_rhs(params: ModelParams, regime: ModelKind, system: str = "nonlinear"):
    """Right-hand side ``y -> dy/dt`` of the canonical system in ``(h, psi, mu, lambda)``."""
    regime = ModelKind(regime)
    if system == "nonlinear":
        return _nonlinear_rhs(params, regime)
    if system == "linearized":
        return _linearized_rhs(params, regime)
    raise ValueError(f"system must be 'nonlinear' or 'linearized', got {system!r}")


@dataclass(frozen=True)
class ForwardSeries:
    t: np.ndarray
    y: np.ndarray  # columns h, psi, mu, lambda

    def column(self, name: str) -> np.ndarray:
        return self.y[:, ("h", "psi", "mu", "lambda").index(name)]


def rk4(rhs, y0, horizon: float, dt: float, record_every: int = 100) -> ForwardSeries:
    """Classic fourth-order Runge-Kutta with a fixed step, in plain floats."""
    n = int(round(horizon / dt))
    y = tuple(float(v) for v in y0)
    ts, ys = [0.0], [y]
    for i in range(1, n + 1):
        k1 = rhs(y)
        k2 = rhs(tuple(a + 0.5 * dt * b for a, b in zip(y, k1)))
        k3 = rhs(tuple(a + 0.5 * dt * b for a, b in zip(y, k2)))
        k4 = rhs(tuple(a + dt * b for a, b in zip(y, k3)))
        y = tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                  for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
        t = i * dt
        if not all(math.isfinite(v) and abs(v) <= DIVERGENCE_BOUND for v in y):
            raise UnstableIntegrationError(f"state left |y| <= {DIVERGENCE_BOUND:g} at t={t:.4f}", t)
        if i % record_every == 0 or i == n:
            ts.append(t)
            ys.append(y)
    return ForwardSeries(np.array(ts), np.array(ys))


def forward_integrate(params: ModelParams, regime: ModelKind, horizon: float = MAX_HORIZON,
                      dt: float = 1e-4, system: str = "nonlinear", lambda_shift: float = 0.0,
                      record_every: int = 100) -> ForwardSeries:
    """Integrate the canonical system forward from the analytic path's t=0 point.

    Raises
    ------
    UnstableIntegrationError
        If any coordinate exceeds 10 in magnitude.
    """
    if not 0 < horizon <= MAX_HORIZON:
        raise DomainError(f"horizon must lie in (0, {MAX_HORIZON:g}]: unstable roots amplify rounding beyond it")
    regime = ModelKind(regime)
    start = stable_path(params, regime, PathSpec(t_max=0.0)).path(np.zeros(1))
    y0 = (start["h"][0], start["psi"][0], start["mu"][0], start["lambda"][0] + lambda_shift)
    return rk4(canonical_rhs(params, regime, system), y0, horizon, dt, record_every)


def forward_agreement(params: ModelParams, regime: ModelKind, horizon: float = MAX_HORIZON,
                      dt: float = 1e-4, system: str = "nonlinear", tolerance: float = 1e-4) -> OracleReport:
    """Sup-norm gap between RK4 and the analytic path on ``[0, horizon]``."""
    regime = ModelKind(regime)
    name = f"forward[{regime.value},{system}]"
    try:
        series = forward_integrate(params, regime, horizon, dt, system)
    except UnstableIntegrationError as exc:
        return OracleReport(name, math.inf, tolerance, 0, f"diverged at t={exc.t:.3f}")
    analytic = stable_path(params, regime, PathSpec(t_max=0.0)).path(series.t)
    gap = max(float(np.max(np.abs(series.column(c) - analytic[c]))) for c in ("h", "psi", "mu", "lambda"))
    return OracleReport(name, gap, tolerance, len(series.t), f"horizon={horizon:g}, dt={dt:g}")


@dataclass(frozen=True)
class DivergenceProbe:
    diverged: bool
    t_diverge: float | None
    final_gap: float


def divergence_probe(params: ModelParams, regime: ModelKind, shift: float = 1e-3,
                     horizon: float = MAX_HORIZON, dt: float = 1e-4) -> DivergenceProbe:
    """Start off the stable manifold (``lambda0 + shift``) and report whether the state blows up."""
    try:
        series = forward_integrate(params, regime, horizon, dt, "nonlinear", lambda_shift=shift)
    except UnstableIntegrationError as exc:
        return DivergenceProbe(True, exc.t, math.inf)
    analytic = stable_path(params, regime, PathSpec(t_max=0.0)).path(series.t)
    gap = float(np.max(np.abs(series.column("lambda") - analytic["lambda"])))
    return DivergenceProbe(gap > 1.0, None, gap)


# residuals along analytic paths ----------------------------------------------

RESIDUAL_NAMES = ("h_dot", "psi_dot", "lambda_dot", "mu_dot")


def canonical_residuals(series: Trajectory, system: str = "nonlinear", step: float = 1e-4,
                        tolerance: float = 1e-6) -> dict[str, OracleReport]:
    """Central-difference time derivatives of the analytic path versus the canonical system.

    ``nonlinear`` uses the model equations with the path's own controls;
    ``linearized`` uses the Jacobian at the steady state.
    """
    p = series.params
    t = series["t"]
    t = t[(t - step >= 0) & (t + step <= t[-1])] if len(t) else t
    fwd, bwd, mid = series.path(t + step), series.path(t - step), series.path(t)
    deriv = {k: (fwd[k] - bwd[k]) / (2.0 * step) for k in ("h", "psi", "lambda", "mu")}
    if system == "nonlinear":
        h, psi, lam, mu, f, g, gam = (mid[k] for k in ("h", "psi", "lambda", "mu", "f", "g", "gamma"))
        model = {
            "h_dot": p.b * f - g,
            "psi_dot": p.delta * (1.0 - psi) - p.eta * f * gam,
            "lambda_dot": p.rho * lam - 1.0 + psi + lam * p.delta,
            "mu_dot": p.rho * mu - g + h - p.hbar,
        }
    elif system == "linearized":
        eq = series.equilibrium
        J = jacobian(p, series.regime, eq.gamma_e)
        dev = np.vstack([mid["h"] - eq.h_e, mid["psi"] - eq.psi_e, mid["mu"] - eq.mu_e,
                         mid["lambda"] - eq.lambda_e])
        lin = J @ dev
        model = {"h_dot": lin[0], "psi_dot": lin[1], "mu_dot": lin[2], "lambda_dot": lin[3]}
    else:
        raise ValueError(f"system must be 'nonlinear' or 'linearized', got {system!r}")
    observed = {"h_dot": deriv["h"], "psi_dot": deriv["psi"], "lambda_dot": deriv["lambda"],
                "mu_dot": deriv["mu"]}
    out = {}
    for key in RESIDUAL_NAMES:
        r = np.abs(observed[key] - model[key])
        worst = float(r.max()) if len(r) else 0.0
        out[key] = OracleReport(f"residual[{series.regime.value},{system}].{key}", worst, tolerance, len(r))
    return out


# optimality probes -----------------------------------------------------------

def _as_point(point) -> dict:
    if isinstance(point, dict):
        src = point
    else:
        src = point._asdict() if hasattr(point, "_asdict") else vars(point)
    keys = {"lambda": "lam", "lambda_e": "lam", "h_e": "h", "psi_e": "psi", "mu_e": "mu",
            "f_e": "f", "g_e": "g", "gamma_e": "gamma"}
    return {keys.get(k, k): float(v) for k, v in src.items()
            if keys.get(k, k) in ("h", "psi", "mu", "lam", "f", "g", "gamma")}


def _ham(p, regime, x):
    return float(hamiltonian(p, StateVector(x["h"], x["psi"]), ControlVector(x["f"], x["g"], x["gamma"]),
                             AdjointVector(x["lam"], x["mu"]), regime, check_range=False))


def hamiltonian_gradient(params: ModelParams, regime: ModelKind, point, step: float = GRAD_STEP) -> dict:
    """Finite-difference ``dH/df``, ``dH/dg`` and ``dH/dgamma``.

    Central differences in the interior; at ``gamma`` in {0, 1} the
    difference is taken one-sided, pointing into [0, 1].
    """
    regime = ModelKind(regime)
    x = _as_point(point)
    grad = {}
    for name in ("f", "g", "gamma"):
        lo_x, hi_x = dict(x), dict(x)
        lo_step = hi_step = step
        if name == "gamma" and x["gamma"] - step < 0:
            lo_step = 0.0
        if name == "gamma" and x["gamma"] + step > 1:
            hi_step = 0.0
        lo_x[name] -= lo_step
        hi_x[name] += hi_step
        grad[name] = (_ham(params, regime, hi_x) - _ham(params, regime, lo_x)) / (lo_step + hi_step)
    return grad


def foc_check(params: ModelParams, regime: ModelKind, point, tolerance: float = 1e-8) -> OracleReport:
    """First-order conditions at one point.

    ``f`` and ``g`` are interior, so their gradients must vanish. For
    ``gamma`` an interior value needs a zero gradient, ``gamma = 1`` a
    non-negative one and ``gamma = 0`` a non-positive one; the residual is the
    size of any violation.
    """
    regime = ModelKind(regime)
    x = _as_point(point)
    grad = hamiltonian_gradient(params, regime, x)
    res = [abs(grad["f"]), abs(grad["g"])]
    gamma = x["gamma"]
    if gamma >= 1.0:
        res.append(max(0.0, -grad["gamma"]))
        where = "upper bound"
    elif gamma <= 0.0:
        res.append(max(0.0, grad["gamma"]))
        where = "lower bound"
    else:
        res.append(abs(grad["gamma"]))
        where = "interior"
    detail = f"gamma {where}; dH/df={grad['f']:.2e} dH/dg={grad['g']:.2e} dH/dgamma={grad['gamma']:.3e}"
    return OracleReport(f"foc[{regime.value}]", max(res), tolerance, 3, detail)


def _hessian2(fun, x0, y0, step):
    f = fun
    fxx = (f(x0 + step, y0) - 2 * f(x0, y0) + f(x0 - step, y0)) / step ** 2
    fyy = (f(x0, y0 + step) - 2 * f(x0, y0) + f(x0, y0 - step)) / step ** 2
    fxy = (f(x0 + step, y0 + step) - f(x0 + step, y0 - step)
           - f(x0 - step, y0 + step) + f(x0 - step, y0 - step)) / (4 * step ** 2)
    return fxx, fxy, fyy


def concavity_check(params: ModelParams, regime: ModelKind, points, tolerance: float = 1e-6,
                    variables: str = "state") -> OracleReport:
    """Hessian of the Hamiltonian in ``(h, psi)`` (controls fixed), or of utility in ``(f, g)``.

    Both must be ``diag(-1, -1)``.
    """
    regime = ModelKind(regime)
    worst, n = 0.0, 0
    for point in points:
        x = _as_point(point)
        if variables == "state":
            def fun(h, psi):
                return _ham(params, regime, {**x, "h": h, "psi": psi})
            a, b = x["h"], x["psi"]
        elif variables == "controls":
            def fun(f, g):
                return float(utility(params, StateVector(x["h"], x["psi"]), ControlVector(f, g, x["gamma"]),
                                     regime, check_range=False))
            a, b = x["f"], x["g"]
        else:
            raise ValueError("variables must be 'state' or 'controls'")
        fxx, fxy, fyy = _hessian2(fun, a, b, HESS_STEP)
        worst = max(worst, abs(fxx + 1.0), abs(fyy + 1.0), abs(fxy))
        n += 1
    return OracleReport(f"concavity[{regime.value},{variables}]", worst, tolerance, n)


# welfare ---------------------------------------------------------------------

def benchmark_welfare_closed_form(params: ModelParams, t_max: float, h0: float = 1.0) -> float:
    """Exact discounted utility of the benchmark path over ``[0, t_max]``.

    Along the path ``U`` is a quadratic in ``x = e^{-t}``, ``U = A + B x + C x^2``,
    so the integral is a sum of three exponential moments.
    """
    p = params
    mu = p.hbar / (1.0 + p.rho)
    f = p.d + p.b * mu
    h_e = p.b * f + mu
    a = h0 - h_e
    # U as a polynomial in h with g = h - mu:
    # -(h-mu)^2/2 + (h-mu) h + d f - f^2/2 - (h-hbar)^2/2
    c2 = -0.5 + 1.0 - 0.5
    c1 = mu - mu + p.hbar
    c0 = -0.5 * mu ** 2 + p.d * f - 0.5 * f ** 2 - 0.5 * p.hbar ** 2
    A = c0 + c1 * h_e + c2 * h_e ** 2
    B = (c1 + 2.0 * c2 * h_e) * a
    C = c2 * a ** 2

    def moment(rate):
        return t_max if rate == 0 else -math.expm1(-rate * t_max) / rate

    return A * moment(p.rho) + B * moment(1.0 + p.rho) + C * moment(2.0 + p.rho)


def welfare_oracle(params: ModelParams, spec: PathSpec = PathSpec(), tolerance: float = 1e-8) -> OracleReport:
    series = benchmark_path(params, spec)
    J = discounted_welfare(series).J
    exact = benchmark_welfare_closed_form(params, spec.t_max, spec.h0)
    return OracleReport("welfare[benchmark]", abs(J - exact), tolerance, len(series),
                        f"simpson={J:.12f} exact={exact:.12f}")


# suite -----------------------------------------------------------------------

def _regimes_for(params: ModelParams) -> list[ModelKind]:
    out = [ModelKind.BENCHMARK, ModelKind.LINEAR_ZERO]
    if params.beta > 0:
        out.append(ModelKind.LINEAR_FULL)
        try:
            concave_equilibrium(params)
            out.append(ModelKind.CONCAVE)
        except (InfeasibleError, DomainError):
            pass
    return out


def _bang_bang_selects(params, regime, lam) -> bool:
    if params.eta == 0 or lam < 0:
        return False
    return bang_bang(lam, params).gamma_star == regime.fixed_gamma


def run_oracle_suite(params: ModelParams, regimes=None, spec: PathSpec = PathSpec(),
                     forward_dt: float = 1e-4) -> list[OracleReport]:
    """All oracles for one parameter set.

    The concave closed-form path solves the system linearized at the steady
    state, so for that regime the linearized checks form the gate and the
    nonlinear ones are attached as informational reports.
    """
    regimes = [ModelKind(r) for r in regimes] if regimes else _regimes_for(params)
    reports: list[OracleReport] = []
    if ModelKind.CONCAVE in regimes:
        newton = newton_root(params)
        bis = bisection_root(params)
        reports.append(OracleReport("root[newton vs bisection]", abs(newton - bis), 1e-10, 1,
                                    f"newton={newton:.15f} bisection={bis:.15f}"))
        reports.append(OracleReport("root[|P(gamma_e)|]", abs(float(residual_P(params, newton))), 1e-10, 1))
    for regime in regimes:
        series = stable_path(params, regime, spec)
        concave = regime is ModelKind.CONCAVE
        gate_system = "linearized" if concave else "nonlinear"
        reports.extend(canonical_residuals(series, gate_system).values())
        reports.append(forward_agreement(params, regime, dt=forward_dt, system=gate_system))
        if concave:
            for rep in canonical_residuals(series, "nonlinear").values():
                reports.append(OracleReport(rep.name, rep.max_abs_residual, rep.tolerance, rep.samples,
                                            "closed form is the linearized solution", informational=True))
            rep = forward_agreement(params, regime, dt=forward_dt, system="nonlinear")
            reports.append(OracleReport(rep.name, rep.max_abs_residual, rep.tolerance, rep.samples,
                                        rep.detail, informational=True))
        probe = divergence_probe(params, regime, dt=forward_dt)
        reports.append(OracleReport(f"saddle[{regime.value}] lambda0+1e-3 diverges",
                                    0.0 if probe.diverged else 1.0, 0.0, 1,
                                    f"t={probe.t_diverge:.2f}" if probe.t_diverge else f"gap={probe.final_gap:.3g}"))
        eq = equilibrium(params, regime)
        foc = foc_check(params, regime, eq)
        if regime.is_linear and not _bang_bang_selects(params, regime, eq.lambda_e):
            foc = OracleReport(foc.name, foc.max_abs_residual, foc.tolerance, foc.samples,
                               "corner not selected by the bang-bang rule; " + foc.detail, informational=True)
        reports.append(foc)
        reports.append(concavity_check(params, regime, [eq], variables="state"))
    reports.append(welfare_oracle(params, spec))
    return reports


def suite_passed(reports) -> bool:
    return all(r.passed for r in reports if not r.informational)


def reports_to_json(reports) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2)
