"""Parametric restrictions for each regime and the bang-bang fertilizer rule."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .model import DomainError, ModelParams

SINGULAR_TOL = 1e-12


class RegimeError(ValueError):
    """The requested regime does not apply to these parameters."""


@dataclass(frozen=True)
class Check:
    """One inequality. ``margin`` is ``rhs - lhs``, so it is positive when the inequality holds with room."""

    name: str
    passed: bool
    margin: float
    detail: str = ""
    strict: bool = False

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin,
                "strict": self.strict, "detail": self.detail}


def _le(name, lhs, rhs, detail=""):
    margin = rhs - lhs
    return Check(name, bool(margin >= 0), margin, detail or f"{lhs:.6g} <= {rhs:.6g}")


def _lt(name, lhs, rhs, detail=""):
    margin = rhs - lhs
    return Check(name, bool(margin > 0), margin, detail or f"{lhs:.6g} < {rhs:.6g}", strict=True)


def _div(num, den):
    if den == 0:
        if num == 0:
            return math.nan
        return math.copysign(math.inf, num)
    return num / den


@dataclass
class FeasibilityReport:
    regime: str
    checks: list[Check] = field(default_factory=list)
    values: dict = field(default_factory=dict)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"regime": self.regime, "overall": self.overall,
                "checks": [c.as_dict() for c in self.checks], "values": dict(self.values)}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def render(self) -> str:
        lines = [f"regime: {self.regime}", f"overall: {'PASS' if self.overall else 'FAIL'}"]
        for c in self.checks:
            rel = "strict" if c.strict else "non-strict"
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name:<40s} margin={c.margin:+.6g} ({rel}; {c.detail})")
        for key, value in self.values.items():
            lines.append(f"  {key} = {value}")
        return "\n".join(lines)


def _base_checks(p: ModelParams) -> list[Check]:
    return [
        _le("0 ≤ ρ ≤ 1", 0.0, min(p.rho, 1.0 - p.rho), f"rho={p.rho:.6g}"),
        _le("0 ≤ δ ≤ 1", 0.0, min(p.delta, 1.0 - p.delta), f"delta={p.delta:.6g}"),
        _le("0 ≤ η ≤ 1", 0.0, min(p.eta, 1.0 - p.eta), f"eta={p.eta:.6g}"),
        _le("0 ≤ b ≤ 1", 0.0, min(p.b, 1.0 - p.b), f"b={p.b:.6g}"),
        _lt("h̄ > 0", 0.0, p.hbar),
        _le("h̄ ≤ 1", p.hbar, 1.0),
        Check("ρ + δ = 1", p.rho + p.delta == 1.0, 0.0 - abs(p.rho + p.delta - 1.0),
              f"rho+delta={p.rho + p.delta!r}"),
        _lt("b > ρ", p.rho, p.b),
    ]


def validate_params(params: ModelParams) -> FeasibilityReport:
    """Range restrictions, ``rho + delta = 1`` and the sustainability constraint ``b > rho``."""
    return FeasibilityReport("params", _base_checks(params))


def linear_bounds(params: ModelParams) -> tuple[float, float]:
    """Upper bounds ``(m1, m2)`` on ``mu_e`` for the full-fertilizer saddle path."""
    p = params
    dl, eta2 = p.delta, p.eta ** 2
    m1 = _div(eta2 + dl - dl * p.b * (p.beta + p.d), eta2 + dl * (1.0 + p.b ** 2))
    m2 = _div(eta2 + dl - p.eta * (p.beta + p.d), p.eta * p.b)
    return m1, m2


def full_threshold(params: ModelParams) -> float:
    """``beta*delta/eta^2``: full fertilizer improves on zero iff ``f0`` is below this."""
    return _div(params.beta * params.delta, params.eta ** 2)


def check_linear_full(params: ModelParams) -> FeasibilityReport:
    """Conditions under which full fertilizer use (gamma = 1) is the optimal bang-bang regime.

    The report keeps the saddle-path bounds on ``mu_e`` and the bang-bang
    self-consistency clause apart (``values['saddle_bounds_ok']`` and
    ``values['bang_bang_ok']``) since full-fertilizer equilibria are often
    tabulated where only the first holds.

    Raises
    ------
    RegimeError
        If ``beta <= 0``; then zero fertilizer is optimal.
    """
    p = params
    if p.beta <= 0:
        raise RegimeError(f"beta={p.beta:.6g} <= 0: fertilizer raises food prices, "
                          "zero fertilizer (gamma*=0) is optimal and quality stays at 1")
    m1, m2 = linear_bounds(p)
    mu_e = p.hbar / (2.0 - p.delta)
    threshold = full_threshold(p)
    saddle = [_lt("h̄/(2−δ) < m1", mu_e, m1), _lt("h̄/(2−δ) < m2", mu_e, m2)]
    if p.beta > p.eta:
        branch = "beta > eta"
        consistency = [_lt("β > η", p.eta, p.beta)]
    else:
        branch = "beta <= eta"
        consistency = [_le("f^e(0) ≤ βδ/η²", p.f0, threshold)]
    report = FeasibilityReport("full", _base_checks(p) + saddle + consistency)
    report.values.update({
        "m1": m1, "m2": m2, "mu_e": mu_e, "f0": p.f0, "beta_delta_over_eta2": threshold,
        "branch": branch,
        "saddle_bounds_ok": all(c.passed for c in saddle),
        "bang_bang_ok": all(c.passed for c in consistency),
    })
    return report


def concave_bounds(params: ModelParams) -> tuple[float, float, float]:
    """``(lower, middle, upper)`` of the chain ``lower <= b*hbar/(rho+1) + d <= upper``."""
    p = params
    dl = 1.0 - p.rho
    lower = _div(p.beta * dl, 2.0 * p.eta ** 2) - p.beta / 2.0
    middle = p.b * p.mu_e + p.d
    upper_a = _div(4.0 * p.eta * dl, p.beta ** 2) - _div(p.beta ** 2, 4.0 * p.eta)
    upper_b = _div(1.0 - p.mu_e, p.b) - p.beta / 2.0
    return lower, middle, min(upper_a, upper_b)


def check_concave(params: ModelParams) -> FeasibilityReport:
    """Conditions for a unique interior equilibrium with the concave rebate."""
    p = params
    dl = 1.0 - p.rho
    lower, middle, _ = concave_bounds(p)
    upper_a = _div(4.0 * p.eta * dl, p.beta ** 2) - _div(p.beta ** 2, 4.0 * p.eta)
    upper_b = _div(1.0 - p.mu_e, p.b) - p.beta / 2.0

    beta_range = Check("0<β ≤ 2η", bool(p.beta > 0 and p.beta <= 2.0 * p.eta),
                       min(p.beta, 2.0 * p.eta - p.beta),
                       f"beta={p.beta:.6g}, 2*eta={2 * p.eta:.6g}")
    checks = _base_checks(p) + [
        beta_range,
        _lt("1−ρ > β⁴/(16η²)", _div(p.beta ** 4, 16.0 * p.eta ** 2), dl),
        _le("h̄/(ρ+1) ≤ 1−bβ/2", p.mu_e, 1.0 - p.b * p.beta / 2.0),
        _le("β(1−ρ)/(2η²)−β/2 ≤ bh̄/(ρ+1)+d", lower, middle),
        _le("bh̄/(ρ+1)+d ≤ 4η(1−ρ)/β²−β²/(4η)", middle, upper_a),
        _le("bh̄/(ρ+1)+d ≤ (1/b)(1−h̄/(ρ+1))−β/2", middle, upper_b),
    ]
    report = FeasibilityReport("concave", checks)
    report.values.update({
        "lhs": lower, "middle": middle, "rhs": min(upper_a, upper_b),
        "bracket": (_div(p.beta ** 2, 4.0 * p.eta ** 2), 1.0),
    })
    return report


@dataclass(frozen=True)
class BangBangDecision:
    gamma_star: float | None  # None marks the singular case
    threshold: float
    lam: float

    @property
    def singular(self) -> bool:
        return self.gamma_star is None


def bang_bang(lam: float, params: ModelParams) -> BangBangDecision:
    """Fertilizer choice when the Hamiltonian is linear in gamma: 1 if beta/eta > lam, 0 if below."""
    if params.eta == 0:
        raise DomainError("eta = 0: switching threshold beta/eta is undefined")
    if lam < 0:
        raise DomainError(f"shadow price of quality must be non-negative, got {lam!r}")
    threshold = params.beta / params.eta
    if abs(threshold - lam) < SINGULAR_TOL:
        gamma = None
    elif threshold > lam:
        gamma = 1.0
    else:
        gamma = 0.0
    return BangBangDecision(gamma, threshold, lam)
