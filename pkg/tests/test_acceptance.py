"""Acceptance criteria 1-8. A summary line per criterion is printed at the end of the run."""

import math
import time

import numpy as np
import pytest

from aquifer_control.equilibrium import (DegenerateSpectrumError, concave_equilibrium, jacobian,
                                         linear_equilibrium, newton_root, residual_P, spectrum)
from aquifer_control.feasibility import check_concave, validate_params
from aquifer_control.model import ModelKind, ModelParams
from aquifer_control.scenario import GOLDEN, best_policy, reproduce_table
from aquifer_control.trajectory import PathSpec, linear_path, stable_path
from aquifer_control.verify import (bisection_root, canonical_residuals, divergence_probe,
                                    forward_agreement, welfare_oracle)

from conftest import T4_BASE, table_base_sets, table_param_sets


def _random_params(rng, beta_range=(0.0, 2.0)):
    rho = rng.uniform(0.01, 0.3)
    return ModelParams(b=rng.uniform(rho + 1e-3, 1.0), d=rng.uniform(0.05, 3.0), rho=rho,
                       eta=rng.uniform(0.02, 1.0), beta=rng.uniform(*beta_range),
                       hbar=rng.uniform(0.02, 1.0))


def _draw(rng, n, accept, **kw):
    out = []
    while len(out) < n:
        p = _random_params(rng, **kw)
        if accept(p):
            out.append(p)
    return out


def _consistent_concave(p):
    if p.beta <= 0:
        return False
    try:
        return concave_equilibrium(p).consistent
    except Exception:
        return False


# 1 -----------------------------------------------------------------------------

@pytest.mark.acceptance(1)
def test_c1_tables_reproduce_within_tolerance_and_time():
    start = time.perf_counter()
    results = {tid: reproduce_table(tid, strict=False) for tid in GOLDEN}
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    problems = [f"{tid} row {c.row} {c.column}: {c.reference} vs {c.computed}"
                for tid, r in results.items() for c in r.failures()]
    assert not problems, problems
    assert {tid: len(r.rows) for tid, r in results.items()} == {
        "T1": 6, "T2": 10, "T3": 12, "T4": 8, "T5": 10, "A1": 6, "A2": 12, "A3": 4}


@pytest.mark.acceptance(1)
@pytest.mark.parametrize("tid,row,column,expected", [
    ("T1", 0, "U1", 0.541), ("T1", 1, "U0", 0.589),
    ("T2", 6, "lambda_e", 0.887), ("T2", 6, "f_e", 2.810), ("T2", 6, "U1", 4.313),
    ("T4", 2, "gamma_e", 0.397), ("T4", 2, "U_e", 2.260),
    ("T5", 0, "lambda_e", 0.999), ("T5", 0, "U_e", 3.487),
])
def test_c1_spot_anchors(tid, row, column, expected):
    result = reproduce_table(tid)
    assert result.rows[row].cell(column) == pytest.approx(expected, abs=1.5e-3)


# 2 -----------------------------------------------------------------------------

@pytest.mark.acceptance(2)
def test_c2_newton_matches_bisection_on_random_draws():
    rng = np.random.default_rng(20240601)
    draws = _draw(rng, 1000, lambda p: check_concave(p).overall, beta_range=(1e-4, 2.0))
    worst_gap = worst_p = 0.0
    for p in draws:
        root = newton_root(p)
        worst_gap = max(worst_gap, abs(root - bisection_root(p)))
        worst_p = max(worst_p, abs(float(residual_P(p, root))))
    assert len(draws) >= 1000
    assert worst_gap <= 1e-10
    assert worst_p <= 1e-10


# 3 -----------------------------------------------------------------------------

def _residual_failures(p, regime, system, label):
    series = stable_path(p, regime, PathSpec())
    return [f"{label} {rep.name} = {rep.max_abs_residual:.2e}"
            for rep in canonical_residuals(series, system).values() if not rep.passed]


@pytest.mark.acceptance(3)
def test_c3_benchmark_and_linear_paths():
    failures, count = [], 0
    for label, p in table_param_sets().items():
        for regime in (ModelKind.BENCHMARK, ModelKind.LINEAR_ZERO, ModelKind.LINEAR_FULL):
            failures += _residual_failures(p, regime, "nonlinear", label)
            count += 1
    assert count >= 3 * 8
    assert not failures, failures


@pytest.mark.acceptance(3)
def test_c3_concave_paths_against_nonlinear_system():
    # The closed-form concave path solves the canonical system linearized at the
    # steady state; the psi and h residuals against the nonlinear system are of
    # the order of the neglected quadratic terms.
    sets = {k: p for k, p in table_param_sets().items() if _consistent_concave(p)}
    assert sets
    failures = []
    for label, p in sets.items():
        failures += _residual_failures(p, ModelKind.CONCAVE, "nonlinear", label)
    assert not failures, failures


# 4 -----------------------------------------------------------------------------

@pytest.mark.acceptance(4)
def test_c4_forward_integration_benchmark_and_linear():
    failures = []
    for label, p in table_base_sets().items():
        for regime in (ModelKind.BENCHMARK, ModelKind.LINEAR_FULL):
            rep = forward_agreement(p, regime)
            if not rep.passed:
                failures.append(f"{label} {rep.render()}")
    assert not failures, failures


@pytest.mark.acceptance(4)
def test_c4_forward_integration_concave_nonlinear():
    sets = {k: p for k, p in table_base_sets().items() if _consistent_concave(p)}
    sets["T4:beta=0.1"] = T4_BASE
    failures = []
    for label, p in sets.items():
        rep = forward_agreement(p, ModelKind.CONCAVE, system="nonlinear")
        if not rep.passed:
            failures.append(f"{label} {rep.render()}")
    assert not failures, failures


@pytest.mark.acceptance(4)
def test_c4_lambda_shift_diverges():
    sets = table_base_sets()
    cases = [(k, p, r) for k, p in sets.items() for r in (ModelKind.BENCHMARK, ModelKind.LINEAR_FULL)]
    cases += [(k, p, ModelKind.CONCAVE) for k, p in sets.items() if _consistent_concave(p)]
    for label, p, regime in cases:
        probe = divergence_probe(p, regime, shift=1e-3)
        assert probe.diverged, (label, regime, probe)


# 5 -----------------------------------------------------------------------------

@pytest.mark.acceptance(5)
def test_c5a_negative_beta_selects_zero_fertilizer():
    rng = np.random.default_rng(11)
    draws = _draw(rng, 500, lambda p: validate_params(p).overall, beta_range=(-2.0, -1e-6))
    spec = PathSpec(t_max=5.0, dt=0.05)
    for p in draws:
        choice = best_policy(p)
        assert choice.regime is ModelKind.LINEAR_ZERO, p
        assert np.all(linear_path(p, 0, spec)["psi"] == 1.0)


@pytest.mark.acceptance(5)
def test_c5b_concave_dominance():
    rng = np.random.default_rng(12)
    draws = _draw(rng, 500, lambda p: check_concave(p).overall, beta_range=(1e-3, 2.0))
    below_eta = _draw(rng, 500, lambda p: p.beta < p.eta and check_concave(p).overall,
                      beta_range=(1e-3, 1.0))
    for p in draws + below_eta:
        c, z = concave_equilibrium(p), linear_equilibrium(p, 0)
        assert c.f_e > z.f_e and c.g_e > z.g_e and c.h_e > z.h_e, p
    for p in below_eta:
        c, f = concave_equilibrium(p), linear_equilibrium(p, 1)
        assert c.f_e > f.f_e and c.g_e > f.g_e and c.h_e > f.h_e, p


@pytest.mark.acceptance(5)
def test_c5c_full_improves_food_iff_threshold():
    rng = np.random.default_rng(13)
    draws = _draw(rng, 500, lambda p: validate_params(p).overall, beta_range=(1e-3, 2.0))
    hits = 0
    for p in draws:
        below = p.f0 < p.beta * p.delta / p.eta ** 2
        assert below == (linear_equilibrium(p, 1).f_e > linear_equilibrium(p, 0).f_e), p
        hits += below
    assert 0 < hits < len(draws)  # both sides of the equivalence are exercised


# 6 -----------------------------------------------------------------------------

@pytest.mark.acceptance(6)
def test_c6_small_beta_converges_to_benchmark():
    u0 = linear_equilibrium(T4_BASE, 0).U_e
    eqs = [concave_equilibrium(T4_BASE.replace(beta=b)) for b in (1e-2, 1e-3, 1e-4)]
    gammas = [e.gamma_e for e in eqs]
    gaps = [abs(e.U_e - u0) for e in eqs]
    assert gammas[0] > gammas[1] > gammas[2]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gammas[2] < 5e-3


# 7 -----------------------------------------------------------------------------

@pytest.mark.acceptance(7)
def test_c7_benchmark_welfare_closed_form():
    for label, p in table_param_sets().items():
        rep = welfare_oracle(p)
        assert rep.passed, (label, rep.render())


# 8 -----------------------------------------------------------------------------

def _table_configs():
    for tid, table in GOLDEN.items():
        for row in table.rows:
            p = table.base.replace(**{table.axis: row.value})
            regime = row.regime
            gamma = {ModelKind.LINEAR_FULL: 1.0, ModelKind.LINEAR_ZERO: 0.0}.get(regime)
            if gamma is None:
                gamma = concave_equilibrium(p).gamma_e
            yield f"{tid}:{row.label}:{row.value:g}", p, regime, gamma


@pytest.mark.acceptance(8)
def test_c8_theta2_exact_without_fertilizer():
    for _, p, _, _ in _table_configs():
        assert spectrum(p, ModelKind.LINEAR_ZERO, 0.0).theta2 == p.rho - 1.0
        assert spectrum(p, ModelKind.BENCHMARK, 0.0).theta2 == p.rho - 1.0


@pytest.mark.acceptance(8)
def test_c8_saddle_signs_for_table_configs():
    for label, p, regime, gamma in _table_configs():
        s = spectrum(p, regime, gamma)
        assert s.signs() == ("-", "-", "+", "+"), label
        numeric = np.sort(np.linalg.eigvals(jacobian(p, regime, gamma)).real)
        assert numeric == pytest.approx(sorted(s.eigenvalues), abs=1e-10), label


@pytest.mark.acceptance(8)
def test_c8_degenerate_spectrum_raises():
    rho = 0.05
    p = ModelParams(b=0.16, d=2.0, rho=rho, eta=math.sqrt(2 * rho), beta=0.5, hbar=0.5)
    with pytest.raises(DegenerateSpectrumError):
        spectrum(p, ModelKind.LINEAR_FULL, 1.0)
    with pytest.raises(DegenerateSpectrumError):
        spectrum(p.replace(rho=0.0, b=0.1), ModelKind.LINEAR_ZERO, 0.0)
