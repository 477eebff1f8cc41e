import csv
import dataclasses
import math

import pytest

from aquifer_control import scenario
from aquifer_control.model import DomainError, ModelKind, ModelParams, utility, StateVector, ControlVector
from aquifer_control.scenario import (GOLDEN, CSV_COLUMNS, ReproductionError, SweepSpec, best_policy,
                                      reproduce_table, rows_to_json, run_sweep, write_table)

T1 = GOLDEN["T1"].base
A_BASE = GOLDEN["A1"].base


def test_sweep_layout_and_order():
    spec = SweepSpec(GOLDEN["T2"].base, "beta", [-2.076, 0.0, 1.0])
    rows = run_sweep(spec)
    assert [(r.value, r.regime) for r in rows] == [
        (v, k) for v in (-2.076, 0.0, 1.0) for k in (ModelKind.LINEAR_FULL, ModelKind.LINEAR_ZERO)]
    assert rows[-2].lambda_e == pytest.approx(0.887, abs=1.5e-3)
    assert rows[-1].U0 == pytest.approx(2.163, abs=1.5e-3) and rows[-1].lambda_e is None


def test_sweep_custom_axis():
    spec = SweepSpec(T1, "custom", [{"beta": 0.4, "eta": 0.9}], regimes=[ModelKind.CONCAVE])
    (row,) = run_sweep(spec)
    assert row.regime is ModelKind.CONCAVE


def test_sweep_records_errors_instead_of_raising():
    spec = SweepSpec(GOLDEN["T4"].base, "beta", [0.7], regimes=["concave"])
    (row,) = run_sweep(spec)
    assert row.error.startswith("InfeasibleError") and row.h_e is None and not row.consistent


def test_sweep_validation():
    assert run_sweep(SweepSpec(T1, "beta", [])) == []
    with pytest.raises(DomainError):
        SweepSpec(T1, "delta", [0.5])
    with pytest.raises(DomainError):
        SweepSpec(T1, "beta", [math.nan])
    with pytest.raises(DomainError):
        SweepSpec(T1, "beta", [0.1], regimes=())


def test_sweep_is_deterministic():
    spec = SweepSpec(GOLDEN["T5"].base, "eta", [0.65, 0.8, 1.0], regimes=["concave", "zero"])
    assert rows_to_json(run_sweep(spec)) == rows_to_json(run_sweep(spec))


def test_monotone_in_beta():
    rows = run_sweep(SweepSpec(GOLDEN["T4"].base, "beta", [0.1, 0.2, 0.3], regimes=["concave"]))
    for col, sign in (("gamma_e", 1), ("h_e", 1), ("f_e", 1), ("U_e", 1), ("psi_e", -1)):
        vals = [r.cell(col) for r in rows]
        assert all(sign * (b - a) > 0 for a, b in zip(vals, vals[1:])), col


def test_best_policy_prefers_concave_in_a1():
    choice = best_policy(A_BASE.replace(beta=0.3))
    assert choice.regime is ModelKind.CONCAVE
    u = {k: round(v.U_e, 3) for k, v in choice.candidates.items()}
    assert u[ModelKind.CONCAVE] > u[ModelKind.LINEAR_FULL] > u[ModelKind.LINEAR_ZERO]
    assert u[ModelKind.CONCAVE] == pytest.approx(0.775, abs=1.5e-3)


def test_best_policy_without_rebate():
    choice = best_policy(T1.replace(beta=-1.0))
    assert choice.regime is ModelKind.LINEAR_ZERO and choice.consistent
    assert set(choice.candidates) == {ModelKind.LINEAR_ZERO}


def test_best_policy_table1():
    choice = best_policy(T1)
    u = {k: v.U_e for k, v in choice.candidates.items()}
    assert u[ModelKind.LINEAR_ZERO] > u[ModelKind.LINEAR_FULL]
    assert choice.regime is ModelKind.CONCAVE and choice.consistent


def test_best_policy_flags_out_of_bounds_winner():
    p = GOLDEN["T2"].base.replace(beta=1.6)
    choice = best_policy(p)
    assert choice.regime is ModelKind.LINEAR_FULL
    assert not choice.consistent
    assert any("outside [0, 1]" in f for f in choice.flags)


def test_all_tables_reproduce():
    for tid in GOLDEN:
        assert reproduce_table(tid).passed, tid


def test_table3_erratum_is_inconsistent_with_its_own_row():
    row = GOLDEN["T3"].rows[10]
    assert row.cells["g_e"] == 0.261
    assert row.cells["h_e"] - row.cells["mu_e"] == pytest.approx(0.266, abs=1e-9)
    diff = [c for c in reproduce_table("T3").cells if c.erratum]
    assert len(diff) == 1 and diff[0].computed == pytest.approx(0.266, abs=1e-3)


def test_a1_erratum_recomputed_from_printed_cells():
    row = GOLDEN["A1"].rows[0]
    c = row.cells
    u = utility(A_BASE.replace(beta=0.2), StateVector(c["h_e"], c["psi_e"]),
                ControlVector(c["f_e"], c["g_e"], c["gamma_e"]), ModelKind.CONCAVE)
    assert u == pytest.approx(0.680, abs=2e-3)
    assert abs(u - c["U_e"]) > 0.03


def test_tampered_reference_raises(monkeypatch):
    table = GOLDEN["T4"]
    rows = list(table.rows)
    rows[2] = dataclasses.replace(rows[2], cells={**rows[2].cells, "U_e": 2.300})
    monkeypatch.setitem(scenario.GOLDEN, "T4", dataclasses.replace(table, rows=tuple(rows)))
    with pytest.raises(ReproductionError, match="U_e"):
        reproduce_table("T4")
    assert not reproduce_table("T4", strict=False).passed


def test_unknown_table():
    with pytest.raises(KeyError):
        reproduce_table("T9")


def test_render_mentions_errata():
    text = reproduce_table("A1").render()
    assert "PASS" in text and "erratum row 0" in text


def test_write_table(tmp_path):
    rows = reproduce_table("T1").rows
    path = write_table("T1", rows, tmp_path)
    assert path.endswith("table_T1.csv")
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert data[0] == list(CSV_COLUMNS) and len(data) == 7
    assert write_table("T1", rows, tmp_path, "json").endswith("table_T1.json")
    with pytest.raises(ValueError):
        write_table("T1", rows, tmp_path, "xml")
