"""
Parameter sweeps, regime selection and reference-table reproduction.

Reference tables are stored as printed (three decimals). ``None`` marks a
cell left blank in the original layout; those cells are emitted empty.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

from .equilibrium import InfeasibleError, concave_equilibrium, equilibrium, linear_equilibrium
from .feasibility import check_concave, check_linear_full, validate_params, RegimeError
from .model import DomainError, ModelKind, ModelParams

TOLERANCE = 1.5e-3
CELL_COLUMNS = ("h_e", "psi_e", "gamma_e", "mu_e", "lambda_e", "g_e", "f_e", "U1", "U0", "U_e")
CSV_COLUMNS = ("scenario", "regime", "axis", "value") + CELL_COLUMNS + ("consistent", "error")

# Default column layout per regime when no reference layout applies.
LAYOUT = {
    ModelKind.BENCHMARK: ("h_e", "gamma_e", "mu_e", "g_e", "f_e", "U0"),
    ModelKind.LINEAR_ZERO: ("h_e", "gamma_e", "mu_e", "g_e", "f_e", "U0"),
    ModelKind.LINEAR_FULL: ("h_e", "psi_e", "gamma_e", "mu_e", "lambda_e", "g_e", "f_e", "U1"),
    ModelKind.CONCAVE: ("h_e", "psi_e", "gamma_e", "mu_e", "lambda_e", "g_e", "f_e", "U_e"),
}
LABELS = {"full": ModelKind.LINEAR_FULL, "total": ModelKind.LINEAR_FULL, "zero": ModelKind.LINEAR_ZERO,
          "no": ModelKind.LINEAR_ZERO, "concave": ModelKind.CONCAVE, "benchmark": ModelKind.BENCHMARK}


class ReproductionError(AssertionError):
    """A regenerated cell differs from the reference value by more than the tolerance."""


class NoFeasiblePolicyError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    base: ModelParams
    axis: str
    values: tuple
    regimes: tuple = (ModelKind.LINEAR_FULL, ModelKind.LINEAR_ZERO)

    def __post_init__(self):
        fields = set(self.base.as_dict()) - {"delta"}
        if self.axis != "custom" and self.axis not in fields:
            raise DomainError(f"unknown sweep axis {self.axis!r}; use one of {sorted(fields)} or 'custom'")
        if not self.regimes:
            raise DomainError("a sweep needs at least one regime")
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "regimes", tuple(ModelKind(r) for r in self.regimes))
        for v in self.values:
            overrides = v if self.axis == "custom" else {self.axis: v}
            if not all(math.isfinite(float(x)) for x in overrides.values()):
                raise DomainError(f"sweep value {v!r} is not finite")

    def params_for(self, value) -> ModelParams:
        return self.base.replace(**(value if self.axis == "custom" else {self.axis: value}))


@dataclass
class TableRow:
    scenario: str
    regime: ModelKind
    axis: str
    value: object
    h_e: float | None = None
    psi_e: float | None = None
    gamma_e: float | None = None
    mu_e: float | None = None
    lambda_e: float | None = None
    g_e: float | None = None
    f_e: float | None = None
    U1: float | None = None
    U0: float | None = None
    U_e: float | None = None
    consistent: bool = False
    error: str = ""

    def cell(self, column: str):
        return getattr(self, column)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["regime"] = self.regime.value
        return out


def _label(regime: ModelKind) -> str:
    return {ModelKind.LINEAR_FULL: "Full", ModelKind.LINEAR_ZERO: "Zero",
            ModelKind.CONCAVE: "Concave", ModelKind.BENCHMARK: "Benchmark"}[regime]


def _consistency(params: ModelParams, regime: ModelKind, eq) -> bool:
    if regime is ModelKind.LINEAR_FULL:
        return eq.consistent
    if regime is ModelKind.CONCAVE:
        return eq.consistent
    return validate_params(params).overall and eq.in_bounds


def evaluate_row(params: ModelParams, regime: ModelKind, axis: str, value,
                 scenario: str | None = None, columns=None) -> TableRow:
    """One table row: equilibrium of ``regime`` with the utility columns filled.

    ``U1`` and ``U0`` are the full- and zero-fertilizer steady-state
    utilities at the same parameters; ``U_e`` is the regime's own.
    """
    regime = ModelKind(regime)
    row = TableRow(scenario or _label(regime), regime, axis, value)
    columns = LAYOUT[regime] if columns is None else columns
    try:
        eq = equilibrium(params, regime)
    except (InfeasibleError, DomainError, ArithmeticError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    values = {"h_e": eq.h_e, "psi_e": eq.psi_e, "gamma_e": eq.gamma_e, "mu_e": eq.mu_e,
              "lambda_e": eq.lambda_e, "g_e": eq.g_e, "f_e": eq.f_e, "U_e": eq.U_e}
    if "U1" in columns:
        values["U1"] = eq.U_e if regime is ModelKind.LINEAR_FULL else linear_equilibrium(params, 1).U_e
    if "U0" in columns:
        values["U0"] = eq.U_e if regime.fixed_gamma == 0.0 else linear_equilibrium(params, 0).U_e
    for col in columns:
        setattr(row, col, float(values[col]))
    row.consistent = bool(_consistency(params, regime, eq))
    return row


def run_sweep(spec: SweepSpec) -> list[TableRow]:
    """Evaluate every (value, regime) cell in spec order; failures are recorded in the row."""
    rows = []
    for value in spec.values:
        params = spec.params_for(value)
        for regime in spec.regimes:
            rows.append(evaluate_row(params, regime, spec.axis, value))
    return rows


@dataclass(frozen=True)
class PolicyChoice:
    regime: ModelKind
    U_e: float
    consistent: bool
    flags: tuple
    candidates: dict = field(default_factory=dict)


def _regime_consistent(params: ModelParams, regime: ModelKind, eq) -> tuple[bool, list[str]]:
    flags = []
    base = validate_params(params)
    flags += [f"{regime.value}: {c.name} fails" for c in base.failed()]
    if regime is ModelKind.LINEAR_FULL:
        report = check_linear_full(params)
        flags += [f"full: {c.name} fails" for c in report.failed() if c not in base.checks]
    elif regime is ModelKind.CONCAVE:
        report = check_concave(params)
        flags += [f"concave: {c.name} fails" for c in report.failed() if c not in base.checks]
    if not eq.in_bounds:
        flags.append(f"{regime.value}: steady state outside [0, 1]")
    return not flags, flags


def best_policy(params: ModelParams) -> PolicyChoice:
    """Regime with the highest steady-state utility.

    Candidates are zero fertilizer always, plus full fertilizer and the
    concave rebate when ``beta > 0`` (and, for the latter, when a root
    exists). Ties go to the higher water quality. The winner is returned
    even if it fails its own conditions; ``consistent`` and ``flags`` say so.
    """
    candidates = {ModelKind.LINEAR_ZERO: linear_equilibrium(params, 0)}
    if params.beta > 0:
        candidates[ModelKind.LINEAR_FULL] = linear_equilibrium(params, 1)
        try:
            candidates[ModelKind.CONCAVE] = concave_equilibrium(params)
        except (InfeasibleError, DomainError):
            pass
    usable = {k: v for k, v in candidates.items() if math.isfinite(v.U_e)}
    if not usable:
        raise NoFeasiblePolicyError("no regime has a computable steady state")
    winner = max(usable, key=lambda k: (usable[k].U_e, usable[k].psi_e))
    ok, flags = _regime_consistent(params, winner, usable[winner])
    return PolicyChoice(winner, usable[winner].U_e, ok, tuple(flags), usable)


# reference tables -------------------------------------------------------------

@dataclass(frozen=True)
class GoldenRow:
    label: str
    value: float
    cells: dict

    @property
    def regime(self) -> ModelKind:
        return LABELS[self.label.lower()]


@dataclass(frozen=True)
class GoldenTable:
    table_id: str
    title: str
    axis: str
    base: ModelParams
    columns: tuple
    rows: tuple
    errata: dict = field(default_factory=dict)  # (row index, column) -> reason


def _rows(columns, data):
    out = []
    for label, value, *cells in data:
        if len(cells) != len(columns):
            raise ValueError(f"row {label} {value}: {len(cells)} cells for {len(columns)} columns")
        out.append(GoldenRow(label, value, dict(zip(columns, cells))))
    return tuple(out)


_LIN = ("h_e", "psi_e", "gamma_e", "mu_e", "lambda_e", "g_e", "f_e", "U1", "U0")
_NONLIN = ("h_e", "psi_e", "gamma_e", "mu_e", "lambda_e", "g_e", "f_e", "U0", "U_e")
_ALL = ("h_e", "psi_e", "gamma_e", "mu_e", "lambda_e", "g_e", "f_e", "U1", "U0", "U_e")
_A3 = ("h_e", "gamma_e", "mu_e", "g_e", "f_e", "U1", "U0")
_ = None

GOLDEN: dict[str, GoldenTable] = {}


def _register(table: GoldenTable):
    GOLDEN[table.table_id] = table


# T1: full vs zero fertilizer, linear rebate, pollution intensity above rebate
_register(GoldenTable(
    "T1", "Full and zero fertilizer equilibria across beta", "beta",
    ModelParams(b=0.7, d=1.0, rho=0.09, eta=0.8, beta=0.3, hbar=0.122), _LIN, _rows(_LIN, [
        ("Full", 0.3, 0.678, 0.289, 1, 0.112, 0.711, 0.566, 0.809, 0.541, _),
        ("Zero", 0.3, 0.867, _, 0, 0.112, _, 0.755, 1.078, _, 0.589),
        ("Full", 0.4, 0.719, 0.237, 1, 0.112, 0.763, 0.608, 0.868, 0.621, _),
        ("Zero", 0.4, 0.867, _, 0, 0.112, _, 0.755, 1.078, _, 0.589),
        ("Full", 0.5, 0.761, 0.185, 1, 0.112, 0.815, 0.649, 0.927, 0.708, _),
        ("Zero", 0.5, 0.867, _, 0, 0.112, _, 0.755, 1.078, _, 0.589),
    ])))

# T2: linear model, low pollution intensity
_register(GoldenTable(
    "T2", "Linear model across beta, low eta", "beta",
    ModelParams(b=0.16, d=2.0, rho=0.05, eta=0.3, beta=1.0, hbar=0.5), _LIN, _rows(_LIN, [
        ("Full", -2.076, 0.476, 1.000, 1, 0.476, 0.000, 0.000, 0.000, -0.000, _),
        ("Zero", -2.076, 0.808, _, 0, 0.476, _, 0.332, 2.076, _, 2.163),
        ("Full", -1.913, 0.500, 0.953, 1, 0.476, 0.047, 0.024, 0.149, 0.012, _),
        ("Zero", -1.913, 0.808, _, 0, 0.476, _, 0.332, 2.076, _, 2.163),
        ("Full", 0.000, 0.780, 0.401, 1, 0.476, 0.599, 0.303, 1.897, 1.967, _),
        ("Zero", 0.000, 0.808, _, 0, 0.476, _, 0.332, 2.076, _, 2.163),
        ("Full", 1.000, 0.926, 0.113, 1, 0.476, 0.887, 0.450, 2.810, 4.313, _),
        ("Zero", 1.000, 0.808, _, 0, 0.476, _, 0.332, 2.076, _, 2.163),
        ("Full", 1.391, 0.983, 0.000, 1, 0.476, 1.000, 0.507, 3.167, 5.476, _),
        ("Zero", 1.391, 0.808, _, 0, 0.476, _, 0.332, 2.076, _, 2.163),
    ])))

# T3: linear model, high pollution intensity, own base parameters
_register(GoldenTable(
    "T3", "Linear model across beta, high eta", "beta",
    ModelParams(b=0.2, d=1.5, rho=0.07, eta=0.7, beta=0.0, hbar=0.5), _LIN, _rows(_LIN, [
        ("Total", 0.000, 0.676, 0.214, 1, 0.467, 0.786, 0.209, 1.044, 0.816, _),
        ("Zero", 0.000, 0.786, _, 0, 0.467, _, 0.319, 1.593, _, 1.279),
        ("Total", 0.100, 0.689, 0.165, 1, 0.467, 0.835, 0.222, 1.109, 0.921, _),
        ("Zero", 0.100, 0.786, _, 0, 0.467, _, 0.319, 1.593, _, 1.279),
        ("Total", 0.200, 0.702, 0.116, 1, 0.467, 0.884, 0.235, 1.175, 1.033, _),
        ("Zero", 0.200, 0.786, _, 0, 0.467, _, 0.319, 1.593, _, 1.279),
        ("Total", 0.300, 0.715, 0.067, 1, 0.467, 0.933, 0.248, 1.240, 1.151, _),
        ("Zero", 0.300, 0.786, _, 0, 0.467, _, 0.319, 1.593, _, 1.279),
        ("Total", 0.400, 0.728, 0.017, 1, 0.467, 0.983, 0.261, 1.306, 1.276, _),
        ("Zero", 0.400, 0.786, _, 0, 0.467, _, 0.319, 1.593, _, 1.279),
        ("Total", 0.435, 0.733, 0.000, 1, 0.467, 1.000, 0.261, 1.328, 1.321, _),
        ("Zero", 0.435, 0.786, _, 0, 0.467, _, 0.319, 1.593, _, 1.279),
    ]),
    errata={(10, "g_e"): "printed g_e repeats the previous row; h_e - mu_e of the same row gives 0.266"}))

# T4: concave rebate across beta
_register(GoldenTable(
    "T4", "Concave model across beta", "beta",
    ModelParams(b=0.16, d=2.0, rho=0.05, eta=0.3, beta=0.1, hbar=0.5), _NONLIN, _rows(_NONLIN, [
        ("Concave", 0.000, 0.808, 0.999, 0.001, 0.476, 0.001, 0.332, 2.076, _, 2.163),
        ("Zero", 0.000, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
        ("Concave", 0.100, 0.813, 0.736, 0.397, 0.476, 0.264, 0.337, 2.108, _, 2.260),
        ("Zero", 0.100, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
        ("Concave", 0.200, 0.821, 0.577, 0.621, 0.476, 0.423, 0.345, 2.155, _, 2.410),
        ("Zero", 0.200, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
        ("Concave", 0.300, 0.830, 0.441, 0.801, 0.476, 0.559, 0.354, 2.210, _, 2.592),
        ("Zero", 0.300, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
    ])))

# T5: concave rebate across eta
_register(GoldenTable(
    "T5", "Concave model across eta", "eta",
    ModelParams(b=0.16, d=2.0, rho=0.05, eta=0.65, beta=1.0, hbar=0.5), _NONLIN, _rows(_NONLIN, [
        ("Concave", 0.650, 0.870, 0.001, 0.593, 0.476, 0.999, 0.394, 2.461, _, 3.487),
        ("Zero", 0.650, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
        ("Concave", 0.700, 0.867, 0.028, 0.540, 0.476, 0.972, 0.391, 2.444, _, 3.420),
        ("Zero", 0.700, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
        ("Concave", 0.800, 0.862, 0.074, 0.456, 0.476, 0.926, 0.386, 2.414, _, 3.308),
        ("Zero", 0.800, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
        ("Concave", 0.900, 0.858, 0.113, 0.392, 0.476, 0.887, 0.382, 2.389, _, 3.217),
        ("Zero", 0.900, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
        ("Concave", 1.000, 0.855, 0.146, 0.343, 0.476, 0.854, 0.379, 2.369, _, 3.143),
        ("Zero", 1.000, 0.808, _, 0.000, 0.476, _, 0.332, 2.076, 2.163, _),
    ])))

_A_BASE = ModelParams(b=0.3, d=0.9, rho=0.07, eta=0.4, beta=0.3, hbar=0.5)

# A1: all three regimes satisfy their conditions
_register(GoldenTable(
    "A1", "All three regimes, conditions satisfied", "beta", _A_BASE, _ALL, _rows(_ALL, [
        ("Concave", 0.2, 0.803, 0.689, 0.646, 0.467, 0.311, 0.336, 1.121, _, _, 0.642),
        ("Full", 0.2, 0.785, 0.545, 1, 0.467, 0.455, 0.317, 1.058, 0.659, _, _),
        ("No", 0.2, 0.779, _, 0, 0.467, _, 0.312, 1.040, _, 0.551, _),
        ("Concave", 0.3, 0.820, 0.586, 0.819, 0.467, 0.414, 0.353, 1.176, _, _, 0.775),
        ("Full", 0.3, 0.810, 0.508, 1, 0.467, 0.492, 0.343, 1.143, 0.768, _, _),
        ("No", 0.3, 0.779, _, 0, 0.467, _, 0.312, 1.040, _, 0.551, _),
    ]),
    errata={(0, "U_e"): "utility recomputed from the printed state and control cells of the row is 0.680"}))

# A2: concave conditions fail, linear regimes only
_register(GoldenTable(
    "A2", "Concave conditions violated", "beta", _A_BASE, _LIN, _rows(_LIN, [
        ("Full", 0.5, 0.862, 0.435, 1, 0.467, 0.565, 0.394, 1.314, 1.013, _),
        ("No", 0.5, 0.779, _, 0, 0.467, _, 0.312, 1.040, _, 0.551),
        ("Full", 0.6, 0.887, 0.398, 1, 0.467, 0.602, 0.420, 1.399, 1.148, _),
        ("No", 0.6, 0.779, _, 0, 0.467, 0.000, 0.312, 1.040, _, 0.551),
        ("Full", 0.7, 0.913, 0.361, 1, 0.467, 0.639, 0.445, 1.485, 1.292, _),
        ("No", 0.7, 0.779, _, 0, 0.467, 0.000, 0.312, 1.040, _, 0.551),
        ("Full", 0.8, 0.938, 0.325, 1, 0.467, 0.675, 0.471, 1.570, 1.444, _),
        ("No", 0.8, 0.779, _, 0, 0.467, 0.000, 0.312, 1.040, _, 0.551),
        ("Full", 0.9, 0.964, 0.288, 1, 0.467, 0.712, 0.497, 1.655, 1.604, _),
        ("No", 0.9, 0.779, _, 0, 0.467, 0.000, 0.312, 1.040, _, 0.551),
        ("Full", 1.0, 0.990, 0.251, 1, 0.467, 0.749, 0.522, 1.741, 1.773, _),
        ("No", 1.0, 0.779, _, 0, 0.467, 0.000, 0.312, 1.040, _, 0.551),
    ])))

# A3: zero-fertilizer rows with the full-fertilizer utility alongside
_register(GoldenTable(
    "A3", "Zero fertilizer rows with full-fertilizer utility", "beta", _A_BASE, _A3, _rows(_A3, [
        ("No", 0.050, 0.779, 0, 0.467, 0.312, 1.040, 0.510, 0.551),
        ("No", 0.000, 0.779, 0, 0.467, 0.312, 1.040, 0.465, 0.551),
        ("No", 0.160, 0.779, 0, 0.467, 0.312, 1.040, 0.617, 0.551),
        ("No", 0.400, 0.779, 0, 0.467, 0.312, 1.040, 0.887, 0.551),
    ])))


@dataclass(frozen=True)
class CellDiff:
    row: int
    scenario: str
    value: float
    column: str
    reference: float
    computed: float | None
    erratum: str = ""

    @property
    def deviation(self) -> float:
        return math.inf if self.computed is None else abs(self.computed - self.reference)

    @property
    def ok(self) -> bool:
        return self.deviation <= TOLERANCE


@dataclass
class Reproduction:
    table: GoldenTable
    rows: list[TableRow]
    cells: list[CellDiff]

    def failures(self, include_errata: bool = False) -> list[CellDiff]:
        return [c for c in self.cells if not c.ok and (include_errata or not c.erratum)]

    @property
    def passed(self) -> bool:
        return not self.failures()

    def max_deviation(self, include_errata: bool = False) -> dict:
        """Worst absolute deviation per column."""
        out = {}
        for c in self.cells:
            if c.erratum and not include_errata:
                continue
            out[c.column] = max(out.get(c.column, 0.0), c.deviation)
        return out

    def render(self) -> str:
        t = self.table
        lines = [f"{t.table_id}: {t.title} ({len(self.rows)} rows) {'PASS' if self.passed else 'FAIL'}"]
        for col, dev in self.max_deviation().items():
            lines.append(f"  max |dev| {col:<9s} {dev:.2e}")
        for c in self.cells:
            if c.erratum:
                lines.append(f"  erratum row {c.row} ({c.scenario} {c.value:g}) {c.column}: "
                             f"reference {c.reference:.3f}, computed {c.computed:.4f}; {c.erratum}")
        for c in self.failures():
            lines.append(f"  FAIL row {c.row} ({c.scenario} {c.value:g}) {c.column}: "
                         f"reference {c.reference:.3f}, computed {c.computed}")
        return "\n".join(lines)


def reproduce_table(table_id: str, strict: bool = True) -> Reproduction:
    """Regenerate a reference table from its parameters and diff every populated cell.

    Raises
    ------
    ReproductionError
        With ``strict``, if a cell not marked as an erratum is off by more
        than 1.5e-3.
    """
    key = table_id.upper()
    if key not in GOLDEN:
        raise KeyError(f"unknown table {table_id!r}; available: {', '.join(GOLDEN)}")
    table = GOLDEN[key]
    rows, cells = [], []
    for i, ref in enumerate(table.rows):
        present = tuple(c for c in table.columns if ref.cells[c] is not None)
        params = table.base.replace(**{table.axis: ref.value})
        row = evaluate_row(params, ref.regime, table.axis, ref.value, ref.label, present)
        rows.append(row)
        for col in present:
            cells.append(CellDiff(i, ref.label, ref.value, col, float(ref.cells[col]), row.cell(col),
                                  table.errata.get((i, col), "")))
    result = Reproduction(table, rows, cells)
    if strict and not result.passed:
        worst = max(result.failures(), key=lambda c: c.deviation)
        raise ReproductionError(
            f"{key} row {worst.row} ({worst.scenario} {table.axis}={worst.value:g}) column {worst.column}: "
            f"reference {worst.reference:.3f}, computed {worst.computed}, deviation {worst.deviation:.2e} > {TOLERANCE}")
    return result


# writers ---------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, ModelKind):
        return v.value
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: list[TableRow], target) -> None:
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])


def rows_to_json(rows: list[TableRow]) -> str:
    return json.dumps([{c: (_fmt(getattr(r, c)) if isinstance(getattr(r, c), ModelKind) else getattr(r, c))
                        for c in CSV_COLUMNS} for r in rows], indent=2)


def write_table(table_id: str, rows: list[TableRow], out_dir, fmt: str = "csv") -> str:
    """Write ``table_<id>.csv`` (or ``.json``) into ``out_dir`` and return the path."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"table_{table_id}.{fmt}")
    if fmt == "csv":
        write_csv(rows, path)
    elif fmt == "json":
        with open(path, "w") as fh:
            fh.write(rows_to_json(rows))
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    return path
