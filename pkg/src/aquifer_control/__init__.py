"""Optimal control of groundwater quantity and quality under fertilizer use."""

from .equilibrium import (DegenerateSpectrumError, Equilibrium, InfeasibleError, SaddleStructure,
                          benchmark_equilibrium, compare_equilibria, concave_equilibrium, equilibrium,
                          eta_response, linear_equilibrium, residual_P, spectrum)
from .feasibility import (BangBangDecision, FeasibilityReport, RegimeError, bang_bang, check_concave,
                          check_linear_full, validate_params)
from .model import (AdjointVector, ControlVector, DomainError, ModelKind, ModelParams, StateRangeWarning,
                    StateVector, aquifer_rate, hamiltonian, quality_rate, rebate, utility,
                    utility_decomposition)
from .scenario import (ReproductionError, SweepSpec, TableRow, best_policy, reproduce_table, run_sweep)
from .trajectory import (PathSpec, Trajectory, TrajectoryPoint, benchmark_path, concave_path,
                         discounted_welfare, linear_path, transversality_check)
from .verify import (OracleReport, UnstableIntegrationError, bisection_root, concavity_check, foc_check,
                     forward_integrate, run_oracle_suite)

__version__ = "0.1.0"
