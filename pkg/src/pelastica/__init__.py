"""Gradient flow of the p-elastic energy for closed inextensible planar curves,
discretized by implicit minimization steps on the tangent-angle oscillation."""

from .energy import EnergyValue, energy_fp, grad_fp, sgnpow
from .field import (
    AngleField,
    PeriodicGrid,
    cell_slopes,
    lp_slope_norm,
    make_field,
    power_trig_moments,
    trig_moments,
)
from .flow import (
    FlowParams,
    HorizonConstants,
    StepRecord,
    Trajectory,
    check_smallness_sc,
    continue_p2,
    horizon,
    run_flow,
    sample_interpolants,
)
from .geometry import PlanarCurve, isoperimetric_witnesses, project_closure, reconstruct
from .multipliers import (
    MultiplierReport,
    delta_bound,
    det_at_double,
    det_at_matrix,
    multipliers,
    solve_multipliers,
)
from .step import SolverOptions, StepObjective, StepResult, grad_objective, minimize_step, objective

__all__ = [
    "AngleField",
    "EnergyValue",
    "FlowParams",
    "HorizonConstants",
    "MultiplierReport",
    "PeriodicGrid",
    "PlanarCurve",
    "SolverOptions",
    "StepObjective",
    "StepRecord",
    "StepResult",
    "Trajectory",
    "cell_slopes",
    "check_smallness_sc",
    "continue_p2",
    "delta_bound",
    "det_at_double",
    "det_at_matrix",
    "energy_fp",
    "grad_fp",
    "grad_objective",
    "horizon",
    "isoperimetric_witnesses",
    "lp_slope_norm",
    "make_field",
    "minimize_step",
    "multipliers",
    "objective",
    "power_trig_moments",
    "project_closure",
    "reconstruct",
    "run_flow",
    "sample_interpolants",
    "sgnpow",
    "solve_multipliers",
    "trig_moments",
]
