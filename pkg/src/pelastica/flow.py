"""Time loop: horizon constants, step sequencing, monitor ledger, interpolants.

Every run carries the a-priori bounds that the scheme provably satisfies on the
certified horizon: an energy cap, a multiplier cap, a cumulative dissipation
cap, and an L2 growth cap.  They are re-checked after every step and violating
them is a hard error, because for this scheme they are theorems.  The certified
horizon itself is extremely conservative; runs beyond it are allowed with an
explicit override and keep the same monitors.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .energy import energy_fp, grad_fp
from .errors import (
    ClosureViolatedAtStart,
    HorizonExceeded,
    MonitorViolation,
    NonDescent,
    NotP2,
    OutOfRange,
    StepFailed,
    StrideTooCoarse,
)
from .field import (
    AngleField,
    cell_slopes,
    l2_inner,
    l2_norm,
    lp_slope_norm,
    make_field,
    mass_solve,
    trig_moments,
)
from .multipliers import forcing, multipliers
from .step import SolverOptions, StepObjective, minimize_step


@dataclass(frozen=True)
class HorizonConstants:
    c_star: float
    c_one: float
    t_max: float


def c_one_from_c_star(c_star: float, L: float, p: float) -> float:
    return 8.0 * L * c_star * (4.0 / (L * L) + (8.0 * c_star / math.pi) ** (2.0 * p / (p - 1.0)))


def t_max_from_c_star(c_star: float, L: float, p: float) -> float:
    c1 = c_one_from_c_star(c_star, L, p)
    return c_star / (8.0 * p * L * c1 * c1)


def horizon(u0: AngleField, p: float) -> HorizonConstants:
    """Certified-horizon constants computed from the initial slope norm."""
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    c_star = 2.0 * lp_slope_norm(u0, p) ** p
    L = u0.grid.length_L
    c_one = c_one_from_c_star(c_star, L, p)
    return HorizonConstants(c_star=c_star, c_one=c_one, t_max=t_max_from_c_star(c_star, L, p))


@dataclass(frozen=True)
class FlowParams:
    p: float
    n_steps: int
    horizon_T: float | None = None  # None: use the certified t_max
    solver: SolverOptions = SolverOptions()
    continuation_rounds: int = 1
    override_horizon: bool = False
    closure_tol: float = 1e-8
    store_stride: int = 1

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.horizon_T is not None and not self.horizon_T > 0.0:
            raise ValueError("horizon_T must be positive")
        if self.continuation_rounds < 1:
            raise ValueError("continuation_rounds must be >= 1")
        if self.store_stride < 1:
            raise ValueError("store_stride must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    index: int
    t: float
    fp: float
    penalty: float
    lambda1: float
    lambda2: float
    det_at: float
    delta: float
    velocity_l2: float
    velocity_h1: float
    closure_residual: float
    l2_norm_u: float
    eq39_margin: float
    eq311_margin: float
    cumulative_velocity_sq: float


@dataclass(frozen=True)
class LedgerCaps:
    """Right-hand sides of the proved per-run bounds."""

    energy_cap: float       # on p * fp
    multiplier_cap: float   # on |lambda_i|, equals c_one
    dissipation_cap: float  # on sum tau * ||V_i||_L2^2
    l2_cap: float           # on ||u_i||_L2

    # Proved with relative slack 1e-9: these are exact statements about the
    # discrete scheme, only solver tolerance and rounding may intrude.
    REL_SLACK = 1e-9


@dataclass(eq=False)
class Trajectory:
    p: float
    tau: float
    n_total: int
    horizon: HorizonConstants
    caps: LedgerCaps
    initial: AngleField
    records: list[StepRecord]
    stored: dict[int, AngleField]
    stride: int
    final: AngleField
    seams: list[tuple[int, float, float]] = dc_field(default_factory=list)

    @property
    def t_final(self) -> float:
        return self.tau * self.n_total


def _ledger_caps(u0: AngleField, p: float, T: float, hc: HorizonConstants) -> LedgerCaps:
    fp0 = energy_fp(u0, p).fp
    L = u0.grid.length_L
    budget = fp0 + T * L * 4.0 * hc.c_one ** 2
    return LedgerCaps(
        energy_cap=p * budget,
        multiplier_cap=hc.c_one,
        dissipation_cap=4.0 * budget,
        l2_cap=l2_norm(u0.grid, u0.values) + math.sqrt(4.0 * T * budget),
    )


def _check_ledgers(rec: StepRecord, p: float, caps: LedgerCaps) -> None:
    s = 1.0 + LedgerCaps.REL_SLACK
    if not p * rec.fp <= caps.energy_cap * s:
        raise MonitorViolation("eq38", rec.index, f"p*fp = {p * rec.fp!r} > {caps.energy_cap!r}")
    if not max(abs(rec.lambda1), abs(rec.lambda2)) <= caps.multiplier_cap * s:
        raise MonitorViolation("lemconti", rec.index)
    if not rec.cumulative_velocity_sq <= caps.dissipation_cap * s:
        raise MonitorViolation("eq37", rec.index)
    if not rec.l2_norm_u <= caps.l2_cap * s:
        raise MonitorViolation("eq38L2", rec.index)


def closure_residual(f: AngleField) -> float:
    """Norm of the closure defect (integral of the unit tangent)."""
    m = trig_moments(f)
    return math.hypot(m.IC, m.IS)


def run_flow(u0: AngleField, params: FlowParams) -> Trajectory:
    """Iterate the implicit steps, freezing multipliers at each predecessor.

    Hard-fails on a violated ledger bound; per-step descent certificates are
    stored in the records.
    """
    return _run_flow(u0, params, params.closure_tol)


def _run_flow(u0: AngleField, params: FlowParams, closure_tol: float) -> Trajectory:
    p = params.p
    grid = u0.grid
    res0 = closure_residual(u0)
    if res0 > closure_tol:
        raise ClosureViolatedAtStart(
            f"initial closure residual {res0:.3e} exceeds tolerance {closure_tol:.3e}"
        )
    hc = horizon(u0, p)
    T = params.horizon_T if params.horizon_T is not None else hc.t_max
    if T > hc.t_max * (1.0 + 1e-12) and not params.override_horizon:
        raise HorizonExceeded(
            f"requested span {T:.3e} exceeds certified horizon {hc.t_max:.3e}; "
            "set override_horizon to run anyway"
        )
    n = params.n_steps
    tau = T / n
    caps = _ledger_caps(u0, p, T, hc)

    h = grid.cell_width_h
    records: list[StepRecord] = []
    stored: dict[int, AngleField] = {0: u0}
    u = u0
    cum_v2 = 0.0
    for i in range(1, n + 1):
        rep = multipliers(u, p)
        so = StepObjective(
            prev=u, tau=tau, p=p, frozen_lambda1=rep.lambda1, frozen_lambda2=rep.lambda2
        )
        try:
            res = minimize_step(so, params.solver)
        except NonDescent as exc:
            raise StepFailed(f"step {i} failed: {exc}") from exc
        v = res.velocity
        v_l2 = l2_norm(grid, v)
        dv = (np.roll(v, -1) - v) / h
        v_h1 = math.sqrt(float(np.sum(h * dv * dv)))
        cum_v2 += tau * v_l2 * v_l2
        rec = StepRecord(
            index=i,
            t=i * tau,
            fp=res.fp_next,
            penalty=res.penalty,
            lambda1=rep.lambda1,
            lambda2=rep.lambda2,
            det_at=rep.det_at,
            delta=rep.delta,
            velocity_l2=v_l2,
            velocity_h1=v_h1,
            closure_residual=closure_residual(res.next),
            l2_norm_u=l2_norm(grid, res.next.values),
            eq39_margin=res.certificate.eq39_margin,
            eq311_margin=res.certificate.eq311_margin,
            cumulative_velocity_sq=cum_v2,
        )
        _check_ledgers(rec, p, caps)
        records.append(rec)
        u = res.next
        if i % params.store_stride == 0 or i == n:
            stored[i] = u

    return Trajectory(
        p=p,
        tau=tau,
        n_total=n,
        horizon=hc,
        caps=caps,
        initial=u0,
        records=records,
        stored=stored,
        stride=params.store_stride,
        final=u,
    )


def continue_p2(u0: AngleField, params: FlowParams) -> Trajectory:
    """Chain runs for p = 2 by restarting from each terminal field.

    The horizon constants are recomputed from each round's initial field; the
    requested span (explicit horizon_T, or the certified t_max when absent) is
    reused every round.  Energy must not increase across any seam beyond the
    accumulated per-step dissipation slack.
    """
    if params.p != 2.0:
        raise NotP2(f"continuation requires p = 2, got p = {params.p}")
    fp0 = energy_fp(u0, 2.0).fp
    L = u0.grid.length_L

    combined: Trajectory | None = None
    u = u0
    slack_total = 0.0
    for r in range(params.continuation_rounds):
        # Round 0 enforces the caller's closure tolerance; later rounds start
        # from whatever the flow produced, with closure drift monitored.
        tol = params.closure_tol if r == 0 else math.inf
        traj = _run_flow(u, params, tol)
        slack_total += sum(
            traj.tau * L * (abs(rec.lambda1) + abs(rec.lambda2)) ** 2 for rec in traj.records
        )
        fp_terminal = traj.records[-1].fp if traj.records else fp0
        if not fp_terminal <= fp0 + slack_total + 1e-10 * (1.0 + fp0):
            raise MonitorViolation(
                "seam", (r + 1) * params.n_steps, f"fp {fp_terminal!r} above initial {fp0!r}"
            )
        if combined is None:
            combined = traj
        else:
            di = combined.n_total
            dt = combined.t_final
            dc = combined.records[-1].cumulative_velocity_sq if combined.records else 0.0
            for rec in traj.records:
                combined.records.append(
                    dataclasses.replace(
                        rec,
                        index=rec.index + di,
                        t=rec.t + dt,
                        cumulative_velocity_sq=rec.cumulative_velocity_sq + dc,
                    )
                )
            for idx, f in traj.stored.items():
                if idx > 0:
                    combined.stored[idx + di] = f
            combined.n_total += traj.n_total
            combined.final = traj.final
        combined.seams.append((combined.n_total, combined.t_final, fp_terminal))
        u = traj.final
    assert combined is not None
    return combined


@dataclass(frozen=True, eq=False)
class InterpolantSample:
    u_lin: AngleField
    u_const: AngleField
    U_const: AngleField
    v: np.ndarray
    lam_const: tuple[float, float]
    lam_lin: tuple[float, float]


def sample_interpolants(traj: Trajectory, t: float) -> InterpolantSample:
    """Evaluate the five step interpolants at time t.

    u_lin is linear in time between consecutive fields; u_const / U_const are
    the right/left piecewise-constant variants; v is the step velocity; the
    multiplier pair comes in frozen (constant) and linear-in-time forms.
    """
    if traj.stride != 1:
        raise StrideTooCoarse("interpolant sampling requires store_stride=1")
    if not 0.0 <= t <= traj.t_final * (1.0 + 1e-12):
        raise OutOfRange(f"t = {t} outside [0, {traj.t_final}]")
    tau = traj.tau
    n = traj.n_total
    if t == 0.0:
        u0 = traj.stored[0]
        lam = (traj.records[0].lambda1, traj.records[0].lambda2)
        v = (traj.stored[1].values - u0.values) / tau
        return InterpolantSample(u_lin=u0, u_const=u0, U_const=u0, v=v, lam_const=lam, lam_lin=lam)
    i = min(max(int(math.ceil(t / tau - 1e-12)), 1), n)
    u_prev = traj.stored[i - 1]
    u_i = traj.stored[i]
    v = (u_i.values - u_prev.values) / tau
    frac = t - (i - 1) * tau
    u_lin = make_field(traj.initial.grid, u_prev.values + frac * v)
    lam_lo = (traj.records[i - 1].lambda1, traj.records[i - 1].lambda2)
    if i < n:
        lam_hi = (traj.records[i].lambda1, traj.records[i].lambda2)
    else:
        rep = multipliers(u_i, traj.p)
        lam_hi = (rep.lambda1, rep.lambda2)
    w = frac / tau
    lam_lin = (lam_lo[0] + w * (lam_hi[0] - lam_lo[0]), lam_lo[1] + w * (lam_hi[1] - lam_lo[1]))
    return InterpolantSample(
        u_lin=u_lin, u_const=u_i, U_const=u_prev, v=v, lam_const=lam_lo, lam_lin=lam_lin
    )


@dataclass(frozen=True, eq=False)
class SmallnessReport:
    passes: bool
    c_star_ok: bool
    slope_floor_ok: bool
    v0_ok: bool
    v0_norm_sq: float
    v0: np.ndarray
    sc_delta: float


def check_smallness_sc(u0: AngleField, p: float, sc_delta: float = 0.5) -> SmallnessReport:
    """Near-circle smallness clauses used by the p > 2 velocity control.

    Three clauses: the doubled slope norm stays within twice the ramp's, the
    discrete initial velocity is small in L2, and every cell slope keeps at
    least half the ramp's magnitude (in the p-1 power).  The constant behind
    the velocity clause is not explicit, so that clause is reported against
    the configurable threshold sc_delta.
    """
    if not p >= 2.0:
        raise ValueError(f"smallness check requires p >= 2, got {p}")
    grid = u0.grid
    L = grid.length_L
    ramp = grid.ramp_slope

    c_star = 2.0 * lp_slope_norm(u0, p) ** p
    c_star_ok = c_star <= 4.0 * L * ramp ** p

    m = cell_slopes(u0)
    slope_floor_ok = bool(np.min(np.abs(m) ** (p - 1.0)) >= 0.5 * ramp ** (p - 1.0))

    # Discrete initial velocity: weak p-Laplacian of theta (mass-inverted
    # negative energy gradient) plus the multiplier forcing at the nodes.
    rep = multipliers(u0, p)
    v0 = mass_solve(grid, -grad_fp(u0, p)) + forcing(u0, rep.lambda1, rep.lambda2)
    v0_norm_sq = l2_inner(grid, v0, v0)
    v0_ok = v0_norm_sq <= sc_delta

    return SmallnessReport(
        passes=c_star_ok and slope_floor_ok and v0_ok,
        c_star_ok=c_star_ok,
        slope_floor_ok=slope_floor_ok,
        v0_ok=v0_ok,
        v0_norm_sq=v0_norm_sq,
        v0=v0,
        sc_delta=sc_delta,
    )
