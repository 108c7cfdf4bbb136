"""One implicit time step: minimize energy + proximity penalty + frozen coupling.

Each step minimizes G(u) = F_p(u) + (1/2 tau) ||u - prev||_L2^2 + [Lam(u) -
Lam(prev)] over periodic P1 fields, where Lam couples the frozen multipliers of
the previous field to the first trig moments.  Warm-starting at prev makes
G(prev) = F_p(prev), so any accepted iterate certifies the descent inequality
G(next) <= F_p(prev) by construction; the dissipation inequality
F_p(next) + P/2 <= F_p(prev) + tau L (|l1|+|l2|)^2 is checked, not assumed.

The inner solver takes damped Newton steps on the exact (cyclic tridiagonal)
Hessian, gated by an Armijo test on G, with steepest descent as fallback.
Newton matters beyond speed: once the per-iteration decrease of G falls under
one ulp, a line search alone cannot see progress, while the Newton displacement
still moves the iterate to where the (accurately computable) gradient vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as fld
from .energy import energy_fp, grad_fp, sgnpow
from .errors import GridMismatch, NonDescent
from .field import AngleField, make_field, mass_apply


@dataclass(frozen=True)
class StepObjective:
    """Frozen data of one step: previous field, step size, and its multipliers."""

    prev: AngleField
    tau: float
    p: float
    frozen_lambda1: float
    frozen_lambda2: float
    lumped_penalty: bool = False

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")


@dataclass(frozen=True)
class SolverOptions:
    """Inner-solver knobs; grad_tol None means 1e-10*(1 + |grad at start|_inf)."""

    grad_tol: float | None = None
    max_iters: int = 10000
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float | None = None
    use_newton: bool = True

    def __post_init__(self):
        if self.grad_tol is not None and not self.grad_tol > 0.0:
            raise ValueError("grad_tol must be positive")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.initial_step is not None and not self.initial_step > 0.0:
            raise ValueError("initial_step must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class DescentCertificate:
    """Margins of the two per-step inequalities (nonnegative when satisfied)."""

    eq39_margin: float
    eq311_margin: float


@dataclass(frozen=True, eq=False)
class StepResult:
    next: AngleField
    velocity: np.ndarray = dc_field(repr=False)
    g_value: float = 0.0
    fp_prev: float = 0.0
    fp_next: float = 0.0
    penalty: float = 0.0
    h_value: float = 0.0
    iters: int = 0
    certificate: DescentCertificate = DescentCertificate(0.0, 0.0)
    flag: str = "converged"  # "converged", "stalled", or "max_iters"


def _check_grid(so: StepObjective, u: AngleField) -> None:
    if u.grid != so.prev.grid:
        raise GridMismatch("field lives on a different grid than the step's prev")


def _penalty(so: StepObjective, du: np.ndarray) -> float:
    grid = so.prev.grid
    if so.lumped_penalty:
        q = grid.cell_width_h * float(du @ du)
    else:
        q = float(du @ mass_apply(grid, du))
    return q / (2.0 * so.tau)


def _coupling(so: StepObjective, f: AngleField) -> float:
    m = fld.trig_moments(f)
    return so.frozen_lambda1 * m.IC + so.frozen_lambda2 * m.IS


def objective(so: StepObjective, u: AngleField) -> float:
    """G(u) = F_p(u) + penalty + [coupling(u) - coupling(prev)]."""
    _check_grid(so, u)
    du = u.values - so.prev.values
    return (
        energy_fp(u, so.p).fp
        + _penalty(so, du)
        + _coupling(so, u)
        - _coupling(so, so.prev)
    )


def grad_objective(so: StepObjective, u: AngleField) -> np.ndarray:
    """Exact gradient of the discrete step functional."""
    _check_grid(so, u)
    du = u.values - so.prev.values
    grid = so.prev.grid
    if so.lumped_penalty:
        gpen = (grid.cell_width_h / so.tau) * du
    else:
        gpen = mass_apply(grid, du) / so.tau
    dIC, dIS = fld.moment_gradients(u)
    return grad_fp(u, so.p) + gpen + so.frozen_lambda1 * dIC + so.frozen_lambda2 * dIS


class _RawObjective:
    """Array-level G, grad G, and Hessian with prev-dependent data precomputed."""

    def __init__(self, so: StepObjective):
        self.so = so
        self.grid = so.prev.grid
        self.prev = so.prev.values
        self.h = self.grid.cell_width_h
        self.ramp = self.grid.ramp_slope
        self.phases = self.ramp * self.grid.nodes
        self.p = so.p
        self.tau = so.tau
        self.coupling_prev = _coupling(so, so.prev)

    def _slopes(self, u):
        return (np.roll(u, -1) - u) / self.h + self.ramp

    def value(self, u: np.ndarray) -> float:
        m = self._slopes(u)
        fp = float(np.sum(self.h * np.abs(m) ** self.p)) / self.p
        du = u - self.prev
        if self.so.lumped_penalty:
            pen = self.h * float(du @ du) / (2.0 * self.tau)
        else:
            pen = float(du @ mass_apply(self.grid, du)) / (2.0 * self.tau)
        a = u + self.phases
        d = m * self.h
        mid = a + 0.5 * d
        s = fld._sinc(0.5 * d)
        ic = float(np.sum(self.h * np.cos(mid) * s))
        is_ = float(np.sum(self.h * np.sin(mid) * s))
        lam1, lam2 = self.so.frozen_lambda1, self.so.frozen_lambda2
        return fp + pen + lam1 * ic + lam2 * is_ - self.coupling_prev

    def grad(self, u: np.ndarray) -> np.ndarray:
        m = self._slopes(u)
        w = sgnpow(m, self.p)
        g = np.roll(w, 1) - w
        du = u - self.prev
        if self.so.lumped_penalty:
            g = g + (self.h / self.tau) * du
        else:
            g = g + mass_apply(self.grid, du) / self.tau
        a = u + self.phases
        d = m * self.h
        mid = a + 0.5 * d
        s = fld._sinc(0.5 * d)
        ds = fld._dsinc(0.5 * d)
        cos_m, sin_m = np.cos(mid), np.sin(mid)
        lam1, lam2 = self.so.frozen_lambda1, self.so.frozen_lambda2
        gp = lam1 * cos_m + lam2 * sin_m     # g(mid)
        gp1 = -lam1 * sin_m + lam2 * cos_m   # g'(mid)
        dA = self.h * (0.5 * gp1 * s - 0.5 * gp * ds)
        dB = self.h * (0.5 * gp1 * s + 0.5 * gp * ds)
        return g + dA + np.roll(dB, 1)

    def hessian(self, u: np.ndarray) -> np.ndarray:
        """Dense symmetric Hessian (cyclic tridiagonal) of G at u."""
        M = self.grid.cells_M
        m = self._slopes(u)
        am = np.abs(m)
        # Energy block: (p-1)|m|^(p-2)/h on each cell's [[1,-1],[-1,1]].
        w2 = np.where(am > 1e-150, (self.p - 1.0) * am ** (self.p - 2.0), 0.0) / self.h
        # Penalty block.
        if self.so.lumped_penalty:
            pen_diag, pen_off = self.h / self.tau, 0.0
        else:
            pen_diag, pen_off = 4.0 * self.h / (6.0 * self.tau), self.h / (6.0 * self.tau)
        # Coupling block: per-cell second partials of h*g(mid)*sinc(D/2) with
        # g = lam1*cos + lam2*sin (so g'' = -g).
        a = u + self.phases
        d = m * self.h
        mid = a + 0.5 * d
        s = fld._sinc(0.5 * d)
        ds = fld._dsinc(0.5 * d)
        d2s = fld._d2sinc(0.5 * d)
        lam1, lam2 = self.so.frozen_lambda1, self.so.frozen_lambda2
        gp = lam1 * np.cos(mid) + lam2 * np.sin(mid)
        gp1 = -lam1 * np.sin(mid) + lam2 * np.cos(mid)
        cAA = 0.25 * self.h * (-gp * s - 2.0 * gp1 * ds + gp * d2s)
        cBB = 0.25 * self.h * (-gp * s + 2.0 * gp1 * ds + gp * d2s)
        cAB = 0.25 * self.h * (-gp * s - gp * d2s)

        diag = w2 + np.roll(w2, 1) + pen_diag + cAA + np.roll(cBB, 1)
        off = -w2 + pen_off + cAB  # entry (j, j+1), cyclic
        H = np.zeros((M, M))
        idx = np.arange(M)
        H[idx, idx] = diag
        H[idx, (idx + 1) % M] = off
        H[(idx + 1) % M, idx] = off
        return H


def minimize_step(so: StepObjective, opts: SolverOptions = SolverOptions()) -> StepResult:
    """Minimize the step functional from a warm start at the previous field.

    Damped Newton iterations gated by an Armijo test on G; any direction that
    is not a certified descent direction falls back to steepest descent.
    Success means the sup-norm gradient met the tolerance; "stalled" means no
    representable point improves the iterate further (the warm start already
    certifies descent, so the result is still valid).
    """
    raw = _RawObjective(so)
    u = so.prev.values.copy()
    g = raw.grad(u)
    G = raw.value(u)
    fp_prev = energy_fp(so.prev, so.p).fp
    if not (math.isfinite(G) and np.all(np.isfinite(g))):
        raise NonDescent("step functional non-finite at warm start")

    g0_inf = float(np.max(np.abs(g)))
    gtol = opts.grad_tol if opts.grad_tol is not None else 1e-10 * (1.0 + g0_inf)
    # Steepest-descent step seed: the dominant curvature is the mass term h/tau.
    t_grad_seed = (
        opts.initial_step
        if opts.initial_step is not None
        else (1.0 / (1.0 / so.tau + 1.0)) / raw.h
    )

    iters = 0
    stagnant = 0
    flag = "max_iters"
    while iters < opts.max_iters:
        g_inf = float(np.max(np.abs(g)))
        if g_inf <= gtol:
            flag = "converged"
            break
        accepted = False
        for d, seed in _directions(raw, u, g, opts, t_grad_seed):
            dg = float(d @ g)
            if dg >= 0.0:
                continue
            t = seed
            t_floor = 1e-20 * seed
            while t > t_floor:
                u_try = u + t * d
                G_try = raw.value(u_try)
                if math.isfinite(G_try) and G_try <= G + opts.armijo_c * t * dg:
                    accepted = True
                    break
                t *= opts.backtrack_factor
            if accepted:
                break
        if not accepted:
            flag = "stalled"
            break
        if np.array_equal(u_try, u):
            # The accepted displacement is below float resolution: nothing
            # representable improves G any further.
            flag = "stalled"
            break
        g_new = raw.grad(u_try)
        if float(np.max(np.abs(g_new))) >= g_inf:
            stagnant += 1
            if stagnant >= 25:
                flag = "stalled"
                u, g, G = u_try, g_new, G_try
                break
        else:
            stagnant = 0
        u, g, G = u_try, g_new, G_try
        iters += 1

    if not G <= fp_prev + 1e-12 * (1.0 + abs(fp_prev)):
        raise NonDescent(
            f"no certified descent (G = {G!r} vs F_p(prev) = {fp_prev!r}) "
            f"after {iters} iterations; tau may be too large"
        )

    next_field = make_field(so.prev.grid, u)
    du = u - so.prev.values
    velocity = du / so.tau
    penalty = _penalty(so, du)
    fp_next = energy_fp(next_field, so.p).fp
    h_value = _coupling(so, next_field) - raw.coupling_prev
    lam_abs = abs(so.frozen_lambda1) + abs(so.frozen_lambda2)
    cert = DescentCertificate(
        eq39_margin=fp_prev - G,
        eq311_margin=fp_prev
        + so.tau * so.prev.grid.length_L * lam_abs * lam_abs
        - (fp_next + 0.5 * penalty),
    )
    return StepResult(
        next=next_field,
        velocity=velocity,
        g_value=G,
        fp_prev=fp_prev,
        fp_next=fp_next,
        penalty=penalty,
        h_value=h_value,
        iters=iters,
        certificate=cert,
        flag=flag,
    )


def _directions(raw: _RawObjective, u, g, opts: SolverOptions, t_grad_seed: float):
    """Candidate descent directions, best first: Newton, then steepest descent."""
    if opts.use_newton:
        H = raw.hessian(u)
        if np.all(np.isfinite(H)):
            try:
                d = np.linalg.solve(H, -g)
                if np.all(np.isfinite(d)):
                    yield d, 1.0
            except np.linalg.LinAlgError:
                pass
    yield -g, t_grad_seed
