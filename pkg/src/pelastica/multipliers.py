"""Closure-constraint multipliers, the trig Gram matrix, and their proved bounds.

The two scalars (lambda1, lambda2) enforce the closed-curve constraint along
the flow.  They are quotients of exact trig integrals by det A_T, where A_T is
the 2x2 Gram matrix of the normal components; det A_T is bounded below by
delta^2/4 with delta an explicit function of the Lp slope norm, so the
quotients never degenerate and carry an a-priori bound used by the time loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import field as fld
from .errors import DeterminantCollapse
from .field import AngleField, lp_slope_norm, power_trig_moments, trig_moments


@dataclass(frozen=True)
class DeltaBound:
    delta: float
    det_floor: float


@dataclass(frozen=True)
class MultiplierReport:
    lambda1: float
    lambda2: float
    det_at: float
    delta: float
    det_floor: float
    lambda_bound: float
    JC: float
    JS: float
    IC2: float
    IS2: float
    ISC: float


def det_at_matrix(f: AngleField) -> float:
    """det A_T = IS2*IC2 - ISC^2 from exact moments."""
    m = trig_moments(f)
    return m.IS2 * m.IC2 - m.ISC * m.ISC


def det_at_double(f: AngleField, subsamples: int) -> float:
    """Quadrature estimate of det A_T via its double-integral form.

    det A_T equals one half of the double integral of sin^2(theta(sigma) -
    theta(s)) over [0,L]^2.  Evaluated with a tensor-product composite Simpson
    rule at `subsamples` panels per cell; serves as an independent oracle for
    det_at_matrix.
    """
    if subsamples < 2:
        raise ValueError("need at least 2 subsamples per cell")
    if subsamples % 2 != 0:
        raise ValueError("Simpson rule needs an even panel count per cell")
    theta, w = _simpson_samples(f, subsamples)
    diff = theta[:, None] - theta[None, :]
    s = np.sin(diff)
    return 0.5 * float(w @ (s * s) @ w)


def _simpson_samples(f: AngleField, subsamples: int):
    """Global sample angles and Simpson weights, `subsamples` panels per cell."""
    grid = f.grid
    M, h = grid.cells_M, grid.cell_width_h
    a = f.node_angles()
    d = fld.cell_slopes(f) * h
    t = np.arange(subsamples + 1) / subsamples
    # theta on cell j at fraction t is a_j + d_j * t; flatten cell by cell.
    theta_cells = a[:, None] + d[:, None] * t[None, :]
    theta = np.concatenate([theta_cells[:, :-1].ravel(), [a[0] + 2.0 * math.pi * grid.winding_eta]])
    w_cell = np.ones(subsamples + 1)
    w_cell[1:-1:2] = 4.0
    w_cell[2:-1:2] = 2.0
    w_cell *= h / (3.0 * subsamples)
    w = np.zeros(M * subsamples + 1)
    for j in range(M):
        w[j * subsamples : (j + 1) * subsamples + 1] += w_cell
    return theta, w


def delta_from_norm(L: float, p: float, slope_norm: float) -> float:
    """The determinant-floor scale: min(L/2, (pi / (8 ||theta_s||_p))^(p/(p-1)))."""
    return min(0.5 * L, (math.pi / (8.0 * slope_norm)) ** (p / (p - 1.0)))


def delta_bound(f: AngleField, p: float) -> DeltaBound:
    """delta and the proved determinant floor delta^2/4 for this field."""
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    delta = delta_from_norm(f.grid.length_L, p, lp_slope_norm(f, p))
    return DeltaBound(delta=delta, det_floor=0.25 * delta * delta)


def multiplier_bound(L: float, p: float, slope_norm: float) -> float:
    """A-priori bound 8 L n^p (4/L^2 + (8n/pi)^(2p/(p-1))) with n = ||theta_s||_p."""
    return 8.0 * L * slope_norm ** p * (
        4.0 / (L * L) + (8.0 * slope_norm / math.pi) ** (2.0 * p / (p - 1.0))
    )


def _det_guard(det: float, delta: float, L: float) -> None:
    """Abort when det A_T falls below half its proven floor (integration bug)."""
    floor = max(delta * delta / 8.0, 1e-14 * L * L)
    if not det > floor:
        raise DeterminantCollapse(
            f"det A_T = {det:.6e} below guard {floor:.6e} (delta = {delta:.6e})"
        )


def multipliers(f: AngleField, p: float) -> MultiplierReport:
    """Both multipliers with the determinant, its floor, and the proved bound.

    lambda1 = (JC*IC2 + JS*ISC)/det, lambda2 = (JC*ISC + JS*IS2)/det, where
    JC, JS are the p-th power trig moments.  Equivalent to solving
    A_T lambda = (JC, JS); see solve_multipliers.
    """
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    m = trig_moments(f)
    pm = power_trig_moments(f, p)
    det = m.IS2 * m.IC2 - m.ISC * m.ISC
    norm = lp_slope_norm(f, p)
    delta = delta_from_norm(f.grid.length_L, p, norm)
    _det_guard(det, delta, f.grid.length_L)
    lam1 = (pm.JC * m.IC2 + pm.JS * m.ISC) / det
    lam2 = (pm.JC * m.ISC + pm.JS * m.IS2) / det
    return MultiplierReport(
        lambda1=lam1,
        lambda2=lam2,
        det_at=det,
        delta=delta,
        det_floor=0.25 * delta * delta,
        lambda_bound=multiplier_bound(f.grid.length_L, p, norm),
        JC=pm.JC,
        JS=pm.JS,
        IC2=m.IC2,
        IS2=m.IS2,
        ISC=m.ISC,
    )


def solve_multipliers(f: AngleField, p: float):
    """Second route: invert the Gram matrix A_T = [[IS2, -ISC], [-ISC, IC2]].

    Algebraically identical to the closed-form quotients in `multipliers`
    (the adjugate flips the off-diagonal signs); kept as an independent
    cross-check exercised by the tests.
    """
    m = trig_moments(f)
    pm = power_trig_moments(f, p)
    A = np.array([[m.IS2, -m.ISC], [-m.ISC, m.IC2]])
    lam = np.linalg.solve(A, np.array([pm.JC, pm.JS]))
    return float(lam[0]), float(lam[1])


def forcing(f: AngleField, lambda1: float, lambda2: float) -> np.ndarray:
    """Nodal values of lambda1*sin(theta) - lambda2*cos(theta)."""
    theta = f.node_angles()
    return lambda1 * np.sin(theta) - lambda2 * np.cos(theta)
