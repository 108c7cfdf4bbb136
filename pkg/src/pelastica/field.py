"""Periodic P1 discretization of tangent-angle fields with exact cell integrals.

A field stores the oscillation u at M uniformly spaced nodes on [0, L); adding
the winding ramp phi(s) = 2*pi*eta*s/L gives the tangent angle theta = u + phi.
Because u is continuous piecewise linear, theta has a constant slope on every
cell, so every integral this module computes (trig moments, p-th power moments,
Lp slope norms) has a closed form per cell.  No quadrature error enters the
scheme through this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

TWO_PI = 2.0 * math.pi

# Below this turning angle per cell the sin(x)/x forms switch to a Taylor
# expansion (4th order; truncation ~x^6/5040 is far below float noise).
SLOPE_EPSILON = 1e-7


def _sinc(x: np.ndarray) -> np.ndarray:
    """sin(x)/x, stable at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SLOPE_EPSILON
    safe = np.where(small, 1.0, x)
    out = np.sin(safe) / safe
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, out)


def _dsinc(x: np.ndarray) -> np.ndarray:
    """Derivative of sin(x)/x, stable at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SLOPE_EPSILON
    safe = np.where(small, 1.0, x)
    out = (safe * np.cos(safe) - np.sin(safe)) / (safe * safe)
    x2 = x * x
    return np.where(small, -x / 3.0 + x * x2 / 30.0, out)


def _d2sinc(x: np.ndarray) -> np.ndarray:
    """Second derivative of sin(x)/x, stable at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SLOPE_EPSILON
    safe = np.where(small, 1.0, x)
    out = (2.0 * np.sin(safe) - 2.0 * safe * np.cos(safe) - safe * safe * np.sin(safe)) / (
        safe * safe * safe
    )
    x2 = x * x
    return np.where(small, -1.0 / 3.0 + x2 / 10.0 - x2 * x2 / 168.0, out)


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform partition of [0, L] into M cells carrying winding number eta."""

    length_L: float
    cells_M: int
    winding_eta: int = 1

    def __post_init__(self):
        if not (self.length_L > 0.0 and math.isfinite(self.length_L)):
            raise ValueError(f"length_L must be a positive finite real, got {self.length_L}")
        if self.cells_M < 4:
            raise ValueError(f"cells_M must be >= 4, got {self.cells_M}")
        if self.winding_eta < 1:
            raise ValueError(f"winding_eta must be >= 1, got {self.winding_eta}")

    @property
    def cell_width_h(self) -> float:
        return self.length_L / self.cells_M

    @property
    def ramp_slope(self) -> float:
        """Slope of the winding ramp phi, i.e. 2*pi*eta/L."""
        return TWO_PI * self.winding_eta / self.length_L

    @property
    def nodes(self) -> np.ndarray:
        """Arc-length positions s_j = j*h of the M nodes."""
        return np.arange(self.cells_M) * self.cell_width_h


@dataclass(frozen=True, eq=False)
class AngleField:
    """Nodal values of the periodic oscillation u on a PeriodicGrid.

    Node M is identified with node 0; all arrays have length M.  Instances are
    immutable (the value array is frozen) and safe to share between threads.
    """

    grid: PeriodicGrid
    values: np.ndarray = dc_field(repr=False)

    def node_angles(self) -> np.ndarray:
        """theta_j = u_j + phi(s_j) at the nodes (not wrapped mod 2*pi)."""
        return self.values + self.grid.ramp_slope * self.grid.nodes

    def shifted(self, alpha: float) -> "AngleField":
        """The field u + alpha (rigid rotation of the underlying curve)."""
        return make_field(self.grid, self.values + alpha)


def make_field(grid: PeriodicGrid, samples) -> AngleField:
    """Build an AngleField from exactly M finite nodal samples."""
    values = np.asarray(samples, dtype=float)
    if values.shape != (grid.cells_M,):
        raise ValueError(
            f"expected {grid.cells_M} samples, got array of shape {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("samples contain non-finite entries")
    values = values.copy()
    values.setflags(write=False)
    return AngleField(grid=grid, values=values)


def cell_slopes(f: AngleField) -> np.ndarray:
    """Constant slope of theta on each cell: (u_{j+1} - u_j)/h + 2*pi*eta/L."""
    u = f.values
    du = np.roll(u, -1) - u
    return du / f.grid.cell_width_h + f.grid.ramp_slope


@dataclass(frozen=True)
class TrigMoments:
    """First and second trigonometric moments of theta over [0, L]."""

    IC: float   # integral of cos(theta)
    IS: float   # integral of sin(theta)
    IC2: float  # integral of cos^2(theta)
    IS2: float  # integral of sin^2(theta)
    ISC: float  # integral of sin(theta)*cos(theta)


@dataclass(frozen=True)
class PowerMoments:
    """p-th power slope moments: integrals of |theta_s|^p cos(theta) and sin."""

    JC: float
    JS: float


def _cell_angles(f: AngleField):
    """Per-cell (start angle A, turning D = m*h); theta is A + D*t/h on the cell."""
    a = f.node_angles()
    d = cell_slopes(f) * f.grid.cell_width_h
    return a, d


def cell_trig_integrals(f: AngleField):
    """Exact per-cell integrals of cos(theta) and sin(theta).

    On a cell with start angle A and turning D the integral of cos is
    h*cos(A + D/2)*sinc(D/2); this midpoint form is exact and free of the
    cancellation that the naive [sin]^B_A / m form suffers for small D.
    """
    a, d = _cell_angles(f)
    h = f.grid.cell_width_h
    mid = a + 0.5 * d
    s = _sinc(0.5 * d)
    return h * np.cos(mid) * s, h * np.sin(mid) * s


def trig_moments(f: AngleField) -> TrigMoments:
    """All five trigonometric moments, each integrated exactly per cell."""
    a, d = _cell_angles(f)
    h = f.grid.cell_width_h
    cells_cos, cells_sin = cell_trig_integrals(f)
    # Squared moments via the double angle: cos^2 = (1 + cos 2theta)/2 etc.
    mid2 = 2.0 * (a + 0.5 * d)
    s2 = _sinc(d)
    int_cos2t = float(np.sum(h * np.cos(mid2) * s2))
    int_sin2t = float(np.sum(h * np.sin(mid2) * s2))
    L = f.grid.length_L
    return TrigMoments(
        IC=float(np.sum(cells_cos)),
        IS=float(np.sum(cells_sin)),
        IC2=0.5 * (L + int_cos2t),
        IS2=0.5 * (L - int_cos2t),
        ISC=0.5 * int_sin2t,
    )


def power_trig_moments(f: AngleField, p: float) -> PowerMoments:
    """Integrals of |theta_s|^p cos(theta) and |theta_s|^p sin(theta).

    |theta_s| is constant on each cell, so the cell value is |m|^p times the
    exact trig cell integral.
    """
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    m = cell_slopes(f)
    w = np.abs(m) ** p
    cells_cos, cells_sin = cell_trig_integrals(f)
    return PowerMoments(JC=float(np.sum(w * cells_cos)), JS=float(np.sum(w * cells_sin)))


def lp_slope_norm(f: AngleField, p: float) -> float:
    """||theta_s||_{L^p}, exact for piecewise-constant slopes."""
    if not p >= 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    m = cell_slopes(f)
    h = f.grid.cell_width_h
    return float(np.sum(h * np.abs(m) ** p) ** (1.0 / p))


def moment_gradients(f: AngleField):
    """Nodal derivatives of (IC, IS) with respect to the field values.

    Returns (dIC, dIS), each length M, with dIC[j] = d(IC)/d(u_j).  Used for
    the exact gradient of the frozen-multiplier coupling term and for the
    closure-projection Jacobian.
    """
    a, d = _cell_angles(f)
    h = f.grid.cell_width_h
    mid = a + 0.5 * d
    s = _sinc(0.5 * d)
    ds = _dsinc(0.5 * d)
    cos_m, sin_m = np.cos(mid), np.sin(mid)
    # Cell integral of cos is h*cos(mid)*sinc(D/2) with mid = (A+B)/2, D = B-A,
    # where A depends on u_j and B on u_{j+1}.
    dcos_dA = h * (-0.5 * sin_m * s - 0.5 * cos_m * ds)
    dcos_dB = h * (-0.5 * sin_m * s + 0.5 * cos_m * ds)
    dsin_dA = h * (0.5 * cos_m * s - 0.5 * sin_m * ds)
    dsin_dB = h * (0.5 * cos_m * s + 0.5 * sin_m * ds)
    dIC = dcos_dA + np.roll(dcos_dB, 1)
    dIS = dsin_dA + np.roll(dsin_dB, 1)
    return dIC, dIS


def mass_apply(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    """Apply the periodic P1 mass matrix: (Mv)_j = h/6 (v_{j-1} + 4 v_j + v_{j+1})."""
    h = grid.cell_width_h
    return (h / 6.0) * (np.roll(v, 1) + 4.0 * v + np.roll(v, -1))


def l2_inner(grid: PeriodicGrid, v: np.ndarray, w: np.ndarray) -> float:
    """Exact L2 inner product of two periodic P1 functions from nodal values."""
    return float(v @ mass_apply(grid, w))


def l2_norm(grid: PeriodicGrid, v: np.ndarray) -> float:
    """Exact L2 norm of a periodic P1 function."""
    return math.sqrt(max(l2_inner(grid, v, v), 0.0))


def mass_solve(grid: PeriodicGrid, b: np.ndarray) -> np.ndarray:
    """Solve M x = b for the periodic P1 mass matrix (circulant, via FFT)."""
    h = grid.cell_width_h
    M = grid.cells_M
    # Eigenvalues of the circulant stencil h/6*[4, 1, 0, ..., 0, 1].
    k = np.arange(M)
    eig = (h / 6.0) * (4.0 + 2.0 * np.cos(TWO_PI * k / M))
    x = np.fft.ifft(np.fft.fft(b) / eig)
    return np.real(x)
