"""Bending energy of the angle field, its exact discrete gradient, and the
winding lower bound.

The energy is (1/p) * integral of |theta_s|^p; for P1 fields the integrand is
piecewise constant so the value and its gradient with respect to the nodal
values are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import TWO_PI, AngleField, cell_slopes


@dataclass(frozen=True)
class EnergyValue:
    fp: float
    fenchel_floor: float
    margin: float


def sgnpow(x, p: float):
    """|x|^(p-2) * x with the convention that it vanishes at x = 0."""
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    safe = np.where(ax == 0.0, 1.0, ax)
    out = np.where(ax == 0.0, 0.0, safe ** (p - 2.0) * x)
    if out.ndim == 0:
        return float(out)
    return out


def fenchel_floor(grid, p: float) -> float:
    """Lower bound (1/p)(2 pi eta)^p / L^(p-1), attained by the round circle."""
    return (TWO_PI * grid.winding_eta) ** p / (p * grid.length_L ** (p - 1.0))


def energy_fp(f: AngleField, p: float) -> EnergyValue:
    """Exact discrete energy (1/p) * sum_j h |m_j|^p and its winding floor."""
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    m = cell_slopes(f)
    h = f.grid.cell_width_h
    fp = float(np.sum(h * np.abs(m) ** p) / p)
    floor = fenchel_floor(f.grid, p)
    return EnergyValue(fp=fp, fenchel_floor=floor, margin=fp - floor)


def grad_fp(f: AngleField, p: float) -> np.ndarray:
    """Exact gradient of the discrete energy with respect to the nodal values.

    Component j is sgnpow(m_{j-1}) - sgnpow(m_j); the h factors cancel because
    each nodal value enters two adjacent slopes with weight 1/h.
    """
    w = sgnpow(cell_slopes(f), p)
    return np.roll(w, 1) - w
