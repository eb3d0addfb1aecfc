"""Sparsity penalties: Lasso, SCAD, MCP and Atan.

SCAD and MCP follow Fan & Li (2001) and Zhang (2010) with the penalty
level ``f`` in the role of lambda. Atan is ``f (u + 2/pi) arctan(|x| / u)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np


class Family(str, enum.Enum):
    LASSO = "lasso"
    SCAD = "scad"
    MCP = "mcp"
    ATAN = "atan"


@dataclass(frozen=True)
class PenaltySpec:
    family: Family = Family.ATAN
    f: float = 0.0
    u: float = 0.005
    a_scad: float = 3.7
    gamma_mcp: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.f >= 0 and math.isfinite(self.f)):
            raise ValueError("f must be a finite nonnegative number")
        if not self.u > 0:
            raise ValueError("u must be positive")
        if not self.a_scad > 2:
            raise ValueError("a_scad must exceed 2")
        if not self.gamma_mcp > 0:
            raise ValueError("gamma_mcp must be positive")

    def with_f(self, f: float) -> "PenaltySpec":
        return replace(self, f=float(f))

    @property
    def atan_scale(self) -> float:
        return self.f * (self.u + 2.0 / math.pi)


def _value(spec: PenaltySpec, x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    f = spec.f
    fam = spec.family
    if fam is Family.LASSO:
        return f * a
    if fam is Family.ATAN:
        return spec.atan_scale * np.arctan(a / spec.u)
    if fam is Family.SCAD:
        c = spec.a_scad
        mid = (2.0 * c * f * a - a * a - f * f) / (2.0 * (c - 1.0))
        return np.where(a <= f, f * a, np.where(a <= c * f, mid, 0.5 * f * f * (c + 1.0)))
    g = spec.gamma_mcp
    return np.where(a <= g * f, f * a - a * a / (2.0 * g), 0.5 * g * f * f)


def _slope(spec: PenaltySpec, a: np.ndarray) -> np.ndarray:
    """Derivative of the penalty in ``|x|`` for ``|x| > 0``."""
    f = spec.f
    fam = spec.family
    if fam is Family.LASSO:
        return np.full_like(a, f)
    if fam is Family.ATAN:
        u = spec.u
        return spec.atan_scale * u / (u * u + a * a)
    if fam is Family.SCAD:
        c = spec.a_scad
        return np.where(a <= f, f, np.maximum(c * f - a, 0.0) / (c - 1.0))
    return np.maximum(f - a / spec.gamma_mcp, 0.0)


def penalty_value(spec: PenaltySpec, x):
    out = _value(spec, np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def penalty_derivative(spec: PenaltySpec, x):
    """Derivative at nonzero ``x``; zero is rejected (use the threshold rule)."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise ValueError("penalty derivative is undefined at 0")
    out = np.sign(x) * _slope(spec, np.abs(x))
    return float(out) if out.ndim == 0 else out


def penalty_total(spec: PenaltySpec, omega) -> float:
    w = np.asarray(omega, dtype=float)
    return float(np.sum(_value(spec, w[w != 0])))


def penalty_gradient(spec: PenaltySpec, omega) -> np.ndarray:
    """Penalty derivative on the nonzero coordinates, 0 elsewhere."""
    w = np.asarray(omega, dtype=float)
    out = np.zeros_like(w)
    nz = w != 0
    out[nz] = np.sign(w[nz]) * _slope(spec, np.abs(w[nz]))
    return out
