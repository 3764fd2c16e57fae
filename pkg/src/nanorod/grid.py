"""Phase-space grid, finite-difference stencils and trapezoidal quadrature.

Fields are plain numpy arrays whose two trailing axes are (R, P); any
leading axes (e.g. the 2x2 spin block) are carried through untouched.
Stencils treat values outside the grid as zero (Dirichlet padding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MIN_POINTS = 8

# 4th-order central stencils, offsets -m..m
FIRST_DERIV = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
THIRD_DERIV = np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform rectangular grid over (R, P), endpoints included."""

    r_min: float
    r_max: float
    p_min: float
    p_max: float
    n_r: int
    n_p: int

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.n_r - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_p)

    @cached_property
    def r(self) -> np.ndarray:
        return self.r_min + np.arange(self.n_r) * self.dr

    @cached_property
    def p(self) -> np.ndarray:
        return self.p_min + np.arange(self.n_p) * self.dp

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (R, P) coordinate arrays of shape (n_r, n_p)."""
        return np.meshgrid(self.r, self.p, indexing="ij")

    @cached_property
    def weights_r(self) -> np.ndarray:
        return _trapezoid_weights(self.n_r, self.dr)

    @cached_property
    def weights_p(self) -> np.ndarray:
        return _trapezoid_weights(self.n_p, self.dp)

    @cached_property
    def weights(self) -> np.ndarray:
        """2D trapezoid weights, shape (n_r, n_p)."""
        return np.outer(self.weights_r, self.weights_p)

    def to_dict(self) -> dict:
        return {
            "r_min": self.r_min, "r_max": self.r_max,
            "p_min": self.p_min, "p_max": self.p_max,
            "n_r": self.n_r, "n_p": self.n_p,
        }


def build_grid(r_min: float, r_max: float, p_min: float, p_max: float,
               n_r: int, n_p: int) -> PhaseGrid:
    bounds = (r_min, r_max, p_min, p_max)
    if not all(math.isfinite(b) for b in bounds):
        raise ValueError(f"grid bounds must be finite, got {bounds}")
    if not (r_min < r_max and p_min < p_max):
        raise ValueError(f"grid bounds must be ordered, got {bounds}")
    if int(n_r) != n_r or int(n_p) != n_p:
        raise ValueError("grid point counts must be integers")
    if n_r < MIN_POINTS or n_p < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points per axis, got ({n_r}, {n_p})")
    return PhaseGrid(float(r_min), float(r_max), float(p_min), float(p_max), int(n_r), int(n_p))


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _apply_stencil(f: np.ndarray, axis: int, coeffs: np.ndarray, scale: float) -> np.ndarray:
    m = len(coeffs) // 2
    n = f.shape[axis]
    if n < len(coeffs):
        raise ValueError(f"axis of length {n} too short for a {len(coeffs)}-point stencil")
    pad = [(0, 0)] * f.ndim
    pad[axis] = (m, m)
    g = np.pad(f, pad)
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        sl = [slice(None)] * f.ndim
        sl[axis] = slice(k, k + n)
        out += (c / scale) * g[tuple(sl)]
    return out


def d_dr(f: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """dF/dR, 4th-order central differences with zero padding."""
    return _apply_stencil(np.asarray(f), -2, FIRST_DERIV, grid.dr)


def d_dp(f: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """dF/dP, 4th-order central differences with zero padding."""
    return _apply_stencil(np.asarray(f), -1, FIRST_DERIV, grid.dp)


def d3_dp3(f: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Third P-derivative, 7-point 4th-order stencil with zero padding."""
    return _apply_stencil(np.asarray(f), -1, THIRD_DERIV, grid.dp ** 3)


def integrate_phase_space(f: np.ndarray, grid: PhaseGrid):
    """Trapezoidal integral over the two trailing (R, P) axes."""
    f = np.asarray(f)
    if not np.all(np.isfinite(f)):
        raise ValueError("cannot integrate a non-finite field")
    return np.tensordot(f, grid.weights, axes=([-2, -1], [0, 1]))
