"""Spin-valued Wigner field W(R, P): a 2x2 complex matrix at every grid node."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import PhaseGrid, integrate_phase_space
from .model import HBAR

log = logging.getLogger(__name__)

SIGMA_Z = "sigma_z"
SIGMA_X = "sigma_x"
BASES = (SIGMA_Z, SIGMA_X)

# sigma_z <-> sigma_x eigenbasis rotation; self-inverse
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

IMAG_TOL = 1e-10
RENORM_TOL = 1e-6


def pauli_matrices(basis: str) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of (sigma_x, sigma_z) as represented in `basis`."""
    if basis == SIGMA_Z:
        return _PAULI_X.copy(), _PAULI_Z.copy()
    if basis == SIGMA_X:
        return _PAULI_Z.copy(), _PAULI_X.copy()
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


@dataclass
class SpinPhaseField:
    """W stored as a complex array of shape (2, 2, n_r, n_p)."""

    data: np.ndarray
    grid: PhaseGrid
    basis: str = SIGMA_Z

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (2, 2) + self.grid.shape:
            raise ValueError(f"field shape {self.data.shape} does not match grid {self.grid.shape}")
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")

    @property
    def W00(self) -> np.ndarray:
        return self.data[0, 0]

    @property
    def W01(self) -> np.ndarray:
        return self.data[0, 1]

    @property
    def W10(self) -> np.ndarray:
        return self.data[1, 0]

    @property
    def W11(self) -> np.ndarray:
        return self.data[1, 1]

    def trace(self) -> np.ndarray:
        return self.data[0, 0] + self.data[1, 1]

    def copy(self) -> "SpinPhaseField":
        return SpinPhaseField(self.data.copy(), self.grid, self.basis)

    def with_data(self, data: np.ndarray) -> "SpinPhaseField":
        return SpinPhaseField(data, self.grid, self.basis)

    def __add__(self, other: "SpinPhaseField") -> "SpinPhaseField":
        _check_compatible(self, other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "SpinPhaseField") -> "SpinPhaseField":
        _check_compatible(self, other)
        return self.with_data(self.data - other.data)

    def __mul__(self, a) -> "SpinPhaseField":
        return self.with_data(self.data * a)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: PhaseGrid, basis: str = SIGMA_Z) -> "SpinPhaseField":
        return cls(np.zeros((2, 2) + grid.shape, dtype=complex), grid, basis)


def _check_compatible(a: SpinPhaseField, b: SpinPhaseField) -> None:
    if a.grid != b.grid or a.basis != b.basis:
        raise ValueError("fields live on different grids or bases")


def gaussian_profile(grid: PhaseGrid, R0: float, P0: float, deltaR: float) -> np.ndarray:
    """Minimum-uncertainty Gaussian (1/pi) exp(-(R-R0)^2/(2 dR^2)) exp(-2 dR^2 (P-P0)^2)."""
    R, P = grid.mesh()
    return (np.exp(-((R - R0) ** 2) / (2.0 * deltaR**2))
            * np.exp(-2.0 * deltaR**2 * (P - P0) ** 2) / (math.pi * HBAR))


def init_coherent_excited(grid: PhaseGrid, R0: float, P0: float = 0.0,
                          deltaR: float = 0.6071) -> SpinPhaseField:
    """Spin projector diag(1, 0) times the Gaussian oscillator Wigner function."""
    if not deltaR > 0:
        raise ValueError(f"deltaR must be positive, got {deltaR}")
    margin = 4.0 * deltaR
    if not (grid.r_min + margin <= R0 <= grid.r_max - margin):
        raise ValueError(f"R0={R0} closer than {margin:.4g} to the R boundary "
                         f"[{grid.r_min}, {grid.r_max}]")
    if not (grid.p_min + margin <= P0 <= grid.p_max - margin):
        raise ValueError(f"P0={P0} closer than {margin:.4g} to the P boundary "
                         f"[{grid.p_min}, {grid.p_max}]")
    g = gaussian_profile(grid, R0, P0, deltaR)
    data = np.zeros((2, 2) + grid.shape, dtype=complex)
    data[0, 0] = g
    W = SpinPhaseField(data, grid, SIGMA_Z)
    n = norm(W)
    if abs(n - 1.0) > RENORM_TOL:
        log.warning("initial Gaussian truncated by the grid (norm %.8f); renormalizing", n)
        W.data /= n
    return W


def norm(W: SpinPhaseField) -> float:
    """Real part of the phase-space integral of the spin trace."""
    z = integrate_phase_space(W.trace(), W.grid)
    if abs(z.imag) > IMAG_TOL:
        log.debug("norm has imaginary part %.3e", z.imag)
    return float(z.real)


def hermiticity_defect(W: SpinPhaseField) -> float:
    d = W.data
    return float(np.max(np.abs(d[1, 0] - np.conj(d[0, 1])))
                 + np.max(np.abs(d[0, 0].imag)) + np.max(np.abs(d[1, 1].imag)))


def rotate_spin(data: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Nodewise U W U^dagger for a (2, 2, ...) array."""
    return np.einsum("ab,bc...,dc->ad...", U, data, U.conj())


def to_basis(W: SpinPhaseField, target: str) -> SpinPhaseField:
    if target not in BASES:
        raise ValueError(f"unknown basis {target!r}")
    if target == W.basis:
        return W.copy()
    return SpinPhaseField(rotate_spin(W.data, HADAMARD), W.grid, target)


# -- snapshot serialization -------------------------------------------------
#
# Binary layout: little-endian float64, row-major over (R, P), then the four
# spin components in order 00, 01, 10, 11, each as (real, imag).

def field_to_bytes(W: SpinPhaseField) -> bytes:
    comps = np.moveaxis(W.data.reshape(4, *W.grid.shape), 0, -1)  # (n_r, n_p, 4)
    flat = np.stack([comps.real, comps.imag], axis=-1)
    return np.ascontiguousarray(flat, dtype="<f8").tobytes()


def field_from_bytes(buf: bytes, grid: PhaseGrid, basis: str = SIGMA_Z) -> SpinPhaseField:
    flat = np.frombuffer(buf, dtype="<f8")
    expected = grid.n_r * grid.n_p * 8
    if flat.size != expected:
        raise ValueError(f"snapshot holds {flat.size} doubles, grid needs {expected}")
    arr = flat.reshape(grid.n_r, grid.n_p, 4, 2)
    comps = np.empty(arr.shape[:-1], dtype=complex)
    comps.real = arr[..., 0]
    comps.imag = arr[..., 1]
    data = np.moveaxis(comps, -1, 0).reshape(2, 2, grid.n_r, grid.n_p)
    return SpinPhaseField(data.copy(), grid, basis)


def save_field(path, W: SpinPhaseField, meta: dict | None = None) -> None:
    """Write `path` (binary snapshot) plus `path`.json with grid, basis and meta."""
    path = Path(path)
    path.write_bytes(field_to_bytes(W))
    header = {"grid": W.grid.to_dict(), "basis": W.basis, "layout": "R,P,component,reim <f8"}
    if meta:
        header.update(meta)
    path.with_name(path.name + ".json").write_text(json.dumps(header, indent=2, sort_keys=True))


def load_field(path) -> tuple[SpinPhaseField, dict]:
    path = Path(path)
    header = json.loads(path.with_name(path.name + ".json").read_text())
    grid = PhaseGrid(**header["grid"])
    return field_from_bytes(path.read_bytes(), grid, header["basis"]), header
