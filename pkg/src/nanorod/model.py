"""Dimensionless spin-oscillator Hamiltonian and parameter conversions.

    H_W(R, P) = -omega*sigma_x - c*R*sigma_z + P**2/2 + b2/2*R**2 + b4/4*R**4

with hbar = 1 throughout the dynamics.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

HBAR = 1.0


class Mode(str, Enum):
    """Which Moyal terms are kept: n=1 only, or n=1 and n=3."""

    CLASSICAL = "classical"
    QUANTUM = "quantum"


@dataclass(frozen=True)
class ModelParams:
    omega: float
    c: float
    b2: float
    b4: float
    mode: Mode = Mode.QUANTUM
    hbar: float = HBAR

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.omega < 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.b4 < 0:
            raise ValueError(f"b4 must be >= 0 for a confining potential, got {self.b4}")
        if self.hbar != HBAR:
            raise ValueError("dimensionless dynamics require hbar = 1")
        for name in ("omega", "c", "b2", "b4"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def quantum(self) -> bool:
        return self.mode is Mode.QUANTUM

    def with_mode(self, mode) -> "ModelParams":
        return replace(self, mode=Mode(mode))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass(frozen=True)
class DimensionfulParams:
    """SI-unit counterparts; b2_prime may be negative under compression."""

    omega0: float
    mass: float
    b2_prime: float
    b4_prime: float
    c_prime: float
    omega_prime: float
    hbar_si: float = 1.054571817e-34


def potential(R, params: ModelParams):
    R2 = np.square(np.asarray(R, dtype=float))  # through R^2 so V is exactly even
    return 0.5 * params.b2 * R2 + 0.25 * params.b4 * (R2 * R2)


def potential_derivs(R, params: ModelParams):
    """Return (V', V''') at R."""
    R = np.asarray(R, dtype=float)
    return R * (params.b2 + params.b4 * np.square(R)), 6.0 * params.b4 * R


def well_minima(params: ModelParams) -> tuple[float, float]:
    if params.b2 >= 0:
        raise ValueError(f"b2 = {params.b2} >= 0 gives a single well; no buckled pair")
    if params.b4 <= 0:
        raise ValueError("b4 must be positive for a double well")
    r = math.sqrt(-params.b2 / params.b4)
    return -r, r


def adiabatic_surfaces(R, params: ModelParams):
    """Eigenvalues V(R) -/+ sqrt(omega^2 + c^2 R^2) of the spin-dependent Hamiltonian."""
    R = np.asarray(R, dtype=float)
    v = potential(R, params)
    gap = np.sqrt(params.omega**2 + (params.c * R) ** 2)
    return v - gap, v + gap


def strain_to_b2(strain: float, critical_strain: float) -> float:
    if not critical_strain > 0:
        raise ValueError(f"critical strain must be positive, got {critical_strain}")
    return (critical_strain - strain) / critical_strain


def _check_scales(omega0: float, mass: float, hbar_si: float) -> None:
    for name, v in (("omega0", omega0), ("mass", mass), ("hbar_si", hbar_si)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def nondimensionalize(d: DimensionfulParams, mode=Mode.QUANTUM) -> ModelParams:
    w0, m, hb = d.omega0, d.mass, d.hbar_si
    _check_scales(w0, m, hb)
    return ModelParams(
        omega=d.omega_prime / w0,
        c=d.c_prime / (w0 * math.sqrt(m * w0 * hb)),
        b2=d.b2_prime / (m * w0**2),
        b4=hb * d.b4_prime / (m**2 * w0**3),
        mode=mode,
    )


def dimensionalize(params: ModelParams, omega0: float, mass: float,
                   hbar_si: float = 1.054571817e-34) -> DimensionfulParams:
    """Inverse of :func:`nondimensionalize` for the given scales."""
    _check_scales(omega0, mass, hbar_si)
    return DimensionfulParams(
        omega0=omega0,
        mass=mass,
        b2_prime=params.b2 * mass * omega0**2,
        b4_prime=params.b4 * mass**2 * omega0**3 / hbar_si,
        c_prime=params.c * omega0 * math.sqrt(mass * omega0 * hbar_si),
        omega_prime=params.omega * omega0,
        hbar_si=hbar_si,
    )


def position_scale(omega0: float, mass: float, hbar_si: float = 1.054571817e-34) -> float:
    """Length in metres of one dimensionless unit of R."""
    return math.sqrt(hbar_si / (mass * omega0))
