"""Observables of the PWRDM and the time-series container that records them."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import PhaseGrid
from .model import ModelParams, potential
from .state import IMAG_TOL, SpinPhaseField, hermiticity_defect, norm, pauli_matrices

log = logging.getLogger(__name__)

FRAME_WIDTH = 3
COLUMNS = ("t", "sigma_z", "prob_left", "norm", "energy", "hermiticity_defect", "boundary_mass")


@dataclass
class PositionProbability:
    values: np.ndarray
    grid: PhaseGrid
    t: float | None = None

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def total(self) -> float:
        return float(self.grid.weights_r @ self.values)


def _real(z, what: str) -> float:
    if abs(z.imag) > IMAG_TOL:
        log.debug("%s has imaginary part %.3e", what, z.imag)
    return float(z.real)


def _spin_trace(W: SpinPhaseField, M: np.ndarray) -> np.ndarray:
    """Nodewise Tr[M W] for a constant 2x2 matrix M."""
    d = W.data
    return M[0, 0] * d[0, 0] + M[0, 1] * d[1, 0] + M[1, 0] * d[0, 1] + M[1, 1] * d[1, 1]


def sigma_z_expectation(W: SpinPhaseField) -> float:
    _, Z = pauli_matrices(W.basis)
    z = np.sum(W.grid.weights * _spin_trace(W, Z))
    return _real(z, "<sigma_z>")


def sigma_x_expectation(W: SpinPhaseField) -> float:
    X, _ = pauli_matrices(W.basis)
    return _real(np.sum(W.grid.weights * _spin_trace(W, X)), "<sigma_x>")


def _left_right_weights(grid: PhaseGrid) -> tuple[np.ndarray, np.ndarray]:
    r = grid.r
    if not r[0] < 0 < r[-1]:
        raise ValueError("grid must straddle R = 0 for a left/right split")
    share = np.where(r < 0, 1.0, np.where(r > 0, 0.0, 0.5))
    wl = grid.weights_r * share
    return wl, grid.weights_r - wl


def position_probability(W: SpinPhaseField, t: float | None = None) -> PositionProbability:
    """Prob(R): P-marginal of the spin trace."""
    z = W.trace() @ W.grid.weights_p
    if np.max(np.abs(z.imag), initial=0.0) > IMAG_TOL:
        log.debug("Prob(R) has imaginary part %.3e", np.max(np.abs(z.imag)))
    return PositionProbability(np.ascontiguousarray(z.real), W.grid, t)


def prob_left(W: SpinPhaseField) -> float:
    """Probability of R < 0; a node at exactly R = 0 counts half."""
    wl, _ = _left_right_weights(W.grid)
    return float(wl @ position_probability(W).values)


def prob_right(W: SpinPhaseField) -> float:
    _, wr = _left_right_weights(W.grid)
    return float(wr @ position_probability(W).values)


def time_averaged_position_probability(snapshots) -> PositionProbability:
    snaps = list(snapshots)
    if not snaps:
        raise ValueError("no Prob(R) snapshots to average")
    grid = snaps[0].grid
    if any(s.grid != grid for s in snaps):
        raise ValueError("snapshots live on different grids")
    return PositionProbability(np.mean([s.values for s in snaps], axis=0), grid)


def asymmetry(p: PositionProbability) -> float:
    """|P(R<0) - P(R>0)| / total."""
    wl, wr = _left_right_weights(p.grid)
    left, right = float(wl @ p.values), float(wr @ p.values)
    total = left + right
    if total == 0:
        raise ValueError("cannot measure asymmetry of a zero profile")
    return abs(left - right) / total


def energy_expectation(W: SpinPhaseField, params: ModelParams) -> float:
    """<H_W> with H_W = (P^2/2 + V) 1 - omega sigma_x - c R sigma_z."""
    X, Z = pauli_matrices(W.basis)
    R, P = W.grid.mesh()
    scalar = 0.5 * P**2 + potential(R, params)
    dens = scalar * W.trace() - params.omega * _spin_trace(W, X) - params.c * R * _spin_trace(W, Z)
    return _real(np.sum(W.grid.weights * dens), "energy")


def frame_mask(grid: PhaseGrid, width: int = FRAME_WIDTH) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[:width, :] = mask[-width:, :] = True
    mask[:, :width] = mask[:, -width:] = True
    return mask


def boundary_mass(W: SpinPhaseField) -> float:
    """Weight of |Tr W| on the outermost 3-node frame, relative to the norm."""
    dens = np.abs(W.trace()) * W.grid.weights
    total = norm(W)
    if total == 0:
        return 0.0
    return float(np.sum(dens[frame_mask(W.grid)]) / abs(total))


# -- time series ---------------------------------------------------------------

@dataclass
class TimeSeries:
    t: list = field(default_factory=list)
    sigma_z: list = field(default_factory=list)
    prob_left: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    hermiticity_defect: list = field(default_factory=list)
    boundary_mass: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # PositionProbability, for time averages
    named_snapshots: list = field(default_factory=list)  # PositionProbability at requested times
    source: str = "pde"
    extras: dict = field(default_factory=dict)  # optional per-record columns, e.g. error bars

    def append(self, **rec) -> None:
        if self.t and not rec["t"] > self.t[-1]:
            raise ValueError(f"time series must be strictly increasing ({rec['t']} after {self.t[-1]})")
        for name in COLUMNS:
            getattr(self, name).append(float(rec[name]))

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def copy(self) -> "TimeSeries":
        out = TimeSeries(source=self.source)
        for name in COLUMNS:
            setattr(out, name, list(getattr(self, name)))
        out.snapshots = list(self.snapshots)
        out.named_snapshots = list(self.named_snapshots)
        out.extras = {k: list(v) for k, v in self.extras.items()}
        return out

    def identical(self, other: "TimeSeries") -> bool:
        """Bitwise equality of all recorded columns."""
        return all(np.array_equal(self.column(c), other.column(c)) for c in COLUMNS)

    def time_averaged_prob(self) -> PositionProbability:
        return time_averaged_position_probability(self.snapshots)

    def to_csv(self, path, provenance: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS + (("source",) if provenance else ()))
            for row in zip(*(getattr(self, c) for c in COLUMNS)):
                w.writerow([format(v, ".17g") for v in row] + ([self.source] if provenance else []))

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        ts = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                ts.append(**{c: float(row[c]) for c in COLUMNS})
                ts.source = row.get("source", ts.source) or ts.source
        return ts


def write_prob_csv(path, p: PositionProbability) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("R", "value"))
        for r, v in zip(p.r, p.values):
            w.writerow((format(r, ".17g"), format(v, ".17g")))


def rabi_envelope(t, sigma_z, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Peak-to-peak amplitude of <sigma_z> in a sliding window of the given length.

    Returns (window centres, amplitudes) for every window fully inside the series.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(sigma_z, dtype=float)
    centres, amps = [], []
    lo = 0
    for hi in range(len(t)):
        while t[hi] - t[lo] > window:
            lo += 1
        if t[hi] - t[0] >= window * (1 - 1e-9) - 1e-12:
            seg = s[lo:hi + 1]
            centres.append(0.5 * (t[lo] + t[hi]))
            amps.append(seg.max() - seg.min())
    return np.asarray(centres), np.asarray(amps)


def envelope_amplitude(t, sigma_z, t_lo: float, t_hi: float, window: float) -> float:
    """Mean sliding-window peak-to-peak amplitude over windows lying in [t_lo, t_hi]."""
    t = np.asarray(t, dtype=float)
    sel = (t >= t_lo - 1e-12) & (t <= t_hi + 1e-12)
    c, a = rabi_envelope(t[sel], np.asarray(sigma_z, dtype=float)[sel], window)
    if len(a) == 0:
        raise ValueError(f"interval [{t_lo}, {t_hi}] shorter than one window ({window})")
    return float(np.mean(a))


class Recorder:
    """Standard observer: appends one TimeSeries record per call.

    Position-probability snapshots are kept every `snapshot_every` calls (for
    time averages) and at each time in `snapshot_times` (matched within
    `time_tol`).
    """

    def __init__(self, params: ModelParams, snapshot_every: int = 0,
                 snapshot_times=(), time_tol: float = 1e-9):
        self.params = params
        self.series = TimeSeries()
        self.snapshot_every = snapshot_every
        self.snapshot_times = sorted(snapshot_times)
        self.time_tol = time_tol

    def __call__(self, t: float, W: SpinPhaseField) -> None:
        n = norm(W)
        self.series.append(
            t=t,
            sigma_z=sigma_z_expectation(W),
            prob_left=prob_left(W),
            norm=n,
            energy=energy_expectation(W, self.params),
            hermiticity_defect=hermiticity_defect(W),
            boundary_mass=boundary_mass(W),
        )
        index = len(self.series) - 1
        if self.snapshot_every and index % self.snapshot_every == 0:
            self.series.snapshots.append(position_probability(W, t))
        for ts in self.snapshot_times:
            if abs(ts - t) <= self.time_tol:
                self.series.named_snapshots.append(position_probability(W, t))


def save_series(path, series: TimeSeries, provenance: bool = False) -> Path:
    path = Path(path)
    series.to_csv(path, provenance=provenance)
    return path
