"""Cash-Karp 5(4) Runge-Kutta time stepping for the method-of-lines system."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .liouvillian import FusedRhs
from .model import ModelParams
from .observables import Recorder, TimeSeries
from .state import SpinPhaseField, hermiticity_defect

log = logging.getLogger(__name__)

# Cash & Karp (1990) tableau
C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [3 / 10, -9 / 10, 6 / 5, 0.0, 0.0],
    [-11 / 54, 5 / 2, -70 / 27, 35 / 27, 0.0],
    [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096],
])
B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])
E = B5 - B4

NORM_DRIFT_ABORT = 1e-3


class IntegrationError(RuntimeError):
    """Raised when the integration can no longer be trusted.

    `series` holds the records collected up to the failure.
    """

    def __init__(self, msg: str, series: TimeSeries | None = None):
        super().__init__(msg)
        self.series = series


class NonFiniteError(IntegrationError):
    pass


@numba.njit(cache=True)
def _stage_input(y, K, a, nst, dt, out):
    # one branch per stage count keeps the inner loop vectorizable
    n = y.shape[0]
    k0, k1, k2, k3, k4 = K[0], K[1], K[2], K[3], K[4]
    a0, a1, a2, a3, a4 = a[0], a[1], a[2], a[3], a[4]
    if nst == 1:
        for m in range(n):
            out[m] = y[m] + dt * (a0 * k0[m])
    elif nst == 2:
        for m in range(n):
            out[m] = y[m] + dt * (a0 * k0[m] + a1 * k1[m])
    elif nst == 3:
        for m in range(n):
            out[m] = y[m] + dt * ((a0 * k0[m] + a1 * k1[m]) + a2 * k2[m])
    elif nst == 4:
        for m in range(n):
            out[m] = y[m] + dt * (((a0 * k0[m] + a1 * k1[m]) + a2 * k2[m]) + a3 * k3[m])
    else:
        for m in range(n):
            out[m] = y[m] + dt * ((((a0 * k0[m] + a1 * k1[m]) + a2 * k2[m]) + a3 * k3[m])
                                  + a4 * k4[m])


@numba.njit(cache=True)
def _finish(y, K, b, e, dt, out):
    """5th-order update into `out`; returns (max |embedded difference|, first bad index)."""
    n = y.shape[0]
    k0, k1, k2, k3, k4, k5 = K[0], K[1], K[2], K[3], K[4], K[5]
    b0, b1, b2, b3, b4, b5 = b[0], b[1], b[2], b[3], b[4], b[5]
    e0, e1, e2, e3, e4, e5 = e[0], e[1], e[2], e[3], e[4], e[5]
    err = 0.0
    chk = 0.0
    for m in range(n):
        acc = ((((b0 * k0[m] + b1 * k1[m]) + b2 * k2[m]) + b3 * k3[m]) + b4 * k4[m]) + b5 * k5[m]
        dif = ((((e0 * k0[m] + e1 * k1[m]) + e2 * k2[m]) + e3 * k3[m]) + e4 * k4[m]) + e5 * k5[m]
        out[m] = y[m] + dt * acc
        err = max(err, abs(dt * dif))
        chk += 0.0 * out[m]  # NaN once any entry is non-finite
    bad = -1
    if not math.isfinite(chk):
        for m in range(n):
            if not math.isfinite(out[m]):
                bad = m
                break
    return err, bad


class CashKarp:
    """Six-stage embedded RK5(4) stepper with preallocated stage storage.

    `f(t, y)` may return a new array or accept an `out=` keyword. Complex
    states are stepped through their float64 view, so the error estimate is
    the max over real and imaginary parts.
    """

    def __init__(self, f: Callable, like: np.ndarray, accepts_out: bool = False):
        self.f = f
        self.accepts_out = accepts_out
        self.shape = like.shape
        self.dtype = like.dtype
        n = np.asarray(like).view(np.float64).size if like.dtype == complex else like.size
        self._K = np.empty((6, n))
        self._tmp = np.empty(n)
        self._tmp_shaped = self._as_state(self._tmp)
        self._out = [np.empty(n), np.empty(n)]
        self._flip = 0

    def _as_state(self, flat: np.ndarray) -> np.ndarray:
        if self.dtype == complex:
            return flat.view(complex).reshape(self.shape)
        return flat.reshape(self.shape)

    def _flat(self, y: np.ndarray) -> np.ndarray:
        y = np.ascontiguousarray(y)
        if self.dtype == complex:
            return y.view(np.float64).ravel()
        return y.ravel()

    def _eval(self, j: int, t: float, y: np.ndarray) -> None:
        if self.accepts_out:
            self.f(t, y, out=self._as_state(self._K[j]))
        else:
            self._K[j] = self._flat(np.asarray(self.f(t, y), dtype=self.dtype))

    def step(self, y: np.ndarray, t: float, dt: float,
             reuse: bool = False) -> tuple[np.ndarray, float]:
        """Advance y by dt.

        With `reuse`, the result lives in one of two internal buffers that
        alternate between calls, so it stays valid only until the next step
        after the one that consumes it.
        """
        yf = self._flat(y)
        self._eval(0, t, y)
        for s in range(1, 6):
            _stage_input(yf, self._K, A[s], s, dt, self._tmp)
            self._eval(s, t + C[s] * dt, self._tmp_shaped)
        if reuse:
            out = self._out[self._flip]
            if np.shares_memory(out, yf):
                self._flip ^= 1
                out = self._out[self._flip]
            self._flip ^= 1
        else:
            out = np.empty_like(yf)
        err, bad = _finish(yf, self._K, B5, E, dt, out)
        if bad >= 0:
            raise NonFiniteError(f"non-finite value in a Runge-Kutta stage at flat index {bad}")
        return self._as_state(out), err


def rkck_step(y, t: float, dt: float, rhs: Callable) -> tuple[np.ndarray, float]:
    """One Cash-Karp step of y' = rhs(t, y); returns (5th-order solution, error estimate)."""
    y = np.asarray(y)
    if y.dtype != complex:
        y = y.astype(np.float64)
    scalar = y.ndim == 0
    stepper = CashKarp(rhs if not scalar else (lambda t, v: np.atleast_1d(rhs(t, v[0]))),
                       np.atleast_1d(y))
    out, err = stepper.step(np.atleast_1d(y), t, dt)
    return (out[0] if scalar else out), err


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-4
    t_end: float = 10.0
    mode: str = "fixed"
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    max_steps: int = 10_000_000
    observe_every: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"integrator mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        if self.mode == "adaptive" and not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("adaptive stepping needs positive tolerances")
        if self.observe_every < 1:
            raise ValueError("observe_every must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def n_fixed_steps(self) -> int:
        return max(0, math.ceil(self.t_end / self.dt - 1e-9))

    def to_dict(self) -> dict:
        return asdict(self)


def config_hash(*parts: dict) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Checkpoint:
    step: int
    t: float
    field: SpinPhaseField
    series: TimeSeries
    dt: float = 0.0  # next trial step (adaptive mode)
    extra: dict = field(default_factory=dict)


def evolve(W0: SpinPhaseField, params: ModelParams, config: IntegratorConfig,
           observers: Sequence[Callable] = (), *,
           recorder: Recorder | None = None,
           checkpoint_every: int = 0,
           on_checkpoint: Callable[[Checkpoint], None] | None = None,
           resume: Checkpoint | None = None,
           hermitian: bool | None = None) -> TimeSeries:
    """Integrate W from t=0 to config.t_end.

    Observers are called as ``obs(t, W)`` with a read-only snapshot every
    `observe_every` accepted steps (and at the final time). Fixed-step runs
    are deterministic, and resuming from a checkpoint reproduces the
    uninterrupted run bitwise.

    An exactly Hermitian initial field is advanced through its four
    independent real channels (`hermitian=None` decides automatically); the
    result is bitwise the same as the full eight-channel integration.
    """
    start = resume.field if resume is not None else W0
    bad = np.argwhere(~np.isfinite(start.data))
    if len(bad):
        a, b, i, j = (int(x) for x in bad[0])
        raise NonFiniteError(f"non-finite initial field: component W{a}{b}, node (i={i}, j={j})")
    if hermitian is None:
        hermitian = hermiticity_defect(start) == 0.0
    elif hermitian and hermiticity_defect(start) != 0.0:
        raise ValueError("hermitian stepping requested for a non-Hermitian field")
    f = FusedRhs(W0.grid, params, W0.basis, hermitian=hermitian)
    stepper = CashKarp(f, np.empty(f.shape), accepts_out=True)
    rec = recorder if recorder is not None else Recorder(params)

    def snapshot(y):
        W = W0.with_data(f.unpack(y))
        W.data.flags.writeable = False
        return W

    def observe(t, y):
        W = snapshot(y)
        rec(t, W)
        for obs in observers:
            obs(t, W)
        drift = abs(rec.series.norm[-1] - rec.series.norm[0])
        if drift > NORM_DRIFT_ABORT:
            raise IntegrationError(
                f"norm drift {drift:.3e} at t={t:.6g} exceeds {NORM_DRIFT_ABORT:g}; "
                "integration no longer trustworthy", rec.series)

    if resume is None:
        step, t = 0, 0.0
        y = f.pack(W0.data)
        trial_dt = config.dt
        observe(0.0, y)
    else:
        step, t = resume.step, resume.t
        y = f.pack(resume.field.data)
        rec.series = resume.series
        trial_dt = resume.dt or config.dt

    try:
        if config.mode == "fixed":
            n = config.n_fixed_steps()
            if n > config.max_steps:
                raise IntegrationError(f"{n} steps needed, max_steps={config.max_steps}", rec.series)
            while step < n:
                t_prev = step * config.dt
                step += 1
                t = min(step * config.dt, config.t_end) if step < n else config.t_end
                y, _ = stepper.step(y, t_prev, t - t_prev, reuse=True)
                if step % config.observe_every == 0 or step == n:
                    observe(t, y)
                if checkpoint_every and on_checkpoint and step % checkpoint_every == 0 and step < n:
                    on_checkpoint(Checkpoint(step, t, snapshot(y), rec.series.copy()))
        else:
            accepted = 0
            while t < config.t_end * (1 - 1e-14):
                if step >= config.max_steps:
                    raise IntegrationError(f"max_steps={config.max_steps} exceeded at t={t:.6g}",
                                           rec.series)
                h = min(trial_dt, config.t_end - t)
                y_new, err = stepper.step(y, t, h)
                scale = config.abs_tol + config.rel_tol * float(np.max(np.abs(y)))
                ratio = err / scale
                step += 1
                if ratio <= 1.0:
                    t += h
                    y = y_new
                    accepted += 1
                    grow = 5.0 if ratio == 0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
                    trial_dt = h * grow
                    final = t >= config.t_end * (1 - 1e-14)
                    if accepted % config.observe_every == 0 or final:
                        observe(t, y)
                    if checkpoint_every and on_checkpoint and accepted % checkpoint_every == 0:
                        on_checkpoint(Checkpoint(step, t, snapshot(y), rec.series.copy(), trial_dt))
                else:
                    trial_dt = h * max(0.1, 0.9 * ratio ** -0.25)
                    if trial_dt < 1e-14 * max(1.0, t):
                        raise IntegrationError(f"step size underflow at t={t:.6g}", rec.series)
    except NonFiniteError as exc:
        node = _describe_index(f, int(str(exc).rsplit(" ", 1)[-1]))
        raise NonFiniteError(f"non-finite field near t={t:.6g}: {node}", rec.series) from None
    return rec.series


def _describe_index(f: FusedRhs, flat: int) -> str:
    stored, k = divmod(flat, f.shape[1])
    comp = int(f._outs[stored])
    row, col = divmod(k, f.L)
    a, rem = divmod(comp, 4)
    b, part = divmod(rem, 2)
    i, j = row - 2, col - 3
    R = f.grid.r_min + i * f.grid.dr
    P = f.grid.p_min + j * f.grid.dp
    return (f"component W{a}{b} ({'real' if part == 0 else 'imag'}), node (i={i}, j={j}) "
            f"at R={R:.4g}, P={P:.4g}")
