"""Brute-force references for cross-checking the phase-space solver.

Two independent routes are provided:

* a truncated Fock-basis von Neumann integrator for the full quantum
  dynamics of spin (x) oscillator, with a quadrature Wigner transform back
  to phase space;
* an ensemble of classical trajectories for the decoupled (c = 0) limit.

Both emit the same TimeSeries records as the PDE path.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .grid import PhaseGrid
from .integrator import CashKarp, IntegrationError
from .model import ModelParams, potential, potential_derivs
from .observables import TimeSeries
from .state import SIGMA_Z, SpinPhaseField

log = logging.getLogger(__name__)

MIN_LEVELS = 8
CAPTURE_TOL = 1e-6
TRACE_DRIFT_ABORT = 1e-6
EDGE_LEVELS = 2

# stability margin for Cash-Karp on a purely oscillatory spectrum
DT_SAFETY = 0.4


@dataclass(frozen=True)
class FockSpec:
    """Oscillator truncation; the joint space is spin (x) Fock, dimension 2 * n_levels."""

    n_levels: int = 60

    def __post_init__(self):
        if int(self.n_levels) != self.n_levels or self.n_levels < MIN_LEVELS:
            raise ValueError(f"n_levels must be an integer >= {MIN_LEVELS}, got {self.n_levels}")

    @property
    def dim(self) -> int:
        return 2 * self.n_levels


@dataclass
class DensityMatrix:
    """Joint density matrix, indexed (spin, level) -> spin * n_levels + level.

    When the state is pure, `psi` holds a state vector with rho = psi psi^dagger.
    """

    rho: np.ndarray
    spec: FockSpec
    psi: np.ndarray | None = None

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def purity(self) -> float:
        return float(np.vdot(self.rho, self.rho).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0])

    def spin_block(self, a: int, b: int) -> np.ndarray:
        n = self.spec.n_levels
        return self.rho[a * n:(a + 1) * n, b * n:(b + 1) * n]


# -- operators -----------------------------------------------------------------

def ladder(n: int) -> np.ndarray:
    """Annihilation operator on n levels."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1)


def _position_momentum(n: int) -> tuple[np.ndarray, np.ndarray]:
    a = ladder(n)
    R = (a + a.T) / math.sqrt(2.0)
    P = 1j * (a.T - a) / math.sqrt(2.0)
    return R, P


@dataclass
class FockOperators:
    R: np.ndarray
    P: np.ndarray
    spec: FockSpec

    def oscillator_hamiltonian(self, params: ModelParams) -> np.ndarray:
        """P^2/2 + b2/2 R^2 + b4/4 R^4, powers taken before truncation."""
        n = self.spec.n_levels
        Rb, Pb = _position_momentum(n + 4)
        R2 = Rb @ Rb
        P2 = (Pb @ Pb).real
        R4 = R2 @ R2
        h = 0.5 * P2 + 0.5 * params.b2 * R2 + 0.25 * params.b4 * R4
        return h[:n, :n]

    def hamiltonian(self, params: ModelParams) -> np.ndarray:
        """-omega sigma_x (x) 1 - c sigma_z (x) R + 1 (x) h_osc."""
        n = self.spec.n_levels
        one = np.eye(n)
        sx = np.array([[0.0, 1.0], [1.0, 0.0]])
        sz = np.array([[1.0, 0.0], [0.0, -1.0]])
        H = (-params.omega * np.kron(sx, one) - params.c * np.kron(sz, self.R.real)
             + np.kron(np.eye(2), self.oscillator_hamiltonian(params)))
        return H.astype(complex)


def build_operators(spec: FockSpec, params: ModelParams | None = None):
    """Return (R, P, H); H is None when no parameters are given."""
    R, P = _position_momentum(spec.n_levels)
    ops = FockOperators(R.astype(complex), P, spec)
    H = ops.hamiltonian(params) if params is not None else None
    return ops.R, ops.P, H


# -- Hermite functions and position-space quantities -----------------------------

def hermite_functions(n: int, x: np.ndarray) -> np.ndarray:
    """Normalized oscillator eigenfunctions phi_k(x), shape (n, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n, x.size))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * x**2)
    if n > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, n - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def _quadrature_axis(n: int, pad: float = 6.0, step: float = 0.02) -> np.ndarray:
    """Fine uniform axis covering the classically allowed region of level n."""
    edge = math.sqrt(2.0 * n + 1.0) + pad
    m = int(math.ceil(2 * edge / step)) + 1
    return np.linspace(-edge, edge, m)


def left_projector(n: int) -> np.ndarray:
    """Matrix of the projector onto R < 0 in the Fock basis.

    Entries are integrals of phi_j phi_k over the half line, evaluated by
    trapezoidal quadrature on a fine grid where the integrand is smooth and
    decays as a Gaussian.
    """
    x = _quadrature_axis(n)
    x = x[x <= 0.0]
    if x[-1] != 0.0:
        x = np.append(x, 0.0)
    phi = hermite_functions(n, x)
    w = np.full(x.size, x[1] - x[0])
    w[0] *= 0.5
    w[-1] = 0.5 * (x[-1] - x[-2])
    w[-2] = 0.5 * (x[-2] - x[-3]) + 0.5 * (x[-1] - x[-2])
    return (phi * w) @ phi.T


# -- initial state -----------------------------------------------------------------

def oracle_initial_state(R0: float, P0: float, deltaR: float, spec: FockSpec) -> DensityMatrix:
    """Gaussian wave packet with the spin in the excited sigma_z state."""
    if not deltaR > 0:
        raise ValueError(f"deltaR must be positive, got {deltaR}")
    n = spec.n_levels
    x = _quadrature_axis(n, pad=abs(R0) + 12.0 * deltaR)
    dx = x[1] - x[0]
    psi_x = np.exp(-((x - R0) ** 2) / (4.0 * deltaR**2) + 1j * P0 * x)
    psi_x /= math.sqrt(np.sum(np.abs(psi_x) ** 2) * dx)
    coeffs = hermite_functions(n, x) @ psi_x * dx
    captured = float(np.sum(np.abs(coeffs) ** 2))
    if captured < 1.0 - CAPTURE_TOL:
        raise ValueError(f"{n} levels capture only {captured:.8f} of the initial wave packet; "
                         "increase n_levels")
    coeffs /= math.sqrt(captured)
    psi = np.zeros(spec.dim, dtype=complex)
    psi[:n] = coeffs
    return DensityMatrix(np.outer(psi, psi.conj()), spec, psi)


# -- evolution ---------------------------------------------------------------------

def spectral_bounds(H: np.ndarray) -> tuple[float, float]:
    """Gershgorin interval containing the spectrum of a Hermitian H."""
    d = np.diag(H).real
    radius = np.sum(np.abs(H), axis=1) - np.abs(np.diag(H))
    return float(np.min(d - radius)), float(np.max(d + radius))


def stable_dt(H: np.ndarray, shift: float = 0.0, safety: float = DT_SAFETY) -> float:
    """Step size keeping every mode of -i (H - shift) inside the Cash-Karp sweet spot."""
    lo, hi = spectral_bounds(H)
    return safety / max(abs(hi - shift), abs(lo - shift), 1e-300)


@dataclass
class _FockObservables:
    sz: np.ndarray
    left: np.ndarray
    H: np.ndarray
    edge: np.ndarray

    @classmethod
    def build(cls, spec: FockSpec, H: np.ndarray) -> "_FockObservables":
        n = spec.n_levels
        sz = np.kron(np.diag([1.0, -1.0]), np.eye(n))
        left = np.kron(np.eye(2), left_projector(n))
        edge_level = np.zeros(n)
        edge_level[-EDGE_LEVELS:] = 1.0
        edge = np.kron(np.ones(2), edge_level)
        return cls(sz, left, H, edge)

    def record(self, t: float, rho: np.ndarray) -> dict:
        # Tr(A rho) for Hermitian A as a Frobenius product
        def ev(A):
            return float(np.vdot(A, rho).real)

        tr = float(np.trace(rho).real)
        return dict(
            t=t,
            sigma_z=ev(self.sz),
            prob_left=ev(self.left),
            norm=tr,
            energy=ev(self.H),
            hermiticity_defect=float(np.max(np.abs(rho - rho.conj().T))),
            boundary_mass=float(np.sum(self.edge * np.diag(rho).real)) / tr,
        )


def oracle_evolve(rho0: DensityMatrix, params: ModelParams, dt: float | None, t_end: float,
                  observe_dt: float = 0.1, method: str = "auto",
                  keep_states: bool = False) -> TimeSeries:
    """Integrate d rho/dt = -i [H, rho] with the Cash-Karp stepper.

    A pure initial state is propagated as its state vector (`method="auto"`
    or `"vector"`), which is the same dynamics at a fraction of the cost;
    `method="density"` integrates the full matrix equation. Records are taken
    at multiples of `observe_dt`. `dt=None` picks a stable step from the
    spectrum of H. With `keep_states`, the density matrices at the observed
    times are stored in ``series.extras["states"]``.
    """
    if params.b4 < 0:
        raise ValueError("the oracle needs b4 >= 0")
    if method not in ("auto", "vector", "density"):
        raise ValueError(f"unknown method {method!r}")
    spec = rho0.spec
    _, _, H = build_operators(spec, params)
    # A constant shift leaves rho(t) unchanged; centring on the initial energy
    # keeps the populated states slow, so their phase and amplitude errors stay small.
    shift = float(np.vdot(H, rho0.rho).real)
    Hs = H - shift * np.eye(spec.dim)
    if dt is None:
        dt = stable_dt(H, shift)
    obs = _FockObservables.build(spec, H)

    use_vector = method == "vector" or (method == "auto" and rho0.psi is not None)
    if use_vector:
        if rho0.psi is None:
            raise ValueError("vector propagation needs a pure initial state")
        y = rho0.psi.astype(complex)

        def f(t, v, out=None):
            return -1j * (Hs @ v)

        def to_rho(v):
            return np.outer(v, v.conj())
    else:
        y = rho0.rho.astype(complex)

        def f(t, r, out=None):
            return -1j * (Hs @ r - r @ Hs)

        def to_rho(r):
            return r

    stepper = CashKarp(f, y)
    series = TimeSeries(source="oracle-fock")
    states = []
    rec0 = obs.record(0.0, to_rho(y))
    series.append(**rec0)
    if keep_states:
        states.append(to_rho(y).copy())

    n_obs = int(round(t_end / observe_dt)) if t_end > 0 else 0
    if t_end > 0 and abs(n_obs * observe_dt - t_end) > 1e-9 * max(1.0, t_end):
        n_obs += 1
    t = 0.0
    for k in range(1, n_obs + 1):
        target = min(k * observe_dt, t_end)
        n_sub = max(1, math.ceil((target - t) / dt - 1e-9))
        h = (target - t) / n_sub
        for _ in range(n_sub):
            y, _ = stepper.step(y, t, h)
            t += h
        t = target
        rho = to_rho(y)
        rec = obs.record(t, rho)
        drift = abs(rec["norm"] - rec0["norm"])
        if not drift <= TRACE_DRIFT_ABORT:
            raise IntegrationError(f"oracle trace drift {drift:.3e} at t={t:.6g}", series)
        series.append(**rec)
        if keep_states:
            states.append(rho.copy())
    if keep_states:
        series.extras["states"] = states
    return series


# -- Wigner transform ----------------------------------------------------------------

def wigner_transform(rho: DensityMatrix | np.ndarray, grid: PhaseGrid, spec: FockSpec | None = None,
                     dz: float | None = None) -> SpinPhaseField:
    """W_ab(R, P) = (1/2pi) int dz e^{iPz} <R - z/2| rho_ab |R + z/2>, by direct quadrature."""
    if isinstance(rho, DensityMatrix):
        spec, mat = rho.spec, rho.rho
    else:
        if spec is None:
            raise ValueError("a bare matrix needs its FockSpec")
        mat = np.asarray(rho)
    n = spec.n_levels
    reach = math.sqrt(2.0 * n + 1.0) + 6.0  # wave functions vanish beyond this
    if dz is None:
        dz = min(0.05, math.pi / (4.0 * max(abs(grid.p_min), abs(grid.p_max))))
    z_max = 2.0 * (reach + max(abs(grid.r_min), abs(grid.r_max)))
    z = np.arange(-z_max, z_max + 0.5 * dz, dz)
    phase = np.exp(1j * np.outer(grid.p, z)) * (dz / (2.0 * math.pi))  # (n_p, n_z)
    data = np.zeros((2, 2) + grid.shape, dtype=complex)
    blocks = {(a, b): mat[a * n:(a + 1) * n, b * n:(b + 1) * n] for a in range(2) for b in range(2)}
    for i, R in enumerate(grid.r):
        left = hermite_functions(n, R - 0.5 * z)   # (n, n_z)
        right = hermite_functions(n, R + 0.5 * z)
        for (a, b), blk in blocks.items():
            kernel = np.einsum("kz,kl,lz->z", left, blk, right, optimize=True)
            data[a, b, i] = phase @ kernel
    return SpinPhaseField(data, grid, SIGMA_Z)


# -- classical trajectories ------------------------------------------------------------

def classical_trajectory_oracle(R0: float, P0: float, deltaR: float, params: ModelParams,
                                n_samples: int, dt: float, t_end: float,
                                observe_dt: float = 0.1, seed: int | None = 0) -> TimeSeries:
    """Monte Carlo sampling of the initial Gaussian, each sample following R' = P, P' = -V'(R).

    The decoupled spin is carried as a Bloch vector under H_s = -omega sigma_x.
    The standard error of Prob_L is stored in ``series.extras["prob_left_stderr"]``.
    """
    if params.c != 0:
        raise ValueError("the trajectory oracle covers the decoupled case c = 0 only")
    if n_samples < 10_000:
        raise ValueError(f"need at least 10^4 samples, got {n_samples}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(seed)
    R = rng.normal(R0, deltaR, n_samples)
    P = rng.normal(P0, 1.0 / (2.0 * deltaR), n_samples)
    # state: [R..., P..., s_x, s_y, s_z]
    y = np.concatenate([R, P, [0.0, 0.0, 1.0]])
    m = n_samples
    omega = params.omega

    def f(t, v, out=None):
        out = np.empty_like(v)
        out[:m] = v[m:2 * m]
        vp, _ = potential_derivs(v[:m], params)
        out[m:2 * m] = -vp
        sx, sy, sz = v[2 * m:]
        # Bloch precession about -x: ds/dt = 2 (-omega x_hat) x s
        out[2 * m:] = (0.0, 2.0 * omega * sz, -2.0 * omega * sy)
        return out

    stepper = CashKarp(f, y)
    series = TimeSeries(source="oracle-trajectory")
    stderr = []

    def record(t, v):
        Rs, Ps = v[:m], v[m:2 * m]
        p_left = float(np.mean(Rs < 0.0))
        series.append(
            t=t,
            sigma_z=float(v[-1]),
            prob_left=p_left,
            norm=1.0,
            energy=float(np.mean(0.5 * Ps**2 + potential(Rs, params)) - omega * v[2 * m]),
            hermiticity_defect=0.0,
            boundary_mass=0.0,
        )
        stderr.append(math.sqrt(max(p_left * (1.0 - p_left), 1.0 / m) / m))

    record(0.0, y)
    n_obs = int(round(t_end / observe_dt)) if t_end > 0 else 0
    if t_end > 0 and abs(n_obs * observe_dt - t_end) > 1e-9 * max(1.0, t_end):
        n_obs += 1
    t = 0.0
    for k in range(1, n_obs + 1):
        target = min(k * observe_dt, t_end)
        n_sub = max(1, math.ceil((target - t) / dt - 1e-9))
        h = (target - t) / n_sub
        for _ in range(n_sub):
            y, _ = stepper.step(y, t, h)
            t += h
        t = target
        record(t, y)
    series.extras["prob_left_stderr"] = stderr
    return series
