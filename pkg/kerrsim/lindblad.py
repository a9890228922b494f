"""
lindblad.py - Zero-temperature master equation of the driven Kerr oscillator.

    dρ/dt = −i[H_S, ρ] + γ(aρa† − ½{a†a, ρ})

integrated with fixed-step fourth-order Runge-Kutta in a truncated Fock basis. This is
the brute-force reference the chain simulation is checked against.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import PositivityError
from .fock import destroy, kerr_hamiltonian
from .model import SystemParams
from .observables import FockDensityMatrix, g2_zero, mean_field, photon_number

log = logging.getLogger(__name__)

TRACE_DRIFT_TOL = 1e-12
POSITIVITY_FLOOR = -1e-6
STEADY_TOL = 1e-9
# relaxation horizon in units of 1/γ
STEADY_HORIZON = 50.0
RESIDUAL_CHECK_EVERY = 100


@dataclass(frozen=True)
class LindbladConfig:
    dim: int = 30
    dt: float = 1e-3
    t_total: float = 2.0
    method: str = "rk4"

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_total < 0:
            raise ValueError(f"t_total must be >= 0, got {self.t_total}")
        if self.method != "rk4":
            raise ValueError(f"only the 'rk4' integrator is available, got {self.method!r}")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_total / self.dt - 1e-9) if self.t_total > 0 else 0


class _Generator:
    """The Lindblad superoperator with its operators built once."""

    def __init__(self, params: SystemParams, dim: int):
        self.h = kerr_hamiltonian(params, dim)
        self.a = destroy(dim)
        self.ad = self.a.conj().T
        self.n = self.ad @ self.a
        self.gamma = params.gamma

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        comm = self.h @ rho - rho @ self.h
        anti = self.n @ rho + rho @ self.n
        return -1j * comm + self.gamma * (self.a @ rho @ self.ad - 0.5 * anti)

    def rk4(self, rho: np.ndarray, dt: float) -> np.ndarray:
        k1 = self(rho)
        k2 = self(rho + 0.5 * dt * k1)
        k3 = self(rho + 0.5 * dt * k2)
        k4 = self(rho + dt * k3)
        return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def lindblad_rhs(rho, params: SystemParams) -> np.ndarray:
    r = rho.entries if isinstance(rho, FockDensityMatrix) else np.asarray(rho, dtype=complex)
    return _Generator(params, r.shape[0])(r)


def _settle(rho: np.ndarray, t: float) -> np.ndarray:
    """Hermitize, renormalize a drifting trace and enforce positivity."""
    rho = 0.5 * (rho + rho.conj().T)
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1) > TRACE_DRIFT_TOL:
        rho /= trace
    lowest = float(linalg.eigvalsh(rho, subset_by_index=[0, 0])[0])
    if lowest < POSITIVITY_FLOOR:
        raise PositivityError(
            f"density matrix eigenvalue {lowest:.3e} at t={t:.4g}; "
            "use a smaller dt or a larger Fock truncation"
        )
    return rho


@dataclass
class LindbladTrajectory:
    times: list[float] = field(default_factory=list)
    rhos: list[FockDensityMatrix] = field(default_factory=list)

    @property
    def final(self) -> FockDensityMatrix:
        return self.rhos[-1]

    def field(self) -> np.ndarray:
        return np.array([mean_field(r) for r in self.rhos])

    def photon_number(self) -> np.ndarray:
        return np.array([photon_number(r) for r in self.rhos])

    def g2(self) -> np.ndarray:
        """g2(0) series; NaN where the occupation vanishes."""
        out = []
        for r in self.rhos:
            out.append(g2_zero(r) if photon_number(r) > 1e-12 else float("nan"))
        return np.array(out)


def integrate(
    rho0,
    params: SystemParams,
    config: LindbladConfig,
    stride: int = 1,
) -> LindbladTrajectory:
    """RK4 from rho0 over config.t_total, recording every `stride` steps and the last one."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    rho0 = rho0 if isinstance(rho0, FockDensityMatrix) else FockDensityMatrix.from_array(rho0)
    if rho0.dim != config.dim:
        raise ValueError(f"initial state has dim {rho0.dim}, config expects {config.dim}")
    gen = _Generator(params, config.dim)
    rho = np.array(rho0.entries)
    traj = LindbladTrajectory(times=[0.0], rhos=[rho0])
    n_steps = config.n_steps
    for step in range(1, n_steps + 1):
        t = step * config.dt
        rho = _settle(gen.rk4(rho, config.dt), t)
        if step % stride == 0 or step == n_steps:
            traj.times.append(t)
            traj.rhos.append(FockDensityMatrix.from_array(rho, check=False))
    log.debug("lindblad: %d RK4 steps at dim %d", n_steps, config.dim)
    return traj


@dataclass(frozen=True)
class SteadyStateResult:
    rho: FockDensityMatrix
    converged: bool
    t_final: float
    residual: float   # max |dρ/dt| at t_final


def steady_state_longtime(
    params: SystemParams,
    config: LindbladConfig,
    rho0=None,
    tol: float = STEADY_TOL,
) -> SteadyStateResult:
    """Integrate until max|dρ/dt| < tol or t > 50/γ."""
    gen = _Generator(params, config.dim)
    if rho0 is None:
        rho = np.zeros((config.dim, config.dim), dtype=complex)
        rho[0, 0] = 1.0
    else:
        rho = np.array(rho0.entries if isinstance(rho0, FockDensityMatrix) else rho0, dtype=complex)
    horizon = STEADY_HORIZON / params.gamma
    max_steps = math.ceil(horizon / config.dt)

    residual = float(np.max(np.abs(gen(rho))))
    step = 0
    while residual >= tol and step < max_steps:
        for _ in range(min(RESIDUAL_CHECK_EVERY, max_steps - step)):
            step += 1
            rho = _settle(gen.rk4(rho, config.dt), step * config.dt)
        residual = float(np.max(np.abs(gen(rho))))

    converged = residual < tol
    t_final = step * config.dt
    if not converged:
        log.warning(
            "Lindblad relaxation at E=%g not converged by t=%.3g (residual %.2e)",
            abs(params.drive), t_final, residual,
        )
    return SteadyStateResult(
        rho=FockDensityMatrix.from_array(rho, check=False),
        converged=converged,
        t_final=t_final,
        residual=residual,
    )
