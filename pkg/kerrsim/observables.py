"""
observables.py - Diagnostics of a single-mode Fock-basis density matrix.

Quadratures are x = (a + a†)/√2 and p = (a − a†)/(i√2), so the vacuum covariance is
½·identity. The symplectic eigenvalue is reported as ν = 2·n̄_eff + 1 (vacuum ν = 1).
Entropies are in nats.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .errors import NumericalError, PositivityError, UndefinedObservableError
from .fock import coherent_vector, destroy

log = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
EIGEN_FLOOR = -1e-9
MIN_OCCUPATION = 1e-12
SYMPLECTIC_FLOOR = 1 - 1e-6
WIGNER_PADDING = 8


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_array(cls, rho, check: bool = True) -> "FockDensityMatrix":
        rho = np.array(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        if check:
            check_density_matrix(rho)
        # exact Hermiticity for eigvalsh downstream
        rho = 0.5 * (rho + rho.conj().T)
        rho.flags.writeable = False
        return cls(entries=rho)


def check_density_matrix(rho) -> None:
    """Raise unless rho is Hermitian, unit-trace and positive within tolerance."""
    rho = rho.entries if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    herm = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
    if herm > HERMITICITY_TOL:
        raise NumericalError(f"density matrix is not Hermitian (deviation {herm:.3e})")
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1) > TRACE_TOL:
        raise NumericalError(f"density matrix trace is {trace:.12f}, expected 1")
    lowest = float(linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lowest < EIGEN_FLOOR:
        raise PositivityError(f"density matrix has eigenvalue {lowest:.3e}")


def _entries(rho) -> np.ndarray:
    return rho.entries if isinstance(rho, FockDensityMatrix) else np.asarray(rho, dtype=complex)


def _populations(rho) -> np.ndarray:
    return np.real(np.diag(_entries(rho)))


# --- moments ----------------------------------------------------------------

def mean_field(rho) -> complex:
    """⟨a⟩ = Tr[aρ]."""
    r = _entries(rho)
    return complex(np.trace(destroy(r.shape[0]) @ r))


def photon_number(rho) -> float:
    p = _populations(rho)
    return float(np.dot(np.arange(p.size), p))


def _factorial_moment(rho) -> float:
    p = _populations(rho)
    n = np.arange(p.size)
    return float(np.dot(n * (n - 1), p))


def g2_zero(rho) -> float:
    """Tr[a†a†aaρ] / Tr[a†aρ]²."""
    n_mean = photon_number(rho)
    if n_mean <= MIN_OCCUPATION:
        raise UndefinedObservableError(
            f"g2(0) is undefined at occupation {n_mean:.3e}"
        )
    return _factorial_moment(rho) / n_mean ** 2


def mandel_q(rho) -> float:
    """(Var n − ⟨n⟩)/⟨n⟩; negative for sub-Poissonian light."""
    n_mean = photon_number(rho)
    if n_mean <= MIN_OCCUPATION:
        raise UndefinedObservableError(
            f"Mandel Q is undefined at occupation {n_mean:.3e}"
        )
    p = _populations(rho)
    n = np.arange(p.size)
    var = float(np.dot(n * n, p)) - n_mean ** 2
    return (var - n_mean) / n_mean


# --- classical proxy and Gaussian neighbour ---------------------------------

def fidelity_to_classical(rho) -> float:
    """⟨α_cl|ρ|α_cl⟩ with α_cl = Tr[aρ], the coherent vector truncated at dim."""
    r = _entries(rho)
    vec = coherent_vector(mean_field(r), r.shape[0])
    return float(np.real(vec.conj() @ r @ vec))


@dataclass(frozen=True)
class GaussianMoments:
    mean: complex        # ⟨a⟩
    n_mean: float        # ⟨a†a⟩
    anomalous: complex   # ⟨a²⟩

    @property
    def thermal_part(self) -> float:
        """⟨δa†δa⟩ after removing the displacement."""
        return self.n_mean - abs(self.mean) ** 2

    @property
    def squeezing_part(self) -> complex:
        """⟨δa²⟩ after removing the displacement."""
        return self.anomalous - self.mean ** 2

    @property
    def covariance(self) -> np.ndarray:
        """Symmetrized (x, p) covariance, vacuum ½·identity."""
        n = self.thermal_part
        s = self.squeezing_part
        return np.array([
            [n + 0.5 + s.real, s.imag],
            [s.imag, n + 0.5 - s.real],
        ])

    @property
    def nu(self) -> float:
        det = float(np.linalg.det(self.covariance))
        return 2.0 * math.sqrt(max(det, 0.0))

    @property
    def n_eff(self) -> float:
        return (self.nu - 1) / 2


def closest_gaussian_moments(rho) -> GaussianMoments:
    r = _entries(rho)
    a = destroy(r.shape[0])
    moments = GaussianMoments(
        mean=complex(np.trace(a @ r)),
        n_mean=photon_number(r),
        anomalous=complex(np.trace(a @ a @ r)),
    )
    if moments.nu < SYMPLECTIC_FLOOR:
        raise NumericalError(
            f"moment-matched Gaussian has symplectic eigenvalue {moments.nu:.8f} < 1; "
            "the Fock truncation is too small for this state"
        )
    return moments


def gaussian_entropy(nu: float) -> float:
    """Entropy of a single-mode Gaussian state with symplectic eigenvalue ν."""
    upper = (nu + 1) / 2
    lower = (nu - 1) / 2
    if lower <= 0:
        return 0.0
    return upper * math.log(upper) - lower * math.log(lower)


def von_neumann_entropy(rho) -> float:
    eigs = linalg.eigvalsh(_entries(rho))
    if eigs[0] < EIGEN_FLOOR:
        raise PositivityError(f"density matrix has eigenvalue {eigs[0]:.3e}")
    eigs = np.clip(eigs, 0.0, None)
    return float(stats.entropy(eigs))


def non_gaussianity(rho) -> float:
    """Relative entropy to the Gaussian state with the same first and second moments."""
    moments = closest_gaussian_moments(rho)
    return gaussian_entropy(moments.nu) - von_neumann_entropy(rho)


# --- Wigner function ----------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid over x = Re α and p = Im α."""

    x_min: float = -5.0
    x_max: float = 5.0
    p_min: float = -5.0
    p_max: float = 5.0
    nx: int = 81
    np: int = 81

    def __post_init__(self):
        if not self.x_max > self.x_min or not self.p_max > self.p_min:
            raise ValueError("grid ranges must be increasing intervals")
        if self.nx < 2 or self.np < 2:
            raise ValueError(f"grid needs at least 2 points per axis, got {self.nx}x{self.np}")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.np)

    @property
    def cell_area(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1) * (self.p_max - self.p_min) / (self.np - 1)

    @property
    def max_radius(self) -> float:
        return math.hypot(
            max(abs(self.x_min), abs(self.x_max)),
            max(abs(self.p_min), abs(self.p_max)),
        )

    def alpha_points(self) -> np.ndarray:
        """α = x + ip on the grid, indexed [i, j] at (x_i, p_j)."""
        return self.x[:, None] + 1j * self.p[None, :]


@dataclass
class WignerGrid:
    spec: GridSpec
    values: np.ndarray   # real, shape (nx, np)
    metadata: dict = field(default_factory=dict)

    @property
    def x_range(self) -> tuple[float, float]:
        return self.spec.x_min, self.spec.x_max

    @property
    def p_range(self) -> tuple[float, float]:
        return self.spec.p_min, self.spec.p_max

    @property
    def nx(self) -> int:
        return self.spec.nx

    @property
    def np(self) -> int:
        return self.spec.np

    @property
    def support_ok(self) -> bool:
        return self.metadata.get("support_ok", True)


def wigner_normalization(grid: WignerGrid) -> tuple[float, float]:
    """(Σ W·Δx·Δp, |1 − Σ|)."""
    total = float(np.sum(grid.values) * grid.spec.cell_area)
    return total, abs(1.0 - total)


def support_radius(rho) -> float:
    """Phase-space radius holding the state: √(⟨n⟩ + 3·std n) plus one vacuum width."""
    p = _populations(rho)
    n = np.arange(p.size)
    n_mean = float(np.dot(n, p))
    var = max(float(np.dot(n * n, p)) - n_mean ** 2, 0.0)
    return math.sqrt(n_mean + 3 * math.sqrt(var)) + 1.0


def _grid_covers(rho, spec: GridSpec) -> bool:
    centre = mean_field(rho)
    reach = support_radius(rho) - abs(centre)
    reach = max(reach, 1.0)
    return (
        spec.x_min <= centre.real - reach and centre.real + reach <= spec.x_max
        and spec.p_min <= centre.imag - reach and centre.imag + reach <= spec.p_max
    )


class _DisplacementRows:
    """Rows 0 … dim−1 of D(α) = exp(αa† − α*a) in a padded Fock space.

    With α = r·e^{iφ}, D(α) = R(φ)·exp(r(a† − a))·R(φ)† where R(φ) = e^{iφa†a}, and
    a† − a = iK with K Hermitian, so one eigendecomposition serves every grid point.
    This is the exact exponential of the truncated generator.
    """

    def __init__(self, dim: int, padded: int):
        a = destroy(padded)
        k = -1j * (a.conj().T - a)
        self.eigvals, self.vecs = linalg.eigh(k)
        self.dim = dim
        self.levels = np.arange(padded)
        self.head = self.vecs[:dim, :]
        self.tail = self.vecs.conj().T

    def __call__(self, alphas: np.ndarray) -> np.ndarray:
        """Stack of D(α)[:dim, :] for a 1-D array of α, shape (len, dim, padded)."""
        r = np.abs(alphas)
        phi = np.angle(alphas)
        rot_head = np.exp(1j * phi[:, None] * self.levels[None, : self.dim])
        rot_tail = np.exp(-1j * phi[:, None] * self.levels[None, :])
        phases = np.exp(1j * r[:, None] * self.eigvals[None, :])
        left = rot_head[:, :, None] * self.head[None, :, :] * phases[:, None, :]
        right = self.tail[None, :, :] * rot_tail[:, None, :]
        return left @ right


def _padded_dim(dim: int, radius: float) -> int:
    # the displaced low levels spread out to roughly (√dim + r)²
    return max(dim + WIGNER_PADDING, int(math.ceil((math.sqrt(dim) + radius + 3) ** 2)))


def _parity_expectation(rows: _DisplacementRows, r: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    d = rows(alphas)
    # diagonal of D†ρD restricted to the populated block of ρ
    diag = np.einsum("bmk,mn,bnk->bk", d.conj(), r, d, optimize=True)
    parity = (-1.0) ** np.arange(d.shape[-1])
    return (2 / np.pi) * np.real(diag @ parity)


def wigner_points(rho, alphas) -> np.ndarray:
    """Displaced-parity W at an arbitrary 1-D set of phase-space points."""
    r = _entries(rho)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    radius = float(np.max(np.abs(alphas))) if alphas.size else 0.0
    rows = _DisplacementRows(r.shape[0], _padded_dim(r.shape[0], radius))
    return _parity_expectation(rows, r, alphas)


def wigner_displaced_parity(
    rho,
    spec: GridSpec,
    max_workers: int | None = None,
    time: float | None = None,
) -> WignerGrid:
    """W(α) = (2/π)·Tr[D(−α) ρ D(α) Π] on every grid point."""
    r = _entries(rho)
    dim = r.shape[0]
    padded = _padded_dim(dim, spec.max_radius)
    rows = _DisplacementRows(dim, padded)
    alphas = spec.alpha_points()

    def _row(i: int) -> np.ndarray:
        return _parity_expectation(rows, r, alphas[i])

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = np.array(list(pool.map(_row, range(spec.nx))))
    else:
        values = np.array([_row(i) for i in range(spec.nx)])

    grid = WignerGrid(spec=spec, values=values)
    support_ok = _grid_covers(r, spec)
    total, deficit = wigner_normalization(grid)
    grid.metadata.update({
        "method": "displaced_parity",
        "time": time,
        "support_ok": support_ok,
        "normalization": total,
        "normalization_deficit": deficit,
        "padded_dim": padded,
    })
    if not support_ok:
        log.warning(
            "Wigner grid [%g, %g]x[%g, %g] does not cover the state's support",
            spec.x_min, spec.x_max, spec.p_min, spec.p_max,
        )
    return grid


def state_summary(rho) -> dict:
    """Every scalar diagnostic of rho; g2 is None at zero occupation."""
    field_ = mean_field(rho)
    try:
        g2 = g2_zero(rho)
    except UndefinedObservableError:
        g2 = None
    return {
        "field": field_,
        "n": photon_number(rho),
        "g2": g2,
        "fidelity": fidelity_to_classical(rho),
        "non_gaussianity": non_gaussianity(rho),
    }
