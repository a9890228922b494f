"""
analytic.py - Exact steady state of the driven dissipative Kerr oscillator.

Every quantity derives from the normally ordered moments G^(m,n) = ⟨a†^m a^n⟩, which have
a closed form in the confluent hypergeometric ₀F₂. The moments are evaluated in
extended precision (mpmath); the density matrix and Wigner series lose several digits
to alternating cancellation, so the working precision grows with the photon number.

The drive must be real and non-negative on this path.
"""
import logging
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import ConvergenceError, NumericalError
from .model import SystemParams, semiclassical_branches
from .observables import (
    FockDensityMatrix,
    GridSpec,
    WignerGrid,
    wigner_normalization,
    wigner_points,
)

log = logging.getLogger(__name__)

DEFAULT_DPS = 40
SERIES_TOL = mpmath.mpf("1e-35")
SERIES_PATIENCE = 50
SERIES_MAX_TERMS = 100_000

INNER_TOL = 1e-14
INNER_PATIENCE = 3
TRACE_TOL = 1e-4

WIGNER_TOL = 1e-12
WIGNER_PATIENCE = 20
WIGNER_START_ORDER = 24
WIGNER_MAX_ORDER = 96
# absolute error allowed on a W value summed in double precision
WIGNER_ROUNDOFF_TOL = 1e-10


# --- ₀F₂ ----------------------------------------------------------------------

def _is_pole(b) -> bool:
    b = mpmath.mpc(b)
    return b.imag == 0 and b.real <= 0 and b.real == mpmath.floor(b.real)


def hyp0f2(b1, b2, z, dps: int = DEFAULT_DPS):
    """₀F₂(; b1, b2; z) = Σ z^k / (k!·(b1)_k·(b2)_k), summed at `dps` decimal digits.

    Stops once SERIES_PATIENCE consecutive terms fall below SERIES_TOL times the
    largest term seen. Returns an mpmath complex.
    """
    if _is_pole(b1) or _is_pole(b2):
        raise ValueError(f"0F2 parameters ({b1}, {b2}) include a non-positive integer")
    with mpmath.workdps(dps):
        b1, b2, z = mpmath.mpc(b1), mpmath.mpc(b2), mpmath.mpc(z)
        term = mpmath.mpc(1)
        terms = [term]
        peak = abs(term)
        quiet = 0
        for k in range(SERIES_MAX_TERMS):
            term = term * z / ((k + 1) * (b1 + k) * (b2 + k))
            terms.append(term)
            size = abs(term)
            if size > peak:
                peak = size
            if size < SERIES_TOL * peak:
                quiet += 1
                if quiet >= SERIES_PATIENCE:
                    return mpmath.fsum(terms)
            else:
                quiet = 0
    raise ConvergenceError(
        f"0F2 series with b1={b1}, b2={b2}, z={z} did not settle in {SERIES_MAX_TERMS} terms"
    )


# --- moments --------------------------------------------------------------------

def _require_real_drive(params: SystemParams) -> None:
    if params.drive.imag != 0:
        raise ValueError(
            f"the exact steady state needs a real drive, got E={params.drive}; "
            "rotate the frame so that E is real"
        )
    if params.drive.real < 0:
        raise ValueError(f"the exact steady state needs E >= 0, got {params.drive.real}")
    if params.chi2 == 0:
        raise ValueError("the exact steady state needs chi2 != 0")


def _kerr_arguments(params: SystemParams):
    """(p, q, z, E/iχ″) at the ambient mpmath precision."""
    chi = mpmath.mpf(params.chi2)
    p = mpmath.mpc(mpmath.mpf(params.delta) / chi, -mpmath.mpf(params.gamma) / (2 * chi))
    q = mpmath.conj(p)
    e = mpmath.mpf(params.drive.real)
    z = 2 * (e / chi) ** 2
    lead = e / (1j * chi)
    return p, q, z, lead


def _support_estimate(params: SystemParams) -> float:
    """Photon number above which the steady state has no weight worth resolving."""
    n = max(semiclassical_branches(params, abs(params.drive) ** 2), default=0.0)
    return n + 5 * math.sqrt(n) + 3


def working_dps(params: SystemParams) -> int:
    """Decimal digits that survive the alternating moment sums at this drive."""
    return DEFAULT_DPS + math.ceil(0.87 * _support_estimate(params))


def _inner_order(params: SystemParams) -> int:
    return math.ceil(_support_estimate(params)) + 12


def moment_G(m: int, n: int, params: SystemParams, dps: int | None = None):
    """G^(m,n) = ⟨a†^m a^n⟩ of the exact steady state, as an mpmath complex.

    G^(m,n) = (−1)^m (E/iχ″)^{m+n} Γ(p)Γ(q)/(Γ(p+n)Γ(q+m)) · F(p+n, q+m, z)/F(p, q, z)
    with p = Δ/χ″ + γ/(2iχ″), q = p*, z = 2(E/χ″)².
    """
    _require_real_drive(params)
    if m < 0 or n < 0:
        raise ValueError(f"moment orders must be >= 0, got ({m}, {n})")
    if m == 0 and n == 0:
        return mpmath.mpc(1)
    dps = dps or working_dps(params)
    with mpmath.workdps(dps):
        p, q, z, lead = _kerr_arguments(params)
        log_ratio = (
            mpmath.loggamma(p) + mpmath.loggamma(q)
            - mpmath.loggamma(p + n) - mpmath.loggamma(q + m)
        )
        ratio = hyp0f2(p + n, q + m, z, dps) / hyp0f2(p, q, z, dps)
        return (-1) ** m * lead ** (m + n) * mpmath.exp(log_ratio) * ratio


@dataclass(frozen=True)
class MomentTable:
    params: SystemParams
    max_order: int
    dps: int
    values: tuple   # values[m][n] = G^(m,n), mpmath complex

    def get(self, m: int, n: int):
        if not (0 <= m <= self.max_order and 0 <= n <= self.max_order):
            raise IndexError(f"G^({m},{n}) outside table of order {self.max_order}")
        return self.values[m][n]

    def as_array(self) -> np.ndarray:
        return np.array([[complex(v) for v in row] for row in self.values])


def moment_table(params: SystemParams, max_order: int, dps: int | None = None) -> MomentTable:
    """Every G^(m,n) with 0 ≤ m, n ≤ max_order.

    Only m ≤ n is summed; for a real drive G^(n,m) is exactly the conjugate.
    """
    _require_real_drive(params)
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    dps = dps or working_dps(params)
    size = max_order + 1
    with mpmath.workdps(dps):
        p, q, z, lead = _kerr_arguments(params)
        norm = hyp0f2(p, q, z, dps)
        lg_p = [mpmath.loggamma(p + k) for k in range(size)]
        lg_q = [mpmath.loggamma(q + k) for k in range(size)]
        lead_pow = [lead ** k for k in range(2 * size)]
        rows = [[mpmath.mpc(0)] * size for _ in range(size)]
        for m in range(size):
            for n in range(m, size):
                if m == 0 and n == 0:
                    value = mpmath.mpc(1)
                else:
                    log_ratio = lg_p[0] + lg_q[0] - lg_p[n] - lg_q[m]
                    value = (
                        (-1) ** m * lead_pow[m + n] * mpmath.exp(log_ratio)
                        * hyp0f2(p + n, q + m, z, dps) / norm
                    )
                rows[m][n] = value
                rows[n][m] = mpmath.conj(value)
    log.debug("moment table of order %d at %d digits for E=%g", max_order, dps, params.drive.real)
    return MomentTable(
        params=params,
        max_order=max_order,
        dps=dps,
        values=tuple(tuple(row) for row in rows),
    )


def steady_field(params: SystemParams) -> complex:
    """α_S = G^(0,1) = ⟨a⟩."""
    return complex(moment_G(0, 1, params))


def steady_photon_number(params: SystemParams) -> float:
    return float(mpmath.re(moment_G(1, 1, params)))


def steady_g2(params: SystemParams) -> float:
    """G^(2,2) / (G^(1,1))²."""
    dps = working_dps(params)
    g11 = moment_G(1, 1, params, dps)
    if g11 == 0:
        raise NumericalError("g2(0) of the steady state is undefined at zero drive")
    with mpmath.workdps(dps):
        ratio = complex(moment_G(2, 2, params, dps) / g11 ** 2)
    if abs(ratio.imag) > 1e-6:
        raise NumericalError(f"steady-state g2 has imaginary residue {ratio.imag:.3e}")
    return ratio.real


# --- alternating sums over the table --------------------------------------------

def _weighted_diagonal_sum(table: MomentTable, m: int, n: int, weight: int):
    """Σ_r weight^r/r! · G^(m+r, n+r), stopped adaptively.

    Returns (sum, converged). The stopping threshold is relative to the partial sum,
    floored at the round-off level of the largest term so that sums cancelling to
    zero still terminate.
    """
    limit = table.max_order
    with mpmath.workdps(table.dps):
        total = mpmath.mpc(0)
        peak = mpmath.mpf(0)
        noise = mpmath.mpf(10) ** (-(table.dps - 10))
        coeff = mpmath.mpf(1)
        quiet = 0
        r = 0
        while m + r <= limit and n + r <= limit:
            term = coeff * table.values[m + r][n + r]
            total += term
            size = abs(term)
            if size > peak:
                peak = size
            if size <= INNER_TOL * max(abs(total), peak * noise):
                quiet += 1
                if quiet >= INNER_PATIENCE:
                    return total, True
            else:
                quiet = 0
            r += 1
            coeff = coeff * weight / r
    return total, False


def _assemble_rho(table: MomentTable, dim: int) -> np.ndarray | None:
    rho = np.zeros((dim, dim), dtype=complex)
    with mpmath.workdps(table.dps):
        for n in range(dim):
            for m in range(n, dim):
                value, ok = _weighted_diagonal_sum(table, m, n, -1)
                if not ok:
                    return None
                value = value / mpmath.sqrt(mpmath.factorial(n) * mpmath.factorial(m))
                # ρ_nm = ⟨n|ρ|m⟩ pairs with G^(m+r, n+r)
                rho[n, m] = complex(value)
                rho[m, n] = complex(mpmath.conj(value))
    return rho


def steady_density_matrix(
    params: SystemParams,
    dim: int,
    table: MomentTable | None = None,
) -> FockDensityMatrix:
    """ρ_nm = 1/√(n!m!) Σ_r (−1)^r/r! G^(m+r, n+r), truncated to dim levels."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    extra = _inner_order(params)
    rho = None
    for _ in range(3):
        if table is None or table.max_order < dim - 1 + extra:
            table = moment_table(params, dim - 1 + extra)
        rho = _assemble_rho(table, dim)
        if rho is not None:
            break
        log.debug("inner moment sum unconverged at order %d, doubling", table.max_order)
        extra *= 2
        table = None
    if rho is None:
        raise ConvergenceError(
            f"steady density matrix did not converge with {extra // 2} inner terms; "
            "raise the moment order or the working precision"
        )

    rho = 0.5 * (rho + rho.conj().T)
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1) > TRACE_TOL:
        raise ConvergenceError(
            f"steady density matrix has trace {trace:.8f} at dim {dim}; "
            "raise dim, the inner order or the working precision"
        )
    return FockDensityMatrix.from_array(rho / trace, check=True)


# --- Wigner series ----------------------------------------------------------------

def default_grid(params: SystemParams, points: int = 81) -> GridSpec:
    """Square grid |Re α|, |Im α| ≤ √n_max + 3, n_max the largest semiclassical branch."""
    n_max = max(semiclassical_branches(params, abs(params.drive) ** 2), default=0.0)
    radius = math.sqrt(n_max) + 3
    return GridSpec(-radius, radius, -radius, radius, points, points)


def _wigner_coefficients(table: MomentTable, order: int) -> np.ndarray | None:
    """C_mn = 2^{m+n}/(m!n!) Σ_k (−2)^k/k! G^(k+m, k+n) for m + n ≤ order."""
    coeffs = np.zeros((order + 1, order + 1), dtype=complex)
    with mpmath.workdps(table.dps):
        for m in range(order + 1):
            for n in range(m, order + 1 - m):
                value, ok = _weighted_diagonal_sum(table, m, n, -2)
                if not ok:
                    return None
                value = value * mpmath.mpf(2) ** (m + n) / (
                    mpmath.factorial(m) * mpmath.factorial(n)
                )
                coeffs[m, n] = complex(value)
                coeffs[n, m] = complex(mpmath.conj(value))
    return coeffs


def _sum_series(coeffs: np.ndarray, alphas: np.ndarray):
    """Σ_{m,n} C_mn α^m α*^n by total order; returns (values, converged, roundoff)."""
    order = coeffs.shape[0] - 1
    powers = np.ones((order + 1,) + alphas.shape, dtype=complex)
    for k in range(1, order + 1):
        powers[k] = powers[k - 1] * alphas
    conj_powers = powers.conj()
    abs_powers = np.abs(powers)

    total = np.zeros(alphas.shape, dtype=complex)
    magnitude = np.zeros(alphas.shape)
    quiet = np.zeros(alphas.shape, dtype=int)
    for s in range(order + 1):
        m = np.arange(s + 1)
        c = coeffs[m, s - m]
        contrib = np.tensordot(c, powers[m] * conj_powers[s - m], axes=1)
        size = np.abs(contrib)
        total += contrib
        magnitude += np.tensordot(np.abs(c), abs_powers[m] * abs_powers[s - m], axes=1)
        small = size <= WIGNER_TOL * magnitude
        quiet = np.where(small, quiet + 1, 0)
    converged = quiet >= WIGNER_PATIENCE
    roundoff = np.finfo(float).eps * magnitude
    return total, converged, roundoff


def steady_wigner(
    params: SystemParams,
    spec: GridSpec | None = None,
    fallback_dim: int | None = None,
) -> WignerGrid:
    """W(α) = (2/π)e^{−2|α|²} Σ_{k,m,n} (−1)^k 2^{k+m+n}/(k!m!n!) α^m α*^n G^(k+m, k+n).

    The series order grows until every point has settled; points that never settle, or
    whose double-precision sum has lost too many digits, come from the displaced
    parity of steady_density_matrix instead.
    """
    _require_real_drive(params)
    spec = spec or default_grid(params)
    alphas = spec.alpha_points()
    gauss = (2 / np.pi) * np.exp(-2 * np.abs(alphas) ** 2)
    extra = _inner_order(params)

    order = WIGNER_START_ORDER
    retries = 0
    while True:
        table = moment_table(params, order + extra)
        coeffs = _wigner_coefficients(table, order)
        if coeffs is None:
            retries += 1
            if retries > 3:
                raise ConvergenceError(
                    f"Wigner coefficients did not converge with {extra} inner terms"
                )
            extra *= 2
            continue
        series, converged, roundoff = _sum_series(coeffs, alphas)
        if converged.all() or order >= WIGNER_MAX_ORDER:
            break
        order = min(2 * order, WIGNER_MAX_ORDER)

    values = gauss * np.real(series)
    flagged = ~converged | (gauss * roundoff > WIGNER_ROUNDOFF_TOL)
    n_flagged = int(flagged.sum())
    if n_flagged:
        dim = fallback_dim or max(20, math.ceil(_support_estimate(params) * 2) + 10)
        log.info(
            "%d of %d Wigner points outside the series' reach, using displaced parity at dim %d",
            n_flagged, flagged.size, dim,
        )
        rho = steady_density_matrix(params, dim)
        values[flagged] = wigner_points(rho, alphas[flagged])

    grid = WignerGrid(spec=spec, values=values)
    total, deficit = wigner_normalization(grid)
    grid.metadata.update({
        "method": "moment_series",
        "drive": params.drive.real,
        "series_order": order,
        "fallback_points": n_flagged,
        "normalization": total,
        "normalization_deficit": deficit,
        "support_ok": True,
    })
    return grid
