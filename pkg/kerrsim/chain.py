"""
chain.py - Map the flat-band bath onto a semi-infinite nearest-neighbour hopping chain.

Site 0 of the chain is the system mode; bath modes b_0, b_1, … occupy sites 1 … N−1.
The unitary between continuum and chain modes is built from normalized Legendre
polynomials on [−x_max, x_max], which gives closed-form coefficients for a flat
spectral density.
"""
import math
from dataclasses import dataclass

import numpy as np

from .model import SystemParams


@dataclass(frozen=True)
class ChainCoefficients:
    eta_sys: float               # system-to-chain coupling η′
    site_freqs: tuple[float, ...]  # on-site frequencies ω_n of the bath sites
    hoppings: tuple[float, ...]    # η_n between bath sites n and n+1

    @property
    def n_sites(self) -> int:
        return len(self.site_freqs) + 1

    @property
    def bond_couplings(self) -> tuple[float, ...]:
        """Coupling on every bond, left to right: η′ then η_0 … η_{N−3}."""
        return (self.eta_sys,) + tuple(self.hoppings)


def build_chain(params: SystemParams, n_sites: int) -> ChainCoefficients:
    if n_sites < 2:
        raise ValueError(f"n_sites must be >= 2, got {n_sites}")
    wc = params.cutoff
    # γ = 2π c_0² and η′ = c_0 √(2ω_c)
    c0 = math.sqrt(params.gamma / (2 * math.pi))
    eta_sys = c0 * math.sqrt(2 * wc)
    n = np.arange(n_sites - 2, dtype=float)
    hoppings = wc * (n + 1) / np.sqrt((2 * n + 1) * (2 * n + 3))
    return ChainCoefficients(
        eta_sys=eta_sys,
        site_freqs=(0.0,) * (n_sites - 1),
        hoppings=tuple(float(h) for h in hoppings),
    )


def legendre(n: int, x) -> np.ndarray:
    """P_n(x) by the three-term recurrence (k+1)P_{k+1} = (2k+1)xP_k − kP_{k−1}."""
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = x.copy()
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1) * x * cur - k * prev) / (k + 1)
    return cur


def verify_legendre_orthonormality(
    n_max: int,
    quad_points: int,
    x_max: float = 1.0,
) -> float:
    """Max |∫U_n U_m dx − δ_nm| over 0 ≤ n, m ≤ n_max with Gauss-Legendre quadrature.

    U_n(x) = √((2n+1)/(2x_max))·P_n(x/x_max) on [−x_max, x_max].
    """
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    # an n-point rule is exact to degree 2n−1; U_n·U_m reaches degree 2·n_max
    if 2 * quad_points - 1 < 2 * n_max:
        raise ValueError(
            f"{quad_points} quadrature points cannot resolve order {n_max}; "
            f"need at least {n_max + 1}"
        )
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    x = x_max * nodes
    w = x_max * weights
    basis = np.array([
        math.sqrt((2 * n + 1) / (2 * x_max)) * legendre(n, x / x_max)
        for n in range(n_max + 1)
    ])
    gram = (basis * w) @ basis.T
    return float(np.max(np.abs(gram - np.eye(n_max + 1))))


def recurrence_time(chain: ChainCoefficients) -> float:
    """Round-trip time of the fastest chain excitation to the far end and back.

    A uniform hopping η carries excitations at most at speed 2η sites per unit time.
    """
    fastest = 2 * max(chain.bond_couplings)
    return 2 * (chain.n_sites - 1) / fastest
