"""
fock.py - Truncated Fock-space operators, state factories and the Kerr system Hamiltonian.
"""
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .model import SystemParams


@lru_cache(maxsize=64)
def _destroy(dim: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    a.flags.writeable = False
    return a


def destroy(dim: int) -> np.ndarray:
    """Annihilation operator a in the Fock basis {|0⟩ … |dim−1⟩}."""
    return _destroy(dim).copy()


def create(dim: int) -> np.ndarray:
    return _destroy(dim).conj().T.copy()


def number(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def parity(dim: int) -> np.ndarray:
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def displacement(alpha: complex, dim: int, padding: int = 8) -> np.ndarray:
    """D(α) = exp(αa† − α*a), built in dim + padding and cropped back to dim."""
    big = dim + padding
    a = _destroy(big)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return expm(gen)[:dim, :dim]


def kerr_hamiltonian(params: SystemParams, dim: int) -> np.ndarray:
    """H_S = Δa†a + χ″a†²a² + i(a†E − aE*) in the frame of the drive."""
    a = _destroy(dim)
    ad = a.conj().T
    e = params.drive
    return (
        params.delta * ad @ a
        + params.chi2 * ad @ ad @ a @ a
        + 1j * (e * ad - np.conj(e) * a)
    )


def coherent_truncation_loss(alpha: complex, dim: int) -> float:
    """Poisson tail mass of |α⟩ beyond the last retained level."""
    return float(poisson.sf(dim - 1, abs(alpha) ** 2))


def required_dim(alpha: complex, max_loss: float) -> int:
    """Smallest Fock truncation keeping the coherent-state tail below max_loss."""
    dim = 2
    while coherent_truncation_loss(alpha, dim) > max_loss:
        dim += 1
    return dim


def coherent_vector(alpha: complex, dim: int, normalize: bool = True) -> np.ndarray:
    """Truncated coherent state, built by the stable ratio c_n = c_{n−1}·α/√n."""
    vec = np.empty(dim, dtype=complex)
    vec[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        vec[n] = vec[n - 1] * alpha / np.sqrt(n)
    if normalize:
        vec /= np.linalg.norm(vec)
    return vec


def fock_vector(n: int, dim: int) -> np.ndarray:
    if not 0 <= n < dim:
        raise ValueError(f"Fock level {n} outside truncation {dim}")
    vec = np.zeros(dim, dtype=complex)
    vec[n] = 1.0
    return vec


def coherent_dm(alpha: complex, dim: int) -> np.ndarray:
    vec = coherent_vector(alpha, dim)
    return np.outer(vec, vec.conj())


def fock_dm(n: int, dim: int) -> np.ndarray:
    vec = fock_vector(n, dim)
    return np.outer(vec, vec.conj())


def thermal_dm(n_mean: float, dim: int) -> np.ndarray:
    """Bose-Einstein diagonal state, truncated and renormalized."""
    if n_mean == 0:
        return fock_dm(0, dim)
    ratio = n_mean / (1 + n_mean)
    probs = ratio ** np.arange(dim)
    return np.diag(probs / probs.sum()).astype(complex)
