"""
benchmark.py - Wall-clock estimate for a chain evolution before committing to it.

One bond update at full bond dimension is timed on this machine and scaled by the
number of bond updates in the run. The timing matrices are deterministic, so the
estimate needs no random seed.
"""
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .model import SimulationConfig

# A second-order step touches every bond once plus the odd layer twice.
BOND_UPDATES_PER_STEP = 1.5


@dataclass
class RuntimeEstimate:
    n_steps: int
    seconds_per_bond: float
    seconds_per_step: float
    total_seconds: float
    rating: str


def _rate(total_seconds: float) -> str:
    if total_seconds < 60:
        return "Fast"
    if total_seconds < 1800:
        return "Moderate"
    return "Slow"


def _timing_tensors(bond_dim: int, local_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense theta and gate of the sizes a saturated bond update works on."""
    k = np.arange(bond_dim * local_dim * local_dim * bond_dim, dtype=float)
    theta = (np.cos(0.37 * k) + 1j * np.sin(0.11 * k)).reshape(
        bond_dim, local_dim, local_dim, bond_dim
    )
    d2 = local_dim * local_dim
    h = np.cos(np.add.outer(np.arange(d2), np.arange(d2)) * 0.13)
    gate = linalg.expm(-1j * 0.01 * (h + h.T))
    return theta, gate.reshape(local_dim, local_dim, local_dim, local_dim)


def _bond_update(theta: np.ndarray, gate: np.ndarray) -> None:
    chi, m = theta.shape[0], theta.shape[1]
    out = np.einsum("stuv,auvb->astb", gate, theta, optimize=True)
    linalg.svd(out.reshape(chi * m, m * chi), full_matrices=False, lapack_driver="gesdd")


def time_bond_update(bond_dim: int, local_dim: int, repeats: int = 3) -> float:
    """Median seconds of one gate application plus SVD, after a warm-up call."""
    theta, gate = _timing_tensors(bond_dim, local_dim)
    _bond_update(theta, gate)
    samples = []
    for _ in range(max(1, repeats)):
        start = time.monotonic()
        _bond_update(theta, gate)
        samples.append(time.monotonic() - start)
    return float(np.median(samples))


def estimate_runtime(config: SimulationConfig, repeats: int = 3) -> RuntimeEstimate:
    """Upper estimate: every bond is assumed saturated at config.bond_dim."""
    per_bond = time_bond_update(config.bond_dim, config.local_dim, repeats)
    per_step = per_bond * BOND_UPDATES_PER_STEP * (config.n_sites - 1)
    total = per_step * config.n_steps
    return RuntimeEstimate(
        n_steps=config.n_steps,
        seconds_per_bond=per_bond,
        seconds_per_step=per_step,
        total_seconds=total,
        rating=_rate(total),
    )


def mps_memory_bytes(config: SimulationConfig) -> int:
    """Complex128 storage of a saturated chain plus one bond-update workspace."""
    chi, m = config.bond_dim, config.local_dim
    tensors = config.n_sites * chi * chi * m
    workspace = 4 * (chi * m) ** 2
    return 16 * (tensors + workspace)
