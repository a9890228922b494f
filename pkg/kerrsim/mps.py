"""
mps.py - Vidal-form matrix product states and second-order Suzuki-Trotter TEBD.

The chain Hamiltonian is a sum of two-site terms h^{b,b+1}. The system term H_S is
absorbed into the bond-(0,1) term. One Trotter step applies

    U(δt) ≈ e^{−iFδt/2} e^{−iGδt} e^{−iFδt/2}

where F collects the bonds (0,1), (2,3), … and G the bonds (1,2), (3,4), …. Gates
inside one half-step act on disjoint bonds.

save_checkpoint writes a chain state in a little-endian binary layout; `evolve
--checkpoint` uses it for the final state of each run. load_checkpoint is for
Python callers that pick a long run back up, and no subcommand restores one.
"""
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .chain import ChainCoefficients
from .errors import CanonicalFormError, NumericalError, TruncationError
from .fock import coherent_truncation_loss, coherent_vector, destroy, kerr_hamiltonian, required_dim
from .model import InitialState, SimulationConfig, SystemParams
from .observables import FockDensityMatrix

log = logging.getLogger(__name__)

# Singular values below this are dropped whatever the bond dimension allows,
# so 1/λ never blows up.
SCHMIDT_FLOOR = 1e-12
UNITARITY_TOL = 1e-12
HERMITICITY_TOL = 1e-12
# Tail mass allowed when truncating the initial coherent state to local_dim levels.
COHERENT_TRUNCATION_TOL = 1e-5

CHECKPOINT_MAGIC = b"KMPS"
CHECKPOINT_VERSION = 1


@dataclass
class MPSState:
    gammas: list[np.ndarray]     # Γ[i]: (left bond, M, right bond)
    lambdas: list[np.ndarray]    # λ[b] sits left of site b; λ[0] = λ[N] = [1]
    bond_dim: int                # Schmidt rank limit χ
    trunc_error_accum: float = 0.0

    @property
    def n_sites(self) -> int:
        return len(self.gammas)

    @property
    def local_dim(self) -> int:
        return self.gammas[0].shape[1]

    def bond_dimensions(self) -> list[int]:
        return [lam.size for lam in self.lambdas]

    def copy(self) -> "MPSState":
        return MPSState(
            gammas=[g.copy() for g in self.gammas],
            lambdas=[lam.copy() for lam in self.lambdas],
            bond_dim=self.bond_dim,
            trunc_error_accum=self.trunc_error_accum,
        )


@dataclass(frozen=True)
class TwoSiteGate:
    site_index: int        # left site of the bond
    matrix: np.ndarray     # (M², M²) unitary, row index s·M + t

    def __post_init__(self):
        dev = np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(self.matrix.shape[0])))
        if dev > UNITARITY_TOL:
            raise NumericalError(
                f"gate on bond ({self.site_index},{self.site_index + 1}) "
                f"is not unitary (deviation {dev:.2e})"
            )


@dataclass(frozen=True)
class GateSet:
    odd: list[TwoSiteGate]    # bonds (0,1), (2,3), … exponentiated over dt/2
    even: list[TwoSiteGate]   # bonds (1,2), (3,4), … exponentiated over dt
    dt: float


@dataclass(frozen=True)
class Snapshot:
    step: int
    time: float
    rho: FockDensityMatrix
    trunc_error: float


@dataclass
class EvolutionResult:
    snapshots: list[Snapshot] = field(default_factory=list)
    final_state: MPSState | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])


# --- construction ---------------------------------------------------------

def product_state(site_vectors: list[np.ndarray], bond_dim: int) -> MPSState:
    """Product MPS from one normalized local vector per site."""
    gammas = []
    for vec in site_vectors:
        vec = np.asarray(vec, dtype=complex)
        gammas.append((vec / np.linalg.norm(vec)).reshape(1, -1, 1))
    lambdas = [np.ones(1) for _ in range(len(gammas) + 1)]
    return MPSState(gammas=gammas, lambdas=lambdas, bond_dim=bond_dim)


def init_state(
    config: SimulationConfig,
    initial: InitialState,
    max_loss: float = COHERENT_TRUNCATION_TOL,
) -> MPSState:
    """System in a truncated coherent state, every bath site in vacuum."""
    alpha = initial.alpha
    loss = coherent_truncation_loss(alpha, config.local_dim)
    if loss > max_loss:
        need = required_dim(alpha, max_loss)
        raise TruncationError(
            f"coherent amplitude {abs(alpha):.4g} loses {loss:.2e} of its norm at "
            f"local_dim={config.local_dim}; use local_dim >= {need}"
        )
    vacuum = np.zeros(config.local_dim, dtype=complex)
    vacuum[0] = 1.0
    vectors = [coherent_vector(alpha, config.local_dim)]
    vectors += [vacuum] * (config.n_sites - 1)
    return product_state(vectors, config.bond_dim)


def bond_hamiltonian(
    params: SystemParams,
    chain: ChainCoefficients,
    bond: int,
    local_dim: int,
) -> np.ndarray:
    """Two-site term h^{b,b+1} as an (M², M²) matrix; bond 0 carries H_S."""
    a = destroy(local_dim)
    ad = a.conj().T
    eye = np.eye(local_dim)
    coupling = chain.bond_couplings[bond]
    h = coupling * (np.kron(ad, a) + np.kron(a, ad))
    # bath site b+1 carries ω_b; each bath site is the right end of exactly one bond
    h = h + chain.site_freqs[bond] * np.kron(eye, ad @ a)
    if bond == 0:
        h = h + np.kron(kerr_hamiltonian(params, local_dim), eye)
    return h


def _gate(h: np.ndarray, tau: float, site_index: int) -> TwoSiteGate:
    dev = np.max(np.abs(h - h.conj().T))
    if dev > HERMITICITY_TOL:
        raise NumericalError(f"bond ({site_index},{site_index + 1}) Hamiltonian is not "
                             f"Hermitian (deviation {dev:.2e})")
    w, v = linalg.eigh(0.5 * (h + h.conj().T))
    u = (v * np.exp(-1j * w * tau)) @ v.conj().T
    return TwoSiteGate(site_index=site_index, matrix=u)


def build_gates(
    params: SystemParams,
    chain: ChainCoefficients,
    config: SimulationConfig,
) -> GateSet:
    if chain.n_sites != config.n_sites:
        raise ValueError(f"chain has {chain.n_sites} sites, config expects {config.n_sites}")
    odd, even = [], []
    for bond in range(config.n_sites - 1):
        h = bond_hamiltonian(params, chain, bond, config.local_dim)
        if bond % 2 == 0:
            odd.append(_gate(h, config.dt / 2, bond))
        else:
            even.append(_gate(h, config.dt, bond))
    return GateSet(odd=odd, even=even, dt=config.dt)


# --- evolution ------------------------------------------------------------

def _svd(matrix: np.ndarray, site: int):
    try:
        return linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except linalg.LinAlgError:
        try:
            return linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")
        except linalg.LinAlgError as e:
            raise NumericalError(f"SVD failed on bond ({site},{site + 1}): {e}") from e


def _inverse(lam: np.ndarray) -> np.ndarray:
    out = np.zeros_like(lam)
    mask = lam > SCHMIDT_FLOOR
    out[mask] = 1.0 / lam[mask]
    return out


def _update_bond(state: MPSState, gate: TwoSiteGate):
    """Contract, apply, split and truncate one bond. Returns new (Γ_i, λ, Γ_{i+1}, discarded)."""
    i = gate.site_index
    lam_l, lam_c, lam_r = state.lambdas[i], state.lambdas[i + 1], state.lambdas[i + 2]
    g1, g2 = state.gammas[i], state.gammas[i + 1]
    d1, d2 = g1.shape[1], g2.shape[1]

    theta = (lam_l[:, None, None] * g1) * lam_c[None, None, :]
    theta = np.tensordot(theta, g2 * lam_r[None, None, :], axes=(2, 0))   # (a, s, t, b)
    u4 = gate.matrix.reshape(d1, d2, d1, d2)
    theta = np.einsum("xyst,astb->axyb", u4, theta, optimize=True)
    chi_l, chi_r = theta.shape[0], theta.shape[3]

    u, s, vh = _svd(theta.reshape(chi_l * d1, d2 * chi_r), i)
    total = float(np.sum(s ** 2))
    keep = max(1, min(state.bond_dim, int(np.count_nonzero(s > SCHMIDT_FLOOR))))
    discarded = float(np.sum(s[keep:] ** 2)) / total if total > 0 else 0.0

    s_kept = s[:keep] / np.linalg.norm(s[:keep])
    new_g1 = u[:, :keep].reshape(chi_l, d1, keep) * _inverse(lam_l)[:, None, None]
    new_g2 = vh[:keep].reshape(keep, d2, chi_r) * _inverse(lam_r)[None, None, :]
    return new_g1, s_kept, new_g2, discarded


def _apply_layer(state: MPSState, gates: list[TwoSiteGate], pool: ThreadPoolExecutor | None):
    if pool is None or len(gates) < 2:
        results = [_update_bond(state, g) for g in gates]
    else:
        results = list(pool.map(lambda g: _update_bond(state, g), gates))
    for gate, (g1, lam, g2, discarded) in zip(gates, results):
        i = gate.site_index
        state.gammas[i], state.lambdas[i + 1], state.gammas[i + 1] = g1, lam, g2
        state.trunc_error_accum += discarded


def trotter_step(
    state: MPSState,
    odd: list[TwoSiteGate],
    even: list[TwoSiteGate],
    pool: ThreadPoolExecutor | None = None,
) -> MPSState:
    """One second-order step F(δt/2)·G(δt)·F(δt/2). Updates the state in place."""
    _apply_layer(state, odd, pool)
    _apply_layer(state, even, pool)
    _apply_layer(state, odd, pool)
    return state


def evolve(
    state: MPSState,
    gates: GateSet,
    config: SimulationConfig,
    observer: Callable[[float, FockDensityMatrix, float], None] | None = None,
    site: int = 0,
    max_workers: int | None = None,
) -> EvolutionResult:
    """Run config.n_steps Trotter steps, snapshotting `site` every snapshot_stride steps.

    The initial state and the final step are always snapshotted.
    """
    result = EvolutionResult()

    def _snap(step: int):
        t = step * config.dt
        rho = reduced_density_matrix(state, site)
        snap = Snapshot(step=step, time=t, rho=rho, trunc_error=state.trunc_error_accum)
        result.snapshots.append(snap)
        if observer is not None:
            observer(t, rho, state.trunc_error_accum)

    n_steps = config.n_steps
    pool = ThreadPoolExecutor(max_workers=max_workers) if max_workers and max_workers > 1 else None
    try:
        _snap(0)
        for step in range(1, n_steps + 1):
            trotter_step(state, gates.odd, gates.even, pool)
            if step % config.snapshot_stride == 0 or step == n_steps:
                _snap(step)
    finally:
        if pool is not None:
            pool.shutdown()
    log.debug("evolved %d steps, accumulated truncation %.3e", n_steps, state.trunc_error_accum)
    result.final_state = state
    return result


# --- measurement ----------------------------------------------------------

def reduced_density_matrix(state: MPSState, site: int) -> FockDensityMatrix:
    """ρ of one site from the λ²-weighted environments of the canonical form."""
    if not 0 <= site < state.n_sites:
        raise IndexError(f"site {site} outside chain of {state.n_sites}")
    g = state.gammas[site]
    wl = state.lambdas[site] ** 2
    wr = state.lambdas[site + 1] ** 2
    rho = np.einsum("a,b,asb,atb->st", wl, wr, g, g.conj(), optimize=True)
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1) > 1e-8:
        raise CanonicalFormError(
            f"reduced density matrix of site {site} has trace {trace:.10f}; "
            "the MPS is out of canonical form, re-orthogonalize before measuring"
        )
    return FockDensityMatrix.from_array(rho, check=True)


def norm(state: MPSState) -> float:
    """⟨Ψ|Ψ⟩ by left-to-right transfer-matrix contraction."""
    env = np.ones((1, 1), dtype=complex)
    for i, g in enumerate(state.gammas):
        a = g * state.lambdas[i + 1][None, None, :]
        env = np.einsum("ab,asc,bsd->cd", env, a, a.conj(), optimize=True)
    return float(np.real(np.trace(env)))


def to_statevector(state: MPSState) -> np.ndarray:
    """Dense |Ψ⟩ with site 0 as the most significant index. Small chains only."""
    psi = np.ones((1, 1), dtype=complex)
    for i, g in enumerate(state.gammas):
        a = g * state.lambdas[i + 1][None, None, :]
        psi = np.tensordot(psi, a, axes=(1, 0)).reshape(-1, a.shape[2])
    return psi[:, 0]


def chain_hamiltonian(
    params: SystemParams,
    chain: ChainCoefficients,
    local_dim: int,
) -> np.ndarray:
    """Dense many-body chain Hamiltonian, same term split as the gates. Small chains only."""
    n = chain.n_sites
    dim = local_dim ** n
    h = np.zeros((dim, dim), dtype=complex)
    for bond in range(n - 1):
        term = bond_hamiltonian(params, chain, bond, local_dim)
        left = np.eye(local_dim ** bond)
        right = np.eye(local_dim ** (n - bond - 2))
        h += np.kron(np.kron(left, term), right)
    return h


# --- checkpoints ----------------------------------------------------------

def save_checkpoint(state: MPSState, path: str) -> None:
    """Binary dump: magic, uint32 header, bond sizes, then λ (float64) and Γ (complex128), LE."""
    header = np.array(
        [CHECKPOINT_VERSION, state.n_sites, state.local_dim, state.bond_dim], dtype="<u4",
    )
    sizes = np.array(state.bond_dimensions(), dtype="<u4")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(header.tobytes())
        f.write(sizes.tobytes())
        f.write(struct.pack("<d", state.trunc_error_accum))
        for lam in state.lambdas:
            f.write(np.ascontiguousarray(lam, dtype="<f8").tobytes())
        for g in state.gammas:
            f.write(np.ascontiguousarray(g, dtype="<c16").tobytes())


def load_checkpoint(path: str) -> MPSState:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not an MPS checkpoint")
    pos = 4
    version, n, m, bond_dim = np.frombuffer(data, dtype="<u4", count=4, offset=pos)
    pos += 16
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    sizes = np.frombuffer(data, dtype="<u4", count=n + 1, offset=pos).astype(int)
    pos += 4 * (n + 1)
    (trunc,) = struct.unpack_from("<d", data, pos)
    pos += 8
    lambdas = []
    for size in sizes:
        lambdas.append(np.frombuffer(data, dtype="<f8", count=size, offset=pos).copy())
        pos += 8 * size
    gammas = []
    for i in range(n):
        shape = (sizes[i], int(m), sizes[i + 1])
        count = shape[0] * shape[1] * shape[2]
        gammas.append(
            np.frombuffer(data, dtype="<c16", count=count, offset=pos).reshape(shape).copy()
        )
        pos += 16 * count
    return MPSState(gammas=gammas, lambdas=lambdas, bond_dim=int(bond_dim),
                    trunc_error_accum=float(trunc))
