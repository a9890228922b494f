"""Tests for kerrsim.mps module."""
import os
import tempfile
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from kerrsim.chain import ChainCoefficients, build_chain
from kerrsim.errors import NumericalError, TruncationError
from kerrsim.fock import coherent_vector, destroy
from kerrsim.model import InitialState, SimulationConfig, SystemParams
from kerrsim.mps import (
    TwoSiteGate,
    bond_hamiltonian,
    build_gates,
    chain_hamiltonian,
    evolve,
    init_state,
    load_checkpoint,
    norm,
    product_state,
    reduced_density_matrix,
    save_checkpoint,
    to_statevector,
    trotter_step,
)
from kerrsim.observables import mean_field, photon_number


def _toy():
    """Three sites, four levels each: small enough for exact diagonalization."""
    params = SystemParams(delta=-0.5, chi2=0.3, gamma=0.2, drive=0.2, cutoff=2.0)
    config = SimulationConfig(n_sites=3, local_dim=4, bond_dim=16, dt=0.01, t_total=0.5)
    return params, config


def _exact_state(params, config, initial, t):
    chain = build_chain(params, config.n_sites)
    h = chain_hamiltonian(params, chain, config.local_dim)
    vacuum = np.zeros(config.local_dim, dtype=complex)
    vacuum[0] = 1.0
    psi = coherent_vector(initial.alpha, config.local_dim)
    for _ in range(config.n_sites - 1):
        psi = np.kron(psi, vacuum)
    return expm(-1j * h * t) @ psi


def _free_params():
    return SystemParams(delta=0.0, chi2=0.0, gamma=1.0, drive=0.0)


def _two_site_chain(eta):
    """System plus one bath site with zero frequency, joined by a bond of strength eta."""
    return ChainCoefficients(eta_sys=eta, site_freqs=(0.0,), hoppings=())


def _two_site_config(dt=0.01, t_total=1.0):
    return SimulationConfig(n_sites=2, local_dim=2, bond_dim=2, dt=dt, t_total=t_total)


def _trotter_error(dt):
    params, config = _toy()
    config = replace(config, dt=dt)
    initial = InitialState(amplitude=0.3, phase=0.5)
    gates = build_gates(params, build_chain(params, config.n_sites), config)
    result = evolve(init_state(config, initial), gates, config)
    exact = _exact_state(params, config, initial, config.n_steps * dt)
    return np.linalg.norm(to_statevector(result.final_state) - exact)


class TestConstruction:
    def test_product_state_shapes(self):
        state = product_state([np.array([1, 0]), np.array([0, 1]), np.array([1, 1])], bond_dim=4)
        assert state.n_sites == 3
        assert state.local_dim == 2
        assert state.bond_dimensions() == [1, 1, 1, 1]
        assert norm(state) == pytest.approx(1.0)

    def test_init_state_puts_coherent_state_on_system(self):
        config = SimulationConfig(n_sites=4, local_dim=12, bond_dim=4)
        state = init_state(config, InitialState(amplitude=1.0, phase=0.3))
        rho = reduced_density_matrix(state, 0)
        assert mean_field(rho) == pytest.approx(np.exp(0.3j), abs=1e-6)
        assert mean_field(reduced_density_matrix(state, 2)) == 0

    def test_init_state_rejects_lossy_truncation(self):
        config = SimulationConfig(n_sites=3, local_dim=4, bond_dim=4)
        with pytest.raises(TruncationError, match="local_dim"):
            init_state(config, InitialState(amplitude=2.5))

    def test_statevector_of_product(self):
        state = product_state([np.array([0, 1]), np.array([1, 0])], bond_dim=2)
        np.testing.assert_allclose(to_statevector(state), [0, 0, 1, 0])


class TestGates:
    def test_bond_hamiltonian_is_hermitian(self):
        params, config = _toy()
        chain = build_chain(params, config.n_sites)
        for bond in range(config.n_sites - 1):
            h = bond_hamiltonian(params, chain, bond, config.local_dim)
            np.testing.assert_allclose(h, h.conj().T, atol=1e-14)

    def test_gate_layers(self):
        params = SystemParams(delta=-0.5, chi2=0.3, gamma=0.2, cutoff=2.0)
        config = SimulationConfig(n_sites=6, local_dim=3, bond_dim=4, dt=0.01, t_total=0.1)
        gates = build_gates(params, build_chain(params, 6), config)
        assert [g.site_index for g in gates.odd] == [0, 2, 4]
        assert [g.site_index for g in gates.even] == [1, 3]
        assert gates.dt == 0.01

    def test_gate_unitarity_is_enforced(self):
        with pytest.raises(NumericalError, match="unitary"):
            TwoSiteGate(site_index=0, matrix=2 * np.eye(4))

    def test_chain_length_must_match(self):
        params, config = _toy()
        with pytest.raises(ValueError):
            build_gates(params, build_chain(params, 5), config)

    def test_two_level_bond_is_a_beam_splitter(self):
        eta, dt = 0.7, 0.1
        gates = build_gates(_free_params(), _two_site_chain(eta), _two_site_config(dt=dt))
        assert gates.even == []
        theta = eta * dt / 2
        expected = np.eye(4, dtype=complex)
        expected[1, 1] = expected[2, 2] = np.cos(theta)
        expected[1, 2] = expected[2, 1] = -1j * np.sin(theta)
        np.testing.assert_allclose(gates.odd[0].matrix, expected, atol=1e-14)

    def test_uncoupled_free_bond_is_identity(self):
        gates = build_gates(_free_params(), _two_site_chain(0.0), _two_site_config())
        np.testing.assert_allclose(gates.odd[0].matrix, np.eye(4), atol=1e-14)


class TestEvolution:
    def test_matches_exact_diagonalization(self):
        params, config = _toy()
        initial = InitialState(amplitude=0.3, phase=0.5)
        state = init_state(config, initial)
        gates = build_gates(params, build_chain(params, config.n_sites), config)
        result = evolve(state, gates, config)

        exact = _exact_state(params, config, initial, config.n_steps * config.dt)
        overlap = abs(np.vdot(exact, to_statevector(result.final_state))) ** 2
        assert overlap >= 1 - 1e-6

    def test_trotter_error_is_second_order(self):
        ratio = _trotter_error(0.05) / _trotter_error(0.025)
        assert 3.5 < ratio < 4.5

    def test_excitation_swaps_across_a_resonant_bond(self):
        eta = np.pi / 2
        config = _two_site_config(dt=0.01, t_total=1.0)
        gates = build_gates(_free_params(), _two_site_chain(eta), config)
        state = product_state([np.array([0, 1]), np.array([1, 0])], bond_dim=2)
        result = evolve(state, gates, config)
        for snap in result.snapshots:
            assert photon_number(snap.rho) == pytest.approx(np.cos(eta * snap.time) ** 2, abs=1e-10)
        # after half a Rabi period the photon sits on the bath site
        np.testing.assert_allclose(result.snapshots[-1].rho.entries, np.diag([1.0, 0.0]),
                                   atol=1e-10)

    def test_reduced_density_matrix_matches_partial_trace(self):
        params, config = _toy()
        initial = InitialState(amplitude=0.3)
        result = evolve(init_state(config, initial),
                        build_gates(params, build_chain(params, 3), config), config)
        exact = _exact_state(params, config, initial, config.n_steps * config.dt)
        m = config.local_dim
        psi = exact.reshape(m, m * m)
        rho_exact = psi @ psi.conj().T
        np.testing.assert_allclose(result.snapshots[-1].rho.entries, rho_exact, atol=1e-4)

    def test_norm_conserved_without_truncation(self):
        params, config = _toy()
        state = init_state(config, InitialState(amplitude=0.3))
        gates = build_gates(params, build_chain(params, 3), config)
        for _ in range(20):
            trotter_step(state, gates.odd, gates.even)
            assert norm(state) == pytest.approx(1.0, abs=1e-10)
        assert state.trunc_error_accum < 1e-12

    def test_truncation_is_accumulated(self):
        params = SystemParams(delta=-0.5, chi2=0.3, gamma=1.0, drive=1.0, cutoff=5.0)
        config = SimulationConfig(n_sites=4, local_dim=4, bond_dim=1, dt=0.05, t_total=0.5)
        state = init_state(config, InitialState())
        result = evolve(state, build_gates(params, build_chain(params, 4), config), config)
        assert result.final_state.trunc_error_accum > 0
        assert norm(result.final_state) == pytest.approx(1.0, abs=1e-10)

    def test_snapshots_follow_stride(self):
        params, _ = _toy()
        config = SimulationConfig(n_sites=3, local_dim=4, bond_dim=8, dt=0.01, t_total=0.05,
                                  snapshot_stride=2)
        seen = []
        result = evolve(init_state(config, InitialState()),
                        build_gates(params, build_chain(params, 3), config), config,
                        observer=lambda t, rho, trunc: seen.append(t))
        assert [s.step for s in result.snapshots] == [0, 2, 4, 5]
        np.testing.assert_allclose(seen, result.times)

    def test_thread_pool_gives_identical_result(self):
        params = SystemParams(delta=-0.5, chi2=0.3, gamma=1.0, drive=0.5, cutoff=5.0)
        config = SimulationConfig(n_sites=6, local_dim=3, bond_dim=6, dt=0.02, t_total=0.2)
        gates = build_gates(params, build_chain(params, 6), config)
        serial = evolve(init_state(config, InitialState()), gates, config)
        pooled = evolve(init_state(config, InitialState()), gates, config, max_workers=3)
        np.testing.assert_allclose(serial.snapshots[-1].rho.entries,
                                   pooled.snapshots[-1].rho.entries, atol=1e-12)

    def test_linear_chain_follows_single_particle_dynamics(self):
        # a coherent product state stays coherent, so ⟨a_j⟩ obeys the hopping matrix
        params = SystemParams(delta=-2.0, chi2=0.0, gamma=1.0, drive=0.5, cutoff=5.0)
        n_sites = 8
        config = SimulationConfig(n_sites=n_sites, local_dim=6, bond_dim=2, dt=0.01, t_total=0.5)
        chain = build_chain(params, n_sites)
        result = evolve(init_state(config, InitialState()),
                        build_gates(params, chain, config), config)

        h = np.diag([params.delta] + list(chain.site_freqs)).astype(complex)
        for b, c in enumerate(chain.bond_couplings):
            h[b, b + 1] = h[b + 1, b] = c
        generator = np.zeros((n_sites + 1, n_sites + 1), dtype=complex)
        generator[:n_sites, :n_sites] = -1j * h
        generator[0, n_sites] = params.drive
        for snap in result.snapshots[::10]:
            exact = expm(generator * snap.time)[0, n_sites]
            assert mean_field(snap.rho) == pytest.approx(exact, abs=2e-4)


class TestCheckpoint:
    def test_round_trip(self):
        params, config = _toy()
        state = init_state(config, InitialState(amplitude=0.3))
        gates = build_gates(params, build_chain(params, 3), config)
        for _ in range(5):
            trotter_step(state, gates.odd, gates.even)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "state.kmps")
            save_checkpoint(state, path)
            loaded = load_checkpoint(path)
        assert loaded.bond_dim == state.bond_dim
        assert loaded.bond_dimensions() == state.bond_dimensions()
        assert loaded.trunc_error_accum == state.trunc_error_accum
        np.testing.assert_array_equal(to_statevector(loaded), to_statevector(state))

    def test_rejects_foreign_file(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "junk.bin")
            with open(path, "wb") as f:
                f.write(b"NOPE" + bytes(32))
            with pytest.raises(ValueError, match="checkpoint"):
                load_checkpoint(path)


def test_destroy_used_for_mean_field_is_consistent():
    config = SimulationConfig(n_sites=2, local_dim=8, bond_dim=2)
    state = init_state(config, InitialState(amplitude=0.5))
    rho = reduced_density_matrix(state, 0).entries
    assert np.trace(destroy(8) @ rho) == pytest.approx(0.5, abs=1e-6)
