import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from seqreadout.dynamics import (
    DeviceParams,
    evolve_branches,
    evolve_interaction,
    evolve_with_jump,
    interaction_hamiltonian,
    level_energies,
    lindblad_evolve,
    mean_field,
    mean_photon_number,
    rotation_rate,
    sample_decay_times,
)
from seqreadout.errors import InvalidTime, ValidationError
from seqreadout.hilbert import ReadoutState, coherent_state, fock_state
from seqreadout.tomography import wigner_direct, wigner_grid

from conftest import random_density_matrix, random_ket

TWO_PI = 2 * math.pi

# <a> after 100 ns from |5.8>, dim 150; frozen from a scipy expm oracle on the full Hamiltonian
FROZEN_MEAN_G = 5.427988122842489 + 2.012731807931144j
FROZEN_MEAN_E = -5.359398388057932 + 1.599267167635019j


class TestDeviceParams:
    def test_defaults(self):
        p = DeviceParams()
        assert p.chi == pytest.approx(TWO_PI * 2.05e6)
        assert p.kerr_g == pytest.approx(TWO_PI * 8.4e3)
        assert p.kerr_e == pytest.approx(TWO_PI * 37e3)
        assert p.kappa_b == pytest.approx(TWO_PI * 21e6)
        assert p.kappa_r == pytest.approx(TWO_PI * 250e3)
        assert (p.eta, p.t1, p.t2) == (0.11, 6.1e-6, 9.2e-6)
        assert (p.thermal_excitation, p.pi_pulse_fidelity) == (0.008, 0.995)
        assert (p.if_freq, p.sample_rate) == (50e6, 1e9)

    @pytest.mark.parametrize("change", [
        {"eta": 0.0}, {"eta": 1.2}, {"t1": -1.0}, {"t2": 20e-6}, {"chi": -1.0}, {"kerr_e": math.nan},
        {"thermal_excitation": 1.0}, {"pi_pulse_fidelity": 0.0}, {"sample_rate": 0.0},
    ])
    def test_invalid(self, change):
        with pytest.raises(ValidationError):
            DeviceParams().with_(**change)

    def test_zero_mode_losses_allowed(self):
        p = DeviceParams().with_(kappa_r=0.0, kappa_b=0.0)
        assert p.kappa_r == 0.0

    def test_to_dict_roundtrip(self):
        p = DeviceParams()
        assert DeviceParams(**p.to_dict()) == p


class TestHamiltonian:
    def test_ground_without_kerr_is_zero(self):
        p = DeviceParams().with_(kerr_g=0.0)
        assert not np.any(interaction_hamiltonian("g", p, 6).entries)

    def test_dispersive_only(self):
        p = DeviceParams().with_(chi=1.0, kerr_e=0.0)
        np.testing.assert_allclose(np.diag(interaction_hamiltonian("e", p, 3).entries), [0, -1, -2])

    def test_kerr_only(self):
        p = DeviceParams().with_(chi=0.0, kerr_e=1.0)
        np.testing.assert_allclose(np.diag(interaction_hamiltonian("e", p, 3).entries), [0, 0, -2])

    def test_diagonal(self):
        h = interaction_hamiltonian("e", DeviceParams(), 10).entries
        assert np.count_nonzero(h - np.diag(np.diag(h))) == 0

    def test_bad_branch(self):
        with pytest.raises(ValidationError):
            level_energies("f", DeviceParams(), 4)


class TestEvolution:
    def test_zero_time(self):
        s = coherent_state(2.0, 40)
        np.testing.assert_allclose(evolve_interaction(s, "e", 0.0, DeviceParams()).data, s.data)

    def test_negative_time(self):
        with pytest.raises(InvalidTime):
            evolve_interaction(coherent_state(1.0, 20), "g", -1e-9, DeviceParams())

    @pytest.mark.parametrize("t", [10e-9, 100e-9, 236e-9, 500e-9])
    def test_dispersive_rotation(self, t):
        p = DeviceParams().with_(kerr_g=0.0, kerr_e=0.0)
        m = mean_field(evolve_interaction(coherent_state(5.8, 150), "e", t, p))
        assert abs(m - 5.8 * np.exp(1j * p.chi * t)) < 1e-8

    def test_frozen_mean_fields(self):
        s = coherent_state(5.8, 150)
        p = DeviceParams()
        assert abs(mean_field(evolve_interaction(s, "g", 100e-9, p)) - FROZEN_MEAN_G) < 1e-10
        assert abs(mean_field(evolve_interaction(s, "e", 100e-9, p)) - FROZEN_MEAN_E) < 1e-10

    def test_ground_branch_nearly_gaussian(self):
        s = evolve_interaction(coherent_state(5.8, 150), "g", 100e-9, DeviceParams())
        w = wigner_direct(s, wigner_grid(8.0, 60))
        assert w.values.min() > -1e-3

    @given(st.integers(0, 2**32 - 1), st.floats(0, 1e-6), st.sampled_from("ge"))
    def test_closed_form_matches_expm(self, seed, t, branch):
        rng = np.random.default_rng(seed)
        dim = 20
        psi = random_ket(rng, dim)
        p = DeviceParams()
        h = interaction_hamiltonian(branch, p, dim).entries
        ref = expm(-1j * h * t) @ psi
        out = evolve_interaction(ReadoutState(dim, "pure", psi), branch, t, p).data
        np.testing.assert_allclose(out, ref, atol=1e-10)

    @given(st.floats(0, 1e-6), st.sampled_from("ge"))
    def test_norm_preserved(self, t, branch):
        s = evolve_interaction(coherent_state(5.8, 150), branch, t, DeviceParams())
        assert abs(np.linalg.norm(s.data) - 1) < 1e-10

    @given(st.floats(0, 1e-6))
    def test_dispersive_keeps_populations(self, t):
        p = DeviceParams().with_(kerr_e=0.0)
        s = coherent_state(3.0 + 1j, 60)
        np.testing.assert_allclose(evolve_interaction(s, "e", t, p).populations(), s.populations(),
                                   atol=1e-14)

    def test_mixed_state_matches_pure(self, rng):
        p = DeviceParams()
        psi = random_ket(rng, 12)
        pure = evolve_interaction(ReadoutState(12, "pure", psi), "e", 80e-9, p)
        mixed = evolve_interaction(ReadoutState(12, "mixed", np.outer(psi, psi.conj())), "e", 80e-9, p)
        np.testing.assert_allclose(mixed.density_matrix(), pure.density_matrix(), atol=1e-13)

    def test_branch_label(self):
        s = evolve_interaction(coherent_state(1.0, 10), "e", 1e-9, DeviceParams())
        assert s.qubit_branch == "e"

    def test_evolve_branches(self):
        out = evolve_branches(coherent_state(1.0, 20), 50e-9, DeviceParams())
        assert set(out) == {"g", "e"}


class TestJump:
    def test_extremes_match_pure_branches(self):
        p, s, t = DeviceParams(), coherent_state(4.0, 80), 100e-9
        np.testing.assert_allclose(evolve_with_jump(s, t, 0.0, p).data,
                                   evolve_interaction(s, "e", t, p).data, atol=1e-14)
        np.testing.assert_allclose(evolve_with_jump(s, 0.0, t, p).data,
                                   evolve_interaction(s, "g", t, p).data, atol=1e-14)

    def test_sequential_composition(self):
        p, s = DeviceParams(), coherent_state(3.0, 60)
        seq = evolve_interaction(evolve_interaction(s, "e", 30e-9, p), "g", 70e-9, p)
        np.testing.assert_allclose(evolve_with_jump(s, 30e-9, 70e-9, p).data, seq.data, atol=1e-13)

    def test_negative(self):
        with pytest.raises(InvalidTime):
            evolve_with_jump(coherent_state(1.0, 10), -1.0, 0.0, DeviceParams())

    def test_decay_times_mean(self, rng):
        t = sample_decay_times(rng, 6.1e-6, 200_000)
        assert abs(t.mean() - 6.1e-6) < 4 * 6.1e-6 / math.sqrt(t.size)


class TestLindblad:
    def test_photon_decay_without_hamiltonian(self):
        kappa, t = 2 * math.pi * 250e3, 1e-6
        s = coherent_state(2.0, 40)
        out = lindblad_evolve(s, np.zeros(40), kappa, t)
        n = mean_photon_number(out)
        assert n == pytest.approx(4.0 * math.exp(-kappa * t), rel=1e-6)

    def test_coherent_state_stays_coherent(self):
        kappa, t = 1e6, 0.7e-6
        out = lindblad_evolve(coherent_state(1.5, 30), np.zeros(30), kappa, t)
        assert abs(mean_field(out) - 1.5 * math.exp(-kappa * t / 2)) < 1e-8

    def test_trace_preserved_with_decay(self):
        p = DeviceParams()
        out = evolve_interaction(coherent_state(3.0, 50), "e", 200e-9, p, include_decay=True)
        assert abs(np.trace(out.density_matrix()).real - 1) < 1e-8

    def test_zero_decay_equals_unitary(self):
        p = DeviceParams().with_(kappa_r=0.0)
        s = coherent_state(2.0, 30)
        a = evolve_interaction(s, "e", 100e-9, p, include_decay=True).density_matrix()
        b = evolve_interaction(s, "e", 100e-9, p).density_matrix()
        np.testing.assert_allclose(a, b, atol=1e-8)

    def test_random_mixed_trace(self, rng):
        rho = random_density_matrix(rng, 10)
        out = lindblad_evolve(ReadoutState(10, "mixed", rho), np.linspace(0, -1e7, 10), 5e6, 1e-7)
        assert abs(np.trace(out.density_matrix()).real - 1) < 1e-8


class TestRotationRate:
    def test_small_photon_number_limit(self):
        p = DeviceParams()
        assert rotation_rate("e", p, 0.0) == p.chi
        assert rotation_rate("g", p, 0.0) == 0.0

    def test_matches_phase_slope_at_low_photon_number(self):
        p = DeviceParams()
        s = coherent_state(0.3, 20)
        dt = 1e-9
        m1 = mean_field(evolve_interaction(s, "e", 50e-9, p))
        m2 = mean_field(evolve_interaction(s, "e", 50e-9 + dt, p))
        assert np.angle(m2 / m1) / dt == pytest.approx(rotation_rate("e", p, 0.09), rel=1e-3)
