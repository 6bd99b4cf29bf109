import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm
from scipy.special import factorial

from seqreadout.errors import InvalidDimension, InvalidEfficiency, TruncationOverflow, ValidationError
from seqreadout.hilbert import (
    FockOperator,
    ReadoutState,
    annihilation_operator,
    apply_loss_channel,
    coherent_state,
    displacement_operator,
    expectation,
    fock_state,
    loss_kraus_weights,
    number_operator,
    parity_expectation,
    state_fidelity,
)

from conftest import random_density_matrix, random_ket


class TestOperators:
    def test_annihilation_dim2(self):
        np.testing.assert_array_equal(annihilation_operator(2).entries, [[0, 1], [0, 0]])

    def test_annihilation_entry(self):
        assert annihilation_operator(4).entries[2, 3] == pytest.approx(math.sqrt(3))

    @pytest.mark.parametrize("dim", [2, 5, 30])
    def test_commutator_identity_below_cutoff(self, dim):
        a = annihilation_operator(dim).entries
        comm = a @ a.conj().T - a.conj().T @ a
        np.testing.assert_allclose(comm[: dim - 1, : dim - 1], np.eye(dim - 1), atol=1e-12)

    @pytest.mark.parametrize("dim", [0, 1, -3])
    def test_bad_dimension(self, dim):
        with pytest.raises(InvalidDimension):
            annihilation_operator(dim)

    def test_hermitian_flag_checked(self):
        with pytest.raises(ValidationError):
            FockOperator(2, np.array([[0, 1], [0, 0]]), hermitian=True)

    def test_number_operator_diagonal(self):
        np.testing.assert_allclose(np.diag(number_operator(6).entries), np.arange(6))


class TestStates:
    def test_vacuum_limit(self):
        np.testing.assert_allclose(coherent_state(0, 10).data, fock_state(0, 10).data)

    def test_photon_number_at_operating_point(self):
        s = coherent_state(5.8, 150)
        n = expectation(s, number_operator(150)).real
        assert abs(n - 33.64) < 1e-6

    def test_mean_field_eigenvalue(self):
        s = coherent_state(2.1, 30)
        assert abs(expectation(s, annihilation_operator(30)) - 2.1) < 1e-9

    def test_coherent_amplitudes_match_factorial_oracle(self):
        alpha, dim = 1.3 - 0.4j, 40
        n = np.arange(dim)
        ref = np.exp(-abs(alpha) ** 2 / 2) * alpha ** n / np.sqrt(factorial(n))
        np.testing.assert_allclose(coherent_state(alpha, dim).data, ref / np.linalg.norm(ref),
                                   atol=1e-13)

    def test_truncation_guard(self):
        with pytest.raises(TruncationOverflow):
            coherent_state(5.8, 100)

    def test_unnormalized_rejected(self):
        with pytest.raises(ValidationError):
            ReadoutState(3, "pure", np.array([1.0, 1.0, 0.0]))

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(ValidationError):
            ReadoutState(2, "mixed", np.diag([1.5, -0.5]))

    def test_state_data_is_frozen(self):
        s = coherent_state(1.0, 10)
        with pytest.raises(ValueError):
            s.data[0] = 0


class TestDisplacement:
    def test_displaces_vacuum(self):
        alpha = 1.7 + 0.9j
        d = displacement_operator(alpha, 60).entries
        np.testing.assert_allclose(d[:, 0], coherent_state(alpha, 60).data, atol=1e-8)

    def test_zero_is_identity(self):
        np.testing.assert_allclose(displacement_operator(0, 12).entries, np.eye(12), atol=1e-15)

    @given(st.floats(0, 3), st.floats(0, 2 * math.pi))
    def test_inverse_pair(self, r, phi):
        a = r * np.exp(1j * phi)
        prod = displacement_operator(a, 60).entries @ displacement_operator(-a, 60).entries
        # the truncated product is exact away from the cutoff
        np.testing.assert_allclose(prod[:30, :30], np.eye(30), atol=1e-8)

    @given(st.integers(12, 40), st.floats(0, 1), st.floats(0, 2 * math.pi))
    def test_unitary_in_safe_range(self, dim, frac, phi):
        a = math.sqrt(frac * dim / 4) * np.exp(1j * phi) * 0.999
        d = displacement_operator(a, dim).entries
        # unitarity holds on the block the truncated generator cannot reach past the cutoff
        k = dim // 2
        err = np.max(np.abs((d.conj().T @ d)[:k, :k] - np.eye(k)))
        assert err < 1e-6

    def test_overflow(self):
        with pytest.raises(TruncationOverflow):
            displacement_operator(4.0, 30)


class TestParity:
    def test_vacuum(self):
        assert parity_expectation(fock_state(0, 5)) == 1.0

    def test_one_photon(self):
        assert parity_expectation(fock_state(1, 5)) == -1.0

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 1.5 + 1j])
    def test_coherent_closed_form(self, alpha):
        assert parity_expectation(coherent_state(alpha, 60)) == pytest.approx(
            math.exp(-2 * abs(alpha) ** 2), abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 12))
    def test_bounded(self, seed, dim):
        rho = random_density_matrix(np.random.default_rng(seed), dim)
        assert -1.0 <= parity_expectation(ReadoutState(dim, "mixed", rho)) <= 1.0


class TestLossChannel:
    def test_identity_at_unit_efficiency(self):
        s = coherent_state(1.2, 20)
        np.testing.assert_allclose(apply_loss_channel(s, 1.0).density_matrix(),
                                   s.density_matrix(), atol=1e-14)

    @pytest.mark.parametrize("eta", [0.11, 0.5, 0.9])
    def test_coherent_stays_coherent(self, eta):
        alpha = 2.5 - 1j
        out = apply_loss_channel(coherent_state(alpha, 60), eta)
        ref = coherent_state(math.sqrt(eta) * alpha, 60)
        assert state_fidelity(ref, out) > 1 - 1e-8

    def test_single_photon_binomial(self):
        p = apply_loss_channel(fock_state(1, 4), 0.5).populations()
        np.testing.assert_allclose(p[:2], [0.5, 0.5], atol=1e-14)

    def test_fock_binomial_oracle(self):
        n, eta = 6, 0.3
        p = apply_loss_channel(fock_state(n, 10), eta).populations()
        k = np.arange(n + 1)
        ref = factorial(n) / (factorial(k) * factorial(n - k)) * eta ** k * (1 - eta) ** (n - k)
        np.testing.assert_allclose(p[: n + 1], ref, atol=1e-14)

    @pytest.mark.parametrize("eta", [0.0, -0.1, 1.01])
    def test_invalid_efficiency(self, eta):
        with pytest.raises(InvalidEfficiency):
            apply_loss_channel(fock_state(0, 3), eta)

    @given(st.floats(0.0, 1.0, exclude_min=True), st.integers(2, 60))
    def test_kraus_weights_complete(self, eta, dim):
        # sum_k e[k, n]^2 is the binomial total for each n
        w = loss_kraus_weights(eta, dim)
        np.testing.assert_allclose((w ** 2).sum(axis=0), 1.0, atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.floats(0.01, 1.0))
    def test_trace_and_hermiticity(self, seed, dim, eta):
        rng = np.random.default_rng(seed)
        rho = random_density_matrix(rng, dim, rank=int(rng.integers(1, dim + 1)))
        out = apply_loss_channel(ReadoutState(dim, "mixed", rho), eta).density_matrix()
        assert abs(np.trace(out).real - 1) < 1e-9
        assert np.max(np.abs(out - out.conj().T)) < 1e-9

    def test_matches_generic_kraus_oracle(self, rng):
        # Kraus operators sum_n sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k><n|
        dim, eta = 8, 0.42
        rho = random_density_matrix(rng, dim)
        ref = np.zeros((dim, dim), complex)
        for k in range(dim):
            e = np.zeros((dim, dim))
            for n in range(k, dim):
                e[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
            ref += e @ rho @ e.T
        out = apply_loss_channel(ReadoutState(dim, "mixed", rho), eta).density_matrix()
        np.testing.assert_allclose(out, ref, atol=1e-13)


def test_fidelity_of_pure_ket_with_itself(rng):
    psi = random_ket(rng, 7)
    s = ReadoutState(7, "pure", psi)
    assert state_fidelity(s, s) == pytest.approx(1.0, abs=1e-12)


def test_expm_displacement_agrees_with_scipy():
    a = annihilation_operator(25).entries
    alpha = 0.8 + 0.3j
    ref = expm(alpha * a.conj().T - np.conj(alpha) * a)
    np.testing.assert_allclose(displacement_operator(alpha, 25).entries, ref, atol=1e-12)
