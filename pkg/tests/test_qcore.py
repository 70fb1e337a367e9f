import numpy as np
import pytest
from hypothesis import given

from phononmem import memory, qcore
from phononmem.errors import ContractViolationError, InvalidDimensionError, NotPSDError
from strategies import cptp_chis, density_matrices, pure_states


def test_six_state_kets_are_normalized_and_paired():
    for t in qcore.SIX_STATES:
        assert np.isclose(np.linalg.norm(qcore.ket(t)), 1.0)
    for a, b in (("H", "V"), ("D", "A"), ("R", "L")):
        assert abs(np.vdot(qcore.ket(a), qcore.ket(b))) < 1e-15


def test_unknown_token_rejected():
    with pytest.raises(ContractViolationError):
        qcore.ket("Q")


def test_projector_is_idempotent():
    P = qcore.projector(qcore.ket("H"))
    np.testing.assert_allclose(P @ P, P, atol=qcore.C.PROJECTOR_TOL)


def test_check_density_matrix_rejects_bad_inputs():
    with pytest.raises(InvalidDimensionError):
        qcore.check_density_matrix(np.eye(3) / 3)
    with pytest.raises(ContractViolationError):
        qcore.check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(ContractViolationError):
        qcore.check_density_matrix(np.array([[0.5, 0.1], [0.3, 0.5]]))
    with pytest.raises(ContractViolationError):
        qcore.check_density_matrix(np.eye(2))


def test_check_pure_state_rejects_unnormalized():
    with pytest.raises(ContractViolationError):
        qcore.check_pure_state(np.array([1.0, 1.0]))


def test_eigensystem_examples():
    w, _ = qcore.hermitian_eigensystem(np.eye(2) / 2)
    np.testing.assert_allclose(w, [0.5, 0.5])
    w, _ = qcore.hermitian_eigensystem(qcore.Z)
    np.testing.assert_allclose(w, [1, -1])
    w, _ = qcore.hermitian_eigensystem(memory.werner_state(0.416))
    np.testing.assert_allclose(w, [0.562, 0.146, 0.146, 0.146], atol=1e-12)


def test_eigensystem_rejects_non_hermitian():
    with pytest.raises(ContractViolationError):
        qcore.hermitian_eigensystem(np.array([[0, 1], [0, 0]]))


def test_psd_sqrt_examples():
    np.testing.assert_allclose(qcore.psd_sqrt(np.eye(4) / 4), np.eye(4) / 2, atol=1e-15)
    np.testing.assert_allclose(qcore.psd_sqrt(np.diag([0.25, 0.75])), np.diag([0.5, np.sqrt(0.75)]), atol=1e-15)
    P = qcore.projector(qcore.ket("H"))
    np.testing.assert_allclose(qcore.psd_sqrt(P), P, atol=1e-15)


def test_psd_sqrt_clamps_tiny_negative_and_rejects_large():
    s = qcore.psd_sqrt(np.diag([1.0, -1e-12]))
    assert np.all(np.isfinite(s))
    with pytest.raises(NotPSDError):
        qcore.psd_sqrt(np.diag([1.0, -1e-6]))


def test_identity_chi_is_identity_map():
    rho = qcore.phi_plus_dm()
    np.testing.assert_allclose(qcore.apply_one_sided(qcore.IDENTITY_CHI, rho), rho, atol=1e-12)


def test_one_sided_depolarizing_gives_werner():
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        out = qcore.apply_one_sided(memory.storage_channel(p), qcore.phi_plus_dm(), qcore.SIGNAL)
        np.testing.assert_allclose(out, memory.werner_state(p), atol=1e-12)
        herald = qcore.apply_one_sided(memory.storage_channel(p), qcore.phi_plus_dm(), qcore.HERALD)
        np.testing.assert_allclose(herald, memory.werner_state(p), atol=1e-12)


def test_invalid_side_rejected():
    with pytest.raises(ContractViolationError):
        qcore.apply_one_sided(qcore.IDENTITY_CHI, qcore.phi_plus_dm(), side=2)
    with pytest.raises(ContractViolationError):
        qcore.partial_trace(qcore.phi_plus_dm(), keep=5)


def test_non_tp_chi_rejected():
    with pytest.raises(ContractViolationError):
        qcore.check_process_matrix(np.diag([0.5, 0, 0, 0]).astype(complex))


def test_chi_choi_round_trip(rng):
    chi = qcore.unitary_chi(qcore.random_unitary(2, rng))
    np.testing.assert_allclose(qcore.choi_to_chi(qcore.chi_to_choi(chi)), chi, atol=1e-14)
    # Choi of the identity channel is 2 |Phi+><Phi+|.
    np.testing.assert_allclose(qcore.chi_to_choi(qcore.IDENTITY_CHI), 2 * qcore.phi_plus_dm(), atol=1e-14)


def test_tensor_product_is_two_by_two_only():
    with pytest.raises(InvalidDimensionError):
        qcore.tensor_product(np.eye(4) / 4, np.eye(2) / 2)


@given(cptp_chis(), density_matrices(d=2))
def test_cptp_channel_output_is_a_state(chi, rho):
    qcore.check_density_matrix(qcore.apply_chi(chi, rho))


@given(density_matrices(d=2), density_matrices(d=2))
def test_partial_trace_inverts_tensor_product(a, b):
    ab = qcore.tensor_product(a, b)
    np.testing.assert_allclose(qcore.partial_trace(ab, qcore.SIGNAL), a, atol=1e-12)
    np.testing.assert_allclose(qcore.partial_trace(ab, qcore.HERALD), b, atol=1e-12)


@given(density_matrices())
def test_state_eigenvalues_sum_to_one(rho):
    w, v = qcore.hermitian_eigensystem(rho)
    assert abs(w.sum() - 1.0) < 1e-9
    assert np.all(np.diff(w) <= 1e-15)
    np.testing.assert_allclose((v * w) @ v.conj().T, rho, atol=qcore.C.EIG_RECON_TOL)


@given(density_matrices())
def test_psd_sqrt_squares_back(rho):
    s = qcore.psd_sqrt(rho)
    np.testing.assert_allclose(s @ s, rho, atol=qcore.C.SQRT_TOL)


@given(pure_states(d=4))
def test_pure_state_projector_is_a_state(psi):
    qcore.check_pure_state(psi)
    qcore.check_density_matrix(qcore.projector(psi))
