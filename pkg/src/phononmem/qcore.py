"""Small-dimension Hermitian linear algebra and qubit channel primitives.

States are plain ``numpy`` complex arrays: kets of shape ``(d,)`` and density
matrices of shape ``(d, d)`` with ``d`` in ``{2, 4}``. Two-qubit states are
ordered signal (subsystem 0) then herald (subsystem 1).

Qubit channels are given by a process matrix ``chi`` over the operator basis
``(I, X, Y, Z)`` acting as ``rho -> sum_mn chi[m, n] P_m rho P_n``.
"""

import numpy as np

from . import constants as C
from .errors import ContractViolationError, InvalidDimensionError, NotPSDError

SIGNAL = 0
HERALD = 1

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = np.stack([I2, X, Y, Z])
PAULI_LABELS = ("I", "X", "Y", "Z")

_S = 1.0 / np.sqrt(2.0)
# Polarization tokens for the over-complete six-state set.
KETS = {
    "H": np.array([1, 0], dtype=np.complex128),
    "V": np.array([0, 1], dtype=np.complex128),
    "D": np.array([_S, _S], dtype=np.complex128),
    "A": np.array([_S, -_S], dtype=np.complex128),
    "R": np.array([_S, 1j * _S], dtype=np.complex128),
    "L": np.array([_S, -1j * _S], dtype=np.complex128),
}
SIX_STATES = tuple(KETS)


def ket(token):
    try:
        return KETS[token].copy()
    except KeyError:
        raise ContractViolationError(f"unknown state token {token!r}; expected one of {SIX_STATES}") from None


def projector(psi):
    psi = np.asarray(psi, dtype=np.complex128)
    return np.outer(psi, psi.conj())


def token_projector(*tokens):
    """Projector onto a product of six-state tokens, e.g. ``("H", "D")``."""
    out = np.ones((1, 1), dtype=np.complex128)
    for t in tokens:
        out = np.kron(out, projector(ket(t)))
    return out


def maximally_mixed(d):
    return np.eye(d, dtype=np.complex128) / d


def phi_plus():
    """Ket of (|00> + |11>)/sqrt(2)."""
    return np.array([_S, 0, 0, _S], dtype=np.complex128)


def phi_plus_dm():
    return projector(phi_plus())


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _square(m, allowed=(2, 4)):
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or (allowed and m.shape[0] not in allowed):
        raise InvalidDimensionError(f"expected a square matrix of dimension {allowed}, got shape {m.shape}")
    return m


def is_hermitian(m, tol=C.HERMITIAN_TOL):
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= tol


def check_pure_state(psi):
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.ndim != 1 or psi.size not in (2, 4):
        raise InvalidDimensionError(f"expected a ket of length 2 or 4, got shape {psi.shape}")
    if abs(np.linalg.norm(psi) - 1.0) > C.PURE_NORM_TOL:
        raise ContractViolationError(f"ket norm {np.linalg.norm(psi)!r} is not 1")
    return psi


def check_density_matrix(rho):
    """Return ``rho`` as a complex array, raising if it is not a valid state."""
    rho = _square(rho)
    if not is_hermitian(rho):
        raise ContractViolationError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > C.TRACE_TOL:
        raise ContractViolationError(f"density matrix has trace {tr!r}")
    wmin = np.linalg.eigvalsh(rho)[0]
    if wmin < -C.PSD_TOL:
        raise NotPSDError(f"density matrix has eigenvalue {wmin!r}")
    return rho


def tp_residual(chi):
    """Max entry of ``sum_mn chi[m, n] P_n P_m - I``."""
    chi = np.asarray(chi, dtype=np.complex128)
    acc = np.einsum("mn,nab,mbc->ac", chi, PAULIS, PAULIS)
    return float(np.max(np.abs(acc - I2)))


def check_process_matrix(chi):
    chi = np.asarray(chi, dtype=np.complex128)
    if chi.shape != (4, 4):
        raise InvalidDimensionError(f"process matrix must be 4x4, got {chi.shape}")
    if not is_hermitian(chi):
        raise ContractViolationError("process matrix is not Hermitian")
    wmin = np.linalg.eigvalsh(chi)[0]
    if wmin < -C.PSD_TOL:
        raise ContractViolationError(f"process matrix is not completely positive (eigenvalue {wmin!r})")
    res = tp_residual(chi)
    if res > C.TP_TOL:
        raise ContractViolationError(f"process matrix is not trace preserving (residual {res:.3g})")
    return chi


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def tensor_product(a, b):
    a = _square(a, (2,))
    b = _square(b, (2,))
    return np.kron(a, b)


def partial_trace(rho, keep):
    """Reduced state of subsystem ``keep`` (0 signal, 1 herald) of a 4x4 state."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise InvalidDimensionError(f"partial trace needs a 4x4 matrix, got {rho.shape}")
    t = rho.reshape(2, 2, 2, 2)
    if keep == SIGNAL:
        return np.einsum("ajbj->ab", t)
    if keep == HERALD:
        return np.einsum("jajb->ab", t)
    raise ContractViolationError(f"invalid subsystem index {keep!r}")


def apply_chi(chi, rho):
    chi = check_process_matrix(chi)
    rho = _square(rho, (2,))
    return np.einsum("mn,mab,bc,ncd->ad", chi, PAULIS, rho, PAULIS)


def apply_one_sided(chi, rho, side=SIGNAL):
    """Apply a qubit channel to one half of a two-qubit state."""
    chi = check_process_matrix(chi)
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise InvalidDimensionError(f"one-sided channel needs a 4x4 state, got {rho.shape}")
    if side == SIGNAL:
        ops = np.stack([np.kron(P, I2) for P in PAULIS])
    elif side == HERALD:
        ops = np.stack([np.kron(I2, P) for P in PAULIS])
    else:
        raise ContractViolationError(f"invalid subsystem index {side!r}")
    return np.einsum("mn,mab,bc,ncd->ad", chi, ops, rho, ops)


def hermitian_eigensystem(m):
    """Eigenvalues in descending order and matching orthonormal eigenvectors (columns)."""
    m = np.asarray(m, dtype=np.complex128)
    if not is_hermitian(m):
        raise ContractViolationError("matrix is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(m):
    """Principal square root of a PSD matrix.

    Eigenvalues in ``[-PSD_TOL, EIG_ZERO_RTOL * max]`` are set to zero so that
    round-off on rank-deficient inputs is not amplified by the square root.
    """
    w, v = hermitian_eigensystem(m)
    if w[-1] < -C.PSD_TOL:
        raise NotPSDError(f"matrix has eigenvalue {w[-1]!r}")
    w = np.where(w > C.EIG_ZERO_RTOL * max(w[0], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def project_psd(m, trace=1.0):
    """Nearest PSD matrix with the given trace in eigenvalue space (clip then rescale)."""
    w, v = hermitian_eigensystem(0.5 * (m + np.asarray(m).conj().T))
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return np.eye(len(w), dtype=np.complex128) * trace / len(w)
    w *= trace / w.sum()
    return (v * w) @ v.conj().T


# ---------------------------------------------------------------------------
# channel representations
# ---------------------------------------------------------------------------

def _choi_vectors():
    omega = np.array([1, 0, 0, 1], dtype=np.complex128)
    return np.stack([np.kron(I2, P) @ omega for P in PAULIS], axis=1)


CHOI_BASIS = _choi_vectors()


def chi_to_choi(chi):
    """Choi matrix ``J = sum_ij |i><j| (x) E(|i><j|)`` (input first, trace 2)."""
    return CHOI_BASIS @ np.asarray(chi, dtype=np.complex128) @ CHOI_BASIS.conj().T


def choi_to_chi(J):
    return CHOI_BASIS.conj().T @ np.asarray(J, dtype=np.complex128) @ CHOI_BASIS / 4.0


def unitary_chi(U):
    """Rank-1 process matrix of the unitary channel ``rho -> U rho U^dag``."""
    u = np.array([np.trace(P @ U) / 2.0 for P in PAULIS])
    return np.outer(u, u.conj())


IDENTITY_CHI = unitary_chi(I2)


def trace_distance(a, b):
    w = np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))
    return 0.5 * float(np.sum(np.abs(w)))


# ---------------------------------------------------------------------------
# random objects for property tests and Monte Carlo
# ---------------------------------------------------------------------------

def random_density_matrix(d, rng, rank=None):
    rank = d if rank is None else rank
    G = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    M = G @ G.conj().T
    return M / np.trace(M).real


def random_pure_state(d, rng):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_unitary(d, rng):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    Q, R = np.linalg.qr(G)
    return Q * (np.diag(R) / np.abs(np.diag(R)))
