"""Hot inner kernels of the likelihood optimizers.

Each kernel has a pure-numpy implementation and a numba ``@njit`` twin with
identical semantics. The public names bound at import time point at the
numba versions unless ``PHONONMEM_NUMBA=0`` is set in the environment or
numba cannot be imported. Both variants stay importable for tests and the
benchmark.

Parameter layout of a Cholesky vector ``theta`` for a ``d x d`` factor ``L``:
the ``d`` real diagonal entries first, then the real and imaginary part of
each strictly lower entry ``(a, b), a > b`` in row-major order.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None


def _env_wants_numba():
    return os.environ.get("PHONONMEM_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _env_wants_numba()
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def theta_to_cholesky_numpy(theta, d):
    L = np.zeros((d, d), dtype=np.complex128)
    L[np.diag_indices(d)] = theta[:d]
    rows, cols = np.tril_indices(d, -1)
    off = theta[d:].reshape(-1, 2)
    L[rows, cols] = off[:, 0] + 1j * off[:, 1]
    return L


def born_poisson_numpy(E, counts, weights, M):
    """Poisson log-likelihood of counts under rates ``w_i Tr(E_i M)``.

    Returns ``(loglik, G)`` with ``G = sum_i (n_i / lam_i - 1) w_i E_i``, the
    gradient of the log-likelihood with respect to ``M`` (as a Hermitian
    matrix, in the sense ``dL = Re Tr(G dM)``). ``loglik`` is ``-inf`` when a
    setting with nonzero counts has a non-positive rate.
    """
    q = np.einsum("iab,ba->i", E, M).real
    lam = weights * q
    pos = counts > 0
    if np.any(lam[pos] <= 0.0):
        return -np.inf, np.zeros_like(M)
    ll = np.sum(counts[pos] * np.log(lam[pos])) - np.sum(lam)
    ratio = np.zeros_like(lam)
    ratio[pos] = counts[pos] / lam[pos]
    G = np.einsum("i,iab->ab", (ratio - 1.0) * weights, E)
    return ll, G


def cholesky_chain_numpy(L, G):
    """Pull a gradient ``G`` w.r.t. ``M = L L^dag`` back onto ``theta``."""
    d = L.shape[0]
    W = (L.conj().T @ G).T
    rows, cols = np.tril_indices(d, -1)
    grad = np.empty(d * d)
    grad[:d] = 2.0 * np.diag(W).real
    off = np.empty((rows.size, 2))
    off[:, 0] = 2.0 * W[rows, cols].real
    off[:, 1] = -2.0 * W[rows, cols].imag
    grad[d:] = off.ravel()
    return grad


def state_objective_numpy(theta, E, counts, weights):
    """Log-likelihood and its gradient in Cholesky coordinates."""
    d = E.shape[1]
    L = theta_to_cholesky_numpy(theta, d)
    M = L @ L.conj().T
    ll, G = born_poisson_numpy(E, counts, weights, M)
    if not np.isfinite(ll):
        return ll, np.zeros_like(theta)
    return ll, cholesky_chain_numpy(L, G)


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def theta_to_cholesky_numba(theta, d):
        L = np.zeros((d, d), dtype=np.complex128)
        for a in range(d):
            L[a, a] = theta[a]
        k = d
        for a in range(d):
            for b in range(a):
                L[a, b] = theta[k] + 1j * theta[k + 1]
                k += 2
        return L

    @numba.njit(cache=True)
    def born_poisson_numba(E, counts, weights, M):
        n_set, d, _ = E.shape
        G = np.zeros((d, d), dtype=np.complex128)
        coef = np.empty(n_set)
        ll = 0.0
        for i in range(n_set):
            q = 0.0
            for a in range(d):
                for b in range(d):
                    q += (E[i, a, b] * M[b, a]).real
            lam = weights[i] * q
            if counts[i] > 0.0:
                if lam <= 0.0:
                    return -np.inf, np.zeros((d, d), dtype=np.complex128)
                ll += counts[i] * np.log(lam)
                coef[i] = (counts[i] / lam - 1.0) * weights[i]
            else:
                coef[i] = -weights[i]
            ll -= lam
        for i in range(n_set):
            c = coef[i]
            for a in range(d):
                for b in range(d):
                    G[a, b] += c * E[i, a, b]
        return ll, G

    @numba.njit(cache=True)
    def cholesky_chain_numba(L, G):
        d = L.shape[0]
        grad = np.empty(d * d)
        # W[a, b] = sum_c conj(L[c, b]) G[c, a]
        for a in range(d):
            w = 0.0j
            for c in range(d):
                w += np.conj(L[c, a]) * G[c, a]
            grad[a] = 2.0 * w.real
        k = d
        for a in range(d):
            for b in range(a):
                w = 0.0j
                for c in range(d):
                    w += np.conj(L[c, b]) * G[c, a]
                grad[k] = 2.0 * w.real
                grad[k + 1] = -2.0 * w.imag
                k += 2
        return grad

    @numba.njit(cache=True)
    def state_objective_numba(theta, E, counts, weights):
        d = E.shape[1]
        L = theta_to_cholesky_numba(theta, d)
        M = L @ L.conj().T
        ll, G = born_poisson_numba(E, counts, weights, M)
        if not np.isfinite(ll):
            return ll, np.zeros_like(theta)
        return ll, cholesky_chain_numba(L, G)


if USE_NUMBA:
    theta_to_cholesky = theta_to_cholesky_numba
    born_poisson = born_poisson_numba
    cholesky_chain = cholesky_chain_numba
    state_objective = state_objective_numba
else:
    theta_to_cholesky = theta_to_cholesky_numpy
    born_poisson = born_poisson_numpy
    cholesky_chain = cholesky_chain_numpy
    state_objective = state_objective_numpy


def cholesky_to_theta(L):
    d = L.shape[0]
    rows, cols = np.tril_indices(d, -1)
    theta = np.empty(d * d)
    theta[:d] = np.diag(L).real
    off = np.stack([L[rows, cols].real, L[rows, cols].imag], axis=1)
    theta[d:] = off.ravel()
    return theta
