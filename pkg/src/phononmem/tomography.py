"""Simulated coincidence counting and maximum-likelihood tomography.

Measurements use the over-complete six-state set ``H, V, D, A, R, L``
(``|0>, |1>, |+>, |->, |+i>, |-i>``) on every analyzed qubit. Process data
additionally record which of the six states was prepared at the input.

Both reconstructions maximize the Poisson likelihood

    log L = sum_i n_i log lam_i - lam_i,   lam_i = t_i * rate * Tr(E_i X),

over a Cholesky factor of ``X``, so every estimate is positive by
construction. For states ``X`` is the unnormalized density matrix and the
rate is absorbed into its trace. For processes ``X`` is the Choi matrix kept
exactly trace preserving by the congruence ``X = (A^{-1/2} (x) I) M
(A^{-1/2} (x) I)`` with ``A = Tr_out M``; the overall rate is profiled out.
"""

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from . import constants as C
from . import qcore
from ._optim import bfgs_ascent, poisson_newton, simplex_ascent
from .errors import (ContractViolationError, ConvergenceError, InvalidDimensionError,
                     PhononMemError, SingularDesignError, ValidationError)


@dataclass(frozen=True)
class MeasurementSetting:
    """Analyzer tokens (one per detected qubit) plus timing and, for process data, the input."""

    analyzers: tuple
    storage_time: float = 0.0
    integration_time: float = 1.0
    prep: str = None

    def __post_init__(self):
        object.__setattr__(self, "analyzers", tuple(self.analyzers))
        for t in self.analyzers + ((self.prep,) if self.prep is not None else ()):
            if t not in qcore.KETS:
                raise ContractViolationError(f"unknown state token {t!r}")
        if not self.analyzers or len(self.analyzers) > 2:
            raise InvalidDimensionError("one or two analyzed qubits are supported")
        if not self.integration_time > 0:
            raise ValidationError(f"integration time must be positive, got {self.integration_time!r}")
        if self.storage_time < 0:
            raise ValidationError(f"storage time must be non-negative, got {self.storage_time!r}")

    @property
    def dim(self):
        return 2 ** len(self.analyzers)

    @property
    def projector(self):
        return qcore.token_projector(*self.analyzers)


@dataclass(frozen=True)
class CoincidenceRecord:
    setting: MeasurementSetting
    counts: float
    expected_rate: float = None

    def __post_init__(self):
        if not self.counts >= 0:
            raise ValidationError(f"counts must be non-negative, got {self.counts!r}")


@dataclass
class TomographyResult:
    estimate: np.ndarray
    log_likelihood: float
    kind: str
    n_iter: int = 0
    converged: bool = True
    method: str = "bfgs"
    history: list = field(default_factory=list)
    mc_samples: dict = field(default_factory=dict)
    uncertainties: dict = field(default_factory=dict)
    n_mc_failed: int = 0
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# settings and forward model
# ---------------------------------------------------------------------------

def state_settings(n_qubits, storage_time=0.0, integration_time=1.0):
    """All ``6**n_qubits`` analyzer combinations."""
    return [MeasurementSetting(combo, storage_time, integration_time)
            for combo in itertools.product(qcore.SIX_STATES, repeat=n_qubits)]


def process_settings(storage_time=0.0, integration_time=1.0):
    """Six inputs times six analyzers."""
    return [MeasurementSetting((a,), storage_time, integration_time, prep=p)
            for p in qcore.SIX_STATES for a in qcore.SIX_STATES]


def expected_counts(rho, setting, rate, accidental_rate=0.0):
    """Mean counts ``t * (rate * Tr(Pi rho) + accidental_rate)`` for one setting."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (setting.dim, setting.dim):
        raise InvalidDimensionError(
            f"state of shape {rho.shape} does not match {len(setting.analyzers)} analyzed qubit(s)")
    prob = max(float(np.trace(setting.projector @ rho).real), 0.0)
    return setting.integration_time * (rate * prob + accidental_rate)


def simulate_counts(expected, seed):
    """Poisson draw(s) with the given mean(s); ``seed`` is an int or a ``numpy`` Generator."""
    expected = np.asarray(expected, dtype=float)
    if np.any(expected < 0) or np.any(~np.isfinite(expected)):
        raise ValidationError("expected counts must be finite and non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = rng.poisson(expected)
    return int(out) if out.ndim == 0 else out


def simulate_state_records(rho, settings, rate, rng=None, accidental_rate=0.0):
    """Records for measuring ``rho``; noiseless (mean counts) when ``rng`` is None."""
    mean = np.array([expected_counts(rho, s, rate, accidental_rate) for s in settings])
    counts = mean if rng is None else simulate_counts(mean, rng)
    return [CoincidenceRecord(s, c, m / s.integration_time) for s, c, m in zip(settings, counts, mean)]


def simulate_process_records(chi, settings, rate, rng=None, accidental_rate=0.0):
    outputs = {p: qcore.apply_chi(chi, qcore.projector(qcore.ket(p))) for p in qcore.SIX_STATES}
    mean = np.array([expected_counts(outputs[s.prep], s, rate, accidental_rate) for s in settings])
    counts = mean if rng is None else simulate_counts(mean, rng)
    return [CoincidenceRecord(s, c, m / s.integration_time) for s, c, m in zip(settings, counts, mean)]


def _state_design(records, dim=None):
    if not records:
        raise ValidationError("no records")
    dims = {r.setting.dim for r in records}
    if len(dims) != 1:
        raise InvalidDimensionError(f"records mix analyzer counts: dimensions {sorted(dims)}")
    d = dims.pop()
    if dim is not None and dim != d:
        raise InvalidDimensionError(f"records describe dimension {d}, requested {dim}")
    if any(r.setting.prep is not None for r in records):
        raise ValidationError("process records passed to state tomography")
    E = np.stack([r.setting.projector for r in records])
    n = np.array([float(r.counts) for r in records])
    w = np.array([r.setting.integration_time for r in records])
    return E, n, w


def _process_design(records):
    if not records:
        raise ValidationError("no records")
    if any(r.setting.prep is None or r.setting.dim != 2 for r in records):
        raise ValidationError("process tomography needs single-qubit records with an input state")
    E = np.stack([np.kron(qcore.projector(qcore.ket(r.setting.prep)).T, r.setting.projector) for r in records])
    n = np.array([float(r.counts) for r in records])
    w = np.array([r.setting.integration_time for r in records])
    return E, n, w


def _hermitian_basis(d):
    basis = []
    for a in range(d):
        B = np.zeros((d, d), dtype=np.complex128)
        B[a, a] = 1
        basis.append(B)
    for a in range(d):
        for b in range(a + 1, d):
            B = np.zeros((d, d), dtype=np.complex128)
            B[a, b] = B[b, a] = 1
            basis.append(B)
            B = np.zeros((d, d), dtype=np.complex128)
            B[a, b], B[b, a] = -1j, 1j
            basis.append(B)
    return np.stack(basis)


def _least_squares(E, n, w):
    d = E.shape[1]
    basis = _hermitian_basis(d)
    A = w[:, None] * np.einsum("iab,kba->ik", E, basis).real
    if np.linalg.matrix_rank(A) < d * d:
        raise SingularDesignError(f"measurement design has rank {np.linalg.matrix_rank(A)} < {d * d}")
    coef = np.linalg.lstsq(A, n, rcond=None)[0]
    return np.einsum("k,kab->ab", coef, basis)


def linear_inversion_state(records):
    """Least-squares Born-rule inversion, normalized to unit trace but not forced positive."""
    M = _least_squares(*_state_design(records))
    tr = np.trace(M).real
    d = M.shape[0]
    return M / tr if tr > 0 else qcore.maximally_mixed(d)


def linear_inversion_process(records):
    """Least-squares process matrix, normalized to unit trace but not forced CPTP."""
    J = _least_squares(*_process_design(records))
    tr = np.trace(J).real
    chi = qcore.choi_to_chi(J) / (tr / 2.0) if tr > 0 else np.eye(4, dtype=np.complex128) / 4
    return 0.5 * (chi + chi.conj().T)


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------

def _start_factor(X0, trace):
    d = X0.shape[0]
    X = 0.98 * qcore.project_psd(X0, trace) + 0.02 * trace * qcore.maximally_mixed(d)
    return np.linalg.cholesky(X)


def _maximize(objective, theta0, label):
    try:
        res = bfgs_ascent(objective, theta0)
        if res.converged:
            return res
    except (ConvergenceError, ValueError):
        pass
    fallback = simplex_ascent(lambda th: objective(th)[0], theta0)
    if not fallback.converged:
        raise ConvergenceError(f"{label} maximum likelihood did not converge", best=fallback)
    return fallback


def _orthonormal_basis(d):
    basis = _hermitian_basis(d)
    return basis / np.sqrt(np.einsum("kab,kba->k", basis, basis).real)[:, None, None]


def _tp_basis():
    """Orthonormal Hermitian 4x4 basis of matrices whose output partial trace is a multiple of I."""
    basis = _orthonormal_basis(4)
    T = np.array([_ptrace_out(B) for B in basis])
    cons = np.stack([T[:, 0, 1].real, T[:, 0, 1].imag, (T[:, 0, 0] - T[:, 1, 1]).real])
    null = np.linalg.svd(cons)[2][3:]
    return np.einsum("jk,kab->jab", null, basis)


def _polish(E, n, w, M0, basis, ll0):
    """Newton refinement of ``M0`` in the linear coefficients of ``basis``.

    The likelihood is concave in ``M``, so an unconstrained maximizer that is
    positive semidefinite is also the constrained one. Returns the refined
    ``(M, ll)`` or ``None`` when the maximizer leaves the PSD cone.
    """
    A = w[:, None] * np.einsum("iab,kba->ik", E, basis).real
    x0 = np.einsum("kab,ba->k", basis, M0).real
    x, ll, ok = poisson_newton(A, n, x0)
    if not ok or not np.isfinite(ll) or ll < ll0 - 1e-12 * (1.0 + abs(ll0)):
        return None
    M = np.einsum("k,kab->ab", x, basis)
    M = 0.5 * (M + M.conj().T)
    tr = np.trace(M).real
    if not tr > 0 or np.linalg.eigvalsh(M)[0] < -C.PSD_TOL * tr:
        return None
    return qcore.project_psd(M, tr), max(ll, ll0)


def mle_state_tomography(records, dim=None):
    """Positive density matrix maximizing the Poisson likelihood of ``records``."""
    E, n, w = _state_design(records, dim)
    d = E.shape[1]
    if n.sum() <= 0:
        warnings.warn("all counts are zero; returning the maximally mixed state", RuntimeWarning, stacklevel=2)
        return TomographyResult(qcore.maximally_mixed(d), 0.0, "state", warnings=["zero-counts"])
    n_tot = n.sum()
    # Scale rates so that the factor entries are O(1).
    kappa = n_tot / np.sum(w * np.einsum("iaa->i", E).real / d)
    ws = kappa * w
    try:
        rho0 = linear_inversion_state(records)
    except SingularDesignError:
        rho0 = qcore.maximally_mixed(d)
    theta0 = K.cholesky_to_theta(_start_factor(rho0, 1.0))

    def objective(theta):
        ll, g = K.state_objective(theta, E, n, ws)
        return ll / n_tot, g / n_tot

    res = _maximize(objective, theta0, "state")
    L = K.theta_to_cholesky(res.x, d)
    M = L @ L.conj().T
    history = [h * n_tot for h in res.history]
    ll, method = history[-1], res.method
    polished = _polish(E, n, ws, M, _orthonormal_basis(d), ll)
    if polished is not None:
        M, ll = polished
        history.append(ll)
        method += "+newton"
    rho = M / np.trace(M).real
    rho = 0.5 * (rho + rho.conj().T)
    return TomographyResult(rho, ll, "state", res.n_iter, res.converged, method, history)


def _inv_sqrt_and_frechet(A):
    a, U = np.linalg.eigh(A)
    f = a ** -0.5
    diff = a[:, None] - a[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        F = (f[:, None] - f[None, :]) / diff
    close = np.abs(diff) <= 1e-12 * max(1.0, np.max(np.abs(a)))
    deriv = -0.5 * a ** -1.5
    F[close] = (0.5 * (deriv[:, None] + deriv[None, :]))[close]
    return (U * f) @ U.conj().T, U, F


def _ptrace_out(X):
    return np.einsum("ajbj->ab", X.reshape(2, 2, 2, 2))


class _ProcessObjective:
    """Profiled Poisson likelihood of a trace-preserving Choi matrix in Cholesky coordinates."""

    def __init__(self, E, n, w):
        self.E, self.n, self.w = E, n, w
        self.n_tot = n.sum()

    def choi(self, theta):
        L = K.theta_to_cholesky(theta, 4)
        M = L @ L.conj().T
        Cm, U, F = _inv_sqrt_and_frechet(_ptrace_out(M))
        B = np.kron(Cm, qcore.I2)
        return L, M, B, U, F, B @ M @ B

    def __call__(self, theta):
        L, M, B, U, F, J = self.choi(theta)
        q = np.einsum("iab,ba->i", self.E, J).real
        s = self.n_tot / np.sum(self.w * q)
        if not np.isfinite(s) or s <= 0:
            return -np.inf, np.zeros_like(theta)
        ll, G = K.born_poisson(self.E, self.n, self.w, s * J)
        if not np.isfinite(ll):
            return -np.inf, np.zeros_like(theta)
        GJ = s * G
        Kmat = M @ B @ GJ + GJ @ B @ M
        Kin = _ptrace_out(Kmat)
        H = U @ (F * (U.conj().T @ Kin @ U)) @ U.conj().T
        GM = B @ GJ @ B + np.kron(H, qcore.I2)
        GM = 0.5 * (GM + GM.conj().T)
        grad = K.cholesky_chain(L, GM)
        return ll / self.n_tot, grad / self.n_tot


def mle_process_tomography(records):
    """CPTP process matrix maximizing the joint Poisson likelihood of ``records``."""
    E, n, w = _process_design(records)
    if n.sum() <= 0:
        warnings.warn("all counts are zero; returning the fully depolarizing channel", RuntimeWarning, stacklevel=2)
        return TomographyResult(np.eye(4, dtype=np.complex128) / 4, 0.0, "process", warnings=["zero-counts"])
    objective = _ProcessObjective(E, n, w)
    try:
        chi0 = linear_inversion_process(records)
    except SingularDesignError:
        chi0 = np.eye(4, dtype=np.complex128) / 4
    theta0 = K.cholesky_to_theta(_start_factor(qcore.chi_to_choi(chi0), 2.0))
    res = _maximize(objective, theta0, "process")
    J = objective.choi(res.x)[-1]
    n_tot = objective.n_tot
    history = [h * n_tot for h in res.history]
    ll, method = history[-1], res.method
    # The polish works on the rate-scaled Choi matrix, so the profiled rate is a free coefficient.
    rate = n_tot / np.sum(w * np.einsum("iab,ba->i", E, J).real)
    polished = _polish(E, n, w, rate * J, _tp_basis(), ll)
    if polished is not None:
        M, ll = polished
        J = 2.0 * M / np.trace(M).real
        history.append(ll)
        method += "+newton"
    chi = qcore.choi_to_chi(J)
    chi = 0.5 * (chi + chi.conj().T)
    qcore.check_process_matrix(chi)
    return TomographyResult(chi, ll, "process", res.n_iter, res.converged, method, history)


# ---------------------------------------------------------------------------
# Monte Carlo uncertainty
# ---------------------------------------------------------------------------

@dataclass
class MonteCarloSummary:
    std: dict
    samples: dict
    n_failed: int
    n_resamples: int


def resample_records(records, rng):
    """Poisson resampling centred on the observed counts."""
    counts = rng.poisson(np.array([float(r.counts) for r in records]))
    return [replace(r, counts=int(c)) for r, c in zip(records, counts)]


def monte_carlo_uncertainty(records, n_resamples, pipeline, seed):
    """Standard deviation of each metric returned by ``pipeline(records) -> dict``.

    ``seed`` is an int or a ``SeedSequence``; resample ``k`` draws from the
    child with spawn key suffix ``k``, so results do not depend on evaluation
    order and a call never mutates the caller's sequence. Resamples on which the pipeline raises
    are skipped and counted in ``n_failed``.
    """
    if n_resamples < 2:
        raise ValidationError("need at least two Monte Carlo resamples")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = [np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (k,)) for k in range(n_resamples)]
    samples = {}
    failed = 0
    for child in children:
        rng = np.random.default_rng(child)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                metrics = pipeline(resample_records(records, rng))
        except PhononMemError:
            failed += 1
            continue
        for key, v in metrics.items():
            samples.setdefault(key, []).append(float(v))
    std = {k: float(np.std(v, ddof=1)) if len(v) >= 2 else float("nan") for k, v in samples.items()}
    return MonteCarloSummary(std, samples, failed, n_resamples)


def attach_uncertainty(result, summary):
    result.mc_samples = summary.samples
    result.uncertainties = summary.std
    result.n_mc_failed = summary.n_failed
    return result
