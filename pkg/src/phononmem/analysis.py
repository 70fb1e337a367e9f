"""Quantum-information figures of merit and the memory-lifetime fit."""

from dataclasses import dataclass

import numpy as np

from . import constants as C
from . import qcore
from ._optim import levenberg_marquardt
from .errors import ContractViolationError, InsufficientDataError, InvalidDimensionError


def state_fidelity(rho, sigma):
    """Squared (Jozsa) fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Reduces to ``<psi|sigma|psi>`` when ``rho = |psi><psi|``.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    sigma = np.asarray(sigma, dtype=np.complex128)
    if rho.shape != sigma.shape:
        raise InvalidDimensionError(f"fidelity between shapes {rho.shape} and {sigma.shape}")
    qcore.check_density_matrix(rho)
    qcore.check_density_matrix(sigma)
    # Singular values of sqrt(rho) sqrt(sigma) are the square roots of the
    # eigenvalues of sqrt(rho) sigma sqrt(rho), without the extra square root.
    sv = np.linalg.svd(qcore.psd_sqrt(rho) @ qcore.psd_sqrt(sigma), compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(max(f, 0.0), 1.0)


def process_fidelity(chi, chi_ideal=None):
    """Overlap ``Tr(chi chi_ideal)`` with a rank-1 (unitary) ideal process; identity by default."""
    chi = qcore.check_process_matrix(chi)
    ideal = qcore.IDENTITY_CHI if chi_ideal is None else qcore.check_process_matrix(chi_ideal)
    w = np.linalg.eigvalsh(ideal)
    if w[-2] > C.PSD_TOL:
        raise ContractViolationError("ideal process must be rank 1")
    return float(np.trace(chi @ ideal).real)


def average_fidelity(chi, chi_ideal=None):
    """Input-averaged state fidelity of a qubit channel, ``(2 F_proc + 1) / 3``."""
    return (2.0 * process_fidelity(chi, chi_ideal) + 1.0) / 3.0


SPIN_FLIP = np.kron(qcore.Y, qcore.Y)


def concurrence(rho):
    """Wootters concurrence of a two-qubit state (conjugation in the computational basis)."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise InvalidDimensionError(f"concurrence needs a 4x4 state, got {rho.shape}")
    qcore.check_density_matrix(rho)
    s = qcore.psd_sqrt(rho)
    # sqrt of the spin-flipped state; lambda_i are singular values of s @ s_tilde.
    s_tilde = SPIN_FLIP @ s.conj() @ SPIN_FLIP
    lam = np.linalg.svd(s @ s_tilde, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


# ---------------------------------------------------------------------------
# exponential decay fit
# ---------------------------------------------------------------------------

@dataclass
class DecayFit:
    a: float
    b: float
    tau_m: float
    residual_norm: float
    covariance: np.ndarray
    identifiable: bool = True
    n_points: int = 0

    @property
    def stderr(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def __call__(self, tau):
        return self.a + self.b * np.exp(-np.asarray(tau, dtype=float) / self.tau_m)

    def to_dict(self):
        se = self.stderr
        return {
            "a": self.a, "b": self.b, "tau_m": self.tau_m,
            "a_err": float(se[0]), "b_err": float(se[1]), "tau_m_err": float(se[2]),
            "residual_norm": self.residual_norm, "identifiable": self.identifiable,
            "n_points": self.n_points,
        }


def _prepare(tau, y, weights):
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(y, dtype=float)
    if tau.shape != y.shape or tau.ndim != 1:
        raise InsufficientDataError("tau and rate must be 1-D arrays of equal length")
    if tau.size < 3:
        raise InsufficientDataError(f"need at least 3 points for a 3-parameter fit, got {tau.size}")
    w = 1.0 / np.maximum(y, 1.0) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape or np.any(w < 0):
        raise InsufficientDataError("weights must be non-negative and match the data")
    return tau, y, w


def _linear_ab(tau, y, sw, tau_m):
    e = np.exp(-tau / tau_m)
    A = np.stack([sw, sw * e], axis=1)
    return np.linalg.lstsq(A, sw * y, rcond=None)[0]


def fit_exponential(tau, rate, weights=None):
    """Weighted least-squares fit of ``a + b exp(-tau / tau_m)``.

    Minimizes ``sum w (y - a - b e^{-tau/tau_m})^2`` by Levenberg-Marquardt in
    ``(a, b, log tau_m)`` from a log-spaced grid of lifetime starts. Weights
    default to ``1 / max(y, 1)``. The covariance is scaled by the reduced
    chi-square. ``identifiable`` is False when the decaying amplitude vanishes
    or the lifetime is unconstrained; ``tau_m`` is then meaningless.
    """
    tau, y, w = _prepare(tau, rate, weights)
    sw = np.sqrt(w)

    def residual(x):
        return sw * (x[0] + x[1] * np.exp(-tau * np.exp(-x[2])) - y)

    def jacobian(x):
        tm = np.exp(x[2])
        e = np.exp(-tau / tm)
        return np.stack([sw, sw * e, sw * x[1] * e * tau / tm], axis=1)

    best = None
    for tm0 in np.geomspace(C.FIT_TAU_MIN, C.FIT_TAU_MAX, C.FIT_N_STARTS):
        a0, b0 = _linear_ab(tau, y, sw, tm0)
        try:
            res = levenberg_marquardt(residual, jacobian, [a0, b0, np.log(tm0)],
                                      bounds_ok=lambda x: abs(x[2]) < 50)
        except Exception as exc:  # noqa: BLE001 - keep the best start
            res = getattr(exc, "best", None)
            if res is None:
                continue
        if best is None or res.cost < best.cost:
            best = res
    a, b, u = best.x
    tm = float(np.exp(u))
    e = np.exp(-tau / tm)
    J = np.stack([sw, sw * e, sw * b * e * tau / tm**2], axis=1)
    dof = tau.size - 3
    s2 = 2.0 * best.cost / dof if dof > 0 else 1.0
    JtJ = J.T @ J
    identifiable = True
    if np.linalg.cond(JtJ) > 1e14:
        cov = np.full((3, 3), np.inf)
        identifiable = False
    else:
        cov = s2 * np.linalg.inv(JtJ)
    if abs(b) <= 1e-8 * max(abs(a), abs(b), 1e-300):
        identifiable = False
    if identifiable and not np.sqrt(max(cov[2, 2], 0.0)) < tm:
        identifiable = False
    return DecayFit(float(a), float(b), tm, float(np.sqrt(2.0 * best.cost)), cov, identifiable, int(tau.size))


@dataclass
class MemoryRateFit:
    """Memory rates recovered from signal and noise-only retrieval curves."""

    S0: float
    Nc: float
    N0: float
    tau_m: float
    method: str
    signal_fit: DecayFit = None
    residual_norm: float = float("nan")

    def to_dict(self):
        out = {"S0": self.S0, "Nc": self.Nc, "N0": self.N0, "tau_m": self.tau_m,
               "method": self.method, "residual_norm": self.residual_norm}
        if self.signal_fit is not None:
            out["signal_fit"] = self.signal_fit.to_dict()
        return out


def fit_memory_rates(tau, signal_rate, noise_rate, signal_weights=None, noise_weights=None, method="sequential"):
    """Extract ``S0, Nc, N0, tau_m`` from detected signal and noise-only rate curves.

    Detected curves follow ``S0 e + (Nc + N0 e)/2`` and ``(Nc + N0 e)/2`` with
    ``e = exp(-tau / tau_m)``. ``method="sequential"`` fits the signal curve for
    the lifetime and then the noise curve at that lifetime; ``"joint"`` fits
    both curves together with one shared lifetime.
    """
    tau, ys, ws = _prepare(tau, signal_rate, signal_weights)
    _, yn, wn = _prepare(tau, noise_rate, noise_weights)
    sig = fit_exponential(tau, ys, ws)
    sn = np.sqrt(wn)
    a_n, b_n = _linear_ab(tau, yn, sn, sig.tau_m)
    if method == "sequential":
        r = np.concatenate([np.sqrt(ws) * (sig(tau) - ys), sn * (a_n + b_n * np.exp(-tau / sig.tau_m) - yn)])
        return MemoryRateFit(sig.b - b_n, 2 * a_n, 2 * b_n, sig.tau_m, method, sig, float(np.linalg.norm(r)))
    if method != "joint":
        raise ValueError(f"unknown fit method {method!r}")
    ss = np.sqrt(ws)

    def residual(x):
        S0, Nc, N0, u = x
        e = np.exp(-tau * np.exp(-u))
        noise = 0.5 * (Nc + N0 * e)
        return np.concatenate([ss * (S0 * e + noise - ys), sn * (noise - yn)])

    def jacobian(x):
        S0, Nc, N0, u = x
        tm = np.exp(u)
        e = np.exp(-tau / tm)
        de = e * tau / tm
        js = np.stack([ss * e, 0.5 * ss, 0.5 * ss * e, ss * (S0 + 0.5 * N0) * de], axis=1)
        jn = np.stack([0 * sn, 0.5 * sn, 0.5 * sn * e, sn * 0.5 * N0 * de], axis=1)
        return np.concatenate([js, jn])

    x0 = [sig.b - b_n, 2 * a_n, 2 * b_n, np.log(sig.tau_m)]
    res = levenberg_marquardt(residual, jacobian, x0, bounds_ok=lambda x: abs(x[3]) < 50)
    S0, Nc, N0, u = res.x
    return MemoryRateFit(float(S0), float(Nc), float(N0), float(np.exp(u)), method, sig,
                         float(np.sqrt(2 * res.cost)))
